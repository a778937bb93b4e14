//! Command-line front end for the experiment harness.
//!
//! Subcommands: `run`, `sweep-p`, `sweep-lambda`, `split`, `reference`,
//! `plot`, `config`. Exit codes: 0 on success, 2 on configuration errors,
//! 3 on numeric failures.

use std::fs;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fedmix::data::{parse_libsvm, split, SplitMode};
use fedmix::error::{Error, Result};
use fedmix::harness::{
    self, cached_reference, prepare, reference_to_text, run_experiment, ExperimentConfig,
};
use fedmix::plot::{render_svg, CsvTable, PlotSpec};

#[derive(Parser)]
#[command(name = "fedmix", about = "Personalized federated learning simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Experiment config (TOML). Omitted fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for the run (mandatory; overrides the config file).
    #[arg(long)]
    seed: u64,
    /// Override the dataset source (path, synthetic-a1a, synthetic-quadratic).
    #[arg(long)]
    data: Option<String>,
    /// Override the solver variant.
    #[arg(long)]
    variant: Option<String>,
    /// Override the penalty weight lambda.
    #[arg(long)]
    lambda: Option<f64>,
    /// Override the aggregation probability p.
    #[arg(long)]
    p: Option<f64>,
    /// Override the stepsize ("theory" or a number).
    #[arg(long)]
    alpha: Option<String>,
    /// Override the iteration budget.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Override the device count.
    #[arg(long)]
    devices: Option<usize>,
    /// Override the split mode (homogeneous | heterogeneous).
    #[arg(long)]
    split: Option<String>,
    /// Override the target relative suboptimality.
    #[arg(long)]
    target: Option<f64>,
}

impl ConfigArgs {
    fn build(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.solver.seed = self.seed;
        if let Some(v) = &self.data {
            cfg.data.source = v.clone();
        }
        if let Some(v) = &self.variant {
            cfg.solver.variant = v.clone();
        }
        if let Some(v) = self.lambda {
            cfg.solver.lambda = v;
        }
        if let Some(v) = self.p {
            cfg.solver.p = v;
        }
        if let Some(v) = &self.alpha {
            cfg.solver.alpha = match v.parse::<f64>() {
                Ok(x) => harness::Alpha::Value(x),
                Err(_) => harness::Alpha::Named(v.clone()),
            };
        }
        if let Some(v) = self.max_iters {
            cfg.solver.max_iters = v;
        }
        if let Some(v) = self.devices {
            cfg.data.devices = v;
        }
        if let Some(v) = &self.split {
            cfg.data.split = v.parse()?;
        }
        if let Some(v) = self.target {
            cfg.run.target_rel_subopt = v;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver configuration; writes a trace CSV and prints a summary.
    Run {
        #[command(flatten)]
        args: ConfigArgs,
        /// Trace CSV output path.
        #[arg(short, long, default_value = "trace.csv")]
        output: PathBuf,
    },
    /// Sweep the aggregation probability over sweep.p_grid.
    SweepP {
        #[command(flatten)]
        args: ConfigArgs,
        /// Comma-separated grid overriding sweep.p_grid.
        #[arg(long)]
        grid: Option<String>,
        #[arg(short, long, default_value = "sweep_p.csv")]
        output: PathBuf,
    },
    /// Sweep the penalty weight over sweep.lambda_grid.
    SweepLambda {
        #[command(flatten)]
        args: ConfigArgs,
        /// Comma-separated grid overriding sweep.lambda_grid.
        #[arg(long)]
        grid: Option<String>,
        #[arg(short, long, default_value = "sweep_lambda.csv")]
        output: PathBuf,
        /// Output path for the certification curve table.
        #[arg(long, default_value = "lambda_curve.csv")]
        curve: PathBuf,
    },
    /// Partition a LibSVM dataset and write a device manifest.
    Split {
        /// LibSVM file path.
        #[arg(long)]
        data: PathBuf,
        /// Device count.
        #[arg(long)]
        devices: usize,
        /// homogeneous | heterogeneous.
        #[arg(long, default_value = "homogeneous")]
        mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Manifest output path (lines "device<TAB>row").
        #[arg(short, long, default_value = "manifest.tsv")]
        output: PathBuf,
    },
    /// Solve the reference problem and write x(lambda) as a text matrix.
    Reference {
        #[command(flatten)]
        args: ConfigArgs,
        #[arg(short, long, default_value = "reference.txt")]
        output: PathBuf,
    },
    /// Render trace CSVs as a deterministic SVG chart.
    Plot {
        /// Input CSV paths.
        inputs: Vec<PathBuf>,
        #[arg(short, long, default_value = "plot.svg")]
        output: PathBuf,
        /// Column for the x axis.
        #[arg(long, default_value = "k")]
        x: String,
        /// Column for the y axis (log scale unless --linear).
        #[arg(long, default_value = "rel_subopt")]
        y: String,
        /// Use a linear y axis.
        #[arg(long)]
        linear: bool,
        #[arg(long, default_value = "")]
        title: String,
    },
    /// Config helpers.
    Config {
        /// Print the default experiment config as TOML.
        #[arg(long)]
        print_defaults: bool,
    },
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad grid entry `{t}`")))
        })
        .collect()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { args, output } => {
            let cfg = args.build()?;
            let result = run_experiment(&cfg)?;
            fs::write(&output, &result.csv)?;
            println!("{}", result.summary);
            println!("trace written to {}", output.display());
            Ok(())
        }
        Command::SweepP { args, grid, output } => {
            let mut cfg = args.build()?;
            if let Some(g) = grid {
                cfg.sweep.p_grid = parse_grid(&g)?;
            }
            let csv = harness::sweep_p(&cfg)?;
            fs::write(&output, &csv)?;
            println!("sweep written to {}", output.display());
            Ok(())
        }
        Command::SweepLambda { args, grid, output, curve } => {
            let mut cfg = args.build()?;
            if let Some(g) = grid {
                cfg.sweep.lambda_grid = parse_grid(&g)?;
            }
            let out = harness::sweep_lambda(&cfg)?;
            fs::write(&output, &out.sweep_csv)?;
            fs::write(&curve, &out.curve_csv)?;
            println!("sweep written to {}, curve to {}", output.display(), curve.display());
            Ok(())
        }
        Command::Split { data, devices, mode, seed, output } => {
            let file = fs::File::open(&data)?;
            let ds = parse_libsvm(BufReader::new(file))?;
            let mode: SplitMode = mode.parse()?;
            let partition = split(&ds, devices, mode, seed)?;
            fs::write(&output, partition.manifest())?;
            println!(
                "{} rows over {} devices (m = {}, dropped {}); manifest in {}",
                ds.len(),
                devices,
                partition.m,
                partition.dropped,
                output.display()
            );
            Ok(())
        }
        Command::Reference { args, output } => {
            let cfg = args.build()?;
            let prepared = prepare(&cfg)?;
            let reference = cached_reference(&prepared, &cfg, cfg.solver.lambda)?;
            fs::write(&output, reference_to_text(&reference))?;
            println!(
                "reference at lambda {} solved in {} iterations (grad {:.3e}); written to {}",
                reference.lambda,
                reference.iterations_used,
                reference.grad_norm,
                output.display()
            );
            Ok(())
        }
        Command::Plot { inputs, output, x, y, linear, title } => {
            if inputs.is_empty() {
                return Err(Error::Config("plot needs at least one CSV".into()));
            }
            let mut tables = Vec::new();
            for path in &inputs {
                let text = fs::read_to_string(path)?;
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string());
                tables.push((name, CsvTable::parse(&text)?));
            }
            let spec = PlotSpec { x_column: x, y_column: y, log_y: !linear, title };
            let svg = render_svg(&tables, &spec)?;
            fs::write(&output, svg)?;
            println!("plot written to {}", output.display());
            Ok(())
        }
        Command::Config { print_defaults } => {
            if print_defaults {
                print!("{}", ExperimentConfig::default().to_toml());
            } else {
                println!("use --print-defaults to print the default experiment config");
            }
            Ok(())
        }
    }
}
