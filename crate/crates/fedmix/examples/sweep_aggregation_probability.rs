//! How often should devices communicate? Sweeping the aggregation
//! probability shows that communication rounds to a fixed accuracy are
//! minimized near the theoretical optimum
//! `p* = (4 lambda + mu)/(4 lambda + 4L + (m+1) mu)`, and that
//! communicating *more* often than p* actually hurts.

use std::fs;

use fedmix::harness::{sweep_p, ExperimentConfig};
use fedmix::plot::{render_svg, CsvTable, PlotSpec};
use fedmix::solvers::problem_constants;
use fedmix::theory::l2sgd_plus_rates;

fn main() -> fedmix::Result<()> {
    env_logger::init();
    let mut cfg = ExperimentConfig::default();
    cfg.solver.lambda = 0.1;
    cfg.solver.variant = "l2sgd+".into();
    cfg.solver.max_iters = 3_000_000;
    cfg.run.target_rel_subopt = 1e-5;
    cfg.sweep.p_grid = vec![0.02, 0.05, 0.09, 0.2, 0.4, 0.6, 0.8];

    let prepared = fedmix::harness::prepare(&cfg)?;
    let (l, mu) = problem_constants(&prepared.problem);
    let m = prepared.problem.uniform_m().unwrap();
    let p_star = l2sgd_plus_rates(l, mu, 0.1, m, 0.5, 1e-5, prepared.problem.n())?
        .p_star
        .unwrap();
    println!("predicted p* = {p_star:.4} (L = {l:.3}, mu = {mu:.1e}, m = {m})");

    let csv = sweep_p(&cfg)?;
    print!("{csv}");
    fs::write("sweep_p.csv", &csv)?;
    let table = CsvTable::parse(&csv)?;
    let spec = PlotSpec {
        x_column: "p".into(),
        y_column: "comm_rounds_to_target".into(),
        log_y: false,
        title: "communication rounds to 1e-5 vs aggregation probability".into(),
    };
    fs::write("sweep_p.svg", render_svg(&[("l2sgd+".into(), table)], &spec)?)?;
    println!("chart written to sweep_p.svg");
    Ok(())
}
