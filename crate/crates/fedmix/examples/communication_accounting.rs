//! Communication happens only when two consecutive coins differ: an upload
//! when a local phase ends, a download when an aggregation phase ends, and
//! one upload/download pair counts as one round. Over k iterations the
//! expected number of rounds is p(1-p)k, so both very small and very large
//! p communicate rarely. This example compares realized counts with the
//! formula across p values.

use fedmix::model::StackedModel;
use fedmix::rng::CoinStream;
use fedmix::solvers::{comm_rounds_expected, l2gd_run, SolverConfig, SolverVariant, TraceSpec};
use fedmix::synth::{quadratic_centers, quadratic_problem};

fn main() -> fedmix::Result<()> {
    env_logger::init();
    // the coin stream alone
    let k = 100_000;
    println!("p      expected p(1-p)k   realized rounds (3 seeds)");
    for p in [0.1, 0.5, 0.9] {
        let mut realized = Vec::new();
        for seed in 0..3u64 {
            let coins = CoinStream::new(seed, p)?;
            let mut prev = false;
            let mut rounds = 0usize;
            for xi in coins.take(k) {
                if xi && !prev {
                    rounds += 1;
                }
                prev = xi;
            }
            realized.push(rounds);
        }
        println!("{:<6} {:<18} {:?}", p, comm_rounds_expected(p, k), realized);
    }

    // the same accounting inside a solver run
    let centers = quadratic_centers(4, 2, 3);
    let problem = quadratic_problem(0.5, &centers)?;
    let config = SolverConfig::new(SolverVariant::L2gd, 0.05, 0.3, 20_000, 11);
    let out = l2gd_run(&StackedModel::zeros(4, 2), &problem, &config, TraceSpec::every(20_000))?;
    let last = out.trace.rows.last().unwrap();
    println!(
        "\nl2gd run: {} iterations, {} transitions, {} rounds (expected {:.0})",
        out.trace.coin_len,
        out.trace.transitions,
        last.comm_rounds,
        comm_rounds_expected(0.3, 20_000)
    );
    Ok(())
}
