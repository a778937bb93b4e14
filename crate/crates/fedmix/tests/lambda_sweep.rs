//! The penalty threshold in action: for a fixed aggregation probability the
//! rate is governed by max(local term, lambda term), and the lambda term
//! only takes over above `lambda* = L p/(1-p)`. Sweeping lambda at p = 0.1
//! must therefore cost about the same below the threshold and noticeably
//! more an order of magnitude above it. Also checks that the distance from
//! x(lambda) to the shared-model solution shrinks as lambda grows.

use fedmix::harness::{sweep_lambda, ExperimentConfig};
use fedmix::theory::lambda_threshold;

#[test]
fn lambda_threshold_governs_the_data_pass_cost() {
    let p = 0.1;
    let lambda_star = lambda_threshold(1.0, p).unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.data.source = "synthetic-a1a".into();
    // a larger ridge keeps the reference solves quick; the threshold
    // structure only needs L and p
    cfg.data.mu = 1e-3;
    cfg.solver.p = p;
    cfg.solver.seed = 2;
    cfg.solver.max_iters = 3_000_000;
    cfg.run.target_rel_subopt = 1e-3;
    cfg.run.reference_tol = 1e-8;
    cfg.run.cache_dir = String::new();
    cfg.sweep.lambda_grid = vec![lambda_star / 10.0, lambda_star / 2.0, lambda_star, 10.0 * lambda_star];

    let out = sweep_lambda(&cfg).unwrap();
    let rows: Vec<Vec<f64>> = out
        .sweep_csv
        .lines()
        .skip(1)
        .map(|l| {
            l.split(',')
                .map(|f| if f.is_empty() { f64::NAN } else { f.parse().unwrap() })
                .collect()
        })
        .collect();
    assert_eq!(rows.len(), 4);
    let passes: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    assert!(passes.iter().all(|v| v.is_finite()), "every run must reach the target: {passes:?}");
    let at_star = passes[2];
    // below the threshold the cost is comparable to the threshold run
    assert!(
        passes[0] <= 1.5 * at_star && passes[1] <= 1.5 * at_star,
        "below-threshold runs should cost within 1.5x of the threshold run: {passes:?}"
    );
    // an order of magnitude above it, the lambda term dominates the rate
    assert!(
        passes[3] >= 2.0 * at_star,
        "above-threshold run should be noticeably slower: {passes:?}"
    );

    // distance to the shared-model solution is decreasing in lambda
    let dist_global: Vec<f64> = rows.iter().map(|r| r[4]).collect();
    for w in dist_global.windows(2) {
        assert!(w[1] < w[0], "distance to the shared model must shrink: {dist_global:?}");
    }
    println!(
        "lambda sweep at p = {p}: data passes {passes:?}, lambda* = {lambda_star:.4}, distances {dist_global:?}"
    );
}
