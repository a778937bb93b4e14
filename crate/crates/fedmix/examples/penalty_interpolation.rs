//! The penalty weight interpolates between pure local models and one shared
//! global model. This example certifies the structural facts numerically on
//! a synthetic logistic instance: psi(x(lambda)) is non-increasing,
//! f(x(lambda)) is non-decreasing and capped by the shared-model loss, the
//! penalty obeys psi <= (f_inf - f_0)/lambda, and the average model's
//! gradient on the shared problem is bounded by (2L^2/lambda)(f_inf - f_0).

use fedmix::data::{build_problem, normalize_rows, parse_libsvm, split, SplitMode};
use fedmix::model::StackedModel;
use fedmix::synth::a1a_like_libsvm;
use fedmix::theory::{global_reference, monotonicity_curve, reference_solution};

fn main() -> fedmix::Result<()> {
    env_logger::init();
    let mut ds = parse_libsvm(a1a_like_libsvm(0).as_bytes())?;
    normalize_rows(&mut ds, 1.0)?;
    let partition = split(&ds, 5, SplitMode::Homogeneous, 0)?;
    let problem = build_problem(&ds, &partition, 1.0, 1e-4)?;

    let grid = [0.01, 0.1, 1.0, 10.0];
    // a relaxed tolerance keeps this demo quick; the acceptance suite runs
    // the full-accuracy version
    let curve = monotonicity_curve(&problem, &grid, Some(1e-7))?;
    println!("lambda      f(x(lambda))   psi(x(lambda))  bound lhs    bound rhs");
    for row in &curve.rows {
        println!(
            "{:<10} {:<14.8} {:<15.3e} {:<12.3e} {:<12.3e}",
            row.lambda, row.f_value, row.psi_value, row.bound_lhs, row.bound_rhs
        );
    }
    println!("f at pure-local models: {:.8}", curve.f_zero);
    println!("f at the shared model:  {:.8}", curve.f_infinity);
    println!("psi monotone violation: {:.1e}", curve.psi_monotonicity_violation());
    println!("f monotone violation:   {:.1e}", curve.f_monotonicity_violation());

    // distances to the two endpoints shrink/grow monotonically in lambda
    let local = reference_solution(&problem.with_lambda(0.0)?, Some(1e-7))?;
    let global = global_reference(&problem, Some(1e-7))?;
    let x_inf = StackedModel::replicate(problem.n(), &global.z_star)?;
    println!("\nlambda      |x(lambda)-x(0)|   |x(lambda)-x(inf)|");
    for &lambda in &grid {
        let r = reference_solution(&problem.with_lambda(lambda)?, Some(1e-7))?;
        println!(
            "{:<10} {:<18.6} {:<18.6}",
            lambda,
            r.x_star.dist_sq(&local.x_star).sqrt(),
            r.x_star.dist_sq(&x_inf).sqrt()
        );
    }
    Ok(())
}
