//! Variance-reduced local gradient descent: full-batch local steps with a
//! single gradient memory per device plus the penalty shift. Coincides with
//! the variance-reduced local SGD solver when every device has one
//! component.

use crate::error::Result;
use crate::model::StackedModel;
use crate::objective::MixtureProblem;

use super::control::ControlVariates;
use super::l2sgd_plus::{vr_aggregate, Coeffs};
use super::{check_start, warn_unequal_start, RunLoop, RunOutput, SolverConfig, TraceSpec};

fn local_step(
    x: &mut StackedModel,
    cv: &mut ControlVariates,
    problem: &MixtureProblem,
    co: &Coeffs,
    grad_buf: &mut Vec<f64>,
) {
    let d = x.d();
    for i in 0..x.n() {
        problem.device(i).local_grad_into(x.block(i), grad_buf);
        {
            let col = cv.tables[i].col(0);
            let psi_i = &cv.shifts[i];
            let xi = x.block_mut(i);
            for k in 0..d {
                let g = co.c_local * (grad_buf[k] - col[k]) + col[k] * co.inv_den + psi_i[k] * co.inv_n;
                xi[k] -= co.alpha * g;
            }
        }
        cv.tables[i].set_col(0, grad_buf);
    }
}

/// One iteration with an explicit coin. The memory `J_i` lives in column 0
/// of the device's table.
pub fn vr_local_gd_step(
    x: &mut StackedModel,
    cv: &mut ControlVariates,
    problem: &MixtureProblem,
    alpha: f64,
    p: f64,
    aggregate: bool,
) -> Result<()> {
    check_start(x, problem)?;
    let co = Coeffs::new(problem, 1, alpha, p);
    if aggregate {
        vr_aggregate(x, cv, &co);
    } else {
        let mut buf = vec![0.0; x.d()];
        local_step(x, cv, problem, &co, &mut buf);
    }
    Ok(())
}

pub fn vr_local_gd_run(
    x0: &StackedModel,
    problem: &MixtureProblem,
    config: &SolverConfig,
    spec: TraceSpec<'_>,
) -> Result<RunOutput> {
    check_start(x0, problem)?;
    config.validate(problem)?;
    warn_unequal_start(x0);
    let co = Coeffs::new(problem, 1, config.alpha, config.p);
    let mut x = x0.clone();
    let mut cv = ControlVariates::zeros_single_column(problem.n(), problem.d());
    let mut buf = vec![0.0; x.d()];
    let total = problem.total_components();

    let mut lp = RunLoop::new(problem, config, spec)?;
    lp.record(0, problem, &x)?;
    let mut iterations = config.max_iters;
    for k in 0..config.max_iters {
        let xi = lp.next_coin();
        if xi {
            vr_aggregate(&mut x, &mut cv, &co);
        } else {
            local_step(&mut x, &mut cv, problem, &co, &mut buf);
            lp.add_comps(total);
        }
        if lp.due(k + 1) && lp.record(k + 1, problem, &x)? {
            iterations = k + 1;
            break;
        }
    }
    let trace = lp.finish(iterations);
    Ok(RunOutput { x, trace, control: Some(cv) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{DeviceFiniteSum, LossComponent};
    use crate::model::block_average;
    use crate::solvers::{l2sgd_plus_run, SolverConfig, SolverVariant};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quad_problem(lambda: f64) -> MixtureProblem {
        let devices = vec![
            DeviceFiniteSum::new(2, vec![LossComponent::Quadratic { center: vec![1.0, -1.0], scale: 1.0 }], 0.0)
                .unwrap(),
            DeviceFiniteSum::new(2, vec![LossComponent::Quadratic { center: vec![-2.0, 0.5], scale: 2.0 }], 0.0)
                .unwrap(),
            DeviceFiniteSum::new(2, vec![LossComponent::Quadratic { center: vec![0.0, 3.0], scale: 0.5 }], 0.0)
                .unwrap(),
        ];
        MixtureProblem::new(lambda, devices).unwrap()
    }

    #[test]
    fn two_branch_expectation_matches_smooth_gradient() {
        let problem = quad_problem(0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (alpha, p) = (0.03, 0.35);
        for _ in 0..100 {
            let x = StackedModel::new(3, 2, (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
            let mut cv = ControlVariates::zeros_single_column(3, 2);
            for i in 0..3 {
                let col: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
                cv.tables[i].set_col(0, &col);
                for v in cv.shifts[i].iter_mut() {
                    *v = rng.gen_range(-1.0..1.0);
                }
            }
            let mut expectation = StackedModel::zeros(3, 2);
            for (aggregate, prob) in [(false, 1.0 - p), (true, p)] {
                let mut xs = x.clone();
                let mut cvs = cv.clone();
                vr_local_gd_step(&mut xs, &mut cvs, &problem, alpha, p, aggregate).unwrap();
                for i in 0..3 {
                    for k in 0..2 {
                        let g = (x.block(i)[k] - xs.block(i)[k]) / alpha;
                        expectation.block_mut(i)[k] += prob * g;
                    }
                }
            }
            let grad = problem.grad_smooth(&x).unwrap();
            for k in 0..6 {
                let a = expectation.as_slice()[k];
                let b = grad.as_slice()[k];
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn matches_variance_reduced_sgd_with_one_component() {
        // under a shared seed the trajectories coincide exactly
        let problem = quad_problem(0.8);
        let x0 = StackedModel::replicate(3, &[0.2, -0.2]).unwrap();
        let config_vr = SolverConfig::new(SolverVariant::VrLocalGd, 0.2, 0.3, 500, 77);
        let config_plus = SolverConfig::new(SolverVariant::L2sgdPlus, 0.2, 0.3, 500, 77);
        let a = vr_local_gd_run(&x0, &problem, &config_vr, TraceSpec::every(100)).unwrap();
        let b = l2sgd_plus_run(&x0, &problem, &config_plus, TraceSpec::every(100)).unwrap();
        let dev = a
            .x
            .as_slice()
            .iter()
            .zip(b.x.as_slice())
            .map(|(u, v)| (u - v).abs())
            .fold(0.0f64, f64::max);
        assert!(dev <= 1e-12, "max deviation {dev}");
    }

    #[test]
    fn fixed_point_gives_zero_update() {
        let lambda = 0.8;
        let problem = quad_problem(lambda);
        // solve accurately by full gradient descent
        let mut x = StackedModel::zeros(3, 2);
        for _ in 0..300_000 {
            let g = problem.grad_smooth(&x).unwrap();
            x.axpy(-1.0, &g);
        }
        let avg = block_average(&x);
        let mut cv = ControlVariates::zeros_single_column(3, 2);
        for i in 0..3 {
            let g = problem.device(i).local_grad(x.block(i));
            cv.tables[i].set_col(0, &g);
            for (k, s) in cv.shifts[i].iter_mut().enumerate() {
                *s = lambda * (x.block(i)[k] - avg[k]);
            }
        }
        for aggregate in [false, true] {
            let mut xs = x.clone();
            let mut cvs = cv.clone();
            vr_local_gd_step(&mut xs, &mut cvs, &problem, 0.2, 0.3, aggregate).unwrap();
            assert!(xs.dist_sq(&x).sqrt() <= 1e-10);
        }
    }
}
