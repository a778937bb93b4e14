//! Loopless local SGD with full variance reduction.
//!
//! Each device keeps a gradient table `J_i` (one column per component) and a
//! penalty shift `Psi_i`. On a local step device i samples one component j
//! and moves along
//!
//! `g_i = (grad f_{i,j}(x_i) - J_i[:,j]) / (n(1-p)) + J_i 1/(n m) + Psi_i/n`,
//!
//! then stores the fresh gradient in column j. On an aggregation step the
//! master moves every block toward the average,
//!
//! `g_i = lambda(x_i - xbar)/(n p) - (1/p - 1) Psi_i / n + J_i 1/(n m)`,
//!
//! and re-anchors `Psi_i = lambda(x_i - xbar)` at the pre-step state. The
//! estimator is unbiased for any table content, and its variance vanishes at
//! the optimum once the control variates have converged, which is what buys
//! linear convergence to the exact solution.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{block_average, StackedModel};
use crate::objective::MixtureProblem;
use crate::rng::device_rng;

use super::control::ControlVariates;
use super::{check_start, warn_unequal_start, RunLoop, RunOutput, SolverConfig, StepOutcome, TraceSpec};

pub(crate) struct Coeffs {
    pub alpha: f64,
    pub c_local: f64,
    pub inv_den: f64,
    pub inv_n: f64,
    pub lam_np: f64,
    pub c_psi: f64,
    pub lambda: f64,
}

impl Coeffs {
    pub fn new(problem: &MixtureProblem, m: usize, alpha: f64, p: f64) -> Self {
        let n = problem.n() as f64;
        Coeffs {
            alpha,
            c_local: 1.0 / (n * (1.0 - p)),
            inv_den: 1.0 / ((problem.n() * m) as f64),
            inv_n: 1.0 / n,
            lam_np: problem.lambda() / (n * p),
            c_psi: (1.0 / p - 1.0) / n,
            lambda: problem.lambda(),
        }
    }
}

/// Shared aggregation update for the variance-reduced family: steps every
/// block toward the average and re-anchors the penalty shifts.
pub(crate) fn vr_aggregate(
    x: &mut StackedModel,
    cv: &mut ControlVariates,
    co: &Coeffs,
) {
    let avg = block_average(x);
    let d = x.d();
    for i in 0..x.n() {
        let drift = cv.tables[i].colsum();
        let psi_i = &mut cv.shifts[i];
        let xi = x.block_mut(i);
        for k in 0..d {
            let dev = xi[k] - avg[k];
            let g = co.lam_np * dev - co.c_psi * psi_i[k] + drift[k] * co.inv_den;
            xi[k] -= co.alpha * g;
            psi_i[k] = co.lambda * dev;
        }
    }
}

pub(crate) fn local_step_shared(
    x: &mut StackedModel,
    cv: &mut ControlVariates,
    problem: &MixtureProblem,
    co: &Coeffs,
    js: &[usize],
    grad_buf: &mut Vec<f64>,
) -> Result<()> {
    if js.len() != x.n() {
        return Err(Error::DimensionMismatch { expected: x.n(), got: js.len() });
    }
    let d = x.d();
    for i in 0..x.n() {
        let j = js[i];
        let dev = problem.device(i);
        if j >= dev.m() {
            return Err(Error::IndexOutOfRange { index: j, len: dev.m() });
        }
        dev.component_grad_into(j, x.block(i), grad_buf);
        {
            let table = &cv.tables[i];
            let col = table.col(j);
            let drift = table.colsum();
            let psi_i = &cv.shifts[i];
            let xi = x.block_mut(i);
            for k in 0..d {
                let g = co.c_local * (grad_buf[k] - col[k]) + drift[k] * co.inv_den + psi_i[k] * co.inv_n;
                xi[k] -= co.alpha * g;
            }
        }
        cv.tables[i].set_col(j, grad_buf);
    }
    Ok(())
}

/// One iteration with explicit randomness; useful for exact expectation
/// checks. Requires every device to hold the same component count.
pub fn l2sgd_plus_step(
    x: &mut StackedModel,
    cv: &mut ControlVariates,
    problem: &MixtureProblem,
    alpha: f64,
    p: f64,
    outcome: StepOutcome<'_>,
) -> Result<()> {
    check_start(x, problem)?;
    let m = problem
        .uniform_m()
        .ok_or_else(|| Error::invalid("devices", "unequal component counts"))?;
    let co = Coeffs::new(problem, m, alpha, p);
    match outcome {
        StepOutcome::Aggregate => {
            vr_aggregate(x, cv, &co);
            Ok(())
        }
        StepOutcome::Local { js } => {
            let mut buf = vec![0.0; x.d()];
            local_step_shared(x, cv, problem, &co, js, &mut buf)
        }
    }
}

/// Full run; returns the final control variates alongside the trace.
pub fn l2sgd_plus_run(
    x0: &StackedModel,
    problem: &MixtureProblem,
    config: &SolverConfig,
    spec: TraceSpec<'_>,
) -> Result<RunOutput> {
    check_start(x0, problem)?;
    config.validate(problem)?;
    warn_unequal_start(x0);
    let m = problem
        .uniform_m()
        .ok_or_else(|| Error::invalid("devices", "unequal component counts"))?;
    let n = problem.n();
    let co = Coeffs::new(problem, m, config.alpha, config.p);
    let mut x = x0.clone();
    let mut cv = ControlVariates::zeros(problem);
    let mut rngs: Vec<_> = (0..n).map(|i| device_rng(config.seed, i)).collect();
    let mut js = vec![0usize; n];
    let mut buf = vec![0.0; x.d()];

    let mut lp = RunLoop::new(problem, config, spec)?;
    lp.record(0, problem, &x)?;
    let mut iterations = config.max_iters;
    for k in 0..config.max_iters {
        let xi = lp.next_coin();
        if xi {
            vr_aggregate(&mut x, &mut cv, &co);
        } else {
            for (i, rng) in rngs.iter_mut().enumerate() {
                js[i] = rng.gen_range(0..m);
            }
            local_step_shared(&mut x, &mut cv, problem, &co, &js, &mut buf)?;
            lp.add_comps(n);
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
    use crate::solvers::SolverVariant;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_problem(lambda: f64) -> MixtureProblem {
        // n=2 devices, d=2, m=2 quadratic components with distinct centers
        let devices = vec![
            DeviceFiniteSum::new(
                2,
                vec![
                    LossComponent::Quadratic { center: vec![1.0, 0.0], scale: 1.0 },
                    LossComponent::Quadratic { center: vec![0.0, 1.0], scale: 2.0 },
                ],
                0.1,
            )
            .unwrap(),
            DeviceFiniteSum::new(
                2,
                vec![
                    LossComponent::Quadratic { center: vec![-1.0, 2.0], scale: 1.5 },
                    LossComponent::Quadratic { center: vec![2.0, -1.0], scale: 0.5 },
                ],
                0.1,
            )
            .unwrap(),
        ];
        MixtureProblem::new(lambda, devices).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, problem: &MixtureProblem) -> (StackedModel, ControlVariates) {
        let x = StackedModel::new(
            problem.n(),
            problem.d(),
            (0..problem.n() * problem.d()).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        )
        .unwrap();
        let mut cv = ControlVariates::zeros(problem);
        for i in 0..problem.n() {
            for j in 0..problem.device(i).m() {
                let col: Vec<f64> = (0..problem.d()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                cv.tables[i].set_col(j, &col);
            }
            for v in cv.shifts[i].iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        (x, cv)
    }

    /// Exact expectation of the update direction over all (coin, j) outcomes.
    fn expected_direction(
        problem: &MixtureProblem,
        x: &StackedModel,
        cv: &ControlVariates,
        alpha: f64,
        p: f64,
    ) -> StackedModel {
        let m = problem.uniform_m().unwrap();
        let n = problem.n();
        let mut acc = StackedModel::zeros(n, problem.d());
        let mut add_outcome = |outcome: StepOutcome<'_>, prob: f64| {
            let mut xs = x.clone();
            let mut cvs = cv.clone();
            l2sgd_plus_step(&mut xs, &mut cvs, problem, alpha, p, outcome).unwrap();
            // g = (x - x') / alpha
            for k in 0..xs.as_slice().len() {
                let g = (x.as_slice()[k] - xs.as_slice()[k]) / alpha;
                let flat = acc.block_mut(k / problem.d());
                flat[k % problem.d()] += prob * g;
            }
        };
        add_outcome(StepOutcome::Aggregate, p);
        // all m^n joint component choices
        let mut js = vec![0usize; n];
        loop {
            let prob = (1.0 - p) / (m as f64).powi(n as i32);
            add_outcome(StepOutcome::Local { js: &js }, prob);
            let mut carry = n;
            for i in (0..n).rev() {
                js[i] += 1;
                if js[i] < m {
                    carry = i;
                    break;
                }
                js[i] = 0;
            }
            if carry == n {
                break;
            }
        }
        acc
    }

    #[test]
    fn estimator_is_unbiased_for_any_control_variates() {
        let problem = toy_problem(0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let (x, cv) = random_state(&mut rng, &problem);
            let e = expected_direction(&problem, &x, &cv, 0.05, 0.3);
            let g = problem.grad_smooth(&x).unwrap();
            for k in 0..e.as_slice().len() {
                let a = e.as_slice()[k];
                let b = g.as_slice()[k];
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_update_at_converged_control_variates() {
        // with J columns holding the exact component gradients at the
        // solution and Psi holding lambda(x_i - xbar), every realizable
        // update direction vanishes
        let lambda = 0.7;
        let problem = toy_problem(lambda);
        // solve to high accuracy with plain gradient descent on the smooth objective
        let mut x = StackedModel::zeros(2, 2);
        for _ in 0..200_000 {
            let g = problem.grad_smooth(&x).unwrap();
            x.axpy(-0.5, &g);
        }
        let avg = block_average(&x);
        let mut cv = ControlVariates::zeros(&problem);
        for i in 0..2 {
            for j in 0..2 {
                let g = problem.device(i).component_grad(j, x.block(i)).unwrap();
                cv.tables[i].set_col(j, &g);
            }
            for (k, s) in cv.shifts[i].iter_mut().enumerate() {
                *s = lambda * (x.block(i)[k] - avg[k]);
            }
        }
        let alpha = 0.05;
        for outcome in [
            StepOutcome::Aggregate,
            StepOutcome::Local { js: &[0, 0] },
            StepOutcome::Local { js: &[0, 1] },
            StepOutcome::Local { js: &[1, 0] },
            StepOutcome::Local { js: &[1, 1] },
        ] {
            let mut xs = x.clone();
            let mut cvs = cv.clone();
            l2sgd_plus_step(&mut xs, &mut cvs, &problem, alpha, 0.4, outcome).unwrap();
            let moved = xs.dist_sq(&x).sqrt();
            assert!(moved <= 1e-10, "update moved by {moved}");
        }
    }

    #[test]
    fn run_is_deterministic() {
        let problem = toy_problem(0.5);
        let x0 = StackedModel::replicate(2, &[0.0, 0.0]).unwrap();
        let config = SolverConfig::new(SolverVariant::L2sgdPlus, 0.1, 0.25, 400, 9);
        let a = l2sgd_plus_run(&x0, &problem, &config, TraceSpec::every(50)).unwrap();
        let b = l2sgd_plus_run(&x0, &problem, &config, TraceSpec::every(50)).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.trace.to_csv(), b.trace.to_csv());
        assert_eq!(a.control.unwrap(), b.control.unwrap());
    }

    #[test]
    fn converges_linearly_on_a_toy_problem() {
        let problem = toy_problem(0.5);
        let x0 = StackedModel::replicate(2, &[0.0, 0.0]).unwrap();
        // theoretical stepsize
        let (l, mu) = crate::solvers::problem_constants(&problem);
        let m = 2.0;
        let p = 0.25;
        let alpha = 2.0 * ((1.0 - p) / (4.0 * l + mu * m)).min(p / (4.0 * problem.lambda() + mu));
        let config = SolverConfig::new(SolverVariant::L2sgdPlus, alpha, p, 60_000, 4);
        let out = l2sgd_plus_run(&x0, &problem, &config, TraceSpec::every(500)).unwrap();
        let g = problem.grad_smooth(&out.x).unwrap();
        assert!(g.norm() < 1e-8, "gradient norm {}", g.norm());
    }
}
