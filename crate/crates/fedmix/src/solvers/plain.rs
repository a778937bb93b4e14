//! Loopless local SGD without variance reduction (`l2sgd_run`) and with
//! penalty-only control variates (`l2sgd2_run`). Both converge only to a
//! neighborhood of the optimum whose size scales with the stepsize and the
//! residual gradient variance; the penalty shift shrinks the neighborhood
//! somewhat but cannot remove the local-subsampling noise.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{block_average, StackedModel};
use crate::objective::MixtureProblem;
use crate::rng::device_rng;

use super::{check_start, warn_unequal_start, RunLoop, RunOutput, SolverConfig, StepOutcome, TraceSpec};

/// One iteration of plain loopless local SGD.
/// Local: `g_i = grad f_{i,j}(x_i) / (n(1-p))`. Aggregation:
/// `g_i = lambda (x_i - xbar) / (n p)`.
pub fn l2sgd_step(
    x: &mut StackedModel,
    problem: &MixtureProblem,
    alpha: f64,
    p: f64,
    outcome: StepOutcome<'_>,
) -> Result<()> {
    check_start(x, problem)?;
    let n = problem.n() as f64;
    match outcome {
        StepOutcome::Aggregate => {
            let coeff = alpha * problem.lambda() / (n * p);
            let avg = block_average(x);
            for i in 0..x.n() {
                for (v, a) in x.block_mut(i).iter_mut().zip(&avg) {
                    *v -= coeff * (*v - a);
                }
            }
        }
        StepOutcome::Local { js } => {
            if js.len() != x.n() {
                return Err(Error::DimensionMismatch { expected: x.n(), got: js.len() });
            }
            let c = 1.0 / (n * (1.0 - p));
            let mut buf = vec![0.0; x.d()];
            for i in 0..x.n() {
                let dev = problem.device(i);
                if js[i] >= dev.m() {
                    return Err(Error::IndexOutOfRange { index: js[i], len: dev.m() });
                }
                dev.component_grad_into(js[i], x.block(i), &mut buf);
                for (v, g) in x.block_mut(i).iter_mut().zip(&buf) {
                    *v -= alpha * (c * g);
                }
            }
        }
    }
    Ok(())
}

/// One iteration with penalty-only control variates.
/// Local: `g_i = grad f_{i,j}(x_i)/(n(1-p)) + Psi_i/n`. Aggregation:
/// `g_i = lambda (x_i - xbar)/(n p) - (1/p - 1) Psi_i/n`, then
/// `Psi_i <- lambda (x_i - xbar)` at the pre-step state.
pub fn l2sgd2_step(
    x: &mut StackedModel,
    shifts: &mut [Vec<f64>],
    problem: &MixtureProblem,
    alpha: f64,
    p: f64,
    outcome: StepOutcome<'_>,
) -> Result<()> {
    check_start(x, problem)?;
    let n = problem.n() as f64;
    let inv_n = 1.0 / n;
    match outcome {
        StepOutcome::Aggregate => {
            let lam_np = problem.lambda() / (n * p);
            let c_psi = (1.0 / p - 1.0) / n;
            let lambda = problem.lambda();
            let avg = block_average(x);
            for i in 0..x.n() {
                let psi_i = &mut shifts[i];
                let xi = x.block_mut(i);
                for k in 0..xi.len() {
                    let dev = xi[k] - avg[k];
                    let g = lam_np * dev - c_psi * psi_i[k];
                    xi[k] -= alpha * g;
                    psi_i[k] = lambda * dev;
                }
            }
        }
        StepOutcome::Local { js } => {
            if js.len() != x.n() {
                return Err(Error::DimensionMismatch { expected: x.n(), got: js.len() });
            }
            let c = 1.0 / (n * (1.0 - p));
            let mut buf = vec![0.0; x.d()];
            for i in 0..x.n() {
                let dev = problem.device(i);
                if js[i] >= dev.m() {
                    return Err(Error::IndexOutOfRange { index: js[i], len: dev.m() });
                }
                dev.component_grad_into(js[i], x.block(i), &mut buf);
                let psi_i = &shifts[i];
                let xi = x.block_mut(i);
                for k in 0..xi.len() {
                    xi[k] -= alpha * (c * buf[k] + psi_i[k] * inv_n);
                }
            }
        }
    }
    Ok(())
}

fn run_impl(
    x0: &StackedModel,
    problem: &MixtureProblem,
    config: &SolverConfig,
    spec: TraceSpec<'_>,
    with_shifts: bool,
) -> Result<RunOutput> {
    check_start(x0, problem)?;
    config.validate(problem)?;
    warn_unequal_start(x0);
    let m = problem
        .uniform_m()
        .ok_or_else(|| Error::invalid("devices", "unequal component counts"))?;
    let n = problem.n();
    let mut x = x0.clone();
    let mut shifts = vec![vec![0.0; x.d()]; n];
    let mut rngs: Vec<_> = (0..n).map(|i| device_rng(config.seed, i)).collect();
    let mut js = vec![0usize; n];

    let mut lp = RunLoop::new(problem, config, spec)?;
    lp.record(0, problem, &x)?;
    let mut iterations = config.max_iters;
    for k in 0..config.max_iters {
        let xi = lp.next_coin();
        let outcome = if xi {
            StepOutcome::Aggregate
        } else {
            for (i, rng) in rngs.iter_mut().enumerate() {
                js[i] = rng.gen_range(0..m);
            }
            lp.add_comps(n);
            StepOutcome::Local { js: &js }
        };
        if with_shifts {
            l2sgd2_step(&mut x, &mut shifts, problem, config.alpha, config.p, outcome)?;
        } else {
            l2sgd_step(&mut x, problem, config.alpha, config.p, outcome)?;
        }
        if lp.due(k + 1) && lp.record(k + 1, problem, &x)? {
            iterations = k + 1;
            break;
        }
    }
    let trace = lp.finish(iterations);
    Ok(RunOutput { x, trace, control: None })
}

/// Plain loopless local SGD.
pub fn l2sgd_run(
    x0: &StackedModel,
    problem: &MixtureProblem,
    config: &SolverConfig,
    spec: TraceSpec<'_>,
) -> Result<RunOutput> {
    run_impl(x0, problem, config, spec, false)
}

/// Loopless local SGD with penalty-only control variates.
pub fn l2sgd2_run(
    x0: &StackedModel,
    problem: &MixtureProblem,
    config: &SolverConfig,
    spec: TraceSpec<'_>,
) -> Result<RunOutput> {
    run_impl(x0, problem, config, spec, true)
}
