//! Loopless local gradient descent: plain SGD on the 2-sum structure of the
//! mixture objective, sampling either the loss gradient (local step on every
//! device) or the penalty gradient (partial averaging by the master).

use crate::error::Result;
use crate::model::{block_average, grad_psi, StackedModel};
use crate::objective::MixtureProblem;

use super::{check_start, warn_unequal_start, RunLoop, RunOutput, SolverConfig, TraceSpec};

/// Expected number of communication rounds in k iterations, `p(1-p)k`.
pub fn comm_rounds_expected(p: f64, k: usize) -> f64 {
    p * (1.0 - p) * k as f64
}

/// The two-branch stochastic gradient: `grad f(x)/(1-p)` on a local step,
/// `lambda grad psi(x)/p` on an aggregation step. Unbiased for the smooth
/// gradient of the objective.
pub fn stochastic_gradient_l2gd(
    x: &StackedModel,
    problem: &MixtureProblem,
    p: f64,
    aggregate: bool,
) -> Result<StackedModel> {
    check_start(x, problem)?;
    let n = problem.n() as f64;
    let mut g = StackedModel::zeros(x.n(), x.d());
    if aggregate {
        let gp = grad_psi(x);
        let c = problem.lambda() / p;
        g.axpy(c, &gp);
    } else {
        let c = 1.0 / (n * (1.0 - p));
        let mut tmp = vec![0.0; x.d()];
        for i in 0..x.n() {
            problem.device(i).local_grad_into(x.block(i), &mut tmp);
            for (dst, v) in g.block_mut(i).iter_mut().zip(&tmp) {
                *dst += c * v;
            }
        }
    }
    Ok(g)
}

/// One iteration in place. Local branch: every device moves against its own
/// full gradient, scaled by `alpha/(n(1-p))`. Aggregation branch: every
/// block takes the convex-combination step
/// `x_i <- (1 - alpha lambda/(n p)) x_i + alpha lambda/(n p) mean(x)`,
/// which leaves the block average unchanged.
pub fn l2gd_step(
    x: &mut StackedModel,
    problem: &MixtureProblem,
    alpha: f64,
    p: f64,
    aggregate: bool,
) -> Result<()> {
    check_start(x, problem)?;
    let n = problem.n() as f64;
    if aggregate {
        let coeff = alpha * problem.lambda() / (n * p);
        let avg = block_average(x);
        for i in 0..x.n() {
            for (v, a) in x.block_mut(i).iter_mut().zip(&avg) {
                *v = (1.0 - coeff) * *v + coeff * a;
            }
        }
    } else {
        let c = alpha / (n * (1.0 - p));
        let mut tmp = vec![0.0; x.d()];
        for i in 0..x.n() {
            problem.device(i).local_grad_into(x.block(i), &mut tmp);
            for (v, g) in x.block_mut(i).iter_mut().zip(&tmp) {
                *v -= c * g;
            }
        }
    }
    Ok(())
}

/// Full run driven by the seeded coin stream.
pub fn l2gd_run(
    x0: &StackedModel,
    problem: &MixtureProblem,
    config: &SolverConfig,
    spec: TraceSpec<'_>,
) -> Result<RunOutput> {
    check_start(x0, problem)?;
    config.validate(problem)?;
    warn_unequal_start(x0);
    let mut x = x0.clone();
    let mut lp = RunLoop::new(problem, config, spec)?;
    lp.record(0, problem, &x)?;
    let total = problem.total_components();
    let mut iterations = config.max_iters;
    for k in 0..config.max_iters {
        let xi = lp.next_coin();
        l2gd_step(&mut x, problem, config.alpha, config.p, xi)?;
        if !xi {
            lp.add_comps(total);
        }
        if lp.due(k + 1) && lp.record(k + 1, problem, &x)? {
            iterations = k + 1;
            break;
        }
    }
    let trace = lp.finish(iterations);
    Ok(RunOutput { x, trace, control: None })
}
