//! Fully general variance-reduced local SGD: per-device component counts may
//! differ, only a random subset of devices participates in each local round,
//! active devices subsample arbitrary component subsets, the gradient table
//! follows either the SAGA rule (replace sampled columns) or the LSVRG rule
//! (refresh the whole table with a per-device coin), and every update passes
//! through the device's proximal operator.
//!
//! The estimator on a local round for an active device i is
//!
//! `g_i = sum_{j in S_i} (grad f_{i,j}(x_i) - J_i[:,j]) / (N(1-p) pg_i p_{i,j})
//!        + J_i 1 / N + Psi_i / n`,
//!
//! inactive devices keep only the control-variate drift `J_i 1/N + Psi_i/n`,
//! and the aggregation round applies the same averaged step as the
//! variance-reduced solvers with drift `J_i 1 / N`. Scalings use the total
//! component count `N = sum_i m_i`, which reduces to `1/(n m)` for equal
//! device sizes, so the equal-m solver is an exact special case.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::StackedModel;
use crate::objective::MixtureProblem;
use crate::rng::{device_rng, participation_rng, refresh_rng};

use super::control::ControlVariates;
use super::l2sgd_plus::{vr_aggregate, Coeffs};

use super::{check_start, JacobianRule, RunLoop, RunOutput, SolverConfig, TraceSpec};

/// Realized randomness of one iteration.
#[derive(Debug, Clone)]
pub enum PpOutcome<'a> {
    Aggregate,
    /// `active` lists participating devices ascending; `samples[t]` holds the
    /// component subset drawn by `active[t]`; `refreshes[t]` is that device's
    /// LSVRG table-refresh coin (ignored under the SAGA rule).
    Local {
        active: &'a [usize],
        samples: &'a [Vec<usize>],
        refreshes: &'a [bool],
    },
}

struct PpContext {
    co: Coeffs,
    /// Per-device local scaling `1/(N(1-p) pg_i p_{i,j})` (uniform in j).
    c_local: Vec<f64>,
    rule: JacobianRule,
}

impl PpContext {
    fn new(problem: &MixtureProblem, config: &SolverConfig) -> Self {
        let total = problem.total_components() as f64;
        let mut co = Coeffs::new(problem, 1, config.alpha, config.p);
        co.inv_den = 1.0 / total;
        let c_local = (0..problem.n())
            .map(|i| {
                let pg = config.participation.marginal(i);
                let pj = config.sampling.marginal(problem.device(i).m());
                1.0 / (total * (1.0 - config.p) * pg * pj)
            })
            .collect();
        PpContext { co, c_local, rule: config.jacobian_rule }
    }
}

fn apply(
    x: &mut StackedModel,
    cv: &mut ControlVariates,
    problem: &MixtureProblem,
    ctx: &PpContext,
    outcome: &PpOutcome<'_>,
) -> Result<usize> {
    let d = x.d();
    let alpha = ctx.co.alpha;
    let mut comps = 0usize;
    match outcome {
        PpOutcome::Aggregate => {
            vr_aggregate(x, cv, &ctx.co);
            for i in 0..x.n() {
                problem.regularizer(i).prox_in_place(alpha, x.block_mut(i));
            }
        }
        PpOutcome::Local { active, samples, refreshes: _ } => {
            if samples.len() != active.len() {
                return Err(Error::DimensionMismatch { expected: active.len(), got: samples.len() });
            }
            let mut slot = 0usize;
            let mut grads: Vec<Vec<f64>> = Vec::new();
            for i in 0..x.n() {
                let is_active = slot < active.len() && active[slot] == i;
                if is_active {
                    let sample = &samples[slot];
                    let dev = problem.device(i);
                    // component gradients at the pre-step state, kept for the
                    // table update
                    grads.clear();
                    for &j in sample.iter() {
                        if j >= dev.m() {
                            return Err(Error::IndexOutOfRange { index: j, len: dev.m() });
                        }
                        let mut g = vec![0.0; d];
                        dev.component_grad_into(j, x.block(i), &mut g);
                        grads.push(g);
                    }
                    comps += sample.len();
                    {
                        // summation order matches the equal-m solver so the
                        // full-participation reduction is bit-exact
                        let table = &cv.tables[i];
                        let drift = table.colsum();
                        let psi_i = &cv.shifts[i];
                        let c = ctx.c_local[i];
                        let xi = x.block_mut(i);
                        for k in 0..d {
                            let mut g = 0.0;
                            for (t, &j) in sample.iter().enumerate() {
                                g += c * (grads[t][k] - table.col(j)[k]);
                            }
                            g += drift[k] * ctx.co.inv_den;
                            g += psi_i[k] * ctx.co.inv_n;
                            xi[k] -= alpha * g;
                        }
                    }
                    problem.regularizer(i).prox_in_place(alpha, x.block_mut(i));
                    // table updates: SAGA replaces the sampled columns here;
                    // LSVRG refreshes are queued by the caller at the
                    // pre-step state and applied afterwards
                    if ctx.rule == JacobianRule::Saga {
                        for (t, &j) in sample.iter().enumerate() {
                            cv.tables[i].set_col(j, &grads[t]);
                        }
                    }
                    slot += 1;
                } else {
                    {
                        let drift = cv.tables[i].colsum();
                        let psi_i = &cv.shifts[i];
                        let xi = x.block_mut(i);
                        for k in 0..d {
                            let g = drift[k] * ctx.co.inv_den + psi_i[k] * ctx.co.inv_n;
                            xi[k] -= alpha * g;
                        }
                    }
                    problem.regularizer(i).prox_in_place(alpha, x.block_mut(i));
                }
            }
        }
    }
    Ok(comps)
}

/// One iteration with explicit randomness. Applies the proximal operator of
/// each device's regularizer after every gradient step. Returns the number
/// of component gradients evaluated.
pub fn l2sgdpp_step(
    x: &mut StackedModel,
    cv: &mut ControlVariates,
    problem: &MixtureProblem,
    config: &SolverConfig,
    outcome: PpOutcome<'_>,
) -> Result<usize> {
    check_start(x, problem)?;
    let ctx = PpContext::new(problem, config);
    apply_with_refresh(x, cv, problem, &ctx, &outcome)
}

/// Applies one iteration, performing LSVRG refreshes at the pre-step state.
fn apply_with_refresh(
    x: &mut StackedModel,
    cv: &mut ControlVariates,
    problem: &MixtureProblem,
    ctx: &PpContext,
    outcome: &PpOutcome<'_>,
) -> Result<usize> {
    let mut extra = 0usize;
    let mut pending: Vec<(usize, Vec<Vec<f64>>)> = Vec::new();
    if let (JacobianRule::Lsvrg, PpOutcome::Local { active, refreshes, .. }) = (ctx.rule, outcome) {
        if refreshes.len() != active.len() {
            return Err(Error::DimensionMismatch { expected: active.len(), got: refreshes.len() });
        }
        for (t, &i) in active.iter().enumerate() {
            if refreshes[t] {
                let dev = problem.device(i);
                let grads: Vec<Vec<f64>> = (0..dev.m())
                    .map(|j| {
                        let mut g = vec![0.0; x.d()];
                        dev.component_grad_into(j, x.block(i), &mut g);
                        g
                    })
                    .collect();
                extra += dev.m();
                pending.push((i, grads));
            }
        }
    }
    let comps = apply(x, cv, problem, ctx, outcome)?;
    for (i, grads) in pending {
        cv.tables[i].refresh_all(&grads);
    }
    Ok(comps + extra)
}

pub fn l2sgdpp_run(
    x0: &StackedModel,
    problem: &MixtureProblem,
    config: &SolverConfig,
    spec: TraceSpec<'_>,
) -> Result<RunOutput> {
    check_start(x0, problem)?;
    config.validate(problem)?;
    let ctx = PpContext::new(problem, config);
    let n = problem.n();
    let lsvrg_probs: Vec<f64> = match (&config.lsvrg_probs, config.jacobian_rule) {
        (Some(p), _) => p.clone(),
        (None, JacobianRule::Lsvrg) => {
            (0..n).map(|i| 1.0 / problem.device(i).m() as f64).collect()
        }
        (None, JacobianRule::Saga) => vec![0.0; n],
    };
    let mut x = x0.clone();
    let mut cv = ControlVariates::zeros(problem);
    let mut part_rng = participation_rng(config.seed);
    let mut dev_rngs: Vec<_> = (0..n).map(|i| device_rng(config.seed, i)).collect();
    let mut ref_rngs: Vec<_> = (0..n).map(|i| refresh_rng(config.seed, i)).collect();

    let mut lp = RunLoop::new(problem, config, spec)?;
    lp.record(0, problem, &x)?;
    let mut iterations = config.max_iters;
    for k in 0..config.max_iters {
        let xi = lp.next_coin();
        let comps = if xi {
            apply_with_refresh(&mut x, &mut cv, problem, &ctx, &PpOutcome::Aggregate)?
        } else {
            let active = config.participation.draw(n, &mut part_rng);
            let mut samples = Vec::with_capacity(active.len());
            let mut refreshes = Vec::with_capacity(active.len());
            for &i in &active {
                samples.push(config.sampling.draw(problem.device(i).m(), &mut dev_rngs[i]));
                if config.jacobian_rule == JacobianRule::Lsvrg {
                    refreshes.push(ref_rngs[i].gen::<f64>() < lsvrg_probs[i]);
                } else {
                    refreshes.push(false);
                }
            }
            apply_with_refresh(
                &mut x,
                &mut cv,
                problem,
                &ctx,
                &PpOutcome::Local { active: &active, samples: &samples, refreshes: &refreshes },
            )?
        };
        lp.add_comps(comps);
        if lp.due(k + 1) && lp.record(k + 1, problem, &x)? {
            iterations = k + 1;
            break;
        }
    }
    let trace = lp.finish(iterations);
    Ok(RunOutput { x, trace, control: Some(cv) })
}
