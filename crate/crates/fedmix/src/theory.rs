//! Reference solutions and numeric certification of the structural results:
//! penalty/loss monotonicity in lambda, the stationarity characterization of
//! optimal local models, the O(1/lambda) approach to the shared global
//! model, and the stepsize/iteration/communication formulas of the solver
//! family.

use log::warn;

use crate::error::{Error, Result};
use crate::model::{block_average, psi, StackedModel};
use crate::objective::MixtureProblem;
use crate::solvers::{problem_constants, JacobianRule, SolverConfig, SolverVariant};

/// Default iteration cap for the reference solvers.
pub const DEFAULT_ITERATION_CAP: usize = 10_000_000;

/// High-accuracy minimizer of the mixture objective at one lambda, computed
/// by deterministic full-gradient descent.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub lambda: f64,
    pub x_star: StackedModel,
    pub x_bar: Vec<f64>,
    /// F(x(lambda)).
    pub f_star: f64,
    /// Achieved gradient norm at the returned iterate.
    pub grad_norm: f64,
    pub iterations_used: usize,
}

/// Minimizer of the shared-model problem `P(z) = (1/n) sum_i f_i(z)`, the
/// lambda -> infinity limit.
#[derive(Debug, Clone)]
pub struct GlobalReference {
    pub z_star: Vec<f64>,
    /// P(z*) = f(x(inf)).
    pub f_value: f64,
    pub grad_norm: f64,
    pub iterations_used: usize,
}

fn require_strong_convexity(problem: &MixtureProblem) -> Result<f64> {
    let (_, mu) = problem_constants(problem);
    if !(mu > 0.0) {
        return Err(Error::invalid("mu", "reference solver needs a strongly convex problem"));
    }
    Ok(mu)
}

fn require_no_regularizers(problem: &MixtureProblem) -> Result<()> {
    if problem.has_regularizers() {
        return Err(Error::invalid("regularizers", "reference solver handles smooth objectives only"));
    }
    Ok(())
}

/// Full gradient descent on `f + lambda psi` with stepsize `n/(L+lambda)`,
/// stopped when the stacked gradient norm falls to `tol`. `tol = None` uses
/// `1e-10 * max(1, ||grad F(x0)||)`.
pub fn reference_solution(problem: &MixtureProblem, tol: Option<f64>) -> Result<ReferenceSolution> {
    let x0 = StackedModel::zeros(problem.n(), problem.d());
    reference_solution_from(problem, &x0, tol, DEFAULT_ITERATION_CAP)
}

pub fn reference_solution_from(
    problem: &MixtureProblem,
    x0: &StackedModel,
    tol: Option<f64>,
    cap: usize,
) -> Result<ReferenceSolution> {
    require_strong_convexity(problem)?;
    require_no_regularizers(problem)?;
    let (l, _) = problem_constants(problem);
    let lambda = problem.lambda();
    let n = problem.n();
    let d = problem.d();
    let nf = n as f64;
    let step = nf / (l + lambda);

    let mut x = x0.clone();
    let mut grad = vec![0.0; n * d];
    let mut avg = vec![0.0; d];
    let mut tmp = vec![0.0; d];
    let mut grad_norm = 0.0;
    let mut tol_abs = tol.unwrap_or(0.0);
    let mut iterations = 0usize;
    for it in 0..=cap {
        avg.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            for (a, v) in avg.iter_mut().zip(x.block(i)) {
                *a += v;
            }
        }
        avg.iter_mut().for_each(|v| *v /= nf);
        let mut norm_sq = 0.0;
        for i in 0..n {
            problem.device(i).local_grad_into(x.block(i), &mut tmp);
            let xi = x.block(i);
            let gi = &mut grad[i * d..(i + 1) * d];
            for k in 0..d {
                let g = tmp[k] / nf + lambda * (xi[k] - avg[k]) / nf;
                gi[k] = g;
                norm_sq += g * g;
            }
        }
        grad_norm = norm_sq.sqrt();
        if it == 0 && tol.is_none() {
            tol_abs = 1e-10 * grad_norm.max(1.0);
        }
        if grad_norm <= tol_abs {
            iterations = it;
            break;
        }
        if it == cap {
            return Err(Error::IterationCap(cap));
        }
        for i in 0..n {
            let gi = &grad[i * d..(i + 1) * d];
            let xi = x.block_mut(i);
            for k in 0..d {
                xi[k] -= step * gi[k];
            }
        }
        iterations = it + 1;
    }
    let x_bar = block_average(&x);
    let f_star = problem.objective_value(&x)?;
    Ok(ReferenceSolution { lambda, x_star: x, x_bar, f_star, grad_norm, iterations_used: iterations })
}

/// Gradient descent on the shared-model loss, `min_z (1/n) sum f_i(z)`.
pub fn global_reference(problem: &MixtureProblem, tol: Option<f64>) -> Result<GlobalReference> {
    require_strong_convexity(problem)?;
    require_no_regularizers(problem)?;
    let n = problem.n();
    let d = problem.d();
    let nf = n as f64;
    // P is (1/n) sum f_i, so its smoothness is the average of device bounds
    let l_p: f64 = problem
        .devices()
        .iter()
        .map(|dev| dev.smoothness_profile().local)
        .sum::<f64>()
        / nf;
    let step = 1.0 / l_p;
    let mut z = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut tmp = vec![0.0; d];
    let mut tol_abs = tol.unwrap_or(0.0);
    let mut grad_norm = 0.0;
    let mut iterations = 0usize;
    for it in 0..=DEFAULT_ITERATION_CAP {
        g.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            problem.device(i).local_grad_into(&z, &mut tmp);
            for (a, v) in g.iter_mut().zip(&tmp) {
                *a += v / nf;
            }
        }
        grad_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if it == 0 && tol.is_none() {
            tol_abs = 1e-10 * grad_norm.max(1.0);
        }
        if grad_norm <= tol_abs {
            iterations = it;
            break;
        }
        if it == DEFAULT_ITERATION_CAP {
            return Err(Error::IterationCap(DEFAULT_ITERATION_CAP));
        }
        for (v, gv) in z.iter_mut().zip(&g) {
            *v -= step * gv;
        }
        iterations = it + 1;
    }
    let f_value: f64 = problem.devices().iter().map(|dev| dev.local_value(&z)).sum::<f64>() / nf;
    Ok(GlobalReference { z_star: z, f_value, grad_norm, iterations_used: iterations })
}

/// Per-device minimizers, the lambda = 0 limit: `f(x(0)) = (1/n) sum_i min f_i`.
pub fn local_reference_value(problem: &MixtureProblem, tol: Option<f64>) -> Result<f64> {
    require_strong_convexity(problem)?;
    require_no_regularizers(problem)?;
    let nf = problem.n() as f64;
    let mut total = 0.0;
    for dev in problem.devices() {
        let prof = dev.smoothness_profile();
        let step = 1.0 / prof.local;
        let mut z = vec![0.0; dev.d()];
        let mut g = vec![0.0; dev.d()];
        let mut tol_abs = tol.unwrap_or(0.0);
        for it in 0..=DEFAULT_ITERATION_CAP {
            dev.local_grad_into(&z, &mut g);
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if it == 0 && tol.is_none() {
                tol_abs = 1e-10 * gn.max(1.0);
            }
            if gn <= tol_abs {
                break;
            }
            if it == DEFAULT_ITERATION_CAP {
                return Err(Error::IterationCap(DEFAULT_ITERATION_CAP));
            }
            for (v, gv) in z.iter_mut().zip(&g) {
                *v -= step * gv;
            }
        }
        total += dev.local_value(&z);
    }
    Ok(total / nf)
}

/// Residuals certifying the first-order characterization of the optimal
/// local models: each equals the average model minus its own gradient
/// scaled by 1/lambda, the device gradients sum to zero, and the penalty
/// equals the gradient-norm identity.
#[derive(Debug, Clone)]
pub struct StationarityReport {
    /// `max_i || x_i - xbar + grad f_i(x_i)/lambda ||`.
    pub step_residual: f64,
    /// `|| sum_i grad f_i(x_i) ||`.
    pub grad_sum_norm: f64,
    /// `| psi(x) - (1/(2 n lambda^2)) sum_i ||grad f_i(x_i)||^2 |`.
    pub psi_identity_gap: f64,
}

impl StationarityReport {
    pub fn max_residual(&self) -> f64 {
        self.step_residual.max(self.grad_sum_norm).max(self.psi_identity_gap)
    }
}

pub fn check_stationarity(
    problem: &MixtureProblem,
    reference: &ReferenceSolution,
) -> Result<StationarityReport> {
    let lambda = reference.lambda;
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda", "stationarity characterization needs lambda > 0"));
    }
    let n = problem.n();
    let d = problem.d();
    let x = &reference.x_star;
    let xbar = &reference.x_bar;
    let mut grad_sum = vec![0.0; d];
    let mut step_residual = 0.0f64;
    let mut grad_norm_sq_total = 0.0f64;
    let mut tmp = vec![0.0; d];
    for i in 0..n {
        problem.device(i).local_grad_into(x.block(i), &mut tmp);
        let mut res_sq = 0.0;
        for k in 0..d {
            grad_sum[k] += tmp[k];
            grad_norm_sq_total += tmp[k] * tmp[k];
            let r = x.block(i)[k] - xbar[k] + tmp[k] / lambda;
            res_sq += r * r;
        }
        step_residual = step_residual.max(res_sq.sqrt());
    }
    let grad_sum_norm = grad_sum.iter().map(|v| v * v).sum::<f64>().sqrt();
    let psi_val = psi(x);
    let identity = grad_norm_sq_total / (2.0 * n as f64 * lambda * lambda);
    Ok(StationarityReport {
        step_residual,
        grad_sum_norm,
        psi_identity_gap: (psi_val - identity).abs(),
    })
}

/// One row of the lambda-sweep certification table.
#[derive(Debug, Clone)]
pub struct CurveRow {
    pub lambda: f64,
    /// Loss part f(x(lambda)).
    pub f_value: f64,
    /// Penalty part psi(x(lambda)).
    pub psi_value: f64,
    /// `||grad P(xbar(lambda))||^2`.
    pub bound_lhs: f64,
    /// `(2 L^2/lambda)(f(x(inf)) - f(x(0)))`.
    pub bound_rhs: f64,
}

/// Lambda-sweep table with the shared-model and pure-local loss endpoints.
#[derive(Debug, Clone)]
pub struct MonotonicityCurve {
    pub rows: Vec<CurveRow>,
    pub f_infinity: f64,
    pub f_zero: f64,
}

impl MonotonicityCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,f_value,psi_value,bound_lhs,bound_rhs\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.lambda, r.f_value, r.psi_value, r.bound_lhs, r.bound_rhs
            ));
        }
        out
    }

    /// Largest violation of psi monotonicity (non-increasing, ascending grid).
    pub fn psi_monotonicity_violation(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| w[1].psi_value - w[0].psi_value)
            .fold(0.0f64, f64::max)
    }

    /// Largest violation of f monotonicity (non-decreasing, ascending grid).
    pub fn f_monotonicity_violation(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| w[0].f_value - w[1].f_value)
            .fold(0.0f64, f64::max)
    }
}

/// Solves the reference problem over an ascending lambda grid and evaluates
/// the certification quantities at every point. Grid points reuse the
/// previous solution as a warm start; the returned point is still the
/// deterministic full-gradient fixed point of each lambda.
pub fn monotonicity_curve(
    problem: &MixtureProblem,
    lambda_grid: &[f64],
    tol: Option<f64>,
) -> Result<MonotonicityCurve> {
    if lambda_grid.is_empty() {
        return Err(Error::invalid("lambda_grid", "grid must be nonempty"));
    }
    if lambda_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("lambda_grid", "grid must be strictly ascending"));
    }
    if lambda_grid[0] <= 0.0 {
        return Err(Error::invalid("lambda_grid", "grid must be positive"));
    }
    let (l, _) = problem_constants(problem);
    let global = global_reference(problem, tol)?;
    let f_zero = local_reference_value(problem, tol)?;
    let mut rows = Vec::with_capacity(lambda_grid.len());
    let mut warm = StackedModel::zeros(problem.n(), problem.d());
    for &lambda in lambda_grid {
        let sub = problem.with_lambda(lambda)?;
        let reference = reference_solution_from(&sub, &warm, tol, DEFAULT_ITERATION_CAP)?;
        let f_value = sub.loss_value(&reference.x_star)?;
        let psi_value = psi(&reference.x_star);
        let (bound_lhs, bound_rhs) = bound_terms(&sub, &reference, l, global.f_value, f_zero);
        rows.push(CurveRow { lambda, f_value, psi_value, bound_lhs, bound_rhs });
        warm = reference.x_star;
    }
    Ok(MonotonicityCurve { rows, f_infinity: global.f_value, f_zero })
}

/// The two sides of the shared-model gradient bound at one lambda:
/// `||grad P(xbar(lambda))||^2` and `(2 L^2/lambda)(f_inf - f_zero)`.
pub fn bound_terms(
    problem: &MixtureProblem,
    reference: &ReferenceSolution,
    l: f64,
    f_inf: f64,
    f_zero: f64,
) -> (f64, f64) {
    let d = problem.d();
    let nf = problem.n() as f64;
    let mut g = vec![0.0; d];
    let mut tmp = vec![0.0; d];
    for dev in problem.devices() {
        dev.local_grad_into(&reference.x_bar, &mut tmp);
        for (a, v) in g.iter_mut().zip(&tmp) {
            *a += v / nf;
        }
    }
    let lhs = g.iter().map(|v| v * v).sum::<f64>();
    let rhs = 2.0 * l * l / reference.lambda * (f_inf - f_zero);
    (lhs, rhs)
}

/// `||grad P(xbar(lambda))||^2` and its bound `(2L^2/lambda)(f_inf - f_0)`.
pub fn global_model_bound(
    problem: &MixtureProblem,
    lambda: f64,
    tol: Option<f64>,
) -> Result<(f64, f64)> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda", "bound needs lambda > 0"));
    }
    let (l, _) = problem_constants(problem);
    let sub = problem.with_lambda(lambda)?;
    let reference = reference_solution(&sub, tol)?;
    let global = global_reference(problem, tol)?;
    let f_zero = local_reference_value(problem, tol)?;
    Ok(bound_terms(&sub, &reference, l, global.f_value, f_zero))
}

/// Expected-smoothness constant of the two-branch estimator,
/// `(1/n) max(L/(1-p), lambda/p)`.
pub fn expected_l(l: f64, lambda: f64, p: f64, n: usize) -> f64 {
    (l / (1.0 - p)).max(lambda / p) / n as f64
}

/// Residual gradient variance at the optimum,
/// `(1/n^2) sum_i (||grad f_i(x_i*)||^2/(1-p) + lambda^2 ||x_i* - xbar*||^2/p)`.
pub fn sigma_sq(problem: &MixtureProblem, reference: &ReferenceSolution, p: f64) -> f64 {
    let n = problem.n();
    let d = problem.d();
    let lambda = reference.lambda;
    let mut tmp = vec![0.0; d];
    let mut acc = 0.0;
    for i in 0..n {
        problem.device(i).local_grad_into(reference.x_star.block(i), &mut tmp);
        let g_sq: f64 = tmp.iter().map(|v| v * v).sum();
        let dev_sq: f64 = reference
            .x_star
            .block(i)
            .iter()
            .zip(&reference.x_bar)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        acc += g_sq / (1.0 - p) + lambda * lambda * dev_sq / p;
    }
    acc / (n * n) as f64
}

/// Stepsize, iteration and communication bounds for one configuration.
#[derive(Debug, Clone)]
pub struct RateReport {
    /// Expected-smoothness constant (plain two-sum solver only).
    pub expected_l: Option<f64>,
    /// Iterations to reach relative accuracy eps.
    pub iter_bound: f64,
    /// Expected communication rounds to reach eps, `p(1-p) * iter_bound`.
    pub comm_bound: f64,
    /// The p minimizing both bounds, where a closed form exists.
    pub p_star: Option<f64>,
    /// Theoretical stepsize at the given p.
    pub alpha: f64,
}

fn check_rate_inputs(mu: f64, p: f64, eps: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p", "must be in (0,1)"));
    }
    if !(mu > 0.0) {
        return Err(Error::invalid("mu", "rates need strong convexity"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid("eps", "must be in (0,1)"));
    }
    Ok(())
}

/// Rates for plain loopless local GD: `alpha = 1/(2 expected_l)`, iteration
/// bound `2 n expected_l/mu log(1/eps)`, optimum at `p = lambda/(L+lambda)`.
pub fn l2gd_rates(l: f64, mu: f64, lambda: f64, p: f64, eps: f64, n: usize) -> Result<RateReport> {
    check_rate_inputs(mu, p, eps)?;
    let big_l = expected_l(l, lambda, p, n);
    let iter_bound = 2.0 * n as f64 * big_l / mu * (1.0 / eps).ln();
    Ok(RateReport {
        expected_l: Some(big_l),
        iter_bound,
        comm_bound: p * (1.0 - p) * iter_bound,
        p_star: Some(lambda / (l + lambda)),
        alpha: 1.0 / (2.0 * big_l),
    })
}

/// Rates for variance-reduced local SGD with uniform single-component
/// sampling: `alpha = n min((1-p)/(4L + mu m), p/(4 lambda + mu))`; optimum
/// at `p = (4 lambda + mu)/(4 lambda + 4L + (m+1) mu)`.
pub fn l2sgd_plus_rates(
    l: f64,
    mu: f64,
    lambda: f64,
    m: usize,
    p: f64,
    eps: f64,
    n: usize,
) -> Result<RateReport> {
    check_rate_inputs(mu, p, eps)?;
    let mf = m as f64;
    let alpha = n as f64 * ((1.0 - p) / (4.0 * l + mu * mf)).min(p / (4.0 * lambda + mu));
    let iter_bound = ((4.0 * l + mu * mf) / ((1.0 - p) * mu))
        .max((4.0 * lambda + mu) / (p * mu))
        * (1.0 / eps).ln();
    Ok(RateReport {
        expected_l: None,
        iter_bound,
        comm_bound: p * (1.0 - p) * iter_bound,
        p_star: Some((4.0 * lambda + mu) / (4.0 * lambda + 4.0 * l + (mf + 1.0) * mu)),
        alpha,
    })
}

/// Rates for variance-reduced local full-gradient descent:
/// `alpha = n min((1-p)/(4L + mu), p/(4 lambda + mu))`; optimum at
/// `p = (4 lambda + mu)/(4 lambda + 4L + 2 mu)`.
pub fn vr_local_gd_rates(
    l: f64,
    mu: f64,
    lambda: f64,
    p: f64,
    eps: f64,
    n: usize,
) -> Result<RateReport> {
    check_rate_inputs(mu, p, eps)?;
    let alpha = n as f64 * ((1.0 - p) / (4.0 * l + mu)).min(p / (4.0 * lambda + mu));
    let iter_bound =
        ((4.0 * l + mu) / ((1.0 - p) * mu)).max((4.0 * lambda + mu) / (p * mu)) * (1.0 / eps).ln();
    Ok(RateReport {
        expected_l: None,
        iter_bound,
        comm_bound: p * (1.0 - p) * iter_bound,
        p_star: Some((4.0 * lambda + mu) / (4.0 * lambda + 4.0 * l + 2.0 * mu)),
        alpha,
    })
}

/// Rates for the general partial-participation solver, SAGA or LSVRG table
/// rule, from the per-component stepsize constants `v_{i,j}` (defaults
/// derived from the sampling scheme when the config does not override them).
pub fn l2sgdpp_rates(
    problem: &MixtureProblem,
    config: &SolverConfig,
    eps: f64,
) -> Result<RateReport> {
    let (_, mu) = problem_constants(problem);
    check_rate_inputs(mu, config.p, eps)?;
    let n = problem.n();
    let nf = n as f64;
    let total = problem.total_components() as f64;
    let p = config.p;
    let lambda = problem.lambda();
    let mut alpha_local = f64::MAX;
    let mut iter_local: f64 = 0.0;
    for i in 0..n {
        let dev = problem.device(i);
        let prof = dev.smoothness_profile();
        let defaults = config.sampling.default_eso_v(&prof.components);
        let vs = config.eso_v.as_ref().map(|v| v[i].as_slice()).unwrap_or(&defaults);
        let pg = config.participation.marginal(i);
        let pj = config.sampling.marginal(dev.m());
        let rho = config
            .lsvrg_probs
            .as_ref()
            .map(|r| r[i])
            .unwrap_or(1.0 / dev.m() as f64);
        for &v in vs {
            match config.jacobian_rule {
                JacobianRule::Saga => {
                    alpha_local =
                        alpha_local.min(total * (1.0 - p) * pj * pg / (4.0 * v + total * mu / nf));
                    iter_local =
                        iter_local.max((4.0 * v * nf / total + mu) / (mu * (1.0 - p) * pj * pg));
                }
                JacobianRule::Lsvrg => {
                    alpha_local = alpha_local
                        .min(total * (1.0 - p) * pg / (4.0 * v / pj + total * mu / (nf * rho)));
                    iter_local = iter_local
                        .max((4.0 * v * nf / (total * pj) + mu / rho) / (pg * mu * (1.0 - p)));
                }
            }
        }
    }
    let alpha = alpha_local.min(nf * p / (4.0 * lambda + mu));
    let iter_bound = iter_local.max((4.0 * lambda + mu) / (p * mu)) * (1.0 / eps).ln();
    Ok(RateReport {
        expected_l: None,
        iter_bound,
        comm_bound: p * (1.0 - p) * iter_bound,
        p_star: None,
        alpha,
    })
}

/// The penalty threshold `lambda* = L p/(1-p)`: below it the rate of the
/// variance-reduced solver is dominated by the local term, so smaller
/// penalties cost nothing in convergence speed.
pub fn lambda_threshold(l: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p", "must be in (0,1)"));
    }
    Ok(l * p / (1.0 - p))
}

/// Theoretical stepsize for a (variant, problem, p) triple, used by the
/// harness when the config requests `alpha = "theory"`. The plain local SGD
/// variants have no stepsize theory of their own and reuse the
/// variance-reduced stepsize, which keeps identical-stepsize comparisons
/// honest.
pub fn theoretical_alpha(problem: &MixtureProblem, config: &SolverConfig) -> Result<f64> {
    let (l, mu) = problem_constants(problem);
    let lambda = problem.lambda();
    let n = problem.n();
    let eps = 0.5; // alpha does not depend on eps
    match config.variant {
        SolverVariant::L2gd => Ok(l2gd_rates(l, mu, lambda, config.p, eps, n)?.alpha),
        SolverVariant::L2sgdPlus
        | SolverVariant::L2sgdPlusEfficient
        | SolverVariant::L2sgd
        | SolverVariant::L2sgd2 => {
            let m = problem.uniform_m().ok_or_else(|| {
                Error::invalid("devices", "theoretical stepsize needs uniform device sizes")
            })?;
            Ok(l2sgd_plus_rates(l, mu, lambda, m, config.p, eps, n)?.alpha)
        }
        SolverVariant::VrLocalGd => Ok(vr_local_gd_rates(l, mu, lambda, config.p, eps, n)?.alpha),
        SolverVariant::L2sgdpp => Ok(l2sgdpp_rates(problem, config, eps)?.alpha),
    }
}

/// Returns an ascending copy of the grid, warning when the input was not
/// already sorted.
pub fn sorted_grid(grid: &[f64]) -> Vec<f64> {
    let mut g = grid.to_vec();
    g.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    if g != grid {
        warn!("grid was not ascending; sorted a copy");
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{DeviceFiniteSum, LossComponent, SparseRow};
    use crate::solvers::LocalSampling;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quadratic_problem(lambda: f64, centers: &[Vec<f64>]) -> MixtureProblem {
        let devices = centers
            .iter()
            .map(|c| {
                DeviceFiniteSum::new(
                    c.len(),
                    vec![LossComponent::Quadratic { center: c.clone(), scale: 1.0 }],
                    0.0,
                )
                .unwrap()
            })
            .collect();
        MixtureProblem::new(lambda, devices).unwrap()
    }

    fn small_logistic(lambda: f64, n: usize, m: usize, mu: f64, seed: u64) -> MixtureProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 4;
        let devices = (0..n)
            .map(|_| {
                let comps = (0..m)
                    .map(|_| {
                        let idx: Vec<u32> = (0..d as u32).collect();
                        let mut vals: Vec<f64> =
                            idx.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
                        let norm = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
                        vals.iter_mut().for_each(|v| *v *= 2.0 / norm);
                        let label = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                        LossComponent::Logistic { row: SparseRow::new(idx.clone(), vals), label }
                    })
                    .collect();
                DeviceFiniteSum::new(d, comps, mu).unwrap()
            })
            .collect();
        MixtureProblem::new(lambda, devices).unwrap()
    }

    fn closed_form(centers: &[Vec<f64>], lambda: f64) -> Vec<Vec<f64>> {
        let n = centers.len();
        let d = centers[0].len();
        let mut cbar = vec![0.0; d];
        for c in centers {
            for (a, v) in cbar.iter_mut().zip(c) {
                *a += v / n as f64;
            }
        }
        centers
            .iter()
            .map(|c| (0..d).map(|k| (c[k] + lambda * cbar[k]) / (1.0 + lambda)).collect())
            .collect()
    }

    #[test]
    fn quadratic_reference_matches_closed_form() {
        let centers = vec![vec![0.0], vec![2.0]];
        let problem = quadratic_problem(1.0, &centers);
        let r = reference_solution(&problem, Some(1e-12)).unwrap();
        assert!((r.x_star.block(0)[0] - 0.5).abs() < 1e-10);
        assert!((r.x_star.block(1)[0] - 1.5).abs() < 1e-10);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &lambda in &[0.01, 0.1, 1.0, 10.0, 100.0] {
            let centers: Vec<Vec<f64>> =
                (0..4).map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
            let problem = quadratic_problem(lambda, &centers);
            let r = reference_solution(&problem, Some(1e-12)).unwrap();
            let want = closed_form(&centers, lambda);
            for i in 0..4 {
                for k in 0..3 {
                    assert!(
                        (r.x_star.block(i)[k] - want[i][k]).abs() <= 1e-8,
                        "lambda={lambda} block {i} coord {k}"
                    );
                }
            }
        }
    }

    #[test]
    fn lambda_zero_reference_decouples() {
        let centers = vec![vec![1.5, -2.0], vec![0.0, 3.0]];
        let problem = quadratic_problem(0.0, &centers);
        let r = reference_solution(&problem, Some(1e-12)).unwrap();
        for i in 0..2 {
            for k in 0..2 {
                assert!((r.x_star.block(i)[k] - centers[i][k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn huge_lambda_pushes_blocks_to_the_mean() {
        // plain gradient descent needs a continuation start here: the mean
        // mode conditions like 1+lambda, so we warm start from the solution
        // at a moderate lambda (whose average is already the optimum mean)
        // the default tolerance is relative to the initial gradient, which
        // matters here: at lambda = 1e6 the penalty amplifies per-entry
        // rounding into a gradient-norm floor near lambda*ulp/n
        let centers = vec![vec![0.0], vec![2.0]];
        let warm = reference_solution(&quadratic_problem(100.0, &centers), Some(1e-12)).unwrap();
        let problem = quadratic_problem(1e6, &centers);
        let r = reference_solution_from(&problem, &warm.x_star, None, DEFAULT_ITERATION_CAP)
            .unwrap();
        let norm_c = 2.0f64;
        for i in 0..2 {
            assert!(
                (r.x_star.block(i)[0] - 1.0).abs() <= 2e-6 * norm_c,
                "block {i}: {}",
                r.x_star.block(i)[0]
            );
        }
    }

    #[test]
    fn reference_rejects_zero_curvature_and_regularizers() {
        let dev = DeviceFiniteSum::new(
            1,
            vec![LossComponent::Logistic {
                row: SparseRow::new(vec![0], vec![1.0]),
                label: 1.0,
            }],
            0.0,
        )
        .unwrap();
        let problem = MixtureProblem::new(0.5, vec![dev]).unwrap();
        assert!(reference_solution(&problem, None).is_err());

        let dev2 = DeviceFiniteSum::new(
            1,
            vec![LossComponent::Quadratic { center: vec![0.0], scale: 1.0 }],
            0.0,
        )
        .unwrap();
        let problem2 = crate::objective::MixtureProblem::with_regularizers(
            0.5,
            vec![dev2],
            vec![crate::objective::Regularizer::L1 { weight: 1.0 }],
        )
        .unwrap();
        assert!(reference_solution(&problem2, None).is_err());
    }

    #[test]
    fn iteration_cap_is_reported() {
        let problem = small_logistic(0.5, 2, 2, 1e-4, 1);
        let x0 = StackedModel::zeros(2, 4);
        let err = reference_solution_from(&problem, &x0, Some(1e-14), 10).unwrap_err();
        assert!(matches!(err, Error::IterationCap(10)));
    }

    #[test]
    fn stationarity_residuals_vanish_on_the_closed_form() {
        let centers = vec![vec![0.5, 1.0], vec![-1.0, 2.0], vec![3.0, 0.0]];
        let problem = quadratic_problem(0.7, &centers);
        let r = reference_solution(&problem, Some(1e-13)).unwrap();
        let report = check_stationarity(&problem, &r).unwrap();
        assert!(report.step_residual <= 1e-12, "{}", report.step_residual);
        assert!(report.grad_sum_norm <= 1e-12, "{}", report.grad_sum_norm);
        assert!(report.psi_identity_gap <= 1e-12, "{}", report.psi_identity_gap);
    }

    #[test]
    fn stationarity_on_identical_devices_is_exact() {
        let centers = vec![vec![1.0, -1.0]; 3];
        let problem = quadratic_problem(0.5, &centers);
        let r = reference_solution(&problem, Some(1e-13)).unwrap();
        let report = check_stationarity(&problem, &r).unwrap();
        assert!(report.max_residual() <= 1e-12);
    }

    #[test]
    fn stationarity_residuals_scale_with_tolerance() {
        let problem = small_logistic(0.5, 3, 4, 1e-2, 3);
        let tight = check_stationarity(&problem, &reference_solution(&problem, Some(5e-9)).unwrap()).unwrap();
        let loose = check_stationarity(&problem, &reference_solution(&problem, Some(1e-8)).unwrap()).unwrap();
        // halving the tolerance at least halves the residual, within factor 4
        assert!(tight.step_residual <= loose.step_residual + 1e-18);
        assert!(loose.step_residual <= 4.0 * tight.step_residual.max(1e-18));
    }

    #[test]
    fn monotonicity_curve_on_quadratics_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let centers: Vec<Vec<f64>> =
            (0..3).map(|_| (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let problem = quadratic_problem(1.0, &centers);
        let grid = [0.1, 1.0, 10.0];
        let curve = monotonicity_curve(&problem, &grid, Some(1e-12)).unwrap();
        let mut cbar = vec![0.0; 2];
        for c in &centers {
            for (a, v) in cbar.iter_mut().zip(c) {
                *a += v / 3.0;
            }
        }
        let spread: f64 = centers
            .iter()
            .map(|c| c.iter().zip(&cbar).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum();
        for row in &curve.rows {
            let want = spread / (2.0 * 3.0 * (1.0 + row.lambda).powi(2));
            assert!(
                (row.psi_value - want).abs() <= 1e-9 * want.max(1e-9),
                "lambda={}: {} vs {want}",
                row.lambda,
                row.psi_value
            );
        }
        assert!(curve.psi_monotonicity_violation() <= 1e-12);
        assert!(curve.f_monotonicity_violation() <= 1e-12);
        for row in &curve.rows {
            assert!(row.f_value <= curve.f_infinity + 1e-10);
            assert!(row.psi_value <= (curve.f_infinity - curve.f_zero) / row.lambda + 1e-10);
            assert!(row.bound_lhs <= row.bound_rhs + 1e-9);
        }
    }

    #[test]
    fn identical_devices_have_flat_curves() {
        let centers = vec![vec![0.3, 0.4]; 4];
        let problem = quadratic_problem(1.0, &centers);
        let curve = monotonicity_curve(&problem, &[0.1, 1.0, 10.0], Some(1e-12)).unwrap();
        for row in &curve.rows {
            assert!(row.psi_value <= 1e-18);
            assert!((row.f_value - curve.rows[0].f_value).abs() <= 1e-12);
        }
    }

    #[test]
    fn quadratic_global_bound_lhs_is_zero() {
        // xbar(lambda) = cbar minimizes the shared-model loss exactly
        let centers = vec![vec![1.0], vec![3.0]];
        let problem = quadratic_problem(1.0, &centers);
        let (lhs, rhs) = global_model_bound(&problem, 1.0, Some(1e-12)).unwrap();
        assert!(lhs <= 1e-20, "lhs {lhs}");
        assert!(rhs >= 0.0);
    }

    #[test]
    fn expected_l_and_p_star() {
        assert!((expected_l(1.0, 1.0, 0.5, 4) - 0.5).abs() < 1e-15);
        let (l, lambda) = (1.0, 0.25);
        let p_star = lambda / (l + lambda);
        let at_star = expected_l(l, lambda, p_star, 2);
        assert!((at_star - (l + lambda) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn sigma_sq_vanishes_for_identical_devices() {
        let centers = vec![vec![1.0, 2.0]; 3];
        let problem = quadratic_problem(0.7, &centers);
        let r = reference_solution(&problem, Some(1e-13)).unwrap();
        assert!(sigma_sq(&problem, &r, 0.3) <= 1e-20);
    }

    #[test]
    fn l2gd_rate_examples() {
        let r = l2gd_rates(1.0, 1e-4, 1.0, 0.3, 1e-5, 4).unwrap();
        assert!((r.p_star.unwrap() - 0.5).abs() < 1e-15);
        let r = l2gd_rates(1.0, 1e-4, 1.0 / 9.0, 0.1, 1e-5, 5).unwrap();
        assert!((r.p_star.unwrap() - 0.1).abs() < 1e-12);
        // at p* the iteration bound is 2 (L+lambda)/mu log(1/eps)
        let (l, mu, lambda, n) = (1.0, 1e-3, 0.5, 3usize);
        let p_star = lambda / (l + lambda);
        let r = l2gd_rates(l, mu, lambda, p_star, 1e-4, n).unwrap();
        let want = 2.0 * (l + lambda) / mu * (1e4f64).ln();
        assert!((r.iter_bound - want).abs() <= 1e-9 * want);
        // large-lambda communication recovers plain gradient descent
        let lambda = 1e9;
        let p_star = lambda / (1.0 + lambda);
        let r = l2gd_rates(1.0, 1e-3, lambda, p_star, 1e-4, 3).unwrap();
        let gd = 2.0 / 1e-3 * (1e4f64).ln();
        assert!((r.comm_bound - gd).abs() <= 1e-5 * gd, "{} vs {gd}", r.comm_bound);
    }

    #[test]
    fn l2gd_bounds_are_minimized_at_p_star() {
        let (l, mu, lambda, n) = (1.0, 1e-4, 0.37, 5usize);
        let p_star = lambda / (l + lambda);
        let mut best_comm = (f64::MAX, 0.0);
        let mut best_iter = (f64::MAX, 0.0);
        for t in 1..2000 {
            let p = t as f64 / 2000.0;
            let r = l2gd_rates(l, mu, lambda, p, 1e-5, n).unwrap();
            if r.comm_bound < best_comm.0 {
                best_comm = (r.comm_bound, p);
            }
            if r.iter_bound < best_iter.0 {
                best_iter = (r.iter_bound, p);
            }
        }
        assert!((best_comm.1 - p_star).abs() <= 1.0 / 2000.0 + 1e-12);
        assert!((best_iter.1 - p_star).abs() <= 1.0 / 2000.0 + 1e-12);
    }

    #[test]
    fn l2sgd_plus_rate_examples() {
        let r = l2sgd_plus_rates(1.0, 1e-4, 0.1, 321, 0.09, 1e-5, 5).unwrap();
        let p_star = r.p_star.unwrap();
        assert!((p_star - 0.0903).abs() < 5e-4, "p* = {p_star}");
        let r = l2sgd_plus_rates(1.0, 1e-4, 1.0 / 9.0, 321, 0.1, 1e-5, 5).unwrap();
        assert!((r.alpha - 1.1160).abs() < 1e-3, "alpha = {}", r.alpha);
        // large-lambda communication at p* approaches (4L/mu + m) log(1/eps)
        let lambda = 1e9;
        let (l, mu, m, n) = (1.0, 1e-4, 321usize, 5usize);
        let p_star = (4.0 * lambda + mu) / (4.0 * lambda + 4.0 * l + (m as f64 + 1.0) * mu);
        let r = l2sgd_plus_rates(l, mu, lambda, m, p_star, 1e-5, n).unwrap();
        let want = (4.0 / mu + m as f64) * (1e5f64).ln();
        assert!((r.comm_bound - want).abs() <= 1e-4 * want, "{} vs {want}", r.comm_bound);
    }

    #[test]
    fn l2sgd_plus_comm_argmin_matches_p_star() {
        let (l, mu, lambda, m, n) = (1.0, 1e-4, 0.1, 321usize, 5usize);
        let p_star = l2sgd_plus_rates(l, mu, lambda, m, 0.5, 1e-5, n).unwrap().p_star.unwrap();
        let mut best = (f64::MAX, 0.0);
        for t in 1..1000 {
            let p = t as f64 / 1000.0;
            let r = l2sgd_plus_rates(l, mu, lambda, m, p, 1e-5, n).unwrap();
            if r.comm_bound < best.0 {
                best = (r.comm_bound, p);
            }
        }
        assert!((best.1 - p_star).abs() <= 1.0 / 1000.0 + 1e-12, "argmin {} vs {p_star}", best.1);
    }

    #[test]
    fn vr_local_gd_rate_examples() {
        let r = vr_local_gd_rates(1.0, 1e-12, 1.0, 0.3, 1e-4, 4).unwrap();
        assert!((r.p_star.unwrap() - 0.5).abs() < 1e-9);
        let (l, mu, lambda) = (1.0, 1e-3, 0.4);
        let p_star = (4.0 * lambda + mu) / (4.0 * lambda + 4.0 * l + 2.0 * mu);
        let r = vr_local_gd_rates(l, mu, lambda, p_star, 1e-4, 4).unwrap();
        let want = 4.0 * (lambda / mu + l / mu + 0.5) * (1e4f64).ln();
        assert!((r.iter_bound - want).abs() <= 1e-9 * want);
    }

    #[test]
    fn general_rates_reduce_to_the_special_cases() {
        let problem = small_logistic(0.3, 3, 4, 1e-3, 7);
        let (l, mu) = problem_constants(&problem);
        let config = SolverConfig::new(SolverVariant::L2sgdpp, 0.1, 0.2, 10, 0);
        let general = l2sgdpp_rates(&problem, &config, 1e-4).unwrap();
        let special = l2sgd_plus_rates(l, mu, 0.3, 4, 0.2, 1e-4, 3).unwrap();
        assert!(
            (general.alpha - special.alpha).abs() <= 1e-12 * special.alpha,
            "{} vs {}",
            general.alpha,
            special.alpha
        );
        assert!(
            (general.iter_bound - special.iter_bound).abs() <= 1e-9 * special.iter_bound,
            "{} vs {}",
            general.iter_bound,
            special.iter_bound
        );

        let problem1 = quadratic_problem(0.5, &[vec![0.0, 1.0], vec![2.0, 0.0]]);
        let (l1, mu1) = problem_constants(&problem1);
        let config1 = SolverConfig::new(SolverVariant::L2sgdpp, 0.1, 0.25, 10, 0);
        let general1 = l2sgdpp_rates(&problem1, &config1, 1e-4).unwrap();
        let special1 = vr_local_gd_rates(l1, mu1, 0.5, 0.25, 1e-4, 2).unwrap();
        assert!((general1.alpha - special1.alpha).abs() <= 1e-12 * special1.alpha);
        assert!((general1.iter_bound - special1.iter_bound).abs() <= 1e-9 * special1.iter_bound);
    }

    #[test]
    fn lambda_threshold_examples() {
        assert!((lambda_threshold(1.0, 0.1).unwrap() - 1.0 / 9.0).abs() < 1e-15);
        assert!((lambda_threshold(1.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!(lambda_threshold(1.0, 0.0).is_err());
    }

    #[test]
    fn tau_nice_rates_use_scaled_constants() {
        // small lambda so the local branch binds; large mu so the batch-size
        // gain is visible through the conservative v scaling
        let problem = small_logistic(0.01, 2, 4, 0.5, 11);
        let mut config = SolverConfig::new(SolverVariant::L2sgdpp, 0.1, 0.2, 10, 0);
        config.sampling = LocalSampling::TauNice { tau: 2 };
        let r2 = l2sgdpp_rates(&problem, &config, 1e-4).unwrap();
        config.sampling = LocalSampling::SingleUniform;
        let r1 = l2sgdpp_rates(&problem, &config, 1e-4).unwrap();
        // larger batches allow larger stepsizes per iteration
        assert!(r2.alpha > r1.alpha, "{} vs {}", r2.alpha, r1.alpha);
    }

    #[test]
    fn expected_smoothness_inequality_holds_empirically() {
        use crate::solvers::stochastic_gradient_l2gd;
        let problem = small_logistic(0.4, 3, 3, 1e-2, 13);
        let reference = reference_solution(&problem, Some(1e-12)).unwrap();
        let (l, _) = problem_constants(&problem);
        let p = 0.3;
        let big_l = expected_l(l, problem.lambda(), p, 3);
        let f_star = reference.f_star;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let x =
                StackedModel::new(3, 4, (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
            let mut lhs = 0.0;
            for (aggregate, prob) in [(false, 1.0 - p), (true, p)] {
                let g = stochastic_gradient_l2gd(&x, &problem, p, aggregate).unwrap();
                let g_star =
                    stochastic_gradient_l2gd(&reference.x_star, &problem, p, aggregate).unwrap();
                lhs += prob * g.dist_sq(&g_star);
            }
            let rhs = 2.0 * big_l * (problem.objective_value(&x).unwrap() - f_star);
            assert!(lhs <= rhs + 1e-9, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn theoretical_stepsize_keeps_aggregation_convex() {
        // alpha = 1/(2 expected_l) implies alpha*lambda/(n p) <= 1/2
        for &l in &[0.5, 1.0, 4.0] {
            for &lambda in &[1e-3, 0.1, 1.0, 50.0] {
                for &p in &[0.05, 0.3, 0.7, 0.95] {
                    for &n in &[1usize, 4, 20] {
                        let r = l2gd_rates(l, 1e-4, lambda, p, 1e-5, n).unwrap();
                        let coeff = r.alpha * lambda / (n as f64 * p);
                        assert!(coeff <= 0.5 + 1e-12, "coeff {coeff} at L={l} lambda={lambda} p={p} n={n}");
                    }
                }
            }
        }
    }

    #[test]
    fn theoretical_alpha_dispatches_by_variant() {
        let problem = small_logistic(0.3, 3, 4, 1e-3, 19);
        let (l, mu) = problem_constants(&problem);
        let config = SolverConfig::new(SolverVariant::L2gd, 0.1, 0.2, 10, 0);
        let a = theoretical_alpha(&problem, &config).unwrap();
        assert!((a - 1.0 / (2.0 * expected_l(l, 0.3, 0.2, 3))).abs() < 1e-12);
        let config = SolverConfig::new(SolverVariant::L2sgdPlus, 0.1, 0.2, 10, 0);
        let a = theoretical_alpha(&problem, &config).unwrap();
        let want = l2sgd_plus_rates(l, mu, 0.3, 4, 0.2, 1e-4, 3).unwrap().alpha;
        assert!((a - want).abs() < 1e-12);
    }
}
