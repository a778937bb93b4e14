//! Communication-efficient implementation of variance-reduced local SGD.
//!
//! Between two local phases the master performs a run of consecutive
//! aggregation steps. Those steps are affine in the device states, so the
//! whole run of length c can be replayed in closed form with three scalar
//! coefficient sequences instead of c vector sweeps, and the devices can
//! reconstruct the entry average, their penalty shift and the accumulated
//! gradient-table drift when they re-enter a local phase. The trajectory is
//! identical (up to floating-point rearrangement) to the plain solver under
//! the same seed.
//!
//! During a window starting at entry states `u_i` with average `ubar`,
//! deviations `d_i = u_i - ubar`, captured shifts `Psi_i` (their average is
//! always zero at entry), drifts `b_i = J_i 1/(n m)` and `bbar = mean(b)`,
//! the aggregation dynamics decouple into
//!
//! `ubar_j = ubar - j alpha bbar`
//! `d_i^{j+1} = (1-a) d_i^j + beta lambda d_i^{j-1} - alpha (b_i - bbar)`
//!
//! with `a = alpha lambda/(n p)`, `beta = alpha (1/p - 1)/n`, and the shift
//! entering only the first step: `d_i^1 = (1-a) d_i^0 + beta Psi_i - alpha
//! (b_i - bbar)`. Writing `d_i^j = A_j d_i^0 + B_j beta Psi_i - C_j alpha
//! (b_i - bbar)` gives scalar recurrences for A, B, C; the state after c
//! steps is `ubar_c + d_i^c` and the re-anchored shift is
//! `lambda d_i^{c-1}`.

use crate::error::{Error, Result};
use crate::model::{block_average, StackedModel};
use crate::objective::MixtureProblem;
use crate::rng::device_rng;
use rand::Rng;

use super::control::ControlVariates;
use super::l2sgd_plus::{local_step_shared, Coeffs};
use super::{check_start, warn_unequal_start, RunLoop, RunOutput, SolverConfig, TraceSpec};

/// Closed-form replay state for one run of consecutive aggregation steps.
pub(crate) struct Window {
    d0: Vec<Vec<f64>>,
    psi0: Vec<Vec<f64>>,
    delta_b: Vec<Vec<f64>>,
    ubar0: Vec<f64>,
    bbar: Vec<f64>,
    pub c: usize,
    a_prev: f64,
    a_cur: f64,
    b_prev: f64,
    b_cur: f64,
    c_prev: f64,
    c_cur: f64,
    one_minus_a: f64,
    beta_lambda: f64,
    beta: f64,
    alpha: f64,
    lambda: f64,
}

impl Window {
    /// Opens a window at the current state; accounts for the first
    /// aggregation step (c = 1).
    pub fn open(x: &StackedModel, cv: &ControlVariates, co: &Coeffs) -> Self {
        let n = x.n();
        let d = x.d();
        let ubar0 = block_average(x);
        let mut drifts: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let colsum = cv.tables[i].colsum();
            drifts.push(colsum.iter().map(|v| v * co.inv_den).collect());
        }
        let mut bbar = vec![0.0; d];
        for drift in &drifts {
            for (b, v) in bbar.iter_mut().zip(drift) {
                *b += v;
            }
        }
        for b in bbar.iter_mut() {
            *b /= n as f64;
        }
        let d0 = (0..n)
            .map(|i| x.block(i).iter().zip(&ubar0).map(|(v, u)| v - u).collect())
            .collect();
        let delta_b = drifts
            .iter()
            .map(|drift| drift.iter().zip(&bbar).map(|(v, b)| v - b).collect())
            .collect();
        let a = co.alpha * co.lam_np;
        let beta = co.alpha * co.c_psi;
        Window {
            d0,
            psi0: cv.shifts.clone(),
            delta_b,
            ubar0,
            bbar,
            c: 1,
            a_prev: 1.0,
            a_cur: 1.0 - a,
            b_prev: 0.0,
            b_cur: 1.0,
            c_prev: 0.0,
            c_cur: 1.0,
            one_minus_a: 1.0 - a,
            beta_lambda: beta * co.lambda,
            beta,
            alpha: co.alpha,
            lambda: co.lambda,
        }
    }

    /// Accounts for one more aggregation step.
    pub fn advance(&mut self) {
        let a_next = self.one_minus_a * self.a_cur + self.beta_lambda * self.a_prev;
        let b_next = self.one_minus_a * self.b_cur + self.beta_lambda * self.b_prev;
        let c_next = self.one_minus_a * self.c_cur + self.beta_lambda * self.c_prev + 1.0;
        self.a_prev = self.a_cur;
        self.b_prev = self.b_cur;
        self.c_prev = self.c_cur;
        self.a_cur = a_next;
        self.b_cur = b_next;
        self.c_cur = c_next;
        self.c += 1;
    }

    fn deviation(&self, i: usize, k: usize, a: f64, b: f64, c: f64) -> f64 {
        a * self.d0[i][k] + b * self.beta * self.psi0[i][k] - c * self.alpha * self.delta_b[i][k]
    }

    /// Writes the state after c aggregation steps into `x`.
    pub fn materialize(&self, x: &mut StackedModel) {
        let shift = self.c as f64 * self.alpha;
        let d = x.d();
        for i in 0..x.n() {
            let xi = x.block_mut(i);
            for k in 0..d {
                xi[k] = self.ubar0[k] - shift * self.bbar[k]
                    + self.deviation(i, k, self.a_cur, self.b_cur, self.c_cur);
            }
        }
    }

    /// Finishes the window: materializes the state and re-anchors the
    /// shifts at the second-to-last step, `Psi_i = lambda d_i^{c-1}`.
    pub fn close(self, x: &mut StackedModel, cv: &mut ControlVariates) {
        self.materialize(x);
        let d = x.d();
        for i in 0..x.n() {
            for k in 0..d {
                cv.shifts[i][k] =
                    self.lambda * self.deviation(i, k, self.a_prev, self.b_prev, self.c_prev);
            }
        }
    }
}

/// Applies a run of `c` consecutive aggregation steps in closed form,
/// updating the model and penalty shifts exactly as c explicit aggregation
/// steps would. This is the master-side replay; the local steps of the
/// efficient implementation are shared with [`super::l2sgd_plus_step`].
///
/// For `c = 1` the replay is exact for any shift state. For `c >= 2` it
/// relies on the shifts averaging to zero across devices, which holds
/// whenever they were produced by an aggregation step (or are still zero).
pub fn l2sgd_plus_efficient_window(
    x: &mut StackedModel,
    cv: &mut ControlVariates,
    problem: &MixtureProblem,
    alpha: f64,
    p: f64,
    c: usize,
) -> Result<()> {
    check_start(x, problem)?;
    let m = problem
        .uniform_m()
        .ok_or_else(|| Error::invalid("devices", "unequal component counts"))?;
    if c == 0 {
        return Ok(());
    }
    let co = Coeffs::new(problem, m, alpha, p);
    let mut w = Window::open(x, cv, &co);
    for _ in 1..c {
        w.advance();
    }
    w.close(x, cv);
    Ok(())
}

/// Run of the communication-efficient implementation. Produces the same
/// iterates as [`super::l2sgd_plus_run`] under the same seed while devices
/// exchange only their models and one aggregated drift vector per round.
pub fn l2sgd_plus_efficient_run(
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
    let mut scratch = x0.clone();
    let mut cv = ControlVariates::zeros(problem);
    let mut rngs: Vec<_> = (0..n).map(|i| device_rng(config.seed, i)).collect();
    let mut js = vec![0usize; n];
    let mut buf = vec![0.0; x.d()];
    let mut window: Option<Window> = None;

    let mut lp = RunLoop::new(problem, config, spec)?;
    lp.record(0, problem, &x)?;
    let mut iterations = config.max_iters;
    for k in 0..config.max_iters {
        let xi = lp.next_coin();
        if xi {
            match window.as_mut() {
                Some(w) => w.advance(),
                None => window = Some(Window::open(&x, &cv, &co)),
            }
        } else {
            if let Some(w) = window.take() {
                w.close(&mut x, &mut cv);
            }
            for (i, rng) in rngs.iter_mut().enumerate() {
                js[i] = rng.gen_range(0..m);
            }
            local_step_shared(&mut x, &mut cv, problem, &co, &js, &mut buf)?;
            lp.add_comps(n);
        }
        if lp.due(k + 1) {
            let state = match &window {
                Some(w) => {
                    w.materialize(&mut scratch);
                    &scratch
                }
                None => &x,
            };
            if lp.record(k + 1, problem, state)? {
                iterations = k + 1;
                break;
            }
        }
    }
    if let Some(w) = window.take() {
        w.close(&mut x, &mut cv);
    }
    let trace = lp.finish(iterations);
    Ok(RunOutput { x, trace, control: Some(cv) })
}
