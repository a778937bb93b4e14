//! The stochastic solver family for the mixture objective.
//!
//! All variants share one mechanism: a master coin decides each iteration
//! whether every device takes a local (stochastic) gradient step on its own
//! loss (probability `1-p`), or the models take a step toward their average
//! (probability `p`). Communication happens only when two consecutive coins
//! differ. The variants differ in what they sample locally and which control
//! variates they maintain:
//!
//! | variant              | local step        | control variates        |
//! |----------------------|-------------------|-------------------------|
//! | `L2gd`               | full gradient     | none                    |
//! | `L2sgd`              | one component     | none                    |
//! | `L2sgd2`             | one component     | penalty shift only      |
//! | `L2sgdPlus`          | one component     | gradient table + shift  |
//! | `L2sgdPlusEfficient` | one component     | same, replayed windows  |
//! | `VrLocalGd`          | full gradient     | gradient memory + shift |
//! | `L2sgdpp`            | subset, partial participation, prox | table (SAGA or LSVRG) + shift |
//!
//! Runs are deterministic functions of `(config, data, seed)`; every random
//! draw comes from a dedicated stream (see [`crate::rng`]) and happens on the
//! control thread in fixed device order.

use log::warn;

use crate::error::{Error, Result};
use crate::model::StackedModel;
use crate::objective::MixtureProblem;
use crate::rng::CoinStream;

pub mod control;
pub mod sampling;
pub mod trace;

mod efficient;
mod l2gd;
mod l2sgd_plus;
mod l2sgdpp;
mod plain;
mod vr_local_gd;

pub use control::{ControlVariates, JacobianTable};
pub use efficient::{l2sgd_plus_efficient_run, l2sgd_plus_efficient_window};
pub use l2gd::{comm_rounds_expected, l2gd_run, l2gd_step, stochastic_gradient_l2gd};
pub use l2sgd_plus::{l2sgd_plus_run, l2sgd_plus_step};
pub use l2sgdpp::{l2sgdpp_run, l2sgdpp_step, PpOutcome};
pub use plain::{l2sgd2_run, l2sgd2_step, l2sgd_run, l2sgd_step};
pub use sampling::{LocalSampling, ParticipationScheme};
pub use trace::{RunTrace, TraceRow, TraceSpec, CSV_HEADER};
pub use vr_local_gd::{vr_local_gd_run, vr_local_gd_step};

/// Which solver a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolverVariant {
    L2gd,
    L2sgdPlus,
    L2sgdPlusEfficient,
    VrLocalGd,
    L2sgd,
    L2sgd2,
    L2sgdpp,
}

impl std::str::FromStr for SolverVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2gd" => Ok(SolverVariant::L2gd),
            "l2sgd+" | "l2sgd-plus" | "l2sgdplus" => Ok(SolverVariant::L2sgdPlus),
            "l2sgd+eff" | "l2sgd-plus-efficient" | "efficient" => Ok(SolverVariant::L2sgdPlusEfficient),
            "vr-local-gd" | "vrlocalgd" | "vr_local_gd" => Ok(SolverVariant::VrLocalGd),
            "l2sgd" => Ok(SolverVariant::L2sgd),
            "l2sgd2" => Ok(SolverVariant::L2sgd2),
            "l2sgd++" | "l2sgdpp" => Ok(SolverVariant::L2sgdpp),
            other => Err(Error::invalid("variant", format!("unknown solver `{other}`"))),
        }
    }
}

impl std::fmt::Display for SolverVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolverVariant::L2gd => "l2gd",
            SolverVariant::L2sgdPlus => "l2sgd+",
            SolverVariant::L2sgdPlusEfficient => "l2sgd+eff",
            SolverVariant::VrLocalGd => "vr-local-gd",
            SolverVariant::L2sgd => "l2sgd",
            SolverVariant::L2sgd2 => "l2sgd2",
            SolverVariant::L2sgdpp => "l2sgd++",
        };
        f.write_str(s)
    }
}

/// How the gradient table is updated in the partial-participation solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JacobianRule {
    /// Replace the sampled columns every local step.
    Saga,
    /// Refresh a device's whole table with probability rho_i per local step.
    Lsvrg,
}

/// Complete description of one solver run (except the problem instance,
/// which carries lambda and the device objectives).
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub variant: SolverVariant,
    /// Stepsize alpha > 0. Never clipped; configs beyond the theoretical
    /// stepsize run with a warning.
    pub alpha: f64,
    /// Aggregation probability, in (0,1).
    pub p: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Device participation on local rounds (partial-participation solver).
    pub participation: ParticipationScheme,
    /// Local subsampling scheme (partial-participation solver).
    pub sampling: LocalSampling,
    pub jacobian_rule: JacobianRule,
    /// Per-device table-refresh probabilities for LSVRG; defaults to 1/m_i.
    pub lsvrg_probs: Option<Vec<f64>>,
    /// Per-device, per-component stepsize constants overriding the defaults.
    pub eso_v: Option<Vec<Vec<f64>>>,
}

impl SolverConfig {
    pub fn new(variant: SolverVariant, alpha: f64, p: f64, max_iters: usize, seed: u64) -> Self {
        SolverConfig {
            variant,
            alpha,
            p,
            max_iters,
            seed,
            participation: ParticipationScheme::Full,
            sampling: LocalSampling::SingleUniform,
            jacobian_rule: JacobianRule::Saga,
            lsvrg_probs: None,
            eso_v: None,
        }
    }

    /// Checks the config against a problem instance. Hard violations are
    /// errors; stepsizes beyond the theoretical bounds only warn.
    pub fn validate(&self, problem: &MixtureProblem) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::invalid("p", format!("{} is outside (0,1)", self.p)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha", "must be positive and finite"));
        }
        let n = problem.n() as f64;
        match self.variant {
            SolverVariant::L2gd => {
                // the aggregation map is a convex combination only when
                // alpha*lambda/(n p) <= 1; theory keeps it at or below 1/2
                let coeff = self.alpha * problem.lambda() / (n * self.p);
                if coeff > 1.0 + 1e-12 {
                    return Err(Error::invalid(
                        "alpha",
                        format!("aggregation coefficient alpha*lambda/(n p) = {coeff:.6} exceeds 1"),
                    ));
                }
                if coeff > 0.5 + 1e-12 {
                    warn!("aggregation coefficient {coeff:.6} exceeds 1/2; outside the guaranteed regime");
                }
            }
            SolverVariant::L2sgdPlus
            | SolverVariant::L2sgdPlusEfficient
            | SolverVariant::L2sgd
            | SolverVariant::L2sgd2 => {
                if problem.uniform_m().is_none() {
                    return Err(Error::invalid(
                        "devices",
                        "this solver requires every device to hold the same number of components",
                    ));
                }
            }
            SolverVariant::VrLocalGd => {}
            SolverVariant::L2sgdpp => {
                self.participation.validate(problem.n())?;
                for dev in problem.devices() {
                    self.sampling.validate(dev.m())?;
                }
                if let Some(probs) = &self.lsvrg_probs {
                    if probs.len() != problem.n() {
                        return Err(Error::invalid("lsvrg_probs", "one entry per device"));
                    }
                    if probs.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
                        return Err(Error::invalid("lsvrg_probs", "entries must be in (0,1]"));
                    }
                }
                if let Some(vs) = &self.eso_v {
                    if vs.len() != problem.n() {
                        return Err(Error::invalid("eso_v", "one vector per device"));
                    }
                    for (i, (dev, v)) in problem.devices().iter().zip(vs).enumerate() {
                        if v.len() != dev.m() {
                            return Err(Error::invalid("eso_v", format!("device {i}: need m_i entries")));
                        }
                        let defaults = self.sampling.default_eso_v(&dev.smoothness_profile().components);
                        for (j, (vv, dv)) in v.iter().zip(&defaults).enumerate() {
                            if vv < dv {
                                warn!("eso_v[{i}][{j}] = {vv} is below the conservative bound {dv}; stepsize may be invalid");
                            }
                        }
                    }
                }
            }
        }
        self.warn_if_beyond_theory(problem);
        Ok(())
    }

    fn warn_if_beyond_theory(&self, problem: &MixtureProblem) {
        let n = problem.n() as f64;
        let lambda = problem.lambda();
        let (l, mu) = problem_constants(problem);
        let bound = match self.variant {
            SolverVariant::L2gd => {
                let big_l = (l / (1.0 - self.p)).max(lambda / self.p) / n;
                Some(1.0 / (2.0 * big_l))
            }
            SolverVariant::L2sgdPlus | SolverVariant::L2sgdPlusEfficient => {
                problem.uniform_m().map(|m| {
                    let m = m as f64;
                    n * ((1.0 - self.p) / (4.0 * l + mu * m)).min(self.p / (4.0 * lambda + mu))
                })
            }
            SolverVariant::VrLocalGd => {
                Some(n * ((1.0 - self.p) / (4.0 * l + mu)).min(self.p / (4.0 * lambda + mu)))
            }
            _ => None,
        };
        if let Some(bound) = bound {
            if self.alpha > bound * (1.0 + 1e-9) {
                warn!(
                    "{}: alpha = {} exceeds the theoretical stepsize {bound:.6e}; running anyway",
                    self.variant, self.alpha
                );
            }
        }
    }
}

/// Uniform smoothness and strong-convexity constants across devices:
/// the largest device smoothness and the smallest device modulus.
pub fn problem_constants(problem: &MixtureProblem) -> (f64, f64) {
    let mut l = f64::MIN;
    let mut mu = f64::MAX;
    for dev in problem.devices() {
        let prof = dev.smoothness_profile();
        l = l.max(prof.local);
        mu = mu.min(prof.mu);
    }
    (l, mu)
}

/// Result of one solver run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub x: StackedModel,
    pub trace: RunTrace,
    /// Final control-variate state, for the variants that maintain one.
    pub control: Option<ControlVariates>,
}

/// Realized randomness of one iteration for the equal-m solver family.
#[derive(Debug, Clone, Copy)]
pub enum StepOutcome<'a> {
    /// Step toward the average (the coin landed 1).
    Aggregate,
    /// Local step; `js[i]` is the component sampled by device i.
    Local { js: &'a [usize] },
}

/// Runs the solver selected by `config.variant`.
pub fn run(
    x0: &StackedModel,
    problem: &MixtureProblem,
    config: &SolverConfig,
    spec: TraceSpec<'_>,
) -> Result<RunOutput> {
    match config.variant {
        SolverVariant::L2gd => l2gd_run(x0, problem, config, spec),
        SolverVariant::L2sgdPlus => l2sgd_plus_run(x0, problem, config, spec),
        SolverVariant::L2sgdPlusEfficient => l2sgd_plus_efficient_run(x0, problem, config, spec),
        SolverVariant::VrLocalGd => vr_local_gd_run(x0, problem, config, spec),
        SolverVariant::L2sgd => l2sgd_run(x0, problem, config, spec),
        SolverVariant::L2sgd2 => l2sgd2_run(x0, problem, config, spec),
        SolverVariant::L2sgdpp => l2sgdpp_run(x0, problem, config, spec),
    }
}

/// Default trace cadence approximating one data pass: the iteration count
/// after which the local branch has evaluated about N component gradients.
pub fn default_record_every(variant: SolverVariant, problem: &MixtureProblem) -> usize {
    match variant {
        SolverVariant::L2gd | SolverVariant::VrLocalGd => 1,
        _ => problem.uniform_m().unwrap_or_else(|| {
            let n = problem.n();
            (problem.total_components() + n - 1) / n
        }),
    }
}

pub(crate) fn check_start(x0: &StackedModel, problem: &MixtureProblem) -> Result<()> {
    if x0.n() != problem.n() || x0.d() != problem.d() {
        return Err(Error::DimensionMismatch {
            expected: problem.n() * problem.d(),
            got: x0.n() * x0.d(),
        });
    }
    Ok(())
}

pub(crate) fn warn_unequal_start(x0: &StackedModel) {
    let first = x0.block(0);
    for i in 1..x0.n() {
        if x0.block(i) != first {
            warn!("initial blocks are not identical; proceeding with the given start");
            return;
        }
    }
}

/// Bookkeeping shared by all run loops: coins, transition/round counting,
/// component-evaluation counting and trace recording.
pub(crate) struct RunLoop<'a> {
    coins: CoinStream,
    prev: bool,
    pub rounds: usize,
    pub transitions: usize,
    comps: u64,
    total_comps: u64,
    recorder: trace::Recorder<'a>,
    record_every: usize,
    max_iters: usize,
}

impl<'a> RunLoop<'a> {
    pub fn new(
        problem: &MixtureProblem,
        config: &SolverConfig,
        spec: TraceSpec<'a>,
    ) -> Result<Self> {
        let record_every = if spec.record_every == 0 {
            default_record_every(config.variant, problem)
        } else {
            spec.record_every
        };
        Ok(RunLoop {
            coins: CoinStream::new(config.seed, config.p)?,
            prev: false,
            rounds: 0,
            transitions: 0,
            comps: 0,
            total_comps: problem.total_components() as u64,
            recorder: trace::Recorder::new(spec),
            record_every,
            max_iters: config.max_iters,
        })
    }

    /// Draws the next coin and accounts for communication: a round is opened
    /// at each 0->1 flip (device->master upload); a trailing open round still
    /// counts since it was counted when opened.
    pub fn next_coin(&mut self) -> bool {
        let xi = self.coins.next_coin();
        if xi != self.prev {
            self.transitions += 1;
            if xi {
                self.rounds += 1;
            }
        }
        self.prev = xi;
        xi
    }

    pub fn add_comps(&mut self, c: usize) {
        self.comps += c as u64;
    }

    pub fn data_passes(&self) -> f64 {
        self.comps as f64 / self.total_comps as f64
    }

    pub fn due(&self, k: usize) -> bool {
        k == 0 || k == self.max_iters || k % self.record_every == 0
    }

    /// Records x^k; returns true when the run may stop early.
    pub fn record(&mut self, k: usize, problem: &MixtureProblem, x: &StackedModel) -> Result<bool> {
        let objective = problem.objective_value(x)?;
        let passes = self.data_passes();
        self.recorder.record(k, objective, passes, self.rounds, x)
    }

    pub fn finish(mut self, iterations: usize) -> RunTrace {
        self.recorder.trace.coin_len = iterations;
        self.recorder.trace.transitions = self.transitions;
        self.recorder.trace
    }
}
