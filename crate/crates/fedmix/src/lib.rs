//! Deterministic simulator and solver library for personalized federated
//! learning with an explicit global/local mixture objective.
//!
//! Training n devices jointly minimizes
//!
//! `F(x) = (1/n) sum_i f_i(x_i) + lambda * (1/2n) sum_i ||x_i - mean(x)||^2`
//!
//! over one model per device. The penalty weight interpolates between purely
//! local training (`lambda = 0`) and a single shared model (`lambda -> inf`).
//! The crate provides:
//!
//! * the objective, its gradients and the consensus penalty ([`model`],
//!   [`objective`], [`losses`]);
//! * LibSVM parsing plus homogeneous/heterogeneous device partitioning
//!   ([`data`]);
//! * the full loopless local solver family with seeded, replayable
//!   randomness: plain local GD, local SGD with and without control
//!   variates, a communication-efficient implementation, and the general
//!   partial-participation solver with SAGA or LSVRG table updates and prox
//!   support ([`solvers`]);
//! * reference solutions and numeric certification of the structural
//!   theorems, stepsizes and complexity formulas ([`theory`]);
//! * a config-driven experiment harness with CSV traces, parameter sweeps
//!   and deterministic SVG plots ([`harness`], [`plot`]).
//!
//! Runnable walkthroughs live in `examples/`; the `fedmix` binary exposes
//! the same flows as subcommands (`run`, `sweep-p`, `sweep-lambda`, `split`,
//! `reference`, `plot`, `config`).

pub mod data;
pub mod error;
pub mod harness;
pub mod losses;
pub mod model;
pub mod objective;
pub mod plot;
pub mod rng;
pub mod solvers;
pub mod synth;
pub mod theory;

pub use error::{Error, Result};
pub use losses::{DeviceFiniteSum, LossComponent, SmoothnessProfile, SparseRow};
pub use model::{block_average, grad_psi, psi, psi_hessian_dense, StackedModel};
pub use objective::{MixtureProblem, Regularizer};
pub use solvers::{
    run, ControlVariates, JacobianRule, LocalSampling, ParticipationScheme, RunOutput, RunTrace,
    SolverConfig, SolverVariant, TraceSpec,
};
