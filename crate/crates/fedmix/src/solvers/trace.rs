//! Per-run iteration traces and their CSV form.

use crate::error::{Error, Result};
use crate::model::StackedModel;

/// One recorded iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    /// Cumulative component-gradient evaluations divided by the total
    /// component count N.
    pub data_passes: f64,
    /// Cumulative communication rounds (device->master uploads).
    pub comm_rounds: usize,
    /// Full objective F(x^k).
    pub objective: f64,
    /// (F(x^k) - F*) / (F(x^0) - F*), when a reference optimum is known.
    pub rel_subopt: Option<f64>,
    /// ||x^k - x_ref||^2, when a reference model is known.
    pub dist_sq: Option<f64>,
}

/// Trace of one solver run.
#[derive(Debug, Clone, Default)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    /// Number of coins realized (equals the iteration count).
    pub coin_len: usize,
    /// Number of adjacent coin flips, counting from an implicit leading 0.
    pub transitions: usize,
    /// First recorded row at which rel_subopt fell to the requested target.
    pub reached_target: Option<TraceRow>,
}

pub const CSV_HEADER: &str = "k,data_passes,comm_rounds,objective,rel_subopt,dist_sq";

fn fmt_f64(v: f64) -> String {
    // 17 significant digits, enough to round-trip any f64
    format!("{v:.16e}")
}

impl RunTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * 64);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.k,
                fmt_f64(row.data_passes),
                row.comm_rounds,
                fmt_f64(row.objective),
                row.rel_subopt.map(fmt_f64).unwrap_or_default(),
                row.dist_sq.map(fmt_f64).unwrap_or_default(),
            ));
        }
        out
    }
}

/// Controls what a run records and when it may stop early.
#[derive(Debug, Clone, Default)]
pub struct TraceSpec<'a> {
    /// Record every this many iterations (0 means only first and last).
    pub record_every: usize,
    /// Reference optimal objective, enables the rel_subopt column.
    pub f_star: Option<f64>,
    /// Reference model, enables the dist_sq column.
    pub x_ref: Option<&'a StackedModel>,
    /// Stop at the first recorded row whose rel_subopt is at or below this.
    pub target_rel_subopt: Option<f64>,
}

impl<'a> TraceSpec<'a> {
    pub fn every(record_every: usize) -> Self {
        TraceSpec { record_every, ..Default::default() }
    }
}

/// Incremental trace recorder shared by all run loops.
pub(crate) struct Recorder<'a> {
    spec: TraceSpec<'a>,
    pub trace: RunTrace,
    f0_minus_fstar: Option<f64>,
}

impl<'a> Recorder<'a> {
    pub fn new(spec: TraceSpec<'a>) -> Self {
        Recorder { spec, trace: RunTrace::default(), f0_minus_fstar: None }
    }

    /// Records x^k. Returns true when the run may stop (target reached).
    pub fn record(
        &mut self,
        k: usize,
        objective: f64,
        data_passes: f64,
        comm_rounds: usize,
        x: &StackedModel,
    ) -> Result<bool> {
        if !objective.is_finite() {
            return Err(Error::NonFinite { context: "objective during run" });
        }
        let rel_subopt = self.spec.f_star.map(|fs| {
            if k == 0 {
                self.f0_minus_fstar = Some(objective - fs);
                1.0
            } else {
                let denom = self.f0_minus_fstar.unwrap_or(objective - fs);
                (objective - fs) / denom
            }
        });
        let dist_sq = self.spec.x_ref.map(|r| x.dist_sq(r));
        let row = TraceRow { k, data_passes, comm_rounds, objective, rel_subopt, dist_sq };
        let reached = match (self.spec.target_rel_subopt, rel_subopt) {
            (Some(target), Some(rel)) => rel <= target,
            _ => false,
        };
        if reached && self.trace.reached_target.is_none() {
            self.trace.reached_target = Some(row.clone());
        }
        self.trace.rows.push(row);
        Ok(reached && k > 0)
    }
}
