//! Control-variate state for the variance-reduced solvers: one gradient
//! table per device (columns hold previously computed component gradients)
//! and one penalty shift vector per device.

use crate::objective::MixtureProblem;

/// A d x m gradient memory, column j holding the last stored gradient of
/// component j. The column sum is maintained incrementally.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianTable {
    d: usize,
    m: usize,
    cols: Vec<f64>,
    colsum: Vec<f64>,
}

impl JacobianTable {
    pub fn zeros(d: usize, m: usize) -> Self {
        JacobianTable { d, m, cols: vec![0.0; d * m], colsum: vec![0.0; d] }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.d..(j + 1) * self.d]
    }

    /// Sum of all columns, `J 1`.
    pub fn colsum(&self) -> &[f64] {
        &self.colsum
    }

    pub fn set_col(&mut self, j: usize, new: &[f64]) {
        let col = &mut self.cols[j * self.d..(j + 1) * self.d];
        for ((s, c), v) in self.colsum.iter_mut().zip(col).zip(new) {
            *s += v - *c;
            *c = *v;
        }
    }

    /// Replaces every column; used by SVRG-style full refreshes.
    pub fn refresh_all(&mut self, grads: &[Vec<f64>]) {
        debug_assert_eq!(grads.len(), self.m);
        self.colsum.fill(0.0);
        for (j, g) in grads.iter().enumerate() {
            self.cols[j * self.d..(j + 1) * self.d].copy_from_slice(g);
            for (s, v) in self.colsum.iter_mut().zip(g) {
                *s += v;
            }
        }
    }
}

/// Per-device gradient tables `J_i` and penalty shifts `Psi_i`, both zero
/// initialized.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlVariates {
    pub tables: Vec<JacobianTable>,
    pub shifts: Vec<Vec<f64>>,
}

impl ControlVariates {
    /// Zero state shaped for the given problem (table i has m_i columns).
    pub fn zeros(problem: &MixtureProblem) -> Self {
        let d = problem.d();
        let tables = problem.devices().iter().map(|dev| JacobianTable::zeros(d, dev.m())).collect();
        let shifts = vec![vec![0.0; d]; problem.n()];
        ControlVariates { tables, shifts }
    }

    /// Zero state with a single column per device, for full-gradient memory.
    pub fn zeros_single_column(n: usize, d: usize) -> Self {
        ControlVariates {
            tables: (0..n).map(|_| JacobianTable::zeros(d, 1)).collect(),
            shifts: vec![vec![0.0; d]; n],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colsum_tracks_column_updates() {
        let mut t = JacobianTable::zeros(2, 3);
        t.set_col(1, &[1.0, -2.0]);
        t.set_col(2, &[0.5, 0.5]);
        assert_eq!(t.colsum(), &[1.5, -1.5]);
        t.set_col(1, &[0.0, 0.0]);
        assert_eq!(t.colsum(), &[0.5, 0.5]);
        assert_eq!(t.col(2), &[0.5, 0.5]);
    }

    #[test]
    fn refresh_resets_everything() {
        let mut t = JacobianTable::zeros(2, 2);
        t.set_col(0, &[1.0, 1.0]);
        t.refresh_all(&[vec![2.0, 0.0], vec![0.0, 3.0]]);
        assert_eq!(t.col(0), &[2.0, 0.0]);
        assert_eq!(t.col(1), &[0.0, 3.0]);
        assert_eq!(t.colsum(), &[2.0, 3.0]);
    }
}
