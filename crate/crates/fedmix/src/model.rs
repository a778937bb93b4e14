//! Stacked model space and the consensus penalty.
//!
//! A [`StackedModel`] holds one d-dimensional parameter vector per device,
//! stored contiguously as n length-d blocks. The penalty
//! `psi(x) = (1/2n) sum_i ||x_i - mean(x)||^2` measures how far the device
//! models are from their average; its gradient block is `(x_i - mean(x))/n`
//! and its (constant) Hessian has largest eigenvalue `1/n`.

use crate::error::{Error, Result};

/// n device models of dimension d, stored as n contiguous length-d blocks.
/// Block indexing is 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedModel {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl StackedModel {
    /// Builds a model from a flat buffer of length `n * d`. Rejects empty
    /// shapes and non-finite entries.
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::invalid("n/d", "device count and dimension must be positive"));
        }
        if data.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                got: data.len(),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { context: "StackedModel::new" });
        }
        Ok(StackedModel { n, d, data })
    }

    /// All-zero model.
    pub fn zeros(n: usize, d: usize) -> Self {
        StackedModel { n, d, data: vec![0.0; n * d] }
    }

    /// Every block set to the same vector `v`.
    pub fn replicate(n: usize, v: &[f64]) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::invalid("v", "dimension must be positive"));
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite { context: "StackedModel::replicate" });
        }
        let d = v.len();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            data.extend_from_slice(v);
        }
        Ok(StackedModel { n, d, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Euclidean norm over the full stacked vector.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Squared Euclidean distance to another stacked model.
    pub fn dist_sq(&self, other: &StackedModel) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// `self <- self + c * other`, blockwise over the whole stack.
    pub fn axpy(&mut self, c: f64, other: &StackedModel) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }
}

/// Average of the device blocks, `(1/n) sum_i x_i`. Blocks are summed in
/// index order so the result is bit-stable across runs.
pub fn block_average(x: &StackedModel) -> Vec<f64> {
    let mut avg = vec![0.0; x.d()];
    for i in 0..x.n() {
        for (a, v) in avg.iter_mut().zip(x.block(i)) {
            *a += v;
        }
    }
    let inv = 1.0 / x.n() as f64;
    for a in avg.iter_mut() {
        *a *= inv;
    }
    avg
}

/// Consensus penalty `psi(x) = (1/2n) sum_i ||x_i - mean(x)||^2`.
pub fn psi(x: &StackedModel) -> f64 {
    let avg = block_average(x);
    let mut acc = 0.0;
    for i in 0..x.n() {
        for (v, a) in x.block(i).iter().zip(&avg) {
            let diff = v - a;
            acc += diff * diff;
        }
    }
    acc / (2.0 * x.n() as f64)
}

/// Gradient of `psi`: block i is `(x_i - mean(x))/n`. The blocks sum to zero.
pub fn grad_psi(x: &StackedModel) -> StackedModel {
    let avg = block_average(x);
    let mut g = StackedModel::zeros(x.n(), x.d());
    let inv_n = 1.0 / x.n() as f64;
    for i in 0..x.n() {
        let src = x.block(i);
        let dst = g.block_mut(i);
        for k in 0..x.d() {
            dst[k] = (src[k] - avg[k]) * inv_n;
        }
    }
    g
}

/// Small dense matrix, row-major. Only used for test-scale Hessian checks.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            out[r] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }
}

/// The constant Hessian of `psi` as an `nd x nd` dense matrix:
/// `(1/n) (I_n - (1/n) 1 1^T) (x) I_d`. Its eigenvalues are `1/n` with
/// multiplicity `d(n-1)` and `0` with multiplicity `d`. Test scale only;
/// sizes with `n*d > 10^4` are rejected.
pub fn psi_hessian_dense(n: usize, d: usize) -> Result<DenseMatrix> {
    let nd = n * d;
    if nd > 10_000 {
        return Err(Error::SizeLimit(format!("n*d = {nd} exceeds 10^4")));
    }
    let nf = n as f64;
    let diag = (1.0 - 1.0 / nf) / nf;
    let off = -1.0 / (nf * nf);
    let mut data = vec![0.0; nd * nd];
    for bi in 0..n {
        for bj in 0..n {
            let v = if bi == bj { diag } else { off };
            for k in 0..d {
                let r = bi * d + k;
                let c = bj * d + k;
                data[r * nd + c] = v;
            }
        }
    }
    Ok(DenseMatrix { rows: nd, cols: nd, data })
}
