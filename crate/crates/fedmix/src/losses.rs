//! Device objectives: finite sums of logistic or quadratic components.
//!
//! Each device owns `f_i(z) = (1/m) sum_j f_{i,j}(z)` where every component
//! carries its share of the ridge term, so the finite-sum average is exactly
//! the regularized device loss:
//!
//! * logistic: `f_{i,j}(z) = log(1 + exp(b_j * <a_j, z>)) + (mu/2)||z||^2`
//! * quadratic: `f_{i,j}(z) = (s/2)||z - c||^2 + (mu/2)||z||^2`
//!
//! Folding the ridge into every component keeps the components smooth and
//! convex while `f_i` stays `mu`-strongly convex, which is what the
//! variance-reduced estimators assume.

use crate::error::{Error, Result};

/// Sparse vector with strictly increasing 0-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn new(indices: Vec<u32>, values: Vec<f64>) -> Self {
        debug_assert_eq!(indices.len(), values.len());
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        SparseRow { indices, values }
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            acc += dense[i as usize] * v;
        }
        acc
    }

    /// `dense += c * self`
    pub fn axpy_into(&self, c: f64, dense: &mut [f64]) {
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            dense[i as usize] += c * v;
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, c: f64) {
        for v in self.values.iter_mut() {
            *v *= c;
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

/// One summand of a device objective, before the ridge term is added.
#[derive(Debug, Clone)]
pub enum LossComponent {
    /// `log(1 + exp(b * <a, z>))` with label `b` in {-1, +1}.
    Logistic { row: SparseRow, label: f64 },
    /// `(s/2) ||z - c||^2` with scale `s > 0`.
    Quadratic { center: Vec<f64>, scale: f64 },
}

/// Numerically stable `log(1 + exp(t))`.
fn log1pexp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Numerically stable logistic sigmoid `1 / (1 + exp(-t))`.
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// A device's finite-sum objective with ridge modulus `mu >= 0` folded into
/// every component.
#[derive(Debug, Clone)]
pub struct DeviceFiniteSum {
    d: usize,
    components: Vec<LossComponent>,
    ridge: f64,
}

/// Per-component and per-device smoothness/strong-convexity constants.
#[derive(Debug, Clone)]
pub struct SmoothnessProfile {
    /// Smoothness of each component, `L_{i,j}`.
    pub components: Vec<f64>,
    /// Device smoothness upper bound, `max_j L_{i,j}`.
    pub local: f64,
    /// Strong convexity modulus of the device objective.
    pub mu: f64,
}

impl DeviceFiniteSum {
    pub fn new(d: usize, components: Vec<LossComponent>, ridge: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("components", "m must be at least 1"));
        }
        if !(ridge >= 0.0 && ridge.is_finite()) {
            return Err(Error::invalid("ridge", "mu must be finite and >= 0"));
        }
        for c in &components {
            match c {
                LossComponent::Logistic { row, label } => {
                    if *label != 1.0 && *label != -1.0 {
                        return Err(Error::invalid("label", format!("{label} not in {{-1,+1}}")));
                    }
                    if let Some(&max) = row.indices.iter().max() {
                        if max as usize >= d {
                            return Err(Error::DimensionMismatch { expected: d, got: max as usize + 1 });
                        }
                    }
                }
                LossComponent::Quadratic { center, scale } => {
                    if center.len() != d {
                        return Err(Error::DimensionMismatch { expected: d, got: center.len() });
                    }
                    if !(*scale > 0.0) {
                        return Err(Error::invalid("scale", "must be positive"));
                    }
                }
            }
        }
        Ok(DeviceFiniteSum { d, components, ridge })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of components m.
    pub fn m(&self) -> usize {
        self.components.len()
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn component(&self, j: usize) -> &LossComponent {
        &self.components[j]
    }

    /// Value of component j at z (ridge included).
    pub fn component_value(&self, j: usize, z: &[f64]) -> f64 {
        let ridge = 0.5 * self.ridge * z.iter().map(|v| v * v).sum::<f64>();
        match &self.components[j] {
            LossComponent::Logistic { row, label } => log1pexp(label * row.dot(z)) + ridge,
            LossComponent::Quadratic { center, scale } => {
                let q: f64 = z.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                0.5 * scale * q + ridge
            }
        }
    }

    /// Gradient of component j at z, written into `out` (ridge included).
    pub fn component_grad_into(&self, j: usize, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.d);
        debug_assert_eq!(out.len(), self.d);
        match &self.components[j] {
            LossComponent::Logistic { row, label } => {
                let t = label * row.dot(z);
                let coeff = label * sigmoid(t);
                for (o, v) in out.iter_mut().zip(z) {
                    *o = self.ridge * v;
                }
                row.axpy_into(coeff, out);
            }
            LossComponent::Quadratic { center, scale } => {
                for k in 0..self.d {
                    out[k] = scale * (z[k] - center[k]) + self.ridge * z[k];
                }
            }
        }
    }

    /// Gradient of component j, with bounds checking on j.
    pub fn component_grad(&self, j: usize, z: &[f64]) -> Result<Vec<f64>> {
        if j >= self.m() {
            return Err(Error::IndexOutOfRange { index: j, len: self.m() });
        }
        let mut out = vec![0.0; self.d];
        self.component_grad_into(j, z, &mut out);
        Ok(out)
    }

    /// Full device gradient `(1/m) sum_j grad f_{i,j}(z)`, accumulated in
    /// component order.
    pub fn local_grad_into(&self, z: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut tmp = vec![0.0; self.d];
        for j in 0..self.m() {
            self.component_grad_into(j, z, &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += t;
            }
        }
        let inv_m = 1.0 / self.m() as f64;
        for o in out.iter_mut() {
            *o *= inv_m;
        }
    }

    pub fn local_grad(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.local_grad_into(z, &mut out);
        out
    }

    /// Device objective value `(1/m) sum_j f_{i,j}(z)`.
    pub fn local_value(&self, z: &[f64]) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.m() {
            acc += self.component_value(j, z);
        }
        acc / self.m() as f64
    }

    /// Smoothness constants. Logistic curvature is bounded by `||a||^2 / 4`,
    /// quadratic by its scale; the device bound is the max over components.
    /// The strong-convexity modulus is the ridge plus the average quadratic
    /// curvature (logistic components contribute no lower curvature bound).
    pub fn smoothness_profile(&self) -> SmoothnessProfile {
        let components: Vec<f64> = self
            .components
            .iter()
            .map(|c| match c {
                LossComponent::Logistic { row, .. } => row.norm().powi(2) / 4.0 + self.ridge,
                LossComponent::Quadratic { scale, .. } => scale + self.ridge,
            })
            .collect();
        let local = components.iter().cloned().fold(f64::MIN, f64::max);
        let quad_curvature: f64 = self
            .components
            .iter()
            .map(|c| match c {
                LossComponent::Quadratic { scale, .. } => *scale,
                LossComponent::Logistic { .. } => 0.0,
            })
            .sum::<f64>()
            / self.m() as f64;
        SmoothnessProfile { components, local, mu: self.ridge + quad_curvature }
    }
}
