//! The mixture objective `F(x) = f(x) + lambda * psi(x) + R(x)` where
//! `f(x) = (1/n) sum_i f_i(x_i)` couples nothing across devices, `psi`
//! penalizes deviation from the average model, and `R` is an optional
//! separable proximable regularizer (zero by default).

use crate::error::{Error, Result};
use crate::losses::DeviceFiniteSum;
use crate::model::{block_average, psi, StackedModel};

/// Separable proximable regularizer attached to one device.
#[derive(Debug, Clone, PartialEq)]
pub enum Regularizer {
    /// The zero function; its prox is the identity.
    Zero,
    /// `w * ||z||_1`; prox is soft thresholding.
    L1 { weight: f64 },
}

impl Regularizer {
    pub fn value(&self, z: &[f64]) -> f64 {
        match self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { weight } => weight * z.iter().map(|v| v.abs()).sum::<f64>(),
        }
    }

    /// `prox_{t R}(z)`, in place.
    pub fn prox_in_place(&self, t: f64, z: &mut [f64]) {
        match self {
            Regularizer::Zero => {}
            Regularizer::L1 { weight } => {
                let thr = t * weight;
                for v in z.iter_mut() {
                    *v = if *v > thr {
                        *v - thr
                    } else if *v < -thr {
                        *v + thr
                    } else {
                        0.0
                    };
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Regularizer::Zero)
    }
}

/// The full problem instance: penalty weight, device objectives and optional
/// per-device regularizers.
#[derive(Debug, Clone)]
pub struct MixtureProblem {
    lambda: f64,
    devices: Vec<DeviceFiniteSum>,
    regularizers: Vec<Regularizer>,
}

impl MixtureProblem {
    pub fn new(lambda: f64, devices: Vec<DeviceFiniteSum>) -> Result<Self> {
        let n = devices.len();
        Self::with_regularizers(lambda, devices, vec![Regularizer::Zero; n])
    }

    pub fn with_regularizers(
        lambda: f64,
        devices: Vec<DeviceFiniteSum>,
        regularizers: Vec<Regularizer>,
    ) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", "must be finite and >= 0"));
        }
        if devices.is_empty() {
            return Err(Error::invalid("devices", "need at least one device"));
        }
        let d = devices[0].d();
        if devices.iter().any(|dev| dev.d() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: 0 });
        }
        if regularizers.len() != devices.len() {
            return Err(Error::DimensionMismatch {
                expected: devices.len(),
                got: regularizers.len(),
            });
        }
        Ok(MixtureProblem { lambda, devices, regularizers })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Same devices and regularizers with a different penalty weight.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::with_regularizers(lambda, self.devices.clone(), self.regularizers.clone())
    }

    pub fn n(&self) -> usize {
        self.devices.len()
    }

    pub fn d(&self) -> usize {
        self.devices[0].d()
    }

    pub fn device(&self, i: usize) -> &DeviceFiniteSum {
        &self.devices[i]
    }

    pub fn devices(&self) -> &[DeviceFiniteSum] {
        &self.devices
    }

    pub fn regularizer(&self, i: usize) -> &Regularizer {
        &self.regularizers[i]
    }

    pub fn has_regularizers(&self) -> bool {
        self.regularizers.iter().any(|r| !r.is_zero())
    }

    /// Total number of components `N = sum_i m_i`.
    pub fn total_components(&self) -> usize {
        self.devices.iter().map(|d| d.m()).sum()
    }

    /// True when every device has the same component count.
    pub fn uniform_m(&self) -> Option<usize> {
        let m = self.devices[0].m();
        self.devices.iter().all(|d| d.m() == m).then_some(m)
    }

    fn check_dims(&self, x: &StackedModel) -> Result<()> {
        if x.n() != self.n() || x.d() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.n() * self.d(),
                got: x.n() * x.d(),
            });
        }
        Ok(())
    }

    /// `f(x) = (1/n) sum_i f_i(x_i)`, the smooth loss part without penalty
    /// or regularizer.
    pub fn loss_value(&self, x: &StackedModel) -> Result<f64> {
        self.check_dims(x)?;
        let mut acc = 0.0;
        for (i, dev) in self.devices.iter().enumerate() {
            acc += dev.local_value(x.block(i));
        }
        Ok(acc / self.n() as f64)
    }

    /// Full objective `F(x) = f(x) + lambda psi(x) + sum_i R_i(x_i)`.
    pub fn objective_value(&self, x: &StackedModel) -> Result<f64> {
        self.check_dims(x)?;
        let mut acc = self.loss_value(x)? + self.lambda * psi(x);
        for (i, r) in self.regularizers.iter().enumerate() {
            acc += r.value(x.block(i));
        }
        Ok(acc)
    }

    /// Gradient of the smooth part `f + lambda psi`: block i is
    /// `(1/n) grad f_i(x_i) + (lambda/n)(x_i - mean(x))`.
    pub fn grad_smooth(&self, x: &StackedModel) -> Result<StackedModel> {
        self.check_dims(x)?;
        let avg = block_average(x);
        let n = self.n() as f64;
        let mut g = StackedModel::zeros(x.n(), x.d());
        let mut tmp = vec![0.0; self.d()];
        for i in 0..self.n() {
            self.devices[i].local_grad_into(x.block(i), &mut tmp);
            let xi = x.block(i);
            let dst = g.block_mut(i);
            for k in 0..x.d() {
                dst[k] = tmp[k] / n + self.lambda * (xi[k] - avg[k]) / n;
            }
        }
        Ok(g)
    }
}
