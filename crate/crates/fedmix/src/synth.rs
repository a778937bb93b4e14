//! Built-in deterministic instance generators: quadratic problems with a
//! closed-form solution (the ground-truth oracle used across the test
//! suites) and a sparse binary-feature logistic dataset shaped like the
//! small LibSVM adult subset (1605 rows, 123 features, about one quarter
//! positive labels). The logistic generator emits LibSVM text so the
//! parser, normalizer and splitter run on it unchanged.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::losses::{DeviceFiniteSum, LossComponent};
use crate::model::StackedModel;
use crate::objective::MixtureProblem;

/// Random quadratic centers, one per device.
pub fn quadratic_centers(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect()
}

/// Problem with `f_i(z) = (1/2)||z - c_i||^2`.
pub fn quadratic_problem(lambda: f64, centers: &[Vec<f64>]) -> Result<MixtureProblem> {
    let devices = centers
        .iter()
        .map(|c| {
            DeviceFiniteSum::new(c.len(), vec![LossComponent::Quadratic { center: c.clone(), scale: 1.0 }], 0.0)
        })
        .collect::<Result<Vec<_>>>()?;
    MixtureProblem::new(lambda, devices)
}

/// The unique minimizer of the quadratic mixture problem,
/// `x_i(lambda) = (c_i + lambda cbar)/(1 + lambda)`, from the stationarity
/// conditions `x_i - c_i + lambda (x_i - xbar) = 0` and `xbar = cbar`.
pub fn quadratic_closed_form(centers: &[Vec<f64>], lambda: f64) -> StackedModel {
    let n = centers.len();
    let d = centers[0].len();
    let mut cbar = vec![0.0; d];
    for c in centers {
        for (a, v) in cbar.iter_mut().zip(c) {
            *a += v;
        }
    }
    for v in cbar.iter_mut() {
        *v /= n as f64;
    }
    let mut data = Vec::with_capacity(n * d);
    for c in centers {
        for k in 0..d {
            data.push((c[k] + lambda * cbar[k]) / (1.0 + lambda));
        }
    }
    StackedModel::new(n, d, data).expect("finite closed form")
}

/// Shape constants of the generated adult-style dataset.
pub const A1A_LIKE_ROWS: usize = 1605;
pub const A1A_LIKE_DIM: usize = 123;

/// Deterministic LibSVM text with the adult-subset shape: 1605 rows, 123
/// binary features, 13 to 15 active features per row, labels correlated
/// with a hidden hyperplane and roughly a quarter positive.
pub fn a1a_like_libsvm(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA1A0_5EED);
    let d = A1A_LIKE_DIM;
    let truth: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    // negative offset biases labels toward the majority class
    let offset = -0.9_f64;
    let mut out = String::with_capacity(A1A_LIKE_ROWS * 96);
    for _ in 0..A1A_LIKE_ROWS {
        let nnz = rng.gen_range(13..=15usize);
        // distinct 0-based feature ids via partial Fisher-Yates
        let mut pool: Vec<usize> = (0..d).collect();
        for t in 0..nnz {
            let j = rng.gen_range(t..d);
            pool.swap(t, j);
        }
        let mut ids = pool[..nnz].to_vec();
        ids.sort_unstable();
        let score: f64 = ids.iter().map(|&k| truth[k]).sum::<f64>() / (nnz as f64).sqrt() + offset;
        let noise: f64 = rng.gen_range(-1.0..1.0);
        let label = if score + 0.6 * noise > 0.0 { "+1" } else { "-1" };
        out.push_str(label);
        for k in ids.drain(..) {
            out.push_str(&format!(" {}:1", k + 1));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{normalize_rows, parse_libsvm, split, SplitMode};
    use std::io::Cursor;

    #[test]
    fn closed_form_satisfies_stationarity() {
        let centers = quadratic_centers(4, 3, 1);
        let lambda = 0.8;
        let x = quadratic_closed_form(&centers, lambda);
        let problem = quadratic_problem(lambda, &centers).unwrap();
        let g = problem.grad_smooth(&x).unwrap();
        assert!(g.norm() <= 1e-14, "gradient at closed form {}", g.norm());
    }

    #[test]
    fn generated_dataset_has_table_shape() {
        let text = a1a_like_libsvm(0);
        let ds = parse_libsvm(Cursor::new(text)).unwrap();
        assert_eq!(ds.len(), 1605);
        assert_eq!(ds.d, 123);
        let positives = ds.labels.iter().filter(|&&l| l > 0.0).count();
        let frac = positives as f64 / ds.len() as f64;
        assert!(frac > 0.1 && frac < 0.45, "positive fraction {frac}");
    }

    #[test]
    fn generated_dataset_is_deterministic() {
        assert_eq!(a1a_like_libsvm(3), a1a_like_libsvm(3));
        assert_ne!(a1a_like_libsvm(3), a1a_like_libsvm(4));
    }

    #[test]
    fn five_device_split_has_321_rows_each() {
        let mut ds = parse_libsvm(Cursor::new(a1a_like_libsvm(0))).unwrap();
        normalize_rows(&mut ds, 1.0).unwrap();
        let p = split(&ds, 5, SplitMode::Homogeneous, 7).unwrap();
        assert_eq!(p.m, 321);
        assert_eq!(p.dropped, 0);
    }
}
