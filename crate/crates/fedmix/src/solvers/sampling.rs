//! Device-participation and local-subsampling schemes for the partial
//! participation solver, with exact outcome enumeration for expectation
//! checks.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// How the active device set is drawn on a local round.
#[derive(Debug, Clone, PartialEq)]
pub enum ParticipationScheme {
    /// Every device participates in every local round; draws nothing.
    Full,
    /// Device i participates independently with probability `probs[i]`.
    Bernoulli { probs: Vec<f64> },
    /// Explicit distribution over device subsets.
    Choice { subsets: Vec<(Vec<usize>, f64)> },
}

impl ParticipationScheme {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            ParticipationScheme::Full => Ok(()),
            ParticipationScheme::Bernoulli { probs } => {
                if probs.len() != n {
                    return Err(Error::invalid("participation_probs", format!("need {n} entries")));
                }
                if probs.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
                    return Err(Error::invalid("participation_probs", "entries must be in (0,1]"));
                }
                Ok(())
            }
            ParticipationScheme::Choice { subsets } => {
                let total: f64 = subsets.iter().map(|(_, p)| p).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::invalid("participation", "subset probabilities must sum to 1"));
                }
                for (s, p) in subsets {
                    if !(*p >= 0.0) || s.iter().any(|&i| i >= n) {
                        return Err(Error::invalid("participation", "bad subset"));
                    }
                }
                // every device must have positive marginal so the estimator stays unbiased
                for i in 0..n {
                    if self.marginal(i) <= 0.0 {
                        return Err(Error::invalid(
                            "participation",
                            format!("device {i} has zero participation probability"),
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    /// `P(i in S)`.
    pub fn marginal(&self, device: usize) -> f64 {
        match self {
            ParticipationScheme::Full => 1.0,
            ParticipationScheme::Bernoulli { probs } => probs[device],
            ParticipationScheme::Choice { subsets } => subsets
                .iter()
                .filter(|(s, _)| s.contains(&device))
                .map(|(_, p)| p)
                .sum(),
        }
    }

    /// Draws the active set, ascending. `Full` consumes no randomness.
    pub fn draw(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        match self {
            ParticipationScheme::Full => (0..n).collect(),
            ParticipationScheme::Bernoulli { probs } => (0..n)
                .filter(|&i| rng.gen::<f64>() < probs[i])
                .collect(),
            ParticipationScheme::Choice { subsets } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (s, p) in subsets {
                    acc += p;
                    if u < acc {
                        let mut s = s.clone();
                        s.sort_unstable();
                        return s;
                    }
                }
                let mut s = subsets.last().expect("nonempty").0.clone();
                s.sort_unstable();
                s
            }
        }
    }

    /// All possible active sets with probabilities.
    pub fn outcomes(&self, n: usize) -> Vec<(Vec<usize>, f64)> {
        match self {
            ParticipationScheme::Full => vec![((0..n).collect(), 1.0)],
            ParticipationScheme::Bernoulli { probs } => {
                let mut out = Vec::with_capacity(1 << n);
                for mask in 0u32..(1 << n) {
                    let mut p = 1.0;
                    let mut set = Vec::new();
                    for i in 0..n {
                        if mask & (1 << i) != 0 {
                            p *= probs[i];
                            set.push(i);
                        } else {
                            p *= 1.0 - probs[i];
                        }
                    }
                    out.push((set, p));
                }
                out
            }
            ParticipationScheme::Choice { subsets } => subsets
                .iter()
                .map(|(s, p)| {
                    let mut s = s.clone();
                    s.sort_unstable();
                    (s, *p)
                })
                .collect(),
        }
    }
}

/// How an active device subsamples its components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalSampling {
    /// One component, uniformly at random.
    SingleUniform,
    /// A uniformly random subset of fixed size tau.
    TauNice { tau: usize },
}

impl LocalSampling {
    pub fn validate(&self, m: usize) -> Result<()> {
        match self {
            LocalSampling::SingleUniform => Ok(()),
            LocalSampling::TauNice { tau } => {
                if *tau == 0 || *tau > m {
                    return Err(Error::invalid("sampling", format!("tau {tau} not in 1..={m}")));
                }
                Ok(())
            }
        }
    }

    /// `P(j in S_i)`, identical across j for these schemes.
    pub fn marginal(&self, m: usize) -> f64 {
        match self {
            LocalSampling::SingleUniform => 1.0 / m as f64,
            LocalSampling::TauNice { tau } => *tau as f64 / m as f64,
        }
    }

    /// Draws a sorted component subset.
    pub fn draw(&self, m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        match self {
            LocalSampling::SingleUniform => vec![rng.gen_range(0..m)],
            LocalSampling::TauNice { tau } => {
                // partial Fisher-Yates over 0..m
                let mut pool: Vec<usize> = (0..m).collect();
                for t in 0..*tau {
                    let j = rng.gen_range(t..m);
                    pool.swap(t, j);
                }
                let mut s = pool[..*tau].to_vec();
                s.sort_unstable();
                s
            }
        }
    }

    /// All subsets with probabilities (test scale only).
    pub fn outcomes(&self, m: usize) -> Vec<(Vec<usize>, f64)> {
        match self {
            LocalSampling::SingleUniform => {
                (0..m).map(|j| (vec![j], 1.0 / m as f64)).collect()
            }
            LocalSampling::TauNice { tau } => {
                let mut out = Vec::new();
                let mut subset: Vec<usize> = Vec::new();
                enumerate_subsets(m, *tau, 0, &mut subset, &mut out);
                let p = 1.0 / out.len() as f64;
                out.into_iter().map(|s| (s, p)).collect()
            }
        }
    }

    /// Default per-component stepsize constants `v_{i,j}` for this sampling:
    /// the component smoothness for single-element draws, scaled by tau for
    /// tau-nice subsets (a conservative upper bound; overridable).
    pub fn default_eso_v(&self, component_l: &[f64]) -> Vec<f64> {
        match self {
            LocalSampling::SingleUniform => component_l.to_vec(),
            LocalSampling::TauNice { tau } => {
                component_l.iter().map(|l| l * *tau as f64).collect()
            }
        }
    }
}

fn enumerate_subsets(m: usize, tau: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == tau {
        out.push(cur.clone());
        return;
    }
    for j in start..m {
        cur.push(j);
        enumerate_subsets(m, tau, j + 1, cur, out);
        cur.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn single_uniform_outcomes_sum_to_one() {
        let outs = LocalSampling::SingleUniform.outcomes(4);
        assert_eq!(outs.len(), 4);
        let total: f64 = outs.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tau_nice_enumerates_binomial_many_subsets() {
        let outs = LocalSampling::TauNice { tau: 2 }.outcomes(4);
        assert_eq!(outs.len(), 6);
        assert!(outs.iter().all(|(s, _)| s.len() == 2));
    }

    #[test]
    fn tau_nice_draw_is_uniform_over_subsets() {
        let sampling = LocalSampling::TauNice { tau: 2 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = std::collections::HashMap::new();
        let trials = 60_000;
        for _ in 0..trials {
            let s = sampling.draw(4, &mut rng);
            *counts.entry(s).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        for (_, c) in counts {
            let freq = c as f64 / trials as f64;
            assert!((freq - 1.0 / 6.0).abs() < 0.01, "{freq}");
        }
    }

    #[test]
    fn bernoulli_marginals_and_outcomes_agree() {
        let scheme = ParticipationScheme::Bernoulli { probs: vec![0.25, 0.75] };
        let outs = scheme.outcomes(2);
        let total: f64 = outs.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-15);
        for dev in 0..2 {
            let marg: f64 = outs.iter().filter(|(s, _)| s.contains(&dev)).map(|(_, p)| p).sum();
            assert!((marg - scheme.marginal(dev)).abs() < 1e-15);
        }
    }

    #[test]
    fn choice_scheme_draws_listed_subsets() {
        let scheme = ParticipationScheme::Choice {
            subsets: vec![(vec![0], 0.3), (vec![0, 1], 0.7)],
        };
        scheme.validate(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut saw_small = 0;
        for _ in 0..10_000 {
            let s = scheme.draw(2, &mut rng);
            if s == vec![0] {
                saw_small += 1;
            } else {
                assert_eq!(s, vec![0, 1]);
            }
        }
        let freq = saw_small as f64 / 10_000.0;
        assert!((freq - 0.3).abs() < 0.02);
    }

    #[test]
    fn zero_marginal_participation_is_rejected() {
        let scheme = ParticipationScheme::Choice { subsets: vec![(vec![0], 1.0)] };
        assert!(scheme.validate(2).is_err());
    }
}
