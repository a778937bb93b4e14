//! Seeded randomness protocol shared by all solvers.
//!
//! A run owns several independent ChaCha streams derived from one 64-bit
//! seed: a master coin stream deciding local vs. aggregation steps, one
//! sampling stream per device, a participation stream, and one table-refresh
//! stream per device. Keeping the streams separate makes trajectories of
//! algorithm reductions coincide under a shared seed: a solver that never
//! touches a stream cannot desynchronize another solver that does.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// SplitMix64 finalizer; decorrelates related stream tags.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const COIN_TAG: u64 = 0x636f_696e; // "coin"
const PARTICIPATION_TAG: u64 = 0x7061_7274; // "part"
const DEVICE_TAG: u64 = 0x6465_7600_0000_0000; // "dev"
const REFRESH_TAG: u64 = 0x7376_7267_0000_0000; // "svrg"

pub fn coin_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ splitmix64(COIN_TAG))
}

pub fn participation_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ splitmix64(PARTICIPATION_TAG))
}

/// Per-device sampling stream, seeded by `seed ^ hash(device)`.
pub fn device_rng(seed: u64, device: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ splitmix64(DEVICE_TAG | device as u64))
}

/// Per-device stream for SVRG-style table refresh coins.
pub fn refresh_rng(seed: u64, device: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ splitmix64(REFRESH_TAG | device as u64))
}

/// Deterministic Bernoulli(p) coin stream. Bit k is a pure function of
/// (seed, k): the stream always consumes exactly one `f64` per bit.
#[derive(Debug, Clone)]
pub struct CoinStream {
    rng: ChaCha8Rng,
    p: f64,
}

impl CoinStream {
    pub fn new(seed: u64, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid("p", format!("{p} is outside (0,1)")));
        }
        Ok(CoinStream { rng: coin_rng(seed), p })
    }

    /// Next coin: `true` with probability p (aggregation step).
    pub fn next_coin(&mut self) -> bool {
        self.rng.gen::<f64>() < self.p
    }
}

impl Iterator for CoinStream {
    type Item = bool;

    fn next(&mut self) -> Option<bool> {
        Some(self.next_coin())
    }
}
