//! Seed derivation and row sampling.
//!
//! Every random stream in the crate is a `ChaCha8Rng` keyed by a derived
//! 64-bit seed. Trajectories draw exactly one `u64` per iteration, so the
//! row used at iteration `k` is word `k` of the stream no matter what else
//! the caller records.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministically combine a base seed with a stream index.
pub fn mix_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream.wrapping_add(0x632B_E59B_D9B4_E019)))
}

pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Row index distribution for the stochastic methods.
#[derive(Debug, Clone)]
pub enum RowSampler {
    Uniform { rows: usize },
    /// Inverse-CDF sampling over cumulative weights.
    Weighted { cumulative: Vec<f64> },
}

impl RowSampler {
    pub fn uniform(rows: usize) -> Self {
        RowSampler::Uniform { rows }
    }

    pub fn weighted(weights: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        RowSampler::Weighted { cumulative }
    }

    /// Map one raw 64-bit draw to a 0-based row index.
    pub fn index(&self, raw: u64) -> usize {
        match self {
            RowSampler::Uniform { rows } => ((raw as u128 * *rows as u128) >> 64) as usize,
            RowSampler::Weighted { cumulative } => {
                let total = *cumulative.last().expect("at least one row");
                let u = (raw >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * total;
                let i = cumulative.partition_point(|&c| c <= u);
                i.min(cumulative.len() - 1)
            }
        }
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        self.index(rng.next_u64())
    }
}
