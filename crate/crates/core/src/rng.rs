//! Deterministic random streams.
//!
//! Everything random in this crate draws from [`Stream`], a ChaCha8
//! generator with the uniform and normal mappings written out explicitly,
//! so identical seeds give bit-identical draws on every platform. Ensemble
//! members use [`Stream::substream`], which derives an independent seed
//! from `(seed, index)`; generation order therefore never affects results.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// One SplitMix64 output step.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a stream index into a fresh 64-bit seed.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    splitmix(splitmix(z))
}

#[derive(Clone, Debug)]
pub struct Stream {
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Independent stream for ensemble member `index` of `seed`.
    pub fn substream(seed: u64, index: u64) -> Self {
        Stream::new(mix_seed(seed, index))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`; degenerate ranges return `lo`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.uniform() * (hi - lo)
    }

    /// Standard normal via Box-Muller; the second variate is cached.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // u1 in (0, 1] so the log is finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }
}
