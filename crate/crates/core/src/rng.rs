//! Seeded random source shared by every sampler.
//!
//! The generator is ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded through
//! `SeedableRng::seed_from_u64`. Each variate consumes exactly one `u64`:
//!
//! * `uniform()` maps the top 53 bits to `[0, 1)`;
//! * `standard_exponential()` returns `-ln(1 - u)` for one such uniform.
//!
//! Samplers document their own call order on top of this, so a given seed
//! always reproduces the same stream bit for bit.

use libm::log1p;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone)]
pub struct EventRng {
    inner: ChaCha8Rng,
}

impl EventRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_exponential(&mut self) -> f64 {
        -log1p(-self.uniform())
    }
}

/// SplitMix64 finalizer; decorrelates `(seed, index)` pairs into child seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
