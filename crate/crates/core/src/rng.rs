//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 generator (RFC 7539 block function, 8 rounds)
//! seeded through `seed_from_u64`. Only raw 64-bit outputs are consumed, and
//! the conversions to uniforms and normals are spelled out here so another
//! implementation can reproduce the same draws:
//!
//! * uniform in `[0, 1)`: `(next_u64() >> 11) * 2^-53`
//! * uniform in `(0, 1]`: `1 - uniform[0, 1)`
//! * standard normal: Box–Muller, consuming two uniforms `u1 ∈ (0, 1]` and
//!   `u2 ∈ [0, 1)` and emitting `sqrt(-2 ln u1) cos(2π u2)` followed by
//!   `sqrt(-2 ln u1) sin(2π u2)`.
//!
//! Sub-streams (per replicate, per purpose) derive their seed with
//! [`derive_seed`], a SplitMix64 finalizer over the master seed and the
//! stream index.

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sub-stream `index` of `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index.wrapping_mul(GOLDEN_GAMMA))
}

/// Seeded random stream with explicit uniform and normal conversions.
#[derive(Debug, Clone)]
pub struct Stream {
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw in `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Bernoulli draw: true with probability `prob`.
    pub fn bernoulli(&mut self, prob: f64) -> bool {
        self.uniform() < prob
    }

    /// Standard normal draw (Box–Muller pairs).
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }
}
