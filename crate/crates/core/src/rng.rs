//! Counter-based deterministic random generator.
//!
//! Every draw is a pure function of `(seed, stream, counter)`, so independent
//! streams for parallel work are cheap to derive and the full output sequence
//! is reproducible across platforms. The mixing function is the SplitMix64
//! finalizer; normal variates come from Box-Muller.

use num_complex::Complex64;

use crate::error::{invalid, Result};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic counter-based generator with a 64-bit seed.
///
/// Identical `(seed, stream)` pairs produce identical draw sequences; distinct
/// streams derived from the same seed are statistically independent.
#[derive(Debug, Clone)]
pub struct RngState {
    key: u64,
    counter: u64,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent stream `stream` of the generator seeded with `seed`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        RngState {
            key: mix64(seed ^ mix64(stream.wrapping_mul(GOLDEN_GAMMA))),
            counter: 0,
        }
    }

    /// Derive a child stream keyed by a list of indices (e.g. `(snr, trial)`).
    pub fn substream(seed: u64, parts: &[u64]) -> Self {
        let mut stream = 0u64;
        for &p in parts {
            stream = mix64(stream ^ p.wrapping_add(GOLDEN_GAMMA));
        }
        Self::with_stream(seed, stream)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let c = self.counter;
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key ^ c.wrapping_mul(GOLDEN_GAMMA))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`, rejection-sampled to avoid modulo bias.
    pub fn uniform_u64(&mut self, n: u64) -> u64 {
        assert!(n > 0, "uniform_u64 requires n > 0");
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// A pair of independent standard-normal variates (Box-Muller).
    pub fn standard_normal_pair(&mut self) -> (f64, f64) {
        // u1 in (0, 1] so the log is finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let phi = 2.0 * std::f64::consts::PI * u2;
        (r * phi.cos(), r * phi.sin())
    }

    /// Circularly-symmetric complex normal sample with per-entry variance
    /// `sigma^2` (each part has variance `sigma^2 / 2`).
    pub fn complex_normal(&mut self, sigma: f64) -> Result<Complex64> {
        if sigma < 0.0 {
            return Err(invalid(format!("noise sigma must be >= 0, got {sigma}")));
        }
        let (z0, z1) = self.standard_normal_pair();
        let scale = sigma / std::f64::consts::SQRT_2;
        Ok(Complex64::new(scale * z0, scale * z1))
    }
}
