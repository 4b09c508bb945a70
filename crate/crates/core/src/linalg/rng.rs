//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 generator seeded from a 64-bit seed. Independent
//! sub-streams are derived with [`RngStream::derive`], which mixes
//! `(seed, index)` through SplitMix64; the harness uses this as the
//! `(master seed, realization index)` split rule.

use std::f64::consts::PI;

use num_complex::Complex;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{contract, Result};
use crate::scalar::{Real, C};

/// Name of the generator, echoed into experiment headers.
pub const RNG_ALGORITHM: &str = "chacha8";

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded pseudo-random stream with a draw counter.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
    draws: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            draws: 0,
        }
    }

    /// Seed of the sub-stream `index` under `seed`.
    pub fn derive_seed(seed: u64, index: u64) -> u64 {
        splitmix64(splitmix64(seed) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
    }

    /// Independent stream for `(seed, index)`.
    pub fn derive(seed: u64, index: u64) -> Self {
        Self::new(Self::derive_seed(seed, index))
    }

    /// Child stream keyed by `index` under this stream's seed; does not consume draws.
    pub fn child(&self, index: u64) -> Self {
        Self::derive(self.seed, index)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of primitive draws taken so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn next_u64(&mut self) -> u64 {
        self.draws += 1;
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.draws += 1;
        self.rng.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.draws += 1;
        self.rng.sample(StandardNormal)
    }

    pub fn normal<T: Real>(&mut self, std: f64) -> T {
        T::of(self.standard_normal() * std)
    }

    /// Uniform phase in `[0, 2π)`.
    pub fn uniform_angle(&mut self) -> f64 {
        self.uniform() * 2.0 * PI
    }

    /// Circularly-symmetric complex Gaussian with `E|z|² = variance`.
    pub fn complex_gaussian<T: Real>(&mut self, variance: f64) -> C<T> {
        let s = (variance / 2.0).sqrt();
        let re = self.standard_normal() * s;
        let im = self.standard_normal() * s;
        Complex::new(T::of(re), T::of(im))
    }

    /// Unit-modulus complex number with uniform phase.
    pub fn unit_phasor<T: Real>(&mut self) -> C<T> {
        let a = self.uniform_angle();
        Complex::new(T::of(a.cos()), T::of(a.sin()))
    }
}

/// `n` i.i.d. circularly-symmetric complex Gaussians with per-entry variance
/// `variance` (real and imaginary parts each `variance/2`).
pub fn sample_complex_gaussian<T: Real>(
    rng: &mut RngStream,
    n: usize,
    variance: f64,
) -> Result<Vec<C<T>>> {
    contract!(
        variance >= 0.0 && variance.is_finite(),
        "variance must be finite and non-negative, got {variance}"
    );
    Ok((0..n).map(|_| rng.complex_gaussian(variance)).collect())
}

/// Laplace(location, scale) draw wrapped into `[0, 2π)`.
pub fn sample_laplace_angle(rng: &mut RngStream, location: f64, scale: f64) -> Result<f64> {
    contract!(
        scale > 0.0 && scale.is_finite(),
        "Laplace scale must be positive, got {scale}"
    );
    // inverse CDF on u ∈ (-1/2, 1/2)
    let u = rng.uniform() - 0.5;
    let x = location - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln();
    Ok(wrap_angle(x))
}

/// Reduce an angle into `[0, 2π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let tau = 2.0 * PI;
    let r = x.rem_euclid(tau);
    // rem_euclid can round up to exactly τ for tiny negative inputs
    if r >= tau {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_seeds_identical_streams() {
        let mut a = RngStream::new(42);
        let mut b = RngStream::new(42);
        let xa: Vec<u64> = (0..64).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..64).map(|_| b.next_u64()).collect();
        assert_eq!(xa, xb);
        assert_eq!(a.draws(), 64);
        let va = sample_complex_gaussian::<f64>(&mut RngStream::new(3), 16, 1.0).unwrap();
        let vb = sample_complex_gaussian::<f64>(&mut RngStream::new(3), 16, 1.0).unwrap();
        assert_eq!(va, vb);
    }

    #[test]
    fn derived_streams_differ() {
        assert_ne!(RngStream::derive_seed(1, 0), RngStream::derive_seed(1, 1));
        assert_ne!(RngStream::derive_seed(1, 0), RngStream::derive_seed(2, 0));
        assert_eq!(RngStream::derive_seed(9, 7), RngStream::derive_seed(9, 7));
    }

    #[test]
    fn zero_variance_gives_zeros() {
        let v = sample_complex_gaussian::<f64>(&mut RngStream::new(1), 8, 0.0).unwrap();
        assert!(v.iter().all(|z| z.re == 0.0 && z.im == 0.0));
        assert!(sample_complex_gaussian::<f64>(&mut RngStream::new(1), 8, -1.0).is_err());
    }

    #[test]
    fn gaussian_power_matches_variance() {
        let mut rng = RngStream::new(11);
        let v = sample_complex_gaussian::<f64>(&mut rng, 100_000, 1.0).unwrap();
        let p = v.iter().map(|z| z.norm_sqr()).sum::<f64>() / v.len() as f64;
        assert!((p - 1.0).abs() < 0.02, "mean power {p}");
    }

    #[test]
    fn laplace_range_median_and_degenerate_limit() {
        let mut rng = RngStream::new(5);
        let loc = 1.0;
        let mut xs: Vec<f64> = (0..100_000)
            .map(|_| sample_laplace_angle(&mut rng, loc, 0.1).unwrap())
            .collect();
        assert!(xs.iter().all(|&x| (0.0..2.0 * PI).contains(&x)));
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = xs[xs.len() / 2];
        assert!((median - loc).abs() < 0.01, "median {median}");

        let x = sample_laplace_angle(&mut rng, -0.5, 1e-12).unwrap();
        assert!((x - (2.0 * PI - 0.5)).abs() < 1e-9);
        assert!(sample_laplace_angle(&mut rng, 0.0, 0.0).is_err());
    }

    #[test]
    fn wrap_angle_edges() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!(wrap_angle(-1e-18) < 2.0 * PI);
        assert!((wrap_angle(2.0 * PI + 0.25) - 0.25).abs() < 1e-12);
    }
}
