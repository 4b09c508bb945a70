#![allow(dead_code)]

use ggml_precoding::channel::SystemConfig;
use ggml_precoding::linalg::{CMatrix, RngStream};
use ggml_precoding::metrics::PrecoderPair;

/// Random `K×N` channel with unit-variance entries.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut RngStream) -> CMatrix<f64> {
    CMatrix::from_fn(rows, cols, |_, _| rng.complex_gaussian(1.0))
}

/// Unit-modulus `F`, Gaussian `D`, unit power.
pub fn random_pair(n: usize, m: usize, k: usize, rng: &mut RngStream) -> PrecoderPair<f64> {
    let f = CMatrix::from_fn(n, m, |_, _| rng.unit_phasor());
    let d = gaussian_matrix(m, k, rng);
    PrecoderPair::new(f, d, 1.0).unwrap()
}

/// Config with unit power and the given noise variance and equal weights.
pub fn config(n: usize, m: usize, k: usize, noise_var: f64) -> SystemConfig {
    SystemConfig::new(n, m, k, 1.0, noise_var)
}

/// Non-uniform priorities summing to one.
pub fn skewed_config(n: usize, m: usize, k: usize, noise_var: f64) -> SystemConfig {
    let mut cfg = config(n, m, k, noise_var);
    let raw: Vec<f64> = (1..=k).map(|i| i as f64).collect();
    let s: f64 = raw.iter().sum();
    cfg.weights = raw.iter().map(|r| r / s).collect();
    cfg
}
