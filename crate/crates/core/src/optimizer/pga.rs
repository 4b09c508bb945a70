//! Projected gradient descent on the hybrid loss: GGML with the networks
//! replaced by fixed step sizes.

use serde::{Deserialize, Serialize};

use super::ggml::Tracker;
use super::precoder::{init_precoders, project_unit_modulus, scale_to_power};
use super::trace::IterationTrace;
use crate::channel::SystemConfig;
use crate::error::{contract, Result};
use crate::linalg::{CMatrix, RngStream};
use crate::metrics::{grad_loss, Objective, PrecoderPair};
use crate::scalar::Real;

/// Step sizes picked by a grid search at N=64, M=K=4, SNR 10 dB on seeds
/// disjoint from the evaluation seeds.
pub const DEFAULT_PGA_STEP_DIGITAL: f64 = 1e-4;
pub const DEFAULT_PGA_STEP_ANALOG: f64 = 8.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PgaConfig {
    pub iterations: usize,
    pub step_digital: f64,
    pub step_analog: f64,
    pub beta: f64,
    /// Seed of the initialization; matches GGML's for paired comparisons.
    pub seed: u64,
    pub track_best: bool,
}

impl Default for PgaConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            step_digital: DEFAULT_PGA_STEP_DIGITAL,
            step_analog: DEFAULT_PGA_STEP_ANALOG,
            beta: 0.1,
            seed: 0,
            track_best: true,
        }
    }
}

impl PgaConfig {
    pub fn validate(&self) -> Result<()> {
        contract!(self.iterations >= 1, "iteration budget must be at least 1");
        contract!(
            self.step_digital >= 0.0 && self.step_analog >= 0.0,
            "step sizes must be non-negative"
        );
        contract!(self.beta >= 0.0, "beta must be non-negative");
        Ok(())
    }
}

/// Alternating `F ← 𝒫(F − η_F ∇_F)`, `D ← scale(D − η_D ∇_D)` from the
/// same initialization GGML uses for `pcfg.seed`.
pub fn run_pga_baseline<T: Real>(
    h: &CMatrix<T>,
    cfg: &SystemConfig,
    pcfg: &PgaConfig,
) -> Result<(PrecoderPair<T>, IterationTrace)> {
    pcfg.validate()?;
    let init = init_precoders(h, cfg, &mut RngStream::new(pcfg.seed).child(0))?;
    run_pga_from(h, cfg, pcfg, Objective::Wsr, init)
}

pub fn run_pga_from<T: Real>(
    h: &CMatrix<T>,
    cfg: &SystemConfig,
    pcfg: &PgaConfig,
    objective: Objective,
    init: PrecoderPair<T>,
) -> Result<(PrecoderPair<T>, IterationTrace)> {
    pcfg.validate()?;
    let eta_d = T::of(pcfg.step_digital);
    let eta_f = T::of(pcfg.step_analog);
    let mut pair = init;
    let mut eval = grad_loss(h, &pair, cfg, pcfg.beta, objective)?;
    let mut tracker = Tracker::new(&pair, &eval, &cfg.weights);
    for iter in 1..=pcfg.iterations {
        let mut f = pair.f.clone();
        f.axpy(-eta_f, &eval.g_f);
        let (f, zeros) = project_unit_modulus(&f);
        tracker.add_projection_zeros(zeros);
        let with_f = PrecoderPair::new(f, pair.d.clone(), pair.power)?;
        let mid = grad_loss(h, &with_f, cfg, pcfg.beta, objective)?;
        let mut d = with_f.d.clone();
        d.axpy(-eta_d, &mid.g_d);
        pair = scale_to_power(&PrecoderPair::new(with_f.f, d, pair.power)?)?;
        eval = grad_loss(h, &pair, cfg, pcfg.beta, objective)?;
        tracker.record(iter, &pair, &eval, &cfg.weights);
    }
    Ok(tracker.finish(pair, pcfg.track_best))
}
