//! Gradient-guided meta-learning: two KANs turn loss gradients into precoder
//! updates and are themselves trained online on the loss they produce.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::precoder::{init_precoders, power_scale, project_unit_modulus};
use super::trace::{IterationRecord, IterationTrace};
use crate::channel::SystemConfig;
use crate::error::{contract, dims, Result};
use crate::kan::{init_kan, Adam, AdamConfig, KanNetwork, KanSpec};
use crate::linalg::{CMatrix, RngStream};
use crate::metrics::{grad_loss, GradientPair, Objective, PrecoderPair};
use crate::scalar::Real;

/// Rescaling of a gradient before it enters a network.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientNormalization {
    Off,
    /// Divide by the largest absolute real component.
    #[default]
    MaxAbs,
    /// Divide by the Euclidean norm.
    GlobalNorm,
}

/// How the network parameters' gradient passes the feasibility maps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaGradient {
    /// Power scaling and phase projection act as identities in the backward pass.
    #[default]
    StraightThrough,
    /// Differentiate through both maps.
    Exact,
}

/// How an update network maps a gradient matrix to an update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkLayout {
    /// One network over the whole flattened gradient (`2·rows·cols` wide).
    #[default]
    Dense,
    /// One small network on each entry's `(re, im)` pair, shared by all entries.
    Coordinatewise,
}

impl NetworkLayout {
    fn widths(self, rows: usize, cols: usize) -> (usize, usize) {
        match self {
            Self::Dense => (2 * rows * cols, 1),
            Self::Coordinatewise => (2, rows * cols),
        }
    }
}

/// Units of a network's output before it is added to the variable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateScale {
    /// Added as is.
    Absolute,
    /// Multiplied by the variable's RMS entry magnitude, so the step is
    /// relative; a no-op for unit-modulus `F`.
    #[default]
    VariableRms,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GgmlConfig {
    /// Iteration budget `L`.
    pub iterations: usize,
    pub lr_digital: f64,
    pub lr_analog: f64,
    /// Variance penalty weight.
    pub beta: f64,
    pub seed: u64,
    /// Return the best iterate instead of the last.
    pub track_best: bool,
    pub gradient_normalization: GradientNormalization,
    pub meta_gradient: MetaGradient,
    /// Digital-precoder network (2MK → 2MK).
    pub dpn: KanSpec,
    /// Analog-precoder network (2NM → 2NM).
    pub apn: KanSpec,
    pub dpn_layout: NetworkLayout,
    pub apn_layout: NetworkLayout,
    pub update_scale: UpdateScale,
    /// Constant multipliers on the network outputs.
    pub digital_gain: f64,
    pub analog_gain: f64,
    /// Train the networks online; off freezes them at their initial values.
    pub meta_updates: bool,
    /// Keep networks and optimizer state across realizations.
    pub warm_start: bool,
}

/// Hidden width of the analog network's bottleneck.
pub const DEFAULT_APN_HIDDEN: usize = 16;

/// Defaults tuned at N=64, M=K=4, SNR 10 dB on channels disjoint from the
/// evaluation seeds.
pub const DEFAULT_LR_DIGITAL: f64 = 1e-2;
pub const DEFAULT_LR_ANALOG: f64 = 2e-2;
pub const DEFAULT_DIGITAL_GAIN: f64 = 0.1;

impl Default for GgmlConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            lr_digital: DEFAULT_LR_DIGITAL,
            lr_analog: DEFAULT_LR_ANALOG,
            beta: 0.1,
            seed: 0,
            track_best: true,
            gradient_normalization: GradientNormalization::GlobalNorm,
            meta_gradient: MetaGradient::Exact,
            dpn: KanSpec::default(),
            apn: KanSpec {
                hidden: vec![DEFAULT_APN_HIDDEN],
                ..KanSpec::default()
            },
            dpn_layout: NetworkLayout::Dense,
            apn_layout: NetworkLayout::Dense,
            update_scale: UpdateScale::VariableRms,
            digital_gain: DEFAULT_DIGITAL_GAIN,
            analog_gain: 1.0,
            meta_updates: true,
            warm_start: false,
        }
    }
}

impl GgmlConfig {
    pub fn validate(&self) -> Result<()> {
        contract!(self.iterations >= 1, "iteration budget must be at least 1");
        AdamConfig::with_lr(self.lr_digital).validate()?;
        AdamConfig::with_lr(self.lr_analog).validate()?;
        contract!(self.beta >= 0.0 && self.beta.is_finite(), "beta must be non-negative");
        contract!(
            self.digital_gain.is_finite() && self.analog_gain.is_finite(),
            "network output gains must be finite"
        );
        self.dpn.validate()?;
        self.apn.validate()
    }
}

/// The two update networks with their Adam states.
#[derive(Clone, Debug)]
pub struct GgmlNetworks<T: Real> {
    pub dpn: UpdateNetwork<T>,
    pub apn: UpdateNetwork<T>,
    adam_d: Adam<T>,
    adam_f: Adam<T>,
}

impl<T: Real> GgmlNetworks<T> {
    /// Fresh networks sized for `cfg`, seeded from `rng`.
    pub fn new(cfg: &SystemConfig, gcfg: &GgmlConfig, rng: &RngStream) -> Result<Self> {
        let dpn = UpdateNetwork::new(gcfg.dpn_layout, cfg.n_rf, cfg.n_users, &gcfg.dpn, &mut rng.child(1))?;
        let apn = UpdateNetwork::new(gcfg.apn_layout, cfg.n_antennas, cfg.n_rf, &gcfg.apn, &mut rng.child(2))?;
        Ok(Self {
            adam_d: Adam::new(AdamConfig::with_lr(gcfg.lr_digital), dpn.net.n_params()),
            adam_f: Adam::new(AdamConfig::with_lr(gcfg.lr_analog), apn.net.n_params()),
            dpn,
            apn,
        })
    }
}

/// A KAN applied to a `rows×cols` gradient under a [`NetworkLayout`].
#[derive(Clone, Debug)]
pub struct UpdateNetwork<T: Real> {
    pub layout: NetworkLayout,
    pub net: KanNetwork<T>,
    rows: usize,
    cols: usize,
    /// Factor applied to the last forward output.
    out_scale: T,
}

impl<T: Real> UpdateNetwork<T> {
    pub fn new(layout: NetworkLayout, rows: usize, cols: usize, spec: &KanSpec, rng: &mut RngStream) -> Result<Self> {
        let (width, _) = layout.widths(rows, cols);
        Ok(Self {
            layout,
            net: init_kan(width, width, spec, rng)?,
            rows,
            cols,
            out_scale: T::one(),
        })
    }

    /// Update matrix for an already-normalized, interleaved gradient; the
    /// network output is multiplied by `out_scale`.
    pub fn forward(&mut self, x: &[T], out_scale: T) -> Result<CMatrix<T>> {
        dims!(
            x.len() == 2 * self.rows * self.cols,
            "network serves a {}x{} gradient, got {} reals",
            self.rows,
            self.cols,
            x.len()
        );
        let (_, batch) = self.layout.widths(self.rows, self.cols);
        let y = self.net.forward_batch(x, batch)?;
        self.out_scale = out_scale;
        Ok(CMatrix::from_real_interleaved(self.rows, self.cols, &y)?.scale(out_scale))
    }

    /// Accumulate parameter gradients for an upstream gradient on the update.
    pub fn backward(&mut self, upstream: &CMatrix<T>) -> Result<()> {
        self.net.zero_grad();
        self.net.backward_batch(&upstream.scale(self.out_scale).to_real_interleaved())?;
        Ok(())
    }
}

/// Scale a gradient into the networks' input range, interleaved re/im.
pub fn normalize_gradient<T: Real>(g: &CMatrix<T>, mode: GradientNormalization) -> Vec<T> {
    let mut x = g.to_real_interleaved();
    let s = match mode {
        GradientNormalization::Off => return x,
        GradientNormalization::MaxAbs => x.iter().fold(T::zero(), |m, v| m.max(v.abs())),
        GradientNormalization::GlobalNorm => x.iter().map(|v| *v * *v).sum::<T>().sqrt(),
    };
    if s > T::zero() && s.is_finite() {
        for v in &mut x {
            *v = *v / s;
        }
    }
    x
}

/// Input normalization and output units of a network-driven step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOptions {
    pub normalization: GradientNormalization,
    pub scale: UpdateScale,
    pub gain: f64,
}

impl GgmlConfig {
    pub fn digital_step(&self) -> StepOptions {
        StepOptions {
            normalization: self.gradient_normalization,
            scale: self.update_scale,
            gain: self.digital_gain,
        }
    }

    pub fn analog_step(&self) -> StepOptions {
        StepOptions {
            normalization: self.gradient_normalization,
            scale: self.update_scale,
            gain: self.analog_gain,
        }
    }
}

fn network_step<T: Real>(
    base: &CMatrix<T>,
    grad: &CMatrix<T>,
    net: &mut UpdateNetwork<T>,
    opts: StepOptions,
) -> Result<CMatrix<T>> {
    dims!(grad.shape() == base.shape(), "gradient and variable shapes differ");
    let x = normalize_gradient(grad, opts.normalization);
    let unit = match opts.scale {
        UpdateScale::Absolute => T::one(),
        UpdateScale::VariableRms => {
            let n = T::of((base.rows() * base.cols()) as f64);
            (base.frob_norm_sqr() / n).sqrt()
        }
    };
    let delta = net.forward(&x, unit * T::of(opts.gain))?;
    base.try_add(&delta)
}

/// Analog step `F ← 𝒫(F₀ + APN(∇_F 𝓛))`, returning the pre-projection matrix too.
pub fn update_analog<T: Real>(
    pair: &PrecoderPair<T>,
    g_f: &CMatrix<T>,
    apn: &mut UpdateNetwork<T>,
    opts: StepOptions,
) -> Result<(PrecoderPair<T>, CMatrix<T>, usize)> {
    let pre = network_step(&pair.f, g_f, apn, opts)?;
    let (f, zeros) = project_unit_modulus(&pre);
    Ok((PrecoderPair::new(f, pair.d.clone(), pair.power)?, pre, zeros))
}

/// Digital step `D ← scale(D₀ + DPN(∇_D 𝓛))`, returning the pre-scaling matrix too.
pub fn update_digital<T: Real>(
    pair: &PrecoderPair<T>,
    g_d: &CMatrix<T>,
    dpn: &mut UpdateNetwork<T>,
    opts: StepOptions,
) -> Result<(PrecoderPair<T>, CMatrix<T>)> {
    let pre = network_step(&pair.d, g_d, dpn, opts)?;
    let unscaled = PrecoderPair::new(pair.f.clone(), pre, pair.power)?;
    let s = power_scale(&unscaled)?;
    Ok((PrecoderPair::new(pair.f.clone(), unscaled.d.scale(s), pair.power)?, unscaled.d))
}

/// Pull a gradient on `z/|z|` back to `z`, entrywise.
pub fn projection_pullback<T: Real>(pre: &CMatrix<T>, g: &CMatrix<T>) -> CMatrix<T> {
    pre.zip_with(g, |z, gz| {
        let r = z.norm();
        if r == T::zero() {
            return gz;
        }
        let f = z.unscale(r);
        let radial = (f.conj() * gz).re;
        (gz - f.scale(radial)).unscale(r)
    })
}

/// Pull a gradient on `s·Z`, `s = √(P/‖FZ‖²)`, back to `Z`.
pub fn scaling_pullback<T: Real>(f: &CMatrix<T>, z: &CMatrix<T>, g: &CMatrix<T>, power: T) -> CMatrix<T> {
    let fz = f.matmul(z);
    let p = fz.frob_norm_sqr();
    let s = (power / p).sqrt();
    let gz = g.real_inner(z);
    let ffz = f.adjoint_matmul(&fz);
    let mut out = g.scale(s);
    out.axpy(-s / p * gz, &ffz);
    out
}

fn weighted<T: Real>(rates: &[T], weights: &[f64]) -> f64 {
    rates.iter().zip(weights).map(|(r, a)| r.as_f64() * a).sum()
}

/// Records iterations and keeps the best iterate by weighted sum rate.
pub(crate) struct Tracker<T: Real> {
    start: Instant,
    trace: IterationTrace,
    best: PrecoderPair<T>,
    best_wsr: f64,
    best_sum: f64,
}

impl<T: Real> Tracker<T> {
    pub(crate) fn new(init: &PrecoderPair<T>, eval: &GradientPair<T>, weights: &[f64]) -> Self {
        let mut t = Self {
            start: Instant::now(),
            trace: IterationTrace::default(),
            best: init.clone(),
            best_wsr: f64::NEG_INFINITY,
            best_sum: f64::NEG_INFINITY,
        };
        t.record(0, init, eval, weights);
        t
    }

    pub(crate) fn record(&mut self, iter: usize, pair: &PrecoderPair<T>, eval: &GradientPair<T>, weights: &[f64]) {
        let wsr = weighted(&eval.rates, weights);
        let sum: f64 = eval.rates.iter().map(|r| r.as_f64()).sum();
        // NaN rates never replace the best iterate
        if wsr > self.best_wsr {
            self.best_wsr = wsr;
            self.best_sum = sum;
            self.best = pair.clone();
            self.trace.best_iter = iter;
        }
        self.trace.records.push(IterationRecord {
            iter,
            sum_rate: sum,
            weighted_sum_rate: wsr,
            loss: eval.loss.as_f64(),
            power_residual: pair.power_residual().as_f64(),
            elapsed_ms: self.start.elapsed().as_secs_f64() * 1e3,
            best_sum_rate: self.best_sum,
        });
    }

    pub(crate) fn add_projection_zeros(&mut self, n: usize) {
        self.trace.projection_zeros += n;
    }

    pub(crate) fn finish(mut self, last: PrecoderPair<T>, track_best: bool) -> (PrecoderPair<T>, IterationTrace) {
        self.trace.wall_ms = self.start.elapsed().as_secs_f64() * 1e3;
        let out = if track_best { self.best } else { last };
        (out, self.trace)
    }
}

/// GGML on the weighted-sum-rate loss with fresh networks.
pub fn run_ggml<T: Real>(
    h: &CMatrix<T>,
    cfg: &SystemConfig,
    gcfg: &GgmlConfig,
) -> Result<(PrecoderPair<T>, IterationTrace)> {
    gcfg.validate()?;
    let rng = RngStream::new(gcfg.seed);
    let init = init_precoders(h, cfg, &mut rng.child(0))?;
    let mut nets = GgmlNetworks::new(cfg, gcfg, &rng)?;
    run_ggml_from(h, cfg, gcfg, Objective::Wsr, init, &mut nets)
}

/// GGML loop from an explicit starting point and network state.
///
/// Each iteration takes an analog step with the gradient at `(F₀, D₀)`, a
/// digital step with the gradient at `(F₁, D₀)`, evaluates the loss at
/// `(F₁, D₁)` and back-propagates its gradient into both networks.
pub fn run_ggml_from<T: Real>(
    h: &CMatrix<T>,
    cfg: &SystemConfig,
    gcfg: &GgmlConfig,
    objective: Objective,
    init: PrecoderPair<T>,
    nets: &mut GgmlNetworks<T>,
) -> Result<(PrecoderPair<T>, IterationTrace)> {
    gcfg.validate()?;
    cfg.validate()?;
    let mut pair = init;
    let mut eval = grad_loss(h, &pair, cfg, gcfg.beta, objective)?;
    let mut tracker = Tracker::new(&pair, &eval, &cfg.weights);

    for iter in 1..=gcfg.iterations {
        let (with_f, f_pre, zeros) = update_analog(&pair, &eval.g_f, &mut nets.apn, gcfg.analog_step())?;
        tracker.add_projection_zeros(zeros);
        let mid = grad_loss(h, &with_f, cfg, gcfg.beta, objective)?;
        let (next, d_pre) = update_digital(&with_f, &mid.g_d, &mut nets.dpn, gcfg.digital_step())?;
        let next_eval = grad_loss(h, &next, cfg, gcfg.beta, objective)?;

        if gcfg.meta_updates {
            let (up_d, up_f) = match gcfg.meta_gradient {
                MetaGradient::StraightThrough => (next_eval.g_d.clone(), next_eval.g_f.clone()),
                MetaGradient::Exact => (
                    scaling_pullback(&next.f, &d_pre, &next_eval.g_d, next.power),
                    projection_pullback(&f_pre, &next_eval.g_f),
                ),
            };
            nets.dpn.backward(&up_d)?;
            nets.dpn.net.apply(&mut nets.adam_d);
            nets.apn.backward(&up_f)?;
            nets.apn.net.apply(&mut nets.adam_f);
        }

        pair = next;
        eval = next_eval;
        tracker.record(iter, &pair, &eval, &cfg.weights);
    }
    Ok(tracker.finish(pair, gcfg.track_best))
}
