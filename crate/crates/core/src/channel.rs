//! Saleh–Valenzuela mmWave channels, the imperfect-CSI error model and
//! outage-based calibration of the error radii.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::linalg::{sample_laplace_angle, vec_norm, CMatrix, RngStream};
use crate::scalar::{Real, C};

/// Antenna, RF-chain and user counts together with power, noise and user
/// priorities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// BS antennas `N`.
    pub n_antennas: usize,
    /// RF chains `M`.
    pub n_rf: usize,
    /// Users `K`.
    pub n_users: usize,
    /// Transmit power budget `P` (linear).
    pub power: f64,
    /// Per-user noise variance `σ²` (linear).
    pub noise_var: f64,
    /// Priorities `α_k`, summing to one.
    pub weights: Vec<f64>,
}

impl SystemConfig {
    /// Equal priorities `α_k = 1/K`.
    pub fn new(n_antennas: usize, n_rf: usize, n_users: usize, power: f64, noise_var: f64) -> Self {
        Self {
            n_antennas,
            n_rf,
            n_users,
            power,
            noise_var,
            weights: vec![1.0 / n_users.max(1) as f64; n_users],
        }
    }

    /// `P = 1` and `σ² = 10^(−SNR/10)`.
    pub fn from_snr_db(n_antennas: usize, n_rf: usize, n_users: usize, snr_db: f64) -> Self {
        Self::new(n_antennas, n_rf, n_users, 1.0, snr_to_noise_var(snr_db))
    }

    pub fn validate(&self) -> Result<()> {
        contract!(
            self.n_rf >= 1 && self.n_rf <= self.n_antennas,
            "need 1 <= M <= N, got M={} N={}",
            self.n_rf,
            self.n_antennas
        );
        contract!(self.n_users >= 1, "need at least one user");
        contract!(self.power > 0.0 && self.power.is_finite(), "power must be positive");
        contract!(
            self.noise_var > 0.0 && self.noise_var.is_finite(),
            "noise variance must be positive"
        );
        contract!(
            self.weights.len() == self.n_users,
            "{} weights for {} users",
            self.weights.len(),
            self.n_users
        );
        contract!(
            self.weights.iter().all(|&a| a >= 0.0 && a.is_finite()),
            "weights must be non-negative"
        );
        let s: f64 = self.weights.iter().sum();
        contract!((s - 1.0).abs() <= 1e-12, "weights sum to {s}, expected 1");
        Ok(())
    }
}

/// `σ² = 10^(−SNR_dB/10)` with unit transmit power.
pub fn snr_to_noise_var(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Default angular spread of rays about their cluster center (radians).
pub const DEFAULT_LAPLACE_SCALE: f64 = 0.1;

/// Clustered-channel generator parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SVParams {
    pub n_clusters: usize,
    pub n_rays: usize,
    /// Laplace scale of ray departure angles about the cluster center.
    pub laplace_scale: f64,
}

impl Default for SVParams {
    fn default() -> Self {
        Self {
            n_clusters: 3,
            n_rays: 30,
            laplace_scale: DEFAULT_LAPLACE_SCALE,
        }
    }
}

impl SVParams {
    pub fn validate(&self) -> Result<()> {
        contract!(self.n_clusters >= 1, "need at least one cluster");
        contract!(self.n_rays >= 1, "need at least one ray per cluster");
        contract!(
            self.laplace_scale > 0.0 && self.laplace_scale.is_finite(),
            "Laplace scale must be positive"
        );
        Ok(())
    }
}

/// Channel matrix whose row `k` is user `k`'s channel `h_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ChannelRealization<T: Real> {
    pub h: CMatrix<T>,
    pub params: SVParams,
    /// Seed of the stream the realization was drawn from.
    pub seed: u64,
}

impl<T: Real> ChannelRealization<T> {
    /// Wrap an explicit channel matrix (e.g. an estimate or a hand-built case).
    pub fn from_matrix(h: CMatrix<T>, params: SVParams, seed: u64) -> Self {
        Self { h, params, seed }
    }

    pub fn n_users(&self) -> usize {
        self.h.rows()
    }

    pub fn n_antennas(&self) -> usize {
        self.h.cols()
    }

    pub fn user(&self, k: usize) -> &[C<T>] {
        self.h.row_slice(k)
    }
}

/// ULA response `a_t(φ)`, entry `n` equal to `e^{jπ n sin φ}/√N`.
pub fn array_response<T: Real>(phi: f64, n: usize) -> Vec<C<T>> {
    let norm = 1.0 / (n as f64).sqrt();
    let s = phi.sin();
    (0..n)
        .map(|i| {
            let arg = PI * i as f64 * s;
            Complex::new(T::of(norm * arg.cos()), T::of(norm * arg.sin()))
        })
        .collect()
}

/// One user's channel `√(N/(N_c N_ray)) Σ_c Σ_l g_cl a_t(φ_cl)ᴴ` for given
/// path gains and departure angles.
pub fn channel_from_paths<T: Real>(n: usize, paths: &[(C<f64>, f64)]) -> Vec<C<T>> {
    let scale = (n as f64 / paths.len() as f64).sqrt();
    let mut h = vec![Complex::new(0.0f64, 0.0); n];
    for &(g, phi) in paths {
        let a = array_response::<f64>(phi, n);
        for (hi, ai) in h.iter_mut().zip(&a) {
            *hi += g * ai.conj();
        }
    }
    h.into_iter()
        .map(|z| Complex::new(T::of(z.re * scale), T::of(z.im * scale)))
        .collect()
}

/// Draw one Saleh–Valenzuela realization for all users.
///
/// Each user gets its own clusters: centers uniform in `[0, 2π)`, rays
/// Laplace-distributed about the center, gains standard complex Gaussian.
pub fn gen_sv_channel<T: Real>(
    cfg: &SystemConfig,
    params: &SVParams,
    rng: &mut RngStream,
) -> Result<ChannelRealization<T>> {
    cfg.validate()?;
    params.validate()?;
    let n = cfg.n_antennas;
    let mut h = CMatrix::zeros(cfg.n_users, n);
    for k in 0..cfg.n_users {
        let mut paths = Vec::with_capacity(params.n_clusters * params.n_rays);
        for _ in 0..params.n_clusters {
            let center = rng.uniform_angle();
            for _ in 0..params.n_rays {
                let g = rng.complex_gaussian::<f64>(1.0);
                let phi = sample_laplace_angle(rng, center, params.laplace_scale)?;
                paths.push((g, phi));
            }
        }
        let row = channel_from_paths::<T>(n, &paths);
        h.row_slice_mut(k).copy_from_slice(&row);
    }
    Ok(ChannelRealization {
        h,
        params: params.clone(),
        seed: rng.seed(),
    })
}

/// How the error-to-gain ratio `δ` maps to per-element error variance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorScaling {
    /// `Var(e_kn) = δ·|h_kn|²`.
    #[default]
    PerElement,
    /// `Var(e_kn) = δ·‖h_k‖²/N`, same total power spread evenly.
    Average,
}

/// Imperfect-CSI description: error ratio `δ` and, once calibrated, the
/// per-user spectral-norm radii `ε_k`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImperfectChannelSpec {
    pub delta: f64,
    #[serde(default)]
    pub scaling: ErrorScaling,
    #[serde(default)]
    pub per_user_epsilon: Option<Vec<f64>>,
}

impl ImperfectChannelSpec {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        contract!(
            self.delta >= 0.0 && self.delta.is_finite(),
            "delta must be non-negative, got {}",
            self.delta
        );
        if let Some(eps) = &self.per_user_epsilon {
            contract!(eps.iter().all(|&e| e >= 0.0), "epsilon radii must be non-negative");
        }
        Ok(())
    }

    /// Per-element error standard deviations for one user row.
    fn element_std<T: Real>(&self, row: &[C<T>]) -> Vec<f64> {
        match self.scaling {
            ErrorScaling::PerElement => row
                .iter()
                .map(|z| (self.delta * z.norm_sqr().as_f64()).sqrt())
                .collect(),
            ErrorScaling::Average => {
                let p = vec_norm(row).as_f64().powi(2) / row.len() as f64;
                vec![(self.delta * p).sqrt(); row.len()]
            }
        }
    }
}

/// Split `a` into `(a_hat, e)` for the error draw `b`.
///
/// When `a − (a − b)` is exact the pair sums to `a` bit for bit. Otherwise
/// the draw exceeds what `a`'s exponent range can carry, no float pair near
/// `(a − b, b)` sums to `a`, and the draw is kept with a one-ulp residual so
/// the error distribution is not distorted.
fn split_entry(a: f64, b: f64) -> (f64, f64) {
    let hat = a - b;
    let e = a - hat;
    if hat + e == a {
        (hat, e)
    } else {
        (hat, b)
    }
}

/// Draw the estimation error `E` and return `(Ĥ, E)` with `Ĥ = H − E`.
///
/// `Ĥ + E` reproduces `H` bit for bit wherever the split is representable
/// and to within one ulp elsewhere (see [`split_entry`]).
pub fn apply_csi_error<T: Real>(
    h: &ChannelRealization<T>,
    spec: &ImperfectChannelSpec,
    rng: &mut RngStream,
) -> Result<(ChannelRealization<T>, CMatrix<T>)> {
    spec.validate()?;
    let (k, n) = h.h.shape();
    let mut hat = CMatrix::zeros(k, n);
    let mut err = CMatrix::zeros(k, n);
    for u in 0..k {
        let row = h.user(u);
        let std = spec.element_std(row);
        for j in 0..n {
            let z = rng.complex_gaussian::<f64>(1.0);
            let (er, ei) = (z.re * std[j], z.im * std[j]);
            let (hr, er) = split_entry(row[j].re.as_f64(), er);
            let (hi, ei) = split_entry(row[j].im.as_f64(), ei);
            hat[(u, j)] = Complex::new(T::of(hr), T::of(hi));
            err[(u, j)] = Complex::new(T::of(er), T::of(ei));
        }
    }
    Ok((
        ChannelRealization {
            h: hat,
            params: h.params.clone(),
            seed: rng.seed(),
        },
        err,
    ))
}

/// Empirical `q`-quantile: the smallest sample `x` with `F_n(x) ≥ q`.
pub fn empirical_quantile(samples: &mut [f64], q: f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = samples.len();
    let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    samples[idx]
}

/// Outage-calibrated error radii: `ε_k` is the empirical `(1 − outage)`
/// quantile of `‖e_k‖` over `draws` error realizations built from the
/// magnitudes of the estimate `ĥ_k`.
pub fn calibrate_epsilon<T: Real>(
    spec: &ImperfectChannelSpec,
    h_hat: &ChannelRealization<T>,
    draws: usize,
    outage: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    spec.validate()?;
    contract!(draws >= 1000, "need at least 1e3 draws, got {draws}");
    contract!(outage > 0.0 && outage < 1.0, "outage must lie in (0, 1), got {outage}");
    let mut eps = Vec::with_capacity(h_hat.n_users());
    let mut norms = vec![0.0; draws];
    for k in 0..h_hat.n_users() {
        let std = spec.element_std(h_hat.user(k));
        for slot in norms.iter_mut() {
            let mut s = 0.0;
            for &sd in &std {
                let z = rng.complex_gaussian::<f64>(1.0);
                s += sd * sd * z.norm_sqr();
            }
            // a row vector's spectral norm is its Euclidean norm
            *slot = s.sqrt();
        }
        eps.push(empirical_quantile(&mut norms, 1.0 - outage));
    }
    Ok(eps)
}

// --- serialization -------------------------------------------------------

const MAGIC: &[u8; 4] = b"SVCH";
const VERSION: u32 = 1;

/// JSON form of a channel realization: dims, seed, generator params and
/// row-major interleaved `(re, im)` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelDocument {
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
    pub params: SVParams,
    pub data: Vec<f64>,
    /// Worst-case surrogate eigenvalues `λ_k`, when this is a surrogate channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    /// Error radii `ε_k` used to build a surrogate channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degenerate: Option<Vec<bool>>,
}

impl<T: Real> ChannelRealization<T> {
    pub fn to_document(&self) -> ChannelDocument {
        ChannelDocument {
            rows: self.h.rows(),
            cols: self.h.cols(),
            seed: self.seed,
            params: self.params.clone(),
            data: self.h.to_real_interleaved().iter().map(|x| x.as_f64()).collect(),
            lambda: None,
            epsilon: None,
            degenerate: None,
        }
    }

    pub fn from_document(doc: &ChannelDocument) -> Result<Self> {
        let data: Vec<T> = doc.data.iter().map(|&x| T::of(x)).collect();
        Ok(Self {
            h: CMatrix::from_real_interleaved(doc.rows, doc.cols, &data)?,
            params: doc.params.clone(),
            seed: doc.seed,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(s)?)
    }

    /// Little-endian binary form: magic `SVCH`, version, dims, seed,
    /// generator params, then `rows·cols` `(re, im)` `f64` pairs.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.h.rows() as u64).to_le_bytes())?;
        w.write_all(&(self.h.cols() as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.params.n_clusters as u64).to_le_bytes())?;
        w.write_all(&(self.params.n_rays as u64).to_le_bytes())?;
        w.write_all(&self.params.laplace_scale.to_le_bytes())?;
        for z in self.h.as_slice() {
            w.write_all(&z.re.as_f64().to_le_bytes())?;
            w.write_all(&z.im.as_f64().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad channel file magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported channel file version {version}")));
        }
        let rows = read_u64(&mut r)? as usize;
        let cols = read_u64(&mut r)? as usize;
        let seed = read_u64(&mut r)?;
        let params = SVParams {
            n_clusters: read_u64(&mut r)? as usize,
            n_rays: read_u64(&mut r)? as usize,
            laplace_scale: read_f64(&mut r)?,
        };
        let count = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Format("dimension overflow".into()))?;
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            let re = read_f64(&mut r)?;
            let im = read_f64(&mut r)?;
            data.push(Complex::new(T::of(re), T::of(im)));
        }
        Ok(Self {
            h: CMatrix::from_vec(rows, cols, data)?,
            params,
            seed,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_binary(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
