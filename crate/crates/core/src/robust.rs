//! Imperfect-CSI pipeline: the rank-one worst-case surrogate channel, its
//! MMSE, GGML driven by the MMSE-product loss, and numerical checks of the
//! matrix bounds the surrogate rests on.

use num_complex::Complex;

use crate::channel::{ChannelDocument, SVParams, SystemConfig};
use crate::error::{contract, dims, Result};
use crate::linalg::{herm_eig, normalize_phase, solve, spectral_norm, vdot, vec_norm, CMatrix, RngStream};
use crate::metrics::{mmse_error, Objective, PrecoderPair};
use crate::optimizer::{init_precoders, run_ggml_from, GgmlConfig, GgmlNetworks, IterationTrace};
use crate::scalar::{Real, C};

/// Surrogate channel of one user.
#[derive(Clone, Debug, PartialEq)]
pub struct WorstCaseEntry<T: Real> {
    /// Row vector with `h̃ᴴh̃ = R^WC`.
    pub h_tilde: Vec<C<T>>,
    /// `max(‖ĥ‖² − 2ε‖ĥ‖, 0)`.
    pub lambda: T,
    pub epsilon: f64,
    /// The error ball reaches the origin, so the surrogate is zero.
    pub degenerate: bool,
}

impl<T: Real> WorstCaseEntry<T> {
    /// `h̃ᴴh̃`.
    pub fn covariance(&self) -> CMatrix<T> {
        outer(&self.h_tilde)
    }
}

fn outer<T: Real>(h: &[C<T>]) -> CMatrix<T> {
    CMatrix::from_fn(h.len(), h.len(), |i, j| h[i].conj() * h[j])
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    contract!(
        epsilon >= 0.0 && epsilon.is_finite(),
        "error radius must be non-negative, got {epsilon}"
    );
    Ok(())
}

fn degenerate_entry<T: Real>(n: usize, epsilon: f64) -> WorstCaseEntry<T> {
    WorstCaseEntry {
        h_tilde: vec![Complex::new(T::zero(), T::zero()); n],
        lambda: T::zero(),
        epsilon,
        degenerate: true,
    }
}

/// Closed-form surrogate `h̃ = √λ·ĥ/‖ĥ‖`, keeping the phase of `ĥ`.
///
/// `R̂ − (ĥᴴe + eᴴĥ) ⪰ R̂ − 2ε‖ĥ‖I`; truncating the negative eigenvalues of
/// the right side leaves only the `ĥ` direction, with eigenvalue `λ`.
pub fn worst_case_bound<T: Real>(h_hat_k: &[C<T>], epsilon: f64) -> Result<WorstCaseEntry<T>> {
    check_epsilon(epsilon)?;
    let norm = vec_norm(h_hat_k);
    if norm == T::zero() {
        return Ok(degenerate_entry(h_hat_k.len(), epsilon));
    }
    if epsilon == 0.0 {
        return Ok(WorstCaseEntry {
            h_tilde: h_hat_k.to_vec(),
            lambda: norm * norm,
            epsilon,
            degenerate: false,
        });
    }
    let lambda = (norm * norm - T::of(2.0 * epsilon) * norm).max(T::zero());
    if lambda == T::zero() {
        return Ok(degenerate_entry(h_hat_k.len(), epsilon));
    }
    let s = lambda.sqrt() / norm;
    Ok(WorstCaseEntry {
        h_tilde: h_hat_k.iter().map(|z| z.scale(s)).collect(),
        lambda,
        epsilon,
        degenerate: false,
    })
}

/// The same surrogate through an eigendecomposition of `R̂ = ĥᴴĥ`, with the
/// shifted spectrum `(a_i − 2ε·σ_max(ĥ))⁺`. `R̂` has rank one, so only the
/// leading eigenpair survives; `h̃` is phase-normalized so its first
/// significant entry is real and positive.
pub fn worst_case_bound_eig<T: Real>(h_hat_k: &[C<T>], epsilon: f64) -> Result<WorstCaseEntry<T>> {
    check_epsilon(epsilon)?;
    let n = h_hat_k.len();
    let r_hat = outer(h_hat_k);
    let eig = herm_eig(&r_hat)?;
    let sigma_max = spectral_norm(&CMatrix::row_vector(h_hat_k));
    let shift = T::of(2.0 * epsilon) * sigma_max;
    let lambda = (eig.eigenvalues[0] - shift).max(T::zero());
    if lambda == T::zero() {
        return Ok(degenerate_entry(n, epsilon));
    }
    let s = lambda.sqrt();
    let mut h_tilde: Vec<C<T>> = eig.eigenvectors.col(0).iter().map(|m| m.conj().scale(s)).collect();
    normalize_phase(&mut h_tilde);
    Ok(WorstCaseEntry {
        h_tilde,
        lambda,
        epsilon,
        degenerate: false,
    })
}

/// Smallest eigenvalue of `R̂_k − R^WC_k`; non-negative when the surrogate is
/// a lower bound.
pub fn psd_bound_residual<T: Real>(h_hat_k: &[C<T>], entry: &WorstCaseEntry<T>) -> Result<T> {
    dims!(h_hat_k.len() == entry.h_tilde.len(), "surrogate and estimate lengths differ");
    let diff = outer(h_hat_k).try_sub(&entry.covariance())?;
    Ok(herm_eig(&diff)?.min_eigenvalue())
}

/// Surrogate channels of all users, `h̃_k` stacked as rows.
#[derive(Clone, Debug, PartialEq)]
pub struct WorstCaseChannel<T: Real> {
    pub h_tilde: CMatrix<T>,
    pub lambda: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub degenerate: Vec<bool>,
}

impl<T: Real> WorstCaseChannel<T> {
    /// Convert an estimated channel with per-user radii `ε_k`.
    pub fn from_estimate(h_hat: &CMatrix<T>, epsilon: &[f64]) -> Result<Self> {
        dims!(
            epsilon.len() == h_hat.rows(),
            "{} users but {} radii",
            h_hat.rows(),
            epsilon.len()
        );
        let mut h_tilde = CMatrix::zeros(h_hat.rows(), h_hat.cols());
        let mut lambda = Vec::with_capacity(epsilon.len());
        let mut degenerate = Vec::with_capacity(epsilon.len());
        for (k, &eps) in epsilon.iter().enumerate() {
            let entry = worst_case_bound(h_hat.row_slice(k), eps)?;
            h_tilde.row_slice_mut(k).copy_from_slice(&entry.h_tilde);
            lambda.push(entry.lambda.as_f64());
            degenerate.push(entry.degenerate);
        }
        Ok(Self {
            h_tilde,
            lambda,
            epsilon: epsilon.to_vec(),
            degenerate,
        })
    }

    pub fn n_degenerate(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }

    /// Channel document carrying `λ`, `ε` and the degenerate flags as sidecars.
    pub fn to_document(&self, params: &SVParams, seed: u64) -> ChannelDocument {
        ChannelDocument {
            rows: self.h_tilde.rows(),
            cols: self.h_tilde.cols(),
            seed,
            params: params.clone(),
            data: self.h_tilde.to_real_interleaved().iter().map(|x| x.as_f64()).collect(),
            lambda: Some(self.lambda.clone()),
            epsilon: Some(self.epsilon.clone()),
            degenerate: Some(self.degenerate.clone()),
        }
    }

    pub fn from_document(doc: &ChannelDocument) -> Result<Self> {
        let data: Vec<T> = doc.data.iter().map(|&x| T::of(x)).collect();
        let h_tilde = CMatrix::from_real_interleaved(doc.rows, doc.cols, &data)?;
        let lambda = doc.lambda.clone().unwrap_or_default();
        let epsilon = doc.epsilon.clone().unwrap_or_default();
        let degenerate = doc.degenerate.clone().unwrap_or_default();
        contract!(
            lambda.len() == doc.rows && epsilon.len() == doc.rows && degenerate.len() == doc.rows,
            "worst-case document needs lambda, epsilon and degenerate per user"
        );
        Ok(Self {
            h_tilde,
            lambda,
            epsilon,
            degenerate,
        })
    }
}

/// MMSE of user `k` on its surrogate channel.
pub fn worst_case_mmse<T: Real>(entry: &WorstCaseEntry<T>, pair: &PrecoderPair<T>, noise_var: T, k: usize) -> T {
    mmse_error(&entry.h_tilde, pair, noise_var, k)
}

/// Result of the robust GGML run.
#[derive(Clone, Debug)]
pub struct ImcsiRun<T: Real> {
    pub pair: PrecoderPair<T>,
    /// Rates in the trace are surrogate (worst-case) rates.
    pub trace: IterationTrace,
    pub worst_case: WorstCaseChannel<T>,
}

/// GGML on the MMSE-product loss over the surrogate channels of `h_hat`.
///
/// The zero-forcing start is computed on `Ĥ`, since surrogate rows of
/// degenerate users are zero.
pub fn run_ggml_imcsi<T: Real>(
    h_hat: &CMatrix<T>,
    epsilon: &[f64],
    cfg: &SystemConfig,
    gcfg: &GgmlConfig,
) -> Result<ImcsiRun<T>> {
    gcfg.validate()?;
    let worst_case = WorstCaseChannel::from_estimate(h_hat, epsilon)?;
    let rng = RngStream::new(gcfg.seed);
    let init = init_precoders(h_hat, cfg, &mut rng.child(0))?;
    let mut nets = GgmlNetworks::new(cfg, gcfg, &rng)?;
    let (pair, trace) = run_ggml_from(&worst_case.h_tilde, cfg, gcfg, Objective::Gp, init, &mut nets)?;
    Ok(ImcsiRun {
        pair,
        trace,
        worst_case,
    })
}

/// `2σ_max(X)σ_max(Y)·I − (XYᴴ + YXᴴ)` and its smallest eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub struct Lemma1Report {
    pub bound: f64,
    pub min_eigenvalue: f64,
}

impl Lemma1Report {
    pub fn holds(&self, tol: f64) -> bool {
        self.min_eigenvalue >= -tol
    }
}

pub fn lemma1_check<T: Real>(x: &CMatrix<T>, y: &CMatrix<T>) -> Result<Lemma1Report> {
    dims!(x.shape() == y.shape(), "X is {:?} but Y is {:?}", x.shape(), y.shape());
    let bound = T::of(2.0) * spectral_norm(x) * spectral_norm(y);
    let xy = x.matmul_adjoint(y);
    let mut m = CMatrix::from_fn(xy.rows(), xy.cols(), |i, j| -(xy[(i, j)] + xy[(j, i)].conj()));
    for i in 0..m.rows() {
        m[(i, i)] = m[(i, i)] + bound;
    }
    Ok(Lemma1Report {
        bound: bound.as_f64(),
        min_eigenvalue: herm_eig(&m)?.min_eigenvalue().as_f64(),
    })
}

/// Values and derivative checks of
/// `g(t) = (1 + xᴴQ(t)(T Q(t) + σ²I)⁻¹x)⁻¹`, `Q(t) = Q₂ + t(Q₁ − Q₂)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneReport {
    pub t: Vec<f64>,
    pub g: Vec<f64>,
    /// Closed-form `∂g/∂t` at each grid point.
    pub derivative: Vec<f64>,
    /// Largest `g(t_{i+1}) − g(t_i)`.
    pub max_increase: f64,
    pub max_derivative: f64,
    /// Largest `|fd − closed form| / max(1, |closed form|)`.
    pub max_fd_error: f64,
}

impl MonotoneReport {
    pub fn passes(&self) -> bool {
        self.max_increase <= 1e-10 && self.max_derivative <= 1e-10 && self.max_fd_error <= 1e-6
    }
}

struct GProblem<'a, T: Real> {
    q2: &'a CMatrix<T>,
    dq: CMatrix<T>,
    x: &'a [C<T>],
    t_mat: &'a CMatrix<T>,
    noise_var: T,
}

impl<T: Real> GProblem<'_, T> {
    /// `(g(t), y)` with `y = (T Q(t) + σ²I)⁻¹ x`.
    fn eval(&self, t: T) -> Result<(T, Vec<C<T>>)> {
        let mut q = self.q2.clone();
        q.axpy(t, &self.dq);
        let mut a = self.t_mat.matmul(&q);
        for i in 0..a.rows() {
            a[(i, i)] = a[(i, i)] + self.noise_var;
        }
        let y = solve(&a, self.x)?;
        let f = vdot(self.x, &q.matvec(&y)).re;
        Ok((T::one() / (T::one() + f), y))
    }

    /// `∂g/∂t = −σ²g²·yᴴ(Q₁ − Q₂)y`.
    fn derivative(&self, g: T, y: &[C<T>]) -> T {
        -self.noise_var * g * g * vdot(y, &self.dq.matvec(y)).re
    }
}

fn is_psd<T: Real>(a: &CMatrix<T>) -> Result<bool> {
    let scale = a.max_abs().max(T::one());
    Ok(herm_eig(a)?.min_eigenvalue() >= -T::of(1e-9) * scale)
}

/// Evaluate `g` on `grid` evenly spaced points of `[0, 1]` and check it is
/// non-increasing with the closed-form derivative matching finite differences.
pub fn verify_g_monotone<T: Real>(
    q1: &CMatrix<T>,
    q2: &CMatrix<T>,
    x: &[C<T>],
    t_mat: &CMatrix<T>,
    noise_var: T,
    grid: usize,
) -> Result<MonotoneReport> {
    let n = x.len();
    dims!(
        q1.shape() == (n, n) && q2.shape() == (n, n) && t_mat.shape() == (n, n),
        "matrices must be {n}x{n}"
    );
    contract!(grid >= 2, "grid needs at least two points");
    contract!(noise_var > T::zero(), "noise variance must be positive");
    let dq = q1.try_sub(q2)?;
    contract!(is_psd(q2)? && is_psd(&dq)?, "need Q1 ⪰ Q2 ⪰ 0");
    contract!(is_psd(t_mat)?, "T must be positive semidefinite");

    let p = GProblem {
        q2,
        dq,
        x,
        t_mat,
        noise_var,
    };
    let h = 1e-6;
    let mut report = MonotoneReport {
        t: Vec::with_capacity(grid),
        g: Vec::with_capacity(grid),
        derivative: Vec::with_capacity(grid),
        max_increase: f64::NEG_INFINITY,
        max_derivative: f64::NEG_INFINITY,
        max_fd_error: 0.0,
    };
    for i in 0..grid {
        let t = i as f64 / (grid - 1) as f64;
        let (g, y) = p.eval(T::of(t))?;
        let d = p.derivative(g, &y).as_f64();
        let fd = (p.eval(T::of(t + h))?.0.as_f64() - p.eval(T::of(t - h))?.0.as_f64()) / (2.0 * h);
        report.max_fd_error = report.max_fd_error.max((fd - d).abs() / d.abs().max(1.0));
        report.max_derivative = report.max_derivative.max(d);
        if let Some(&prev) = report.g.last() {
            report.max_increase = report.max_increase.max(g.as_f64() - prev);
        }
        report.t.push(t);
        report.g.push(g.as_f64());
        report.derivative.push(d);
    }
    Ok(report)
}
