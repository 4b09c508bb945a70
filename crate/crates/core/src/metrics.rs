//! Spectral efficiency, MSE/MMSE quantities, the two training losses and their
//! gradients.
//!
//! Rates are in bits/s/Hz. Gradients are exported over the real
//! parameterization: for a complex entry `z = x + iy` the returned entry is
//! `∂L/∂x + i·∂L/∂y` (twice the Wirtinger derivative `∂L/∂z̄`).

use std::f64::consts::LN_2;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::channel::SystemConfig;
use crate::error::{dims, Error, Result};
use crate::linalg::{dotu, solve, CMatrix};
use crate::scalar::{czero, Real, C};

/// Analog precoder `F` (N×M, unit modulus once projected), digital precoder
/// `D` (M×K, column `k` serves user `k`) and the power budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PrecoderPair<T: Real> {
    pub f: CMatrix<T>,
    pub d: CMatrix<T>,
    pub power: T,
}

impl<T: Real> PrecoderPair<T> {
    pub fn new(f: CMatrix<T>, d: CMatrix<T>, power: T) -> Result<Self> {
        dims!(
            f.cols() == d.rows(),
            "F is {}x{} but D is {}x{}",
            f.rows(),
            f.cols(),
            d.rows(),
            d.cols()
        );
        Ok(Self { f, d, power })
    }

    pub fn n_antennas(&self) -> usize {
        self.f.rows()
    }

    pub fn n_rf(&self) -> usize {
        self.f.cols()
    }

    pub fn n_streams(&self) -> usize {
        self.d.cols()
    }

    /// Overall precoder `F·D` (N×K).
    pub fn combined(&self) -> CMatrix<T> {
        self.f.matmul(&self.d)
    }

    /// `‖F·D‖²`.
    pub fn transmit_power(&self) -> T {
        self.combined().frob_norm_sqr()
    }

    /// `|‖F·D‖² − P| / P`.
    pub fn power_residual(&self) -> T {
        (self.transmit_power() - self.power).abs() / self.power
    }

    /// Largest deviation of `|F_ij|` from one.
    pub fn modulus_residual(&self) -> T {
        self.f
            .as_slice()
            .iter()
            .map(|z| (z.norm() - T::one()).abs())
            .fold(T::zero(), T::max)
    }

    /// Cast the scalar type.
    pub fn cast<U: Real>(&self) -> PrecoderPair<U> {
        PrecoderPair {
            f: self.f.cast(),
            d: self.d.cast(),
            power: U::of(self.power.as_f64()),
        }
    }
}

/// Per-user rates with their weighted sum, population variance and loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub per_user_rates: Vec<f64>,
    pub weighted_sum: f64,
    pub variance_term: f64,
    pub loss: f64,
}

/// Complex gradients of the active loss with respect to `D` and `F`.
#[derive(Clone, Debug)]
pub struct GradientPair<T: Real> {
    pub g_d: CMatrix<T>,
    pub g_f: CMatrix<T>,
    pub loss: T,
    /// Per-user rates at the evaluation point.
    pub rates: Vec<T>,
}

/// Which loss drives the gradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// `−Σ α_k R_k + β·Var(R)`.
    Wsr,
    /// `Π e_k^{α_k} + β·Var(e)`.
    Gp,
}

#[inline]
fn ln2<T: Real>() -> T {
    T::of(LN_2)
}

fn check_dims<T: Real>(h: &CMatrix<T>, pair: &PrecoderPair<T>) -> Result<()> {
    dims!(
        h.cols() == pair.f.rows(),
        "channel has {} antennas, F has {} rows",
        h.cols(),
        pair.f.rows()
    );
    dims!(
        pair.f.cols() == pair.d.rows(),
        "F has {} columns, D has {} rows",
        pair.f.cols(),
        pair.d.rows()
    );
    dims!(
        h.rows() == pair.d.cols(),
        "{} users but D has {} columns",
        h.rows(),
        pair.d.cols()
    );
    Ok(())
}

/// `[h_k F d_1, …, h_k F d_K]` for one user row.
fn user_gains<T: Real>(h_k: &[C<T>], pair: &PrecoderPair<T>) -> Vec<C<T>> {
    let hf: Vec<C<T>> = (0..pair.f.cols())
        .map(|m| {
            h_k.iter()
                .enumerate()
                .fold(czero(), |acc, (n, &h)| acc + h * pair.f[(n, m)])
        })
        .collect();
    (0..pair.d.cols())
        .map(|i| {
            hf.iter()
                .enumerate()
                .fold(czero(), |acc, (m, &x)| acc + x * pair.d[(m, i)])
        })
        .collect()
}

/// Signal power and interference-plus-noise for user `k`.
fn sinr_terms<T: Real>(gains: &[C<T>], k: usize, noise_var: T) -> (T, T) {
    let signal = gains[k].norm_sqr();
    let interference = gains
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != k)
        .map(|(_, g)| g.norm_sqr())
        .sum::<T>();
    (signal, interference + noise_var)
}

/// `log₂(1 + |h_k F d_k|² / (Σ_{i≠k} |h_k F d_i|² + σ²))`.
pub fn user_rate<T: Real>(h_k: &[C<T>], pair: &PrecoderPair<T>, noise_var: T, k: usize) -> T {
    let g = user_gains(h_k, pair);
    let (s, ipn) = sinr_terms(&g, k, noise_var);
    (s / ipn).ln_1p() / ln2()
}

/// Rates from the effective gains `G = H·F·D` (row `k` holds user `k`'s gains).
pub fn rates_from_gains<T: Real>(g: &CMatrix<T>, noise_var: T) -> Vec<T> {
    (0..g.rows())
        .map(|k| {
            let (s, ipn) = sinr_terms(g.row_slice(k), k, noise_var);
            (s / ipn).ln_1p() / ln2()
        })
        .collect()
}

/// All per-user rates.
pub fn user_rates<T: Real>(h: &CMatrix<T>, pair: &PrecoderPair<T>, noise_var: T) -> Result<Vec<T>> {
    check_dims(h, pair)?;
    Ok((0..h.rows())
        .map(|k| user_rate(h.row_slice(k), pair, noise_var, k))
        .collect())
}

/// Population variance (divides by the count).
pub fn population_variance<T: Real>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::zero();
    }
    let n = T::of(xs.len() as f64);
    let mean = xs.iter().copied().sum::<T>() / n;
    xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n
}

/// `−Σ α_k R_k + β·Var(R)` from precomputed rates.
pub fn loss_from_rates<T: Real>(rates: &[T], weights: &[f64], beta: f64) -> T {
    let wsr = rates
        .iter()
        .zip(weights)
        .map(|(&r, &a)| r * T::of(a))
        .sum::<T>();
    -wsr + T::of(beta) * population_variance(rates)
}

/// `Π e_k^{α_k} + β·Var(e)` from precomputed MMSE values.
pub fn gp_from_mmse<T: Real>(mmse: &[T], weights: &[f64], beta: f64) -> Result<T> {
    if let Some(bad) = mmse.iter().find(|&&e| !(e > T::zero())) {
        return Err(Error::Domain(format!("MMSE value {bad} is not positive")));
    }
    let log_e = mmse
        .iter()
        .zip(weights)
        .map(|(&e, &a)| T::of(a) * e.ln())
        .sum::<T>();
    Ok(log_e.exp() + T::of(beta) * population_variance(mmse))
}

/// Weighted sum rate with per-user breakdown; `loss` is the unpenalized `−Σα_k R_k`.
pub fn weighted_sum_rate<T: Real>(
    h: &CMatrix<T>,
    pair: &PrecoderPair<T>,
    cfg: &SystemConfig,
) -> Result<RateReport> {
    let rates = user_rates(h, pair, T::of(cfg.noise_var))?;
    let r: Vec<f64> = rates.iter().map(|x| x.as_f64()).collect();
    let weighted_sum = r.iter().zip(&cfg.weights).map(|(a, b)| a * b).sum::<f64>();
    Ok(RateReport {
        variance_term: population_variance(&r),
        loss: -weighted_sum,
        weighted_sum,
        per_user_rates: r,
    })
}

/// MMSE receive gain `u_k = (h_k F Σ_m d_m d_mᴴ Fᴴ h_kᴴ + σ²)⁻¹ h_k F d_k`.
pub fn mmse_receiver<T: Real>(h_k: &[C<T>], pair: &PrecoderPair<T>, noise_var: T, k: usize) -> C<T> {
    let g = user_gains(h_k, pair);
    let total = g.iter().map(|z| z.norm_sqr()).sum::<T>() + noise_var;
    g[k] / total
}

/// Mean square error of user `k`'s stream for receive gain `u`:
/// `|1 − u* h_k F d_k|² + Σ_{m≠k} |u|²|h_k F d_m|² + σ²|u|²`.
pub fn mse<T: Real>(h_k: &[C<T>], pair: &PrecoderPair<T>, u: C<T>, noise_var: T, k: usize) -> T {
    let g = user_gains(h_k, pair);
    let uc = u.conj();
    let one = Complex::new(T::one(), T::zero());
    let cross = uc * g[k];
    let mut e = (one - cross - cross.conj()).re;
    for z in &g {
        e = e + (uc * *z).norm_sqr();
    }
    e + noise_var * u.norm_sqr()
}

/// MMSE `1 − d_kᴴFᴴh_kᴴ b_k⁻¹ h_k F d_k` with `b_k` the received power plus noise.
pub fn mmse_error<T: Real>(h_k: &[C<T>], pair: &PrecoderPair<T>, noise_var: T, k: usize) -> T {
    let g = user_gains(h_k, pair);
    let (s, ipn) = sinr_terms(&g, k, noise_var);
    // 1 − s/(s + ipn) evaluated without cancellation
    ipn / (s + ipn)
}

/// The same MMSE through the covariance form
/// `(1 + x_kᴴ R (T_k R + σ²I)⁻¹ x_k)⁻¹` with `R = h_kᴴh_k`, `x_k = F d_k` and
/// `T_k = Σ_{m≠k} F d_m d_mᴴ Fᴴ`.
pub fn mmse_error_covariance<T: Real>(
    cov: &CMatrix<T>,
    pair: &PrecoderPair<T>,
    noise_var: T,
    k: usize,
) -> Result<T> {
    let n = pair.n_antennas();
    dims!(cov.shape() == (n, n), "covariance must be {n}x{n}");
    let fd = pair.combined();
    let mut t = CMatrix::zeros(n, n);
    for m in (0..fd.cols()).filter(|&m| m != k) {
        let x = fd.col(m);
        for i in 0..n {
            for j in 0..n {
                t[(i, j)] = t[(i, j)] + x[i] * x[j].conj();
            }
        }
    }
    let mut a = t.matmul(cov);
    for i in 0..n {
        a[(i, i)] = a[(i, i)] + noise_var;
    }
    let x = fd.col(k);
    let y = solve(&a, &x)?;
    let ry = cov.matvec(&y);
    let q = dotu(&x.iter().map(|z| z.conj()).collect::<Vec<_>>(), &ry);
    Ok(T::one() / (T::one() + q.re))
}

/// `−Σα_k R_k + β·Var(R)`.
pub fn loss_wsr<T: Real>(h: &CMatrix<T>, pair: &PrecoderPair<T>, cfg: &SystemConfig, beta: f64) -> Result<T> {
    let rates = user_rates(h, pair, T::of(cfg.noise_var))?;
    Ok(loss_from_rates(&rates, &cfg.weights, beta))
}

/// Per-user MMSE values.
pub fn mmse_errors<T: Real>(h: &CMatrix<T>, pair: &PrecoderPair<T>, noise_var: T) -> Result<Vec<T>> {
    check_dims(h, pair)?;
    Ok((0..h.rows())
        .map(|k| mmse_error(h.row_slice(k), pair, noise_var, k))
        .collect())
}

/// `Π_k e_k^{α_k} + β·Var(e)` over MMSE values computed on `h_tilde`.
pub fn loss_gp<T: Real>(
    h_tilde: &CMatrix<T>,
    pair: &PrecoderPair<T>,
    cfg: &SystemConfig,
    beta: f64,
) -> Result<T> {
    let e = mmse_errors(h_tilde, pair, T::of(cfg.noise_var))?;
    gp_from_mmse(&e, &cfg.weights, beta)
}

/// Loss value for the chosen objective.
pub fn loss<T: Real>(
    h: &CMatrix<T>,
    pair: &PrecoderPair<T>,
    cfg: &SystemConfig,
    beta: f64,
    objective: Objective,
) -> Result<T> {
    match objective {
        Objective::Wsr => loss_wsr(h, pair, cfg, beta),
        Objective::Gp => loss_gp(h, pair, cfg, beta),
    }
}

/// Gradient of the selected loss with respect to `D` and `F`.
///
/// With `G = H F D`, every loss here depends on `G` only through the per-user
/// rates, so the chain runs `L → R_k → G → (D, F)`:
/// `∂L/∂Ḡ_ki = c_k/ln2 · (G_ki/T_k − [i≠k] G_ki/(T_k − s_k))`, then
/// `∂L/∂D̄ = (HF)ᴴ Γ` and `∂L/∂F̄ = Hᴴ Γ Dᴴ`.
pub fn grad_loss<T: Real>(
    h: &CMatrix<T>,
    pair: &PrecoderPair<T>,
    cfg: &SystemConfig,
    beta: f64,
    objective: Objective,
) -> Result<GradientPair<T>> {
    check_dims(h, pair)?;
    let k_users = h.rows();
    let noise = T::of(cfg.noise_var);
    let hf = h.matmul(&pair.f);
    let g = hf.matmul(&pair.d);

    let mut total = Vec::with_capacity(k_users);
    let mut ipn = Vec::with_capacity(k_users);
    let mut rates = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let (s, i) = sinr_terms(g.row_slice(k), k, noise);
        total.push(s + i);
        ipn.push(i);
        rates.push((s / i).ln_1p() / ln2());
    }

    let kf = T::of(k_users as f64);
    let beta_t = T::of(beta);
    let (loss, coef): (T, Vec<T>) = match objective {
        Objective::Wsr => {
            let mean = rates.iter().copied().sum::<T>() / kf;
            let c = (0..k_users)
                .map(|k| -T::of(cfg.weights[k]) + beta_t * T::of(2.0) / kf * (rates[k] - mean))
                .collect();
            (loss_from_rates(&rates, &cfg.weights, beta), c)
        }
        Objective::Gp => {
            let e: Vec<T> = (0..k_users).map(|k| ipn[k] / total[k]).collect();
            let gp = gp_from_mmse(&e, &cfg.weights, 0.0)?;
            let mean = e.iter().copied().sum::<T>() / kf;
            let c = (0..k_users)
                .map(|k| {
                    let dl_de = T::of(cfg.weights[k]) * gp / e[k]
                        + beta_t * T::of(2.0) / kf * (e[k] - mean);
                    // e_k = 2^{−R_k}
                    -dl_de * ln2::<T>() * e[k]
                })
                .collect();
            (gp + beta_t * population_variance(&e), c)
        }
    };

    let mut gamma = CMatrix::zeros(k_users, k_users);
    for k in 0..k_users {
        let a = coef[k] / ln2::<T>();
        for i in 0..k_users {
            let z = g[(k, i)];
            let mut w = z / total[k];
            if i != k {
                w = w - z / ipn[k];
            }
            gamma[(k, i)] = w * a;
        }
    }
    let two = T::of(2.0);
    let g_d = hf.adjoint_matmul(&gamma).scale(two);
    let g_f = h.adjoint_matmul(&gamma.matmul_adjoint(&pair.d)).scale(two);
    Ok(GradientPair {
        g_d,
        g_f,
        loss,
        rates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C<f64> {
        Complex::new(re, im)
    }

    fn scalar_pair() -> PrecoderPair<f64> {
        PrecoderPair::new(CMatrix::identity(1), CMatrix::identity(1), 1.0).unwrap()
    }

    /// h₁=(1,0), h₂=(0,1), F=[[1,1],[1,−1]], D=F⁻¹ so that FD = I.
    fn two_user_case() -> (CMatrix<f64>, PrecoderPair<f64>) {
        let h = CMatrix::identity(2);
        let f = CMatrix::from_rows(&[vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(-1.0, 0.0)]])
            .unwrap();
        let d = f.scale(0.5);
        (h, PrecoderPair::new(f, d, 2.0).unwrap())
    }

    #[test]
    fn scalar_rate_is_one_bit() {
        let p = scalar_pair();
        assert!((user_rate(&[c(1.0, 0.0)], &p, 1.0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_interference_two_users() {
        let (h, p) = two_user_case();
        let cfg = SystemConfig::new(2, 2, 2, 2.0, 1.0);
        let r = weighted_sum_rate(&h, &p, &cfg).unwrap();
        for rk in &r.per_user_rates {
            assert!((rk - 1.0).abs() < 1e-15);
        }
        assert!((r.weighted_sum - 1.0).abs() < 1e-15);
        assert_eq!(r.variance_term, 0.0);
    }

    #[test]
    fn zero_column_gives_zero_rate_and_unit_mmse() {
        let (h, mut p) = two_user_case();
        p.d[(0, 1)] = czero();
        p.d[(1, 1)] = czero();
        assert_eq!(user_rate(h.row_slice(1), &p, 1.0, 1), 0.0);
        assert_eq!(mmse_error(h.row_slice(1), &p, 1.0, 1), 1.0);
        assert_eq!(mmse_receiver(h.row_slice(1), &p, 1.0, 1), czero());
    }

    #[test]
    fn scalar_mse_chain() {
        let p = scalar_pair();
        let h = [c(1.0, 0.0)];
        let u = mmse_receiver(&h, &p, 1.0, 0);
        assert!((u - c(0.5, 0.0)).norm() < 1e-15);
        assert!((mse(&h, &p, u, 1.0, 0) - 0.5).abs() < 1e-15);
        assert!((mmse_error(&h, &p, 1.0, 0) - 0.5).abs() < 1e-15);
        assert!((mse(&h, &p, czero(), 1.0, 0) - 1.0).abs() < 1e-15);
        assert!(mmse_receiver(&h, &p, 1e12, 0).norm() < 1e-11);
        let cov = CMatrix::identity(1);
        assert!((mmse_error_covariance(&cov, &p, 1.0, 0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hand_losses() {
        assert_eq!(loss_from_rates(&[1.0, 3.0], &[0.5, 0.5], 1.0), -1.0);
        assert_eq!(loss_from_rates(&[2.0, 2.0], &[0.5, 0.5], 5.0), -2.0);
        assert!((gp_from_mmse::<f64>(&[0.25, 1.0], &[0.5, 0.5], 0.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(gp_from_mmse(&[1.0, 1.0], &[0.5, 0.5], 0.3).unwrap(), 1.0);
        assert!(matches!(gp_from_mmse(&[0.0, 1.0], &[0.5, 0.5], 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn scalar_gradient_closed_form() {
        // K=1, N=M=1, F=1: L = −log₂(1 + |h d|²/σ²); ∂L/∂d̄ = −|h|² d / ((σ² + |hd|²) ln 2)
        let h = CMatrix::row_vector(&[c(0.8, -0.3)]);
        let d = c(0.4, 0.7);
        let p = PrecoderPair::new(CMatrix::identity(1), CMatrix::row_vector(&[d]), 1.0).unwrap();
        let cfg = SystemConfig::new(1, 1, 1, 1.0, 0.5);
        let g = grad_loss(&h, &p, &cfg, 0.0, Objective::Wsr).unwrap();
        let h2 = h[(0, 0)].norm_sqr();
        let expected = -d * (2.0 * h2 / ((0.5 + h2 * d.norm_sqr()) * LN_2));
        assert!((g.g_d[(0, 0)] - expected).norm() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let (_, p) = two_user_case();
        let h = CMatrix::<f64>::identity(3);
        assert!(user_rates(&h, &p, 1.0).is_err());
    }
}
