//! Property suites run by `ggml-bench selftest`.

use std::fmt;
use std::time::Instant;

use ggml_precoding::channel::{
    apply_csi_error, calibrate_epsilon, gen_sv_channel, ChannelRealization, ImperfectChannelSpec, SVParams,
    SystemConfig,
};
use ggml_precoding::kan::{init_kan, KanSpec};
use ggml_precoding::linalg::{vec_norm, CMatrix, RngStream};
use ggml_precoding::metrics::{
    grad_loss, loss, mmse_error, mmse_error_covariance, mmse_errors, mmse_receiver, mse, user_rates, Objective,
    PrecoderPair,
};
use ggml_precoding::optimizer::{init_precoders, project_unit_modulus, scale_to_power};
use ggml_precoding::robust::{
    lemma1_check, psd_bound_residual, verify_g_monotone, worst_case_bound, worst_case_bound_eig, worst_case_mmse,
};
use num_complex::Complex;
use serde::Serialize;

use crate::error::Result;

/// Deliberate defects for checking that the suites can fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Negate the analytic loss gradient before comparing it with finite differences.
    GradientSign,
}

#[derive(Clone, Debug, Default)]
pub struct SelftestOptions {
    pub fault: Option<Fault>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Largest residual observed; compare against `tolerance`.
    pub max_residual: f64,
    pub tolerance: f64,
    pub elapsed_ms: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<20} {:<4} cases={:<6} failures={:<4} max_residual={:.3e} tol={:.1e} ({:.0} ms)",
            self.name,
            if self.passed() { "PASS" } else { "FAIL" },
            self.cases,
            self.failures,
            self.max_residual,
            self.tolerance,
            self.elapsed_ms
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelftestReport {
    pub suites: Vec<SuiteReport>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteReport::passed)
    }

    pub fn suite(&self, name: &str) -> Option<&SuiteReport> {
        self.suites.iter().find(|s| s.name == name)
    }
}

/// Accumulates residuals of one suite.
struct Suite {
    name: &'static str,
    tolerance: f64,
    cases: usize,
    failures: usize,
    max_residual: f64,
    start: Instant,
}

impl Suite {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            tolerance,
            cases: 0,
            failures: 0,
            max_residual: 0.0,
            start: Instant::now(),
        }
    }

    /// Record one case whose residual must not exceed the tolerance.
    fn check(&mut self, residual: f64) {
        self.record(residual, residual <= self.tolerance);
    }

    fn record(&mut self, residual: f64, ok: bool) {
        self.cases += 1;
        if residual.is_nan() || !ok {
            self.failures += 1;
        }
        if residual.is_nan() {
            self.max_residual = f64::NAN;
        } else if !self.max_residual.is_nan() {
            self.max_residual = self.max_residual.max(residual);
        }
    }

    fn finish(self) -> SuiteReport {
        SuiteReport {
            name: self.name,
            cases: self.cases,
            failures: self.failures,
            max_residual: self.max_residual,
            tolerance: self.tolerance,
            elapsed_ms: self.start.elapsed().as_secs_f64() * 1e3,
        }
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut RngStream) -> CMatrix<f64> {
    CMatrix::from_fn(rows, cols, |_, _| rng.complex_gaussian(1.0))
}

fn random_pair(n: usize, m: usize, k: usize, rng: &mut RngStream) -> PrecoderPair<f64> {
    let f = CMatrix::from_fn(n, m, |_, _| rng.unit_phasor());
    PrecoderPair::new(f, gaussian(m, k, rng), 1.0).expect("matching shapes")
}

/// `A·Aᴴ` with a Gaussian `n×rank` factor.
fn psd(n: usize, rank: usize, rng: &mut RngStream) -> CMatrix<f64> {
    let a = gaussian(n, rank, rng);
    a.matmul_adjoint(&a)
}

fn skewed_weights(k: usize) -> Vec<f64> {
    let s = (k * (k + 1) / 2) as f64;
    (1..=k).map(|i| i as f64 / s).collect()
}

/// Largest `|fd − analytic|` over the real and imaginary parts of every
/// entry of `F` and `D`, relative to the gradient's largest entry.
fn gradient_gap(
    h: &CMatrix<f64>,
    pair: &PrecoderPair<f64>,
    cfg: &SystemConfig,
    beta: f64,
    obj: Objective,
    fault: Option<Fault>,
) -> Result<f64> {
    let g = grad_loss(h, pair, cfg, beta, obj)?;
    let sign = if fault == Some(Fault::GradientSign) { -1.0 } else { 1.0 };
    let step = 1e-6;
    let mut worst: f64 = 0.0;
    for on_f in [false, true] {
        let analytic = if on_f { &g.g_f } else { &g.g_d };
        let scale = analytic.max_abs().max(1e-3);
        let (rows, cols) = analytic.shape();
        for i in 0..rows {
            for j in 0..cols {
                for dir in [Complex::new(step, 0.0), Complex::new(0.0, step)] {
                    let mut plus = pair.clone();
                    let mut minus = pair.clone();
                    let (mp, mm) = if on_f { (&mut plus.f, &mut minus.f) } else { (&mut plus.d, &mut minus.d) };
                    mp[(i, j)] += dir;
                    mm[(i, j)] -= dir;
                    let fd = (loss(h, &plus, cfg, beta, obj)? - loss(h, &minus, cfg, beta, obj)?) / (2.0 * step);
                    let an = sign * if dir.re != 0.0 { analytic[(i, j)].re } else { analytic[(i, j)].im };
                    worst = worst.max((fd - an).abs() / scale);
                }
            }
        }
    }
    Ok(worst)
}

fn metric_gradients(rng: &mut RngStream, fault: Option<Fault>) -> Result<SuiteReport> {
    let mut s = Suite::new("metric_gradients", 1e-5);
    for trial in 0..40 {
        let (n, m, k) = (2 + trial % 4, 1 + trial % 3, 1 + (trial / 3) % 3);
        let h = gaussian(k, n, rng);
        let pair = random_pair(n, m, k, rng);
        let mut cfg = SystemConfig::new(n, m, k, 1.0, 0.3);
        cfg.weights = skewed_weights(k);
        let beta = rng.uniform();
        for obj in [Objective::Wsr, Objective::Gp] {
            s.check(gradient_gap(&h, &pair, &cfg, beta, obj, fault)?);
        }
    }
    Ok(s.finish())
}

fn kan_gradients(rng: &mut RngStream) -> Result<SuiteReport> {
    let mut s = Suite::new("kan_gradients", 1e-5);
    let spec = KanSpec {
        hidden: vec![3],
        ..KanSpec::default()
    };
    let h = 1e-6;
    for _ in 0..10 {
        let mut net = init_kan::<f64>(4, 2, &spec, rng)?;
        let x: Vec<f64> = (0..4).map(|_| 1.9 * rng.uniform() - 0.95).collect();
        let w = [rng.standard_normal(), rng.standard_normal()];
        let objective = |net: &mut ggml_precoding::kan::KanNetwork<f64>, x: &[f64]| -> Result<f64> {
            Ok(net.forward(x)?.iter().zip(&w).map(|(y, w)| y * w).sum())
        };
        net.zero_grad();
        net.forward(&x)?;
        let dx = net.backward(&w)?;
        let grads = net.flat_grads();
        let theta = net.flat_params();
        let mut probe = theta.clone();
        for i in 0..theta.len() {
            probe[i] = theta[i] + h;
            net.set_flat_params(&probe)?;
            let fp = objective(&mut net, &x)?;
            probe[i] = theta[i] - h;
            net.set_flat_params(&probe)?;
            let fm = objective(&mut net, &x)?;
            probe[i] = theta[i];
            let fd = (fp - fm) / (2.0 * h);
            s.check((fd - grads[i]).abs() / grads[i].abs().max(1.0));
        }
        net.set_flat_params(&theta)?;
        for p in 0..x.len() {
            let mut xp = x.clone();
            xp[p] += h;
            let fp = objective(&mut net, &xp)?;
            xp[p] -= 2.0 * h;
            let fm = objective(&mut net, &xp)?;
            let fd = (fp - fm) / (2.0 * h);
            s.check((fd - dx[p]).abs() / dx[p].abs().max(1.0));
        }
    }
    Ok(s.finish())
}

fn rate_mmse_identity(rng: &mut RngStream) -> Result<SuiteReport> {
    let mut s = Suite::new("rate_mmse_identity", 1e-9);
    for trial in 0..200 {
        let (n, m, k) = (1 + trial % 7, 1 + trial % 3, 1 + trial % 4);
        let h = gaussian(k, n, rng);
        let pair = random_pair(n, m, k, rng);
        let noise = 0.05 + rng.uniform();
        let rates = user_rates(&h, &pair, noise)?;
        let e = mmse_errors(&h, &pair, noise)?;
        for (r, e) in rates.iter().zip(&e) {
            s.check((r + e.log2()).abs());
        }
    }
    Ok(s.finish())
}

fn mse_forms(rng: &mut RngStream) -> Result<SuiteReport> {
    let mut s = Suite::new("mse_forms", 1e-9);
    for trial in 0..200 {
        let (n, m, k) = (1 + trial % 6, 1 + trial % 3, 1 + trial % 3);
        let h = gaussian(k, n, rng);
        let pair = random_pair(n, m, k, rng);
        let noise = 0.05 + rng.uniform();
        for u in 0..k {
            let hk = h.row_slice(u);
            let direct = mmse_error(hk, &pair, noise, u);
            let at_receiver = mse(hk, &pair, mmse_receiver(hk, &pair, noise, u), noise, u);
            let cov = CMatrix::from_fn(n, n, |i, j| hk[i].conj() * hk[j]);
            let via_cov = mmse_error_covariance(&cov, &pair, noise, u)?;
            s.check((direct - at_receiver).abs().max((direct - via_cov).abs()));
        }
    }
    Ok(s.finish())
}

fn projection(rng: &mut RngStream) -> Result<SuiteReport> {
    let mut s = Suite::new("projection", 1e-12);
    for trial in 0..200 {
        let f = gaussian(2 + trial % 30, 1 + trial % 4, rng).scale(10f64.powi(trial as i32 % 7 - 3));
        let (p, _) = project_unit_modulus(&f);
        let (pp, _) = project_unit_modulus(&p);
        let modulus = p.as_slice().iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max);
        s.check(modulus.max(pp.try_sub(&p)?.max_abs()));
    }
    Ok(s.finish())
}

fn power_equality(rng: &mut RngStream) -> Result<SuiteReport> {
    let mut s = Suite::new("power_equality", 1e-9);
    for trial in 0..200 {
        let (n, m, k) = (4 + trial % 60, 1 + trial % 4, 1 + trial % 4);
        let mut pair = random_pair(n, m.min(n), k, rng);
        pair.power = 0.1 + 10.0 * rng.uniform();
        let scaled = scale_to_power(&pair)?;
        s.check((scaled.transmit_power() - scaled.power).abs() / scaled.power);
    }
    Ok(s.finish())
}

fn lemma1(rng: &mut RngStream) -> Result<SuiteReport> {
    let mut s = Suite::new("lemma1_psd", 1e-9);
    for trial in 0..1000 {
        let (r, c) = (1 + trial % 5, 1 + trial % 4);
        let x = gaussian(r, c, rng);
        let y = gaussian(r, c, rng);
        let rep = lemma1_check(&x, &y)?;
        s.check((-rep.min_eigenvalue / rep.bound.max(1.0)).max(0.0));
    }
    Ok(s.finish())
}

fn g_monotone(rng: &mut RngStream) -> Result<SuiteReport> {
    let mut s = Suite::new("g_monotone", 1e-6);
    for trial in 0..100 {
        let n = 2 + trial % 4;
        let q2 = psd(n, 1 + trial % n, rng);
        let q1 = q2.try_add(&psd(n, 1, rng))?;
        let t = psd(n, n, rng).scale(0.3);
        let x = gaussian(1, n, rng).row_slice(0).to_vec();
        let r = verify_g_monotone(&q1, &q2, &x, &t, 0.1 + rng.uniform(), 21)?;
        // monotonicity is checked at 1e-10 inside `passes`
        s.record(r.max_fd_error.max(r.max_increase).max(r.max_derivative), r.passes());
    }
    Ok(s.finish())
}

fn psd_bound(rng: &mut RngStream) -> Result<SuiteReport> {
    let mut s = Suite::new("worst_case_psd", 1e-9);
    let cfg = SystemConfig::from_snr_db(16, 4, 4, 10.0);
    for trial in 0..25 {
        let delta = [0.01, 0.05, 0.1, 0.2, 0.3][trial % 5];
        let ch = gen_sv_channel::<f64>(&cfg, &SVParams::default(), rng)?;
        let spec = ImperfectChannelSpec::new(delta);
        let (hat, _) = apply_csi_error(&ch, &spec, rng)?;
        let eps = calibrate_epsilon(&spec, &hat, 2000, 0.05, rng)?;
        for (k, &e) in eps.iter().enumerate() {
            let hk = hat.user(k);
            let scale = vec_norm(hk).powi(2).max(1.0);
            for entry in [worst_case_bound(hk, e)?, worst_case_bound_eig(hk, e)?] {
                s.check((-psd_bound_residual(hk, &entry)? / scale).max(0.0));
            }
        }
    }
    Ok(s.finish())
}

fn proposition2(rng: &mut RngStream) -> Result<SuiteReport> {
    let mut s = Suite::new("worst_case_mmse", 1e-12);
    for _ in 0..1000 {
        let h = gaussian(3, 6, rng);
        let pair = random_pair(6, 3, 3, rng);
        let frac = rng.uniform() * 0.6;
        for k in 0..3 {
            let hk = h.row_slice(k);
            let entry = worst_case_bound(hk, frac * vec_norm(hk))?;
            let gap = mmse_error(hk, &pair, 0.3, k) - worst_case_mmse(&entry, &pair, 0.3, k);
            s.check(gap.max(0.0));
        }
    }
    Ok(s.finish())
}

fn channel_power(rng: &mut RngStream) -> Result<SuiteReport> {
    let mut s = Suite::new("channel_power", 0.05);
    let n = 16;
    let cfg = SystemConfig::from_snr_db(n, 1, 1, 10.0);
    let draws = 10_000;
    let mut total = 0.0;
    for _ in 0..draws {
        let h: ChannelRealization<f64> = gen_sv_channel(&cfg, &SVParams::default(), rng)?;
        total += vec_norm(h.user(0)).powi(2);
    }
    s.check((total / draws as f64 / n as f64 - 1.0).abs());
    Ok(s.finish())
}

fn rayleigh_quantile(rng: &mut RngStream) -> Result<SuiteReport> {
    let mut s = Suite::new("rayleigh_quantile", 0.02);
    let h = ChannelRealization::from_matrix(
        CMatrix::<f64>::row_vector(&[Complex::new(1.0, 0.0)]),
        SVParams::default(),
        0,
    );
    let eps = calibrate_epsilon(&ImperfectChannelSpec::new(1.0), &h, 100_000, 0.05, rng)?;
    s.check((eps[0] / 20f64.ln().sqrt() - 1.0).abs());
    Ok(s.finish())
}

fn zf_nulling(rng: &mut RngStream) -> Result<SuiteReport> {
    let mut s = Suite::new("zf_nulling", 1e-9);
    for trial in 0..50 {
        let k = 1 + trial % 4;
        let cfg = SystemConfig::from_snr_db(16 + 16 * (trial % 4), 4, k, 10.0);
        let h = gen_sv_channel::<f64>(&cfg, &SVParams::default(), rng)?.h;
        let pair = init_precoders(&h, &cfg, rng)?;
        let g = h.matmul(&pair.combined());
        for u in 0..k {
            let norm = vec_norm(h.row_slice(u));
            for j in (0..k).filter(|&j| j != u) {
                s.check(g[(u, j)].norm() / norm);
            }
        }
    }
    Ok(s.finish())
}

/// Every suite, in a fixed order, from a deterministic stream.
pub fn run_selftest(opts: &SelftestOptions) -> Result<SelftestReport> {
    let root = RngStream::new(opts.seed);
    let stream = |i: u64| root.child(i);
    let suites = vec![
        metric_gradients(&mut stream(0), opts.fault)?,
        kan_gradients(&mut stream(1))?,
        rate_mmse_identity(&mut stream(2))?,
        mse_forms(&mut stream(3))?,
        projection(&mut stream(4))?,
        power_equality(&mut stream(5))?,
        lemma1(&mut stream(6))?,
        g_monotone(&mut stream(7))?,
        psd_bound(&mut stream(8))?,
        proposition2(&mut stream(9))?,
        channel_power(&mut stream(10))?,
        rayleigh_quantile(&mut stream(11))?,
        zf_nulling(&mut stream(12))?,
    ];
    Ok(SelftestReport { suites })
}
