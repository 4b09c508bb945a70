//! Fully-digital weighted MMSE precoding (one antenna per RF chain).

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::channel::SystemConfig;
use crate::error::{contract, dims, Result};
use crate::linalg::{pinv, CMatrix, Lu};
use crate::metrics::rates_from_gains;
use crate::scalar::{Real, C};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct WmmseOutput<T: Real> {
    /// N×K precoder with `‖V‖² = P`.
    pub v: CMatrix<T>,
    pub rates: Vec<T>,
    /// Weighted sum rate at the start and after every iteration.
    pub history: Vec<f64>,
}

fn weighted_sum<T: Real>(rates: &[T], weights: &[f64]) -> f64 {
    rates.iter().zip(weights).map(|(r, a)| r.as_f64() * a).sum()
}

fn rescale<T: Real>(v: &CMatrix<T>, power: T) -> CMatrix<T> {
    let p = v.frob_norm_sqr();
    if p > T::zero() {
        v.scale((power / p).sqrt())
    } else {
        v.clone()
    }
}

/// `V(μ) = Hᴴ(ΛHHᴴ + μI)⁻¹Ω`, the push-through form of `(HᴴΛH + μI)⁻¹HᴴΩ`.
fn precoder_at<T: Real>(h: &CMatrix<T>, gram: &CMatrix<T>, lambda: &[T], omega: &[C<T>], mu: T) -> Result<CMatrix<T>> {
    let k = gram.rows();
    let mut a = CMatrix::from_fn(k, k, |i, j| gram[(i, j)].scale(lambda[i]));
    for i in 0..k {
        a[(i, i)] = a[(i, i)] + Complex::new(mu, T::zero());
    }
    let rhs = CMatrix::from_fn(k, k, |i, j| if i == j { omega[i] } else { Complex::new(T::zero(), T::zero()) });
    let x = Lu::new(&a)?.solve(&rhs);
    Ok(h.adjoint_matmul(&x))
}

/// WMMSE from a power-scaled zero-forcing start. The multiplier `μ` of the
/// precoder update is found by bisection so the power budget binds.
pub fn run_wmmse_digital<T: Real>(h: &CMatrix<T>, cfg: &SystemConfig, iters: usize) -> Result<WmmseOutput<T>> {
    cfg.validate()?;
    contract!(iters >= 1, "WMMSE needs at least one iteration");
    dims!(
        h.shape() == (cfg.n_users, cfg.n_antennas),
        "channel is {}x{}, config expects {}x{}",
        h.rows(),
        h.cols(),
        cfg.n_users,
        cfg.n_antennas
    );
    let k_users = h.rows();
    let power = T::of(cfg.power);
    let noise = T::of(cfg.noise_var);
    let gram = h.matmul_adjoint(h);

    let mut v = rescale(&pinv(h), power);
    let mut rates = rates_from_gains(&h.matmul(&v), noise);
    let mut history = vec![weighted_sum(&rates, &cfg.weights)];

    for _ in 0..iters {
        let g = h.matmul(&v);
        let mut lambda = Vec::with_capacity(k_users);
        let mut omega = Vec::with_capacity(k_users);
        for k in 0..k_users {
            let row = g.row_slice(k);
            let total = row.iter().map(|z| z.norm_sqr()).sum::<T>() + noise;
            let u = row[k] / total;
            let e = T::one() - row[k].norm_sqr() / total;
            let w = T::of(cfg.weights[k]) / e;
            lambda.push(w * u.norm_sqr());
            omega.push(u.scale(w));
        }

        let p_at = |mu: T| -> Result<(CMatrix<T>, T)> {
            let v = precoder_at(h, &gram, &lambda, &omega, mu)?;
            let p = v.frob_norm_sqr();
            Ok((v, p))
        };
        let next = match p_at(T::zero()) {
            Ok((v0, p0)) if p0 <= power => rescale(&v0, power),
            _ => {
                // ‖V(μ)‖ ≤ ‖HᴴΩ‖/μ brackets the root from above
                let b = omega.iter().map(|o| o.norm_sqr()).sum::<T>() * gram.trace().re;
                let mut hi = (b / power).sqrt().max(T::epsilon());
                while p_at(hi)?.1 > power {
                    hi = hi * T::of(2.0);
                }
                let mut lo = T::zero();
                for _ in 0..200 {
                    let mid = (lo + hi) / T::of(2.0);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if p_at(mid)?.1 > power {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                rescale(&p_at(hi)?.0, power)
            }
        };
        v = next;
        rates = rates_from_gains(&h.matmul(&v), noise);
        history.push(weighted_sum(&rates, &cfg.weights));
    }
    Ok(WmmseOutput { v, rates, history })
}
