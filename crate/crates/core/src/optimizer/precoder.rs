//! Feasible-set maps and initialization shared by every hybrid solver.

use num_complex::Complex;

use crate::channel::SystemConfig;
use crate::error::{contract, dims, Result};
use crate::linalg::{pinv, CMatrix, RngStream};
use crate::metrics::PrecoderPair;
use crate::scalar::Real;

/// Random-phase analog precoder and zero-forcing digital precoder on the
/// effective channel `H·F`, scaled to the power budget.
pub fn init_precoders<T: Real>(h: &CMatrix<T>, cfg: &SystemConfig, rng: &mut RngStream) -> Result<PrecoderPair<T>> {
    cfg.validate()?;
    dims!(
        h.shape() == (cfg.n_users, cfg.n_antennas),
        "channel is {}x{}, config expects {}x{}",
        h.rows(),
        h.cols(),
        cfg.n_users,
        cfg.n_antennas
    );
    let f = CMatrix::from_fn(cfg.n_antennas, cfg.n_rf, |_, _| rng.unit_phasor());
    let d = pinv(&h.matmul(&f));
    let pair = PrecoderPair::new(f, d, T::of(cfg.power))?;
    scale_to_power(&pair)
}

/// Elementwise `F_ij / |F_ij|`; zero entries become `1` and are counted.
pub fn project_unit_modulus<T: Real>(f: &CMatrix<T>) -> (CMatrix<T>, usize) {
    let mut zeros = 0;
    let mut out = f.clone();
    for z in out.as_mut_slice() {
        let r = z.norm();
        if r == T::zero() {
            zeros += 1;
            *z = Complex::new(T::one(), T::zero());
        } else if r != T::one() {
            *z = z.unscale(r);
        }
    }
    (out, zeros)
}

/// Power-scaling factor `√(P/‖FD‖²)`.
pub fn power_scale<T: Real>(pair: &PrecoderPair<T>) -> Result<T> {
    let p = pair.transmit_power();
    contract!(p > T::zero() && p.is_finite(), "cannot scale F·D with power {p} to the budget");
    Ok((pair.power / p).sqrt())
}

/// `D ← √(P/‖FD‖²)·D`.
pub fn scale_to_power<T: Real>(pair: &PrecoderPair<T>) -> Result<PrecoderPair<T>> {
    let s = power_scale(pair)?;
    Ok(PrecoderPair {
        f: pair.f.clone(),
        d: pair.d.scale(s),
        power: pair.power,
    })
}
