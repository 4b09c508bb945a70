//! Dense complex linear algebra and random sampling.

mod decomp;
mod matrix;
mod rng;

pub use decomp::{
    herm_eig, inverse, normalize_phase, pinv, solve, spectral_norm, svd, HermEigResult, Lu, Svd,
};
pub use matrix::{dotu, vdot, vec_norm, CMatrix};
pub use rng::{
    sample_complex_gaussian, sample_laplace_angle, wrap_angle, RngStream, RNG_ALGORITHM,
};
