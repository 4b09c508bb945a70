pub mod channel;
pub mod error;
pub mod kan;
pub mod linalg;
pub mod metrics;
pub mod optimizer;
pub mod robust;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision complex matrix, the working type of the toolkit.
pub type CMat = linalg::CMatrix<f64>;
/// Single-precision complex matrix.
pub type CMat32 = linalg::CMatrix<f32>;
/// Double-precision complex scalar.
pub type Cf64 = num_complex::Complex<f64>;
