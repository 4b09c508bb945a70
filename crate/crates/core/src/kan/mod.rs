//! Kolmogorov–Arnold networks with B-spline edge functions and Adam.

mod adam;
mod bspline;
mod layer;
mod network;

pub use adam::{adam_step, Adam, AdamConfig};
pub use bspline::{bspline_basis, BasisEval, Grid};
pub use layer::{silu, silu_deriv, KanLayer};
pub use network::{init_kan, KanNetwork, KanSpec, NetworkInit};
