//! Hybrid-precoding solvers: the GGML meta-optimizer, a projected-gradient
//! baseline, zero-forcing initialization and fully-digital WMMSE.

mod ggml;
mod pga;
mod precoder;
mod trace;
mod wmmse;

pub use ggml::{
    normalize_gradient, projection_pullback, run_ggml, run_ggml_from, scaling_pullback, update_analog,
    update_digital, GgmlConfig, GgmlNetworks, GradientNormalization, MetaGradient, NetworkLayout, StepOptions,
    UpdateNetwork, UpdateScale, DEFAULT_APN_HIDDEN, DEFAULT_DIGITAL_GAIN, DEFAULT_LR_ANALOG, DEFAULT_LR_DIGITAL,
};
pub use pga::{run_pga_baseline, run_pga_from, PgaConfig, DEFAULT_PGA_STEP_ANALOG, DEFAULT_PGA_STEP_DIGITAL};
pub use precoder::{init_precoders, power_scale, project_unit_modulus, scale_to_power};
pub use trace::{IterationRecord, IterationTrace, TRACE_CSV_HEADER};
pub use wmmse::{run_wmmse_digital, WmmseOutput};
