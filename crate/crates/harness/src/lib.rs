//! Experiment sweeps, epsilon calibration, single-run traces and the
//! property self-test for `ggml-precoding`.

pub mod calibrate;
pub mod error;
pub mod experiment;
pub mod selftest;
pub mod spec;
pub mod stats;
pub mod trace;

pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, run_realizations, summarize, write_rows, read_rows, RealizationResult, ResultRow, CSV_HEADER};
pub use spec::{Algorithm, Axis, ExperimentSpec};
