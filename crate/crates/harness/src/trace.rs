//! Iteration dumps of a single realization.

use std::io::Write;

use ggml_precoding::linalg::RngStream;
use ggml_precoding::optimizer::{run_ggml, run_pga_baseline, IterationTrace};
use ggml_precoding::robust::run_ggml_imcsi;
use serde::Serialize;

use crate::error::{config_err, Result};
use crate::experiment::{ggml_config, instance, pga_config, wsr, STREAM_SOLVER};
use crate::spec::{Algorithm, Axis, ExperimentSpec};

/// One iteration with both the instantaneous and the best-so-far weighted
/// sum rate, measured on the channel the solver optimizes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub sum_rate_bits: f64,
    pub se_bits: f64,
    pub best_se_bits: f64,
    pub loss: f64,
    pub power_residual: f64,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceDump {
    pub algorithm: Algorithm,
    pub realization: usize,
    pub master_seed: u64,
    pub axis_value: f64,
    pub best_iter: usize,
    pub wall_ms: f64,
    /// Weighted sum rate of the returned pair on the true channel.
    pub final_se_bits: f64,
    pub rows: Vec<TraceRow>,
}

fn rows(trace: &IterationTrace) -> Vec<TraceRow> {
    let mut best = f64::NEG_INFINITY;
    trace
        .records
        .iter()
        .map(|r| {
            best = best.max(r.weighted_sum_rate);
            TraceRow {
                iter: r.iter,
                sum_rate_bits: r.sum_rate,
                se_bits: r.weighted_sum_rate,
                best_se_bits: best,
                loss: r.loss,
                power_residual: r.power_residual,
                elapsed_ms: r.elapsed_ms,
            }
        })
        .collect()
}

/// Run `algorithm` on realization `index` at the first axis value (for the
/// `convergence` axis, with the largest iteration count).
pub fn trace(spec: &ExperimentSpec, index: usize, algorithm: Algorithm) -> Result<TraceDump> {
    spec.validate()?;
    let stream = RngStream::derive(spec.seed, index as u64);
    let seed = stream.child(STREAM_SOLVER).seed();
    let value = spec.values[0];
    let inst = instance(spec, value, &stream, algorithm == Algorithm::GgmlImcsi)?;
    let (pair, trace) = match algorithm {
        Algorithm::Ggml => run_ggml(&inst.h_hat, &inst.cfg, &ggml_config(spec, seed))?,
        Algorithm::GgmlImcsi => {
            let run = run_ggml_imcsi(&inst.h_hat, &inst.epsilon, &inst.cfg, &ggml_config(spec, seed))?;
            (run.pair, run.trace)
        }
        Algorithm::Pga => run_pga_baseline(&inst.h_hat, &inst.cfg, &pga_config(spec, seed))?,
        Algorithm::Zf | Algorithm::WmmseDigital => {
            return Err(config_err!("{algorithm} has no iteration trace"));
        }
    };
    Ok(TraceDump {
        algorithm,
        realization: index,
        master_seed: spec.seed,
        axis_value: if spec.axis == Axis::Convergence { spec.iterations() as f64 } else { value },
        best_iter: trace.best_iter,
        wall_ms: trace.wall_ms,
        final_se_bits: wsr(&inst.h, &pair, &inst.cfg)?,
        rows: rows(&trace),
    })
}

impl TraceDump {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
