//! Per-iteration records of an optimization run.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 0 is the initial point.
    pub iter: usize,
    /// `Σ_k R_k` in bits/s/Hz on the channel the solver optimizes.
    pub sum_rate: f64,
    pub weighted_sum_rate: f64,
    pub loss: f64,
    pub power_residual: f64,
    /// Wall time since the run started.
    pub elapsed_ms: f64,
    /// Sum rate of the best iterate so far.
    pub best_sum_rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    /// Iteration of the best weighted sum rate.
    pub best_iter: usize,
    pub wall_ms: f64,
    /// Zero entries met by the unit-modulus projection.
    pub projection_zeros: usize,
}

pub const TRACE_CSV_HEADER: &str = "iter,sum_rate_bits,loss,power_residual,elapsed_ms,best_sum_rate_bits";

impl IterationTrace {
    pub fn final_record(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn best_record(&self) -> Option<&IterationRecord> {
        self.records.get(self.best_iter)
    }

    /// Average wall time per iteration after the initial point.
    pub fn ms_per_iteration(&self) -> f64 {
        match (self.records.first(), self.records.last()) {
            (Some(a), Some(b)) if self.records.len() > 1 => {
                (b.elapsed_ms - a.elapsed_ms) / (self.records.len() - 1) as f64
            }
            _ => 0.0,
        }
    }

    /// Trace as CSV with [`TRACE_CSV_HEADER`].
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TRACE_CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.iter, r.sum_rate, r.loss, r.power_residual, r.elapsed_ms, r.best_sum_rate
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}
