//! Error-radius tables.

use std::io::Write;

use ggml_precoding::channel::{apply_csi_error, calibrate_epsilon, empirical_quantile, gen_sv_channel, ImperfectChannelSpec};
use ggml_precoding::linalg::{vec_norm, RngStream};
use serde::Serialize;

use crate::error::Result;
use crate::experiment::{STREAM_CALIBRATION, STREAM_CHANNEL, STREAM_ERROR};
use crate::spec::{Axis, ExperimentSpec};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsilonEntry {
    pub delta: f64,
    pub realization: usize,
    pub user: usize,
    pub epsilon: f64,
    /// `ε_k/‖ĥ_k‖`; at or above one half the worst-case gain is zero.
    pub relative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsilonSummary {
    pub delta: f64,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
    pub mean_relative: f64,
    /// Users whose worst-case gain vanishes.
    pub degenerate: usize,
    pub users: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsilonTable {
    pub entries: Vec<EpsilonEntry>,
    pub summary: Vec<EpsilonSummary>,
}

/// Radii for every realization and user at each `δ` of the spec (the axis
/// values when sweeping `delta`, otherwise `csi.delta`). Uses the same
/// streams as [`crate::run_experiment`], so the radii match a sweep's.
pub fn calibrate(spec: &ExperimentSpec) -> Result<EpsilonTable> {
    spec.validate()?;
    let deltas: Vec<f64> = if spec.axis == Axis::Delta {
        spec.values.clone()
    } else {
        vec![spec.csi.delta]
    };
    let cfg = spec.system.config();
    let mut entries = Vec::new();
    let mut summary = Vec::new();
    for &delta in &deltas {
        let csi = ImperfectChannelSpec {
            delta,
            scaling: spec.csi.scaling,
            per_user_epsilon: None,
        };
        let mut eps_all = Vec::new();
        let mut rel_sum = 0.0;
        let mut degenerate = 0;
        for r in 0..spec.realizations {
            let stream = RngStream::derive(spec.seed, r as u64);
            let h = gen_sv_channel::<f64>(&cfg, &spec.channel, &mut stream.child(STREAM_CHANNEL))?;
            let (hat, _) = apply_csi_error(&h, &csi, &mut stream.child(STREAM_ERROR))?;
            let eps = calibrate_epsilon(&csi, &hat, spec.csi.calibration_draws, spec.csi.outage, &mut stream.child(STREAM_CALIBRATION))?;
            for (k, &e) in eps.iter().enumerate() {
                let norm = vec_norm(hat.user(k));
                let relative = if norm > 0.0 { e / norm } else { f64::INFINITY };
                rel_sum += relative;
                degenerate += usize::from(2.0 * e >= norm);
                eps_all.push(e);
                entries.push(EpsilonEntry {
                    delta,
                    realization: r,
                    user: k,
                    epsilon: e,
                    relative,
                });
            }
        }
        let users = eps_all.len();
        summary.push(EpsilonSummary {
            delta,
            q05: empirical_quantile(&mut eps_all, 0.05),
            median: empirical_quantile(&mut eps_all, 0.5),
            q95: empirical_quantile(&mut eps_all, 0.95),
            mean_relative: rel_sum / users as f64,
            degenerate,
            users,
        });
    }
    Ok(EpsilonTable { entries, summary })
}

impl EpsilonTable {
    pub fn write_entries<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for e in &self.entries {
            wr.serialize(e)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_summary<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for s in &self.summary {
            wr.serialize(s)?;
        }
        wr.flush()?;
        Ok(())
    }
}
