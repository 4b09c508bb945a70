//! JSON experiment documents.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ggml_precoding::channel::{ErrorScaling, SVParams, SystemConfig};
use ggml_precoding::optimizer::{GgmlConfig, PgaConfig};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Swept quantity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// SNR in dB.
    Snr,
    /// BS antennas `N`.
    Antennas,
    /// RF chains `M`.
    RfChains,
    /// Users `K`.
    Users,
    /// CSI error ratio `δ`.
    Delta,
    /// Iteration index; one run of `max(values)` iterations per realization.
    Convergence,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Snr => "snr",
            Axis::Antennas => "antennas",
            Axis::RfChains => "rf_chains",
            Axis::Users => "users",
            Axis::Delta => "delta",
            Axis::Convergence => "convergence",
        }
    }

    fn integral(self) -> bool {
        matches!(self, Axis::Antennas | Axis::RfChains | Axis::Users | Axis::Convergence)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ggml,
    GgmlImcsi,
    Pga,
    /// Random-phase analog precoder with zero-forcing digital precoder.
    Zf,
    WmmseDigital,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Ggml,
        Algorithm::GgmlImcsi,
        Algorithm::Pga,
        Algorithm::Zf,
        Algorithm::WmmseDigital,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ggml => "ggml",
            Algorithm::GgmlImcsi => "ggml_imcsi",
            Algorithm::Pga => "pga",
            Algorithm::Zf => "zf",
            Algorithm::WmmseDigital => "wmmse_digital",
        }
    }

    /// Parse a comma-separated list such as `ggml,pga`.
    pub fn parse_list(s: &str) -> Result<Vec<Algorithm>> {
        let algos = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(Algorithm::from_str)
            .collect::<Result<Vec<_>>>()?;
        if algos.is_empty() {
            return Err(config_err!("empty algorithm list"));
        }
        Ok(algos)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = crate::error::HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| config_err!("unknown algorithm `{s}`"))
    }
}

/// Dimensions and SNR of the system before the swept axis is applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemTemplate {
    pub n_antennas: usize,
    pub n_rf: usize,
    pub n_users: usize,
    pub snr_db: f64,
}

impl Default for SystemTemplate {
    fn default() -> Self {
        Self {
            n_antennas: 64,
            n_rf: 4,
            n_users: 4,
            snr_db: 10.0,
        }
    }
}

impl SystemTemplate {
    /// Unit power, `σ² = 10^(−SNR/10)`, equal priorities.
    pub fn config(&self) -> SystemConfig {
        SystemConfig::from_snr_db(self.n_antennas, self.n_rf, self.n_users, self.snr_db)
    }
}

/// Imperfect-CSI settings used by the `delta` axis and by `ggml_imcsi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsiSettings {
    /// `δ` when the axis is not `delta`.
    pub delta: f64,
    pub scaling: ErrorScaling,
    pub calibration_draws: usize,
    pub outage: f64,
}

impl Default for CsiSettings {
    fn default() -> Self {
        Self {
            delta: 0.0,
            scaling: ErrorScaling::PerElement,
            calibration_draws: 100_000,
            outage: 0.05,
        }
    }
}

/// One experiment: an axis sweep over independent channel realizations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub axis: Axis,
    /// Strictly increasing axis values.
    pub values: Vec<f64>,
    pub realizations: usize,
    pub system: SystemTemplate,
    pub channel: SVParams,
    pub csi: CsiSettings,
    /// `seed` is replaced per realization.
    pub ggml: GgmlConfig,
    /// `iterations` and `beta` follow `ggml`; `seed` is replaced per realization.
    pub pga: PgaConfig,
    pub wmmse_iterations: usize,
    pub algorithms: Vec<Algorithm>,
    /// Master seed; realization `i` draws from the stream `(seed, i)`.
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            axis: Axis::Snr,
            values: vec![10.0],
            realizations: 100,
            system: SystemTemplate::default(),
            channel: SVParams::default(),
            csi: CsiSettings::default(),
            ggml: GgmlConfig::default(),
            pga: PgaConfig::default(),
            wmmse_iterations: 100,
            algorithms: vec![Algorithm::Ggml],
            seed: 0,
            output: None,
        }
    }
}

impl ExperimentSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| config_err!("{e}"))
    }

    /// Fully resolved document, defaults included.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Check every setting before anything runs.
    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(config_err!("realizations must be at least 1"));
        }
        if self.values.is_empty() {
            return Err(config_err!("axis values are empty"));
        }
        if self.values.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(config_err!("axis values must be strictly increasing"));
        }
        if !self.values.iter().all(|v| v.is_finite()) {
            return Err(config_err!("axis values must be finite"));
        }
        if self.axis.integral() && self.values.iter().any(|&v| v < 0.0 || v.fract() != 0.0) {
            return Err(config_err!("{} values must be non-negative integers", self.axis.name()));
        }
        if self.axis == Axis::Delta && self.values.iter().any(|&v| v < 0.0) {
            return Err(config_err!("delta values must be non-negative"));
        }
        if self.algorithms.is_empty() {
            return Err(config_err!("no algorithms selected"));
        }
        if self.wmmse_iterations == 0 {
            return Err(config_err!("wmmse_iterations must be at least 1"));
        }
        if !(self.csi.outage > 0.0 && self.csi.outage < 1.0) {
            return Err(config_err!("outage must lie in (0, 1)"));
        }
        if self.csi.calibration_draws < 1000 {
            return Err(config_err!("calibration_draws must be at least 1000"));
        }
        if self.csi.delta < 0.0 {
            return Err(config_err!("delta must be non-negative"));
        }
        self.channel.validate().map_err(|e| config_err!("{e}"))?;
        self.ggml.validate().map_err(|e| config_err!("{e}"))?;
        self.pga.validate().map_err(|e| config_err!("{e}"))?;
        for &v in &self.values {
            self.system_at(v).validate().map_err(|e| config_err!("at {} = {v}: {e}", self.axis.name()))?;
        }
        Ok(())
    }

    /// System configuration at axis value `v`.
    pub fn system_at(&self, v: f64) -> SystemConfig {
        let mut t = self.system.clone();
        match self.axis {
            Axis::Snr => t.snr_db = v,
            Axis::Antennas => t.n_antennas = v as usize,
            Axis::RfChains => t.n_rf = v as usize,
            Axis::Users => t.n_users = v as usize,
            Axis::Delta | Axis::Convergence => {}
        }
        t.config()
    }

    /// `δ` at axis value `v`.
    pub fn delta_at(&self, v: f64) -> f64 {
        if self.axis == Axis::Delta {
            v
        } else {
            self.csi.delta
        }
    }

    /// Iteration budget shared by GGML and PGA.
    pub fn iterations(&self) -> usize {
        if self.axis == Axis::Convergence {
            self.values.last().map_or(0, |&v| v as usize).max(1)
        } else {
            self.ggml.iterations
        }
    }
}
