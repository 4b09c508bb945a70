//! Monte Carlo sweeps and the result table.

use std::io::{Read, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use ggml_precoding::channel::{apply_csi_error, calibrate_epsilon, gen_sv_channel, ImperfectChannelSpec, SystemConfig};
use ggml_precoding::linalg::{CMatrix, RngStream};
use ggml_precoding::metrics::{rates_from_gains, weighted_sum_rate, PrecoderPair};
use ggml_precoding::optimizer::{
    init_precoders, run_ggml, run_pga_baseline, run_wmmse_digital, GgmlConfig, IterationTrace, PgaConfig,
};
use ggml_precoding::robust::run_ggml_imcsi;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spec::{Algorithm, Axis, ExperimentSpec};

pub const CSV_HEADER: &str = "axis,algorithm,mean_se_bits,std_se,mean_ms,realizations,seed";

/// Children of realization `i`'s stream `RngStream::derive(master, i)`.
pub const STREAM_CHANNEL: u64 = 0;
pub const STREAM_ERROR: u64 = 1;
pub const STREAM_CALIBRATION: u64 = 2;
pub const STREAM_SOLVER: u64 = 3;

/// One algorithm on one realization at one axis value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationResult {
    pub axis: f64,
    pub algorithm: Algorithm,
    pub index: usize,
    /// Weighted sum rate on the true channel, bits/s/Hz.
    pub se: f64,
    pub ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub axis: f64,
    pub algorithm: String,
    pub mean_se_bits: f64,
    pub std_se: f64,
    pub mean_ms: f64,
    pub realizations: usize,
    pub seed: u64,
}

/// Channels and radii of one realization at one axis value.
pub(crate) struct Instance {
    pub cfg: SystemConfig,
    pub h: CMatrix<f64>,
    pub h_hat: CMatrix<f64>,
    pub epsilon: Vec<f64>,
}

pub(crate) fn instance(spec: &ExperimentSpec, value: f64, stream: &RngStream, need_radii: bool) -> Result<Instance> {
    let cfg = spec.system_at(value);
    let h = gen_sv_channel::<f64>(&cfg, &spec.channel, &mut stream.child(STREAM_CHANNEL))?;
    let delta = spec.delta_at(value);
    if delta == 0.0 {
        let epsilon = vec![0.0; cfg.n_users];
        return Ok(Instance {
            h_hat: h.h.clone(),
            h: h.h,
            cfg,
            epsilon,
        });
    }
    let csi = ImperfectChannelSpec {
        delta,
        scaling: spec.csi.scaling,
        per_user_epsilon: None,
    };
    let (hat, _) = apply_csi_error(&h, &csi, &mut stream.child(STREAM_ERROR))?;
    let epsilon = if need_radii {
        calibrate_epsilon(
            &csi,
            &hat,
            spec.csi.calibration_draws,
            spec.csi.outage,
            &mut stream.child(STREAM_CALIBRATION),
        )?
    } else {
        vec![0.0; cfg.n_users]
    };
    Ok(Instance {
        cfg,
        h: h.h,
        h_hat: hat.h,
        epsilon,
    })
}

pub(crate) fn ggml_config(spec: &ExperimentSpec, seed: u64) -> GgmlConfig {
    GgmlConfig {
        iterations: spec.iterations(),
        seed,
        ..spec.ggml.clone()
    }
}

pub(crate) fn pga_config(spec: &ExperimentSpec, seed: u64) -> PgaConfig {
    PgaConfig {
        iterations: spec.iterations(),
        beta: spec.ggml.beta,
        seed,
        ..spec.pga.clone()
    }
}

pub(crate) fn wsr(h: &CMatrix<f64>, pair: &PrecoderPair<f64>, cfg: &SystemConfig) -> Result<f64> {
    Ok(weighted_sum_rate(h, pair, cfg)?.weighted_sum)
}

/// Best-so-far weighted sum rate at each checkpoint, with its elapsed time.
fn checkpoints(trace: &IterationTrace, values: &[f64]) -> Vec<(f64, f64)> {
    let mut best = f64::NEG_INFINITY;
    let running: Vec<f64> = trace
        .records
        .iter()
        .map(|r| {
            best = best.max(r.weighted_sum_rate);
            best
        })
        .collect();
    values
        .iter()
        .map(|&v| {
            let i = (v as usize).min(running.len() - 1);
            (running[i], trace.records[i].elapsed_ms)
        })
        .collect()
}

/// What one algorithm produced on one instance.
enum Outcome {
    Final(f64),
    Curve(Vec<(f64, f64)>),
}

fn run_algorithm(spec: &ExperimentSpec, algo: Algorithm, inst: &Instance, seed: u64) -> Result<Outcome> {
    let cfg = &inst.cfg;
    let convergence = spec.axis == Axis::Convergence;
    let finish = |pair: &PrecoderPair<f64>, trace: &IterationTrace| -> Result<Outcome> {
        if convergence {
            Ok(Outcome::Curve(checkpoints(trace, &spec.values)))
        } else {
            Ok(Outcome::Final(wsr(&inst.h, pair, cfg)?))
        }
    };
    match algo {
        Algorithm::Ggml => {
            let (pair, trace) = run_ggml(&inst.h_hat, cfg, &ggml_config(spec, seed))?;
            finish(&pair, &trace)
        }
        Algorithm::GgmlImcsi => {
            let run = run_ggml_imcsi(&inst.h_hat, &inst.epsilon, cfg, &ggml_config(spec, seed))?;
            finish(&run.pair, &run.trace)
        }
        Algorithm::Pga => {
            let (pair, trace) = run_pga_baseline(&inst.h_hat, cfg, &pga_config(spec, seed))?;
            finish(&pair, &trace)
        }
        Algorithm::Zf => {
            let pair = init_precoders(&inst.h_hat, cfg, &mut RngStream::new(seed).child(0))?;
            let se = wsr(&inst.h, &pair, cfg)?;
            if convergence {
                Ok(Outcome::Curve(spec.values.iter().map(|_| (se, 0.0)).collect()))
            } else {
                Ok(Outcome::Final(se))
            }
        }
        Algorithm::WmmseDigital => {
            let iters = if convergence { spec.iterations() } else { spec.wmmse_iterations };
            let out = run_wmmse_digital(&inst.h_hat, cfg, iters)?;
            if convergence {
                let last = out.history.len() - 1;
                Ok(Outcome::Curve(
                    spec.values.iter().map(|&v| (out.history[(v as usize).min(last)], 0.0)).collect(),
                ))
            } else {
                let rates = rates_from_gains(&inst.h.matmul(&out.v), cfg.noise_var);
                Ok(Outcome::Final(rates.iter().zip(&cfg.weights).map(|(r, a)| r * a).sum()))
            }
        }
    }
}

/// Every algorithm at every axis value on realization `index`.
fn run_one(spec: &ExperimentSpec, index: usize) -> Result<Vec<RealizationResult>> {
    let stream = RngStream::derive(spec.seed, index as u64);
    let seed = stream.child(STREAM_SOLVER).seed();
    let need_radii = spec.algorithms.contains(&Algorithm::GgmlImcsi);
    let mut out = Vec::new();
    let values: &[f64] = if spec.axis == Axis::Convergence { &spec.values[..1] } else { &spec.values };
    for &value in values {
        let inst = instance(spec, value, &stream, need_radii)?;
        for &algo in &spec.algorithms {
            let start = Instant::now();
            let outcome = run_algorithm(spec, algo, &inst, seed)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            match outcome {
                Outcome::Final(se) => out.push(RealizationResult {
                    axis: value,
                    algorithm: algo,
                    index,
                    se,
                    ms,
                }),
                Outcome::Curve(points) => {
                    for (&v, (se, at)) in spec.values.iter().zip(points) {
                        out.push(RealizationResult {
                            axis: v,
                            algorithm: algo,
                            index,
                            se,
                            ms: at,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Per-realization results ordered by realization, then axis value, then
/// algorithm as listed in the spec. The order and every value are independent
/// of `threads`.
pub fn run_realizations(spec: &ExperimentSpec, threads: usize) -> Result<Vec<RealizationResult>> {
    spec.validate()?;
    let n = spec.realizations;
    let threads = threads.clamp(1, n);
    let slots: Vec<Option<Result<Vec<RealizationResult>>>> = if threads == 1 {
        (0..n).map(|i| Some(run_one(spec, i))).collect()
    } else {
        let next = AtomicUsize::new(0);
        let done = Mutex::new((0..n).map(|_| None).collect::<Vec<_>>());
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    let r = run_one(spec, i);
                    done.lock().expect("worker panicked")[i] = Some(r);
                });
            }
        });
        done.into_inner().expect("worker panicked")
    };
    let mut all = Vec::new();
    for slot in slots {
        all.extend(slot.expect("every realization ran")?);
    }
    Ok(all)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One row per (axis value, algorithm) in spec order; means and sample
/// standard deviations over realizations taken in index order.
pub fn summarize(spec: &ExperimentSpec, results: &[RealizationResult]) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for &v in &spec.values {
        for &algo in &spec.algorithms {
            let mut sel: Vec<&RealizationResult> = results
                .iter()
                .filter(|r| r.axis == v && r.algorithm == algo)
                .collect();
            if sel.is_empty() {
                continue;
            }
            sel.sort_by_key(|r| r.index);
            let se: Vec<f64> = sel.iter().map(|r| r.se).collect();
            let ms: Vec<f64> = sel.iter().map(|r| r.ms).collect();
            let (mean_se, std_se) = mean_std(&se);
            rows.push(ResultRow {
                axis: v,
                algorithm: algo.name().to_string(),
                mean_se_bits: mean_se,
                std_se,
                mean_ms: mean_std(&ms).0,
                realizations: sel.len(),
                seed: spec.seed,
            });
        }
    }
    rows
}

/// Run the experiment and aggregate it.
pub fn run_experiment(spec: &ExperimentSpec, threads: usize) -> Result<Vec<ResultRow>> {
    let results = run_realizations(spec, threads)?;
    Ok(summarize(spec, &results))
}

/// CSV with the fixed header; floats in shortest round-trip form.
pub fn write_rows<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for row in rows {
        wr.serialize(row)?;
    }
    if rows.is_empty() {
        wr.write_record(CSV_HEADER.split(','))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(r: R) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(crate::error::config_err!("unexpected CSV header `{}`", header.join(",")));
    }
    Ok(rd.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?)
}
