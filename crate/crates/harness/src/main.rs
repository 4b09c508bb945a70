use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ggml_harness::calibrate::calibrate;
use ggml_harness::selftest::{run_selftest, Fault, SelftestOptions};
use ggml_harness::trace::trace;
use ggml_harness::{run_experiment, write_rows, Algorithm, ExperimentSpec, HarnessError, Result};

#[derive(Parser)]
#[command(name = "ggml-bench", version, about = "Hybrid precoding experiments and self-tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment in a config file.
    Run(RunArgs),
    /// Same as `run`; kept as a separate verb for sweep configs.
    Sweep(RunArgs),
    /// Tabulate calibrated error radii.
    Calibrate(RunArgs),
    /// Dump the iterations of a single realization.
    Trace(TraceArgs),
    /// Run every property suite.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct Common {
    /// Experiment JSON; defaults apply to every missing field.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated algorithms, e.g. `ggml,pga,wmmse_digital`.
    #[arg(long)]
    algos: Option<String>,
    #[arg(long)]
    realizations: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Worker threads; 1 is bitwise reproducible and so is any other count.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    common: Common,
    /// Realization index under the master seed.
    #[arg(long, default_value_t = 0)]
    realization: usize,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Deliberately break a check to confirm the suites can fail.
    #[arg(long, hide = true)]
    inject_gradient_sign_error: bool,
}

fn load(common: &Common) -> Result<ExperimentSpec> {
    let mut spec = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentSpec::from_json(&text)?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    if let Some(out) = &common.out {
        spec.output = Some(out.clone());
    }
    if let Some(list) = &common.algos {
        spec.algorithms = Algorithm::parse_list(list)?;
    }
    if let Some(r) = common.realizations {
        spec.realizations = r;
    }
    spec.validate()?;
    Ok(spec)
}

/// `base` with `suffix` appended to the file name.
fn sibling(base: &Path, suffix: &str) -> PathBuf {
    let mut name = base.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    base.with_file_name(name)
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, bytes)?;
        }
        None => print!("{}", String::from_utf8_lossy(bytes)),
    }
    Ok(())
}

/// The resolved spec next to the output, so every default is on record.
fn echo_spec(spec: &ExperimentSpec) -> Result<()> {
    match &spec.output {
        Some(out) => fs::write(sibling(out, ".spec.json"), spec.to_json()?)?,
        None => eprintln!("{}", spec.to_json()?),
    }
    Ok(())
}

fn run(args: &RunArgs) -> Result<()> {
    let spec = load(&args.common)?;
    let rows = run_experiment(&spec, args.threads)?;
    let mut buf = Vec::new();
    write_rows(&rows, &mut buf)?;
    write_output(spec.output.as_deref(), &buf)?;
    echo_spec(&spec)
}

fn run_calibrate(args: &RunArgs) -> Result<()> {
    let spec = load(&args.common)?;
    let table = calibrate(&spec)?;
    let mut entries = Vec::new();
    table.write_entries(&mut entries)?;
    let mut summary = Vec::new();
    table.write_summary(&mut summary)?;
    match &spec.output {
        Some(out) => {
            write_output(Some(out), &entries)?;
            fs::write(sibling(out, ".summary.csv"), &summary)?;
        }
        None => {
            print!("{}", String::from_utf8_lossy(&entries));
            eprint!("{}", String::from_utf8_lossy(&summary));
        }
    }
    echo_spec(&spec)
}

fn run_trace(args: &TraceArgs) -> Result<()> {
    let spec = load(&args.common)?;
    for &algo in &spec.algorithms {
        let dump = trace(&spec, args.realization, algo)?;
        let mut csv = Vec::new();
        dump.write_csv(&mut csv)?;
        match &spec.output {
            Some(out) => {
                let base = if spec.algorithms.len() > 1 { sibling(out, &format!(".{algo}")) } else { out.clone() };
                write_output(Some(&base), &csv)?;
                fs::write(sibling(&base, ".json"), dump.to_json()?)?;
            }
            None => print!("{}", String::from_utf8_lossy(&csv)),
        }
    }
    echo_spec(&spec)
}

fn selftest(args: &SelftestArgs) -> Result<bool> {
    let opts = SelftestOptions {
        fault: args.inject_gradient_sign_error.then_some(Fault::GradientSign),
        seed: args.seed,
    };
    let report = run_selftest(&opts)?;
    for s in &report.suites {
        println!("{s}");
    }
    let passed = report.passed();
    println!("selftest {}", if passed { "PASS" } else { "FAIL" });
    if let Some(out) = &args.out {
        write_output(Some(out), serde_json::to_string_pretty(&report)?.as_bytes())?;
    }
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) | Command::Sweep(a) => run(a).map(|_| true),
        Command::Calibrate(a) => run_calibrate(a).map(|_| true),
        Command::Trace(a) => run_trace(a).map(|_| true),
        Command::Selftest(a) => selftest(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("ggml-bench: {e}");
            ExitCode::from(1)
        }
    }
}
