//! `rcsim`: run, cross-check and analyse ratio consensus experiments.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 config error, 3 check
//! failure, 4 the requested check does not apply to this config.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ratio_consensus::config::{self, ConfigError, ExperimentConfig, RunError};
use ratio_consensus::engine::Trace;

const ORACLE_TOL: f64 = 1e-12;

#[derive(Parser)]
#[command(
    name = "rcsim",
    version,
    about = "Ratio consensus under delays and switching topologies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write trace.csv, spread.csv and summary.txt.
    Run {
        #[command(flatten)]
        input: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the engine with the augmented-matrix model step by step.
    OracleCheck {
        #[command(flatten)]
        input: ConfigArgs,
    },
    /// Ergodicity analysis of a config, or a convergence report of a trace.
    Analyze {
        #[arg(long, conflicts_with = "trace", required_unless_present = "trace")]
        config: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        seed_override: Option<u64>,
        /// Tolerance for the trace report.
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
        /// Also write analysis.txt and delta.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed_override: Option<u64>,
}

enum Failure {
    Runtime(String),
    Config(String),
    Check(String),
    NotCheckable(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Config(_) => 2,
            Failure::Check(_) => 3,
            Failure::NotCheckable(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Runtime(m)
            | Failure::Config(m)
            | Failure::Check(m)
            | Failure::NotCheckable(m) => m,
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(c) => Failure::Config(c.to_string()),
            RunError::NotCheckable(_) => Failure::NotCheckable(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load(path: &Path, seed_override: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let cfg = ExperimentConfig::from_toml(&text)
        .map_err(|e: ConfigError| Failure::Config(format!("{}: {e}", path.display())))?;
    Ok(match seed_override {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

/// Writes all files into a staging directory next to `out` and moves them
/// in only once every write succeeded.
fn write_outputs(out: &Path, files: &[(&str, String)]) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Runtime(format!("{}: {e}", out.display()));
    fs::create_dir_all(out).map_err(io)?;
    let staging = out.join(format!(".staging-{}", std::process::id()));
    let result = (|| {
        fs::create_dir_all(&staging)?;
        for (name, body) in files {
            fs::write(staging.join(name), body)?;
        }
        for (name, _) in files {
            fs::rename(staging.join(name), out.join(name))?;
        }
        Ok(())
    })();
    let _ = fs::remove_dir_all(&staging);
    result.map_err(io)
}

fn cmd_run(input: ConfigArgs, out: PathBuf) -> Result<(), Failure> {
    let cfg = load(&input.config, input.seed_override)?;
    let output = config::run(&cfg)?;
    let summary = output.summary(&cfg);
    write_outputs(
        &out,
        &[
            ("trace.csv", output.trace_csv()),
            ("spread.csv", output.spread_csv()),
            ("summary.txt", summary.clone()),
        ],
    )?;
    print!("{summary}");
    Ok(())
}

fn cmd_oracle_check(input: ConfigArgs) -> Result<(), Failure> {
    let cfg = load(&input.config, input.seed_override)?;
    let report = config::run_oracle_check(&cfg)?;
    let max = report.max_deviation();
    println!("name: {}", cfg.name);
    println!("steps: {}", report.per_step.len() - 1);
    println!("max_deviation: {max:e}");
    println!("tolerance: {ORACLE_TOL:e}");
    match report.first_violation(ORACLE_TOL) {
        None => {
            println!("result: pass");
            Ok(())
        }
        Some(k) => {
            println!("result: fail");
            Err(Failure::Check(format!(
                "engine and augmented model diverge at step {k}"
            )))
        }
    }
}

fn trace_report(path: &Path, eps: f64) -> Result<String, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let trace =
        Trace::from_csv(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let first = &trace.steps()[0];
    let avg = first.y.iter().sum::<f64>() / first.z.iter().sum::<f64>();
    let fin = trace.final_ratios();
    let err = fin.iter().map(|m| (m - avg).abs()).fold(0.0, f64::max);
    let mut s = String::new();
    let _ = writeln!(s, "n: {}", trace.n());
    let _ = writeln!(s, "last_step: {}", trace.last().k);
    let _ = writeln!(s, "average: {avg:?}");
    let _ = writeln!(s, "final_spread: {:?}", ratio_consensus::spread(&fin));
    let _ = writeln!(s, "max_abs_error: {err:?}");
    match trace.steps_to_within(avg, eps) {
        Some(k) => {
            let _ = writeln!(s, "steps_to_epsilon: {k}");
        }
        None => {
            let _ = writeln!(s, "steps_to_epsilon: not reached");
        }
    }
    let _ = writeln!(s, "matrix_analysis: needs --config");
    Ok(s)
}

fn cmd_analyze(
    config_path: Option<PathBuf>,
    trace: Option<PathBuf>,
    seed_override: Option<u64>,
    eps: f64,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    if let Some(path) = trace {
        let report = trace_report(&path, eps)?;
        if let Some(out) = out {
            write_outputs(&out, &[("analysis.txt", report.clone())])?;
        }
        print!("{report}");
        return Ok(());
    }
    let path = config_path.expect("clap requires --config or --trace");
    let cfg = load(&path, seed_override)?;
    let (_, report) = config::run_analysis(&cfg)?;
    let text = report.to_text();
    if let Some(out) = out {
        write_outputs(
            &out,
            &[
                ("analysis.txt", text.clone()),
                ("delta.csv", report.delta_csv()),
            ],
        )?;
    }
    print!("{text}");
    match report.envelope_violations() {
        0 => Ok(()),
        v => Err(Failure::Check(format!(
            "observed error leaves the envelope at {v} steps"
        ))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { input, out } => cmd_run(input, out),
        Command::OracleCheck { input } => cmd_oracle_check(input),
        Command::Analyze {
            config,
            trace,
            seed_override,
            epsilon,
            out,
        } => cmd_analyze(config, trace, seed_override, epsilon, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("rcsim: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
