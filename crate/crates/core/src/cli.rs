//! Command-line front end.
//!
//! Exit codes are the same for every command: 0 when the input is correct or
//! the search came up clean, 1 on a violation or counterexample, 2 on usage or
//! input errors.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::alpha::{check_properties, enumerate_alphas, search_alpha, AlphaAssignment, Enforce};
use crate::linearize::build_linearization;
use crate::oracle::{oracle_linearizable, OracleConfig, DEFAULT_BOUND};
use crate::sim::{builtin_models, model_by_name, parse_sim_file, Algorithm};
use crate::simple::{check_reduction, hunt, Bounds, HuntConfig};
use crate::trace::{parse_trace, serialize_trace, Execution, Value};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VIOLATION: u8 = 1;
pub const EXIT_INPUT: u8 = 2;

/// Environment variable overriding the oracle's event bound.
pub const ORACLE_BOUND_VAR: &str = "SNAPCHECK_ORACLE_BOUND";

#[derive(Debug, Parser)]
#[command(name = "snapcheck", version, about = "Linearizability checks and counterexample hunts for snapshot objects")]
pub struct Cli {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide a trace by searching for correct functions.
    Check {
        trace: PathBuf,
        /// Print every correct assignment instead of the first one.
        #[arg(long)]
        all_alphas: bool,
    },
    /// Decide a trace by brute-force linearization search.
    Oracle { trace: PathBuf },
    /// Run a built-in model on a simulation file and print the trace.
    Simulate { model: String, schedule: PathBuf },
    /// Search simple executions of a model for an incorrect one.
    Hunt {
        model: String,
        #[command(flatten)]
        bounds: BoundArgs,
    },
    /// Compare general and simple executions of a model.
    Reduction {
        model: String,
        #[command(flatten)]
        bounds: BoundArgs,
        /// Update arguments for general executions.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        values: Vec<u64>,
    },
    /// Check a hand-written assignment against the six properties.
    Props { trace: PathBuf, alpha: PathBuf },
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u16).range(2..))]
    pub processes: u16,
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u16).range(1..))]
    pub bound_steps: u16,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u16).range(1..))]
    pub bound_ops: u16,
    /// Cross-check every execution with the oracle.
    #[arg(long)]
    pub paranoid: bool,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,
}

/// A failure that maps to exit code 2.
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

type Outcome = Result<(String, u8), InputError>;

fn read(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn load_trace(path: &Path) -> Result<Execution, InputError> {
    let exec = parse_trace(&read(path)?).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    let report = exec.validate();
    if !report.is_ok() {
        return Err(InputError(format!("{}: invalid trace\n{}", path.display(), report.to_string().trim_end())));
    }
    Ok(exec)
}

fn model(name: &str) -> Result<&'static dyn Algorithm, InputError> {
    model_by_name(name).ok_or_else(|| {
        let known: Vec<&str> = builtin_models().iter().map(|m| m.name()).collect();
        InputError(format!("unknown model `{name}`; known models: {}", known.join(", ")))
    })
}

fn oracle_config() -> Result<OracleConfig, InputError> {
    match std::env::var(ORACLE_BOUND_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map(|bound| OracleConfig { bound })
            .map_err(|_| InputError(format!("{ORACLE_BOUND_VAR}: expected a non-negative integer, got `{v}`"))),
        Err(_) => Ok(OracleConfig { bound: DEFAULT_BOUND }),
    }
}

fn hunt_config(b: &BoundArgs) -> Result<HuntConfig, InputError> {
    Ok(HuntConfig {
        bounds: Bounds { n: b.processes.into(), max_steps: b.bound_steps.into(), max_ops: b.bound_ops.into() },
        paranoid: b.paranoid,
        jobs: b.jobs.into(),
        oracle: oracle_config()?,
    })
}

fn cmd_check(path: &Path, all: bool) -> Outcome {
    let exec = load_trace(path)?;
    let alphas = if all { enumerate_alphas(&exec, Enforce::All) } else { search_alpha(&exec).into_iter().collect() };
    let Some(first) = alphas.first() else {
        return Ok(("NOT_LINEARIZABLE\n".into(), EXIT_VIOLATION));
    };
    let mut out = String::from("LINEARIZABLE\n");
    for (k, alpha) in alphas.iter().enumerate() {
        if all {
            out.push_str(&format!("# assignment {}\n", k + 1));
        }
        out.push_str(&alpha.to_string());
    }
    let order = build_linearization(&exec, first)?;
    out.push_str(&order.to_string());
    Ok((out, EXIT_OK))
}

fn cmd_oracle(path: &Path) -> Outcome {
    let exec = load_trace(path)?;
    let verdict = oracle_linearizable(&exec, &oracle_config()?)?;
    let code = if verdict.is_linearizable() { EXIT_OK } else { EXIT_VIOLATION };
    Ok((verdict.to_string(), code))
}

fn cmd_simulate(name: &str, path: &Path) -> Outcome {
    let model = model(name)?;
    let (scripts, sched) = parse_sim_file(&read(path)?).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    let exec = crate::sim::run(model, &sched, &scripts)?;
    Ok((serialize_trace(&exec), EXIT_OK))
}

fn cmd_hunt(name: &str, b: &BoundArgs) -> Outcome {
    let report = hunt(model(name)?, &hunt_config(b)?)?;
    let code = if report.counterexample().is_some() { EXIT_VIOLATION } else { EXIT_OK };
    Ok((report.to_string(), code))
}

fn cmd_reduction(name: &str, b: &BoundArgs, values: &[u64]) -> Outcome {
    if values.is_empty() {
        return Err(InputError("--values must not be empty".into()));
    }
    let domain: Vec<Value> = values.iter().copied().map(Value).collect();
    let report = check_reduction(model(name)?, &domain, &hunt_config(b)?)?;
    let code = if report.breach() { EXIT_VIOLATION } else { EXIT_OK };
    Ok((report.to_string(), code))
}

fn cmd_props(trace: &Path, alpha: &Path) -> Outcome {
    let exec = load_trace(trace)?;
    let alpha = AlphaAssignment::parse(exec.n(), &read(alpha)?)?;
    let violations = check_properties(&exec, &alpha)?;
    if violations.is_empty() {
        return Ok(("no violations\n".into(), EXIT_OK));
    }
    let out: String = violations.iter().map(|v| format!("{v}\n")).collect();
    Ok((out, EXIT_VIOLATION))
}

/// Runs a parsed command line and returns the exit code.
pub fn run(cli: Cli) -> u8 {
    let outcome = match &cli.command {
        Command::Check { trace, all_alphas } => cmd_check(trace, *all_alphas),
        Command::Oracle { trace } => cmd_oracle(trace),
        Command::Simulate { model, schedule } => cmd_simulate(model, schedule),
        Command::Hunt { model, bounds } => cmd_hunt(model, bounds),
        Command::Reduction { model, bounds, values } => cmd_reduction(model, bounds, values),
        Command::Props { trace, alpha } => cmd_props(trace, alpha),
    };
    match outcome {
        Ok((report, code)) => {
            match &cli.out {
                Some(path) => {
                    if let Err(e) = fs::write(path, &report) {
                        eprintln!("snapcheck: {}: {e}", path.display());
                        return EXIT_INPUT;
                    }
                }
                None => print!("{report}"),
            }
            code
        }
        Err(InputError(msg)) => {
            eprintln!("snapcheck: {msg}");
            EXIT_INPUT
        }
    }
}
