//! Argument parsing and execution for the `rosenbench` binary.
//!
//! Exit status: 0 on success (a diverged run is a valid result), 1 on an
//! internal or output error, 2 on a usage error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rosenbench_core::{
    check_derivatives, contour_grid, emit_grid_csv, emit_results_csv, emit_trajectory_csv,
    fletcher_reeves_cg, newton_raphson, probe_grid, run_matrix, steepest_descent, ExperimentMatrix,
    RealVector, Rosenbrock, RunResult, StepRule, TerminationPolicy,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "rosenbench",
    version,
    about = "Minimize Rosenbrock functions and reproduce the benchmark matrix"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one optimizer from one starting point
    Run(RunArgs),
    /// Run the full experiment matrix and write the results table
    Bench(BenchArgs),
    /// Sample the objective on a grid for level-curve plots
    Contour(ContourArgs),
    /// Compare analytic derivatives against finite differences
    Checkgrad(CheckgradArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Sd,
    Newton,
    Cg,
}

#[derive(Debug, Args)]
struct PolicyArgs {
    /// Gradient-norm tolerance
    #[arg(long, value_parser = positive_real)]
    eps: Option<f64>,
    /// Iteration cap
    #[arg(long = "max-iter", value_parser = clap::value_parser!(u64).range(1..))]
    max_iter: Option<u64>,
    /// Iterate-norm divergence guard
    #[arg(long, value_parser = positive_real)]
    blowup: Option<f64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "sd")]
    method: MethodArg,
    /// fixed:<a> | variable:<a1,a2,...> | quadfit:<a1,a2,a3> | golden:<lo>:<hi>[:tol]
    #[arg(long, value_parser = parse_step)]
    step: Option<StepRule>,
    #[arg(long, default_value = "1", value_parser = positive_real)]
    kappa: f64,
    #[arg(long, default_value = "2,2", value_parser = parse_pair, allow_hyphen_values = true)]
    start: [f64; 2],
    #[command(flatten)]
    policy: PolicyArgs,
    /// Reset the CG direction every N iterations
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    restart: Option<u64>,
    /// Redraw quadratic-fit samples each iteration from the given range
    #[arg(long)]
    seed: Option<u64>,
    /// Write the trajectory CSV here
    #[arg(long)]
    traj: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Results CSV path (standard output if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    policy: PolicyArgs,
}

#[derive(Debug, Args)]
struct ContourArgs {
    #[arg(long, default_value = "1", value_parser = positive_real)]
    kappa: f64,
    #[arg(long = "x-range", default_value = "-2,6", value_parser = parse_range, allow_hyphen_values = true)]
    x_range: [f64; 2],
    #[arg(long = "y-range", default_value = "-2,6", value_parser = parse_range, allow_hyphen_values = true)]
    y_range: [f64; 2],
    #[arg(long, default_value = "401", value_parser = clap::value_parser!(u64).range(2..))]
    resolution: u64,
    /// Grid CSV path (standard output if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckgradArgs {
    #[arg(long, default_value = "1", value_parser = positive_real)]
    kappa: f64,
}

fn positive_real(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [a, b] = parts.as_slice() else {
        return Err(format!("expected two comma-separated numbers, got {s:?}"));
    };
    let parse = |t: &str| -> Result<f64, String> {
        let v: f64 = t
            .trim()
            .parse()
            .map_err(|_| format!("{t:?} is not a number"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("{t:?} is not finite"))
        }
    };
    Ok([parse(a)?, parse(b)?])
}

fn parse_range(s: &str) -> Result<[f64; 2], String> {
    let [lo, hi] = parse_pair(s)?;
    if lo < hi {
        Ok([lo, hi])
    } else {
        Err(format!("range must have lo < hi, got {s:?}"))
    }
}

fn parse_step(s: &str) -> Result<StepRule, String> {
    s.parse::<StepRule>().map_err(|e| e.to_string())
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: MethodArg,
    /// `None` for Newton.
    pub rule: Option<StepRule>,
    pub kappa: f64,
    pub start: [f64; 2],
    pub policy: TerminationPolicy,
    pub restart: Option<usize>,
    pub traj: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliConfig {
    Run(RunConfig),
    Bench {
        policy: TerminationPolicy,
        out: Option<PathBuf>,
    },
    Contour {
        kappa: f64,
        x_range: (f64, f64),
        y_range: (f64, f64),
        resolution: usize,
        out: Option<PathBuf>,
    },
    Checkgrad {
        kappa: f64,
    },
}

fn usage(kind: ErrorKind, msg: impl std::fmt::Display) -> clap::Error {
    Cli::command().error(kind, msg)
}

fn policy_from(args: &PolicyArgs) -> Result<TerminationPolicy, clap::Error> {
    let d = TerminationPolicy::default();
    let policy = TerminationPolicy {
        epsilon: args.eps.unwrap_or(d.epsilon),
        max_iterations: args.max_iter.map_or(d.max_iterations, |m| m as usize),
        blowup_norm: args.blowup.unwrap_or(d.blowup_norm),
    };
    policy
        .validate()
        .map_err(|e| usage(ErrorKind::ValueValidation, e))?;
    Ok(policy)
}

/// Parses and validates `argv` (including the program name).
///
/// Errors carry clap's exit status: 2 for usage errors, 0 for `--help` and
/// `--version`.
pub fn parse_args<I, T>(argv: I) -> Result<CliConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    match cli.command {
        Command::Run(a) => {
            let policy = policy_from(&a.policy)?;
            let rule = match (a.method, a.step) {
                (MethodArg::Newton, Some(_)) => {
                    return Err(usage(
                        ErrorKind::ArgumentConflict,
                        "--step does not apply to --method newton",
                    ))
                }
                (MethodArg::Newton, None) => None,
                (_, step) => Some(step.unwrap_or(StepRule::Fixed { alpha: 0.0124 })),
            };
            if a.restart.is_some() && a.method != MethodArg::Cg {
                return Err(usage(
                    ErrorKind::ArgumentConflict,
                    "--restart only applies to --method cg",
                ));
            }
            let rule = match (rule, a.seed) {
                (Some(StepRule::QuadraticFit { samples, .. }), Some(seed)) => {
                    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    Some(
                        StepRule::quadratic_fit_random(lo, hi, seed)
                            .map_err(|e| usage(ErrorKind::ValueValidation, e))?,
                    )
                }
                (_, Some(_)) => {
                    return Err(usage(
                        ErrorKind::ArgumentConflict,
                        "--seed only applies to a quadfit step rule",
                    ))
                }
                (rule, None) => rule,
            };
            Ok(CliConfig::Run(RunConfig {
                method: a.method,
                rule,
                kappa: a.kappa,
                start: a.start,
                policy,
                restart: a.restart.map(|r| r as usize),
                traj: a.traj,
            }))
        }
        Command::Bench(a) => Ok(CliConfig::Bench {
            policy: policy_from(&a.policy)?,
            out: a.out,
        }),
        Command::Contour(a) => Ok(CliConfig::Contour {
            kappa: a.kappa,
            x_range: (a.x_range[0], a.x_range[1]),
            y_range: (a.y_range[0], a.y_range[1]),
            resolution: a.resolution as usize,
            out: a.out,
        }),
        Command::Checkgrad(a) => Ok(CliConfig::Checkgrad { kappa: a.kappa }),
    }
}

fn write_to(
    path: Option<&Path>,
    stdout: &mut dyn Write,
    emit: impl FnOnce(&mut dyn Write) -> rosenbench_core::Result<()>,
) -> Result<(), String> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| format!("cannot write {}: {e}", p.display()))?;
            let mut w = BufWriter::new(file);
            emit(&mut w).map_err(|e| format!("cannot write {}: {e}", p.display()))?;
            w.flush()
                .map_err(|e| format!("cannot write {}: {e}", p.display()))
        }
        None => emit(stdout).map_err(|e| e.to_string()),
    }
}

fn method_name(m: MethodArg) -> &'static str {
    match m {
        MethodArg::Sd => "sd",
        MethodArg::Newton => "newton",
        MethodArg::Cg => "cg",
    }
}

fn verdict_line(cfg: &RunConfig, run: &RunResult) -> String {
    let rule = cfg
        .rule
        .as_ref()
        .map_or_else(|| "none".to_string(), StepRule::to_string);
    let status = rosenbench_core::experiment::status_label(&run.status);
    format!(
        "{} {rule} kappa={} start=({}, {}): {status} iterations={} final_point={} final_grad_norm={:e}",
        method_name(cfg.method),
        cfg.kappa,
        cfg.start[0],
        cfg.start[1],
        run.iterations(),
        run.final_point,
        run.final_grad_norm
    )
}

fn execute_run(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), String> {
    let f = Rosenbrock::new(cfg.kappa).map_err(|e| e.to_string())?;
    let x0 = RealVector::from_slice(&cfg.start).map_err(|e| e.to_string())?;
    let run = match (cfg.method, &cfg.rule) {
        (MethodArg::Newton, _) => newton_raphson(&f, &x0, &cfg.policy),
        (MethodArg::Sd, Some(rule)) => steepest_descent(&f, &x0, rule, &cfg.policy),
        (MethodArg::Cg, Some(rule)) => fletcher_reeves_cg(&f, &x0, rule, &cfg.policy, cfg.restart),
        (_, None) => unreachable!("first-order methods always carry a rule"),
    }
    .map_err(|e| e.to_string())?;
    writeln!(stdout, "{}", verdict_line(cfg, &run)).map_err(|e| e.to_string())?;
    if let Some(path) = &cfg.traj {
        write_to(Some(path), stdout, |w| emit_trajectory_csv(&run, w))?;
    }
    Ok(())
}

/// Runs a validated configuration, writing results to `stdout` and messages
/// to `stderr`. Returns the process exit status.
pub fn execute(config: &CliConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let outcome = match config {
        CliConfig::Run(cfg) => execute_run(cfg, stdout),
        CliConfig::Bench { policy, out } => {
            let matrix = ExperimentMatrix {
                policy: *policy,
                ..ExperimentMatrix::default()
            };
            run_matrix(&matrix)
                .map_err(|e| e.to_string())
                .and_then(|rows| write_to(out.as_deref(), stdout, |w| emit_results_csv(&rows, w)))
        }
        CliConfig::Contour {
            kappa,
            x_range,
            y_range,
            resolution,
            out,
        } => contour_grid(*kappa, *x_range, *y_range, *resolution)
            .map_err(|e| e.to_string())
            .and_then(|grid| write_to(out.as_deref(), stdout, |w| emit_grid_csv(&grid, w))),
        CliConfig::Checkgrad { kappa } => Rosenbrock::new(*kappa)
            .and_then(|f| check_derivatives(&f, &probe_grid(-2.0, 2.0, 5)))
            .map_err(|e| e.to_string())
            .and_then(|report| {
                writeln!(
                    stdout,
                    "kappa={kappa} probes={} max_gradient_error={:e} max_hessian_error={:e}",
                    report.probes, report.max_gradient_error, report.max_hessian_error
                )
                .map_err(|e| e.to_string())
            }),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(msg) => {
            let _ = writeln!(stderr, "rosenbench: {msg}");
            EXIT_FAILURE
        }
    }
}
