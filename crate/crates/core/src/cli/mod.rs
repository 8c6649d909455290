//! Command-line entry point: `fbm`, `frac`, `solve` and `experiment`.
//!
//! Exit codes: 0 success, 1 a pre-registered criterion failed, 2 parse error,
//! 3 validation error, 4 numerical failure (explosion), 5 I/O error.

pub mod io;
mod solve;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::driver::{sample_fbm, FbmMethod, FbmParams, SeedSpec};
use crate::experiments::{run_experiment, version_string, ExperimentConfig, ExperimentError, Report};
use crate::fraccalc::{fractional_norms, gls_integral, young_love_bound, FracError};
use crate::solver::SolverError;

pub use solve::{solve, SolveConfig};

/// Environment variable supplying the default output directory.
pub const OUT_DIR_ENV: &str = "MIXSDDE_OUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io { .. } => 5,
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Explosion { .. } | SolverError::Adaptedness { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Parse(msg) => CliError::Parse(msg),
            ExperimentError::Config(_) | ExperimentError::Sdde(_) | ExperimentError::TooFewSamples { .. } | ExperimentError::Driver(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<FracError> for CliError {
    fn from(e: FracError) -> Self {
        CliError::Validation(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "mixsdde", version, about = "Mixed stochastic delay equations: drivers, fractional calculus, solvers and experiments")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample one fractional Brownian motion path.
    Fbm(FbmArgs),
    /// Fractional-calculus norms and integrals of CSV paths.
    #[command(subcommand)]
    Frac(FracCommand),
    /// Solve one equation from a config file.
    Solve(SolveArgs),
    /// Run a Monte Carlo experiment from a config file.
    Experiment(ExperimentArgs),
}

/// Flags shared by the config-driven subcommands.
#[derive(Debug, Clone, Args)]
pub struct RunFlags {
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
    pub out: PathBuf,
    /// Override of the master seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct FbmArgs {
    #[arg(long)]
    pub hurst: f64,
    #[arg(long)]
    pub n_steps: usize,
    #[arg(long)]
    pub horizon: f64,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub stream: u64,
    #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
    pub out: PathBuf,
    /// Stem of the written `<name>.csv` and `<name>.json`.
    #[arg(long, default_value = "fbm")]
    pub name: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Cholesky,
    DaviesHarte,
}

#[derive(Debug, Subcommand)]
pub enum FracCommand {
    /// `||f||_{1,alpha}`, `||f||_{0,alpha}`, sup norm and Hölder seminorm of a scalar path.
    Norms {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        lambda: f64,
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        interval: Option<Vec<f64>>,
    },
    /// Generalized Lebesgue–Stieltjes integral of `f` against `g`.
    Integral {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        interval: Option<Vec<f64>>,
    },
    /// Right-hand side of the Young–Love inequality.
    YoungLove {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        interval: Option<Vec<f64>>,
    },
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub run: RunFlags,
    /// Stem of the written `<name>.csv` and `<name>.json`.
    #[arg(long, default_value = "solution")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub kind: KindArg,
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Coeff,
    Delay,
    Euler,
    Ito,
    Moments,
    Quasi,
}

impl KindArg {
    /// Name of the matching `experiment` key in the config.
    pub fn config_name(self) -> &'static str {
        match self {
            KindArg::Coeff => "coeff_convergence",
            KindArg::Delay => "vanishing_delay",
            KindArg::Euler => "euler_refinement",
            KindArg::Ito => "ito_limit",
            KindArg::Moments => "moments",
            KindArg::Quasi => "quasi_contract",
        }
    }
}

/// Resolved invocation of a config-driven subcommand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub config: PathBuf,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub workers: usize,
    pub verbosity: u8,
}

/// Reads, parses and validates an experiment config, applying a seed override.
pub fn parse_and_validate(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let text = io::read_text(path)?;
    let mut cfg = ExperimentConfig::from_json(&text).map_err(|e| match e {
        ExperimentError::Parse(msg) => CliError::Parse(format!("{}: {msg}", path.display())),
        other => CliError::from(other),
    })?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    Ok(cfg.resolved()?)
}

/// What a successful command produced.
#[derive(Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Lines for standard output.
    pub lines: Vec<String>,
    /// All pre-registered criteria held (always true outside `experiment`).
    pub passed: bool,
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Fbm(args) => run_fbm(args),
        Command::Frac(cmd) => run_frac(cmd),
        Command::Solve(args) => run_solve(args, cli.verbose),
        Command::Experiment(args) => run_experiment_command(args, cli.verbose),
    }
}

/// Maps a run result to the process exit code, printing diagnostics.
pub fn exit_code(result: &Result<Outcome, CliError>) -> i32 {
    match result {
        Ok(o) if o.passed => 0,
        Ok(_) => 1,
        Err(e) => e.exit_code(),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn interval(v: &Option<Vec<f64>>) -> Option<(f64, f64)> {
    v.as_ref().map(|v| (v[0], v[1]))
}

fn run_fbm(args: &FbmArgs) -> Result<Outcome, CliError> {
    let method = match args.method {
        Some(MethodArg::Cholesky) => FbmMethod::Cholesky,
        Some(MethodArg::DaviesHarte) => FbmMethod::DaviesHarte,
        None => FbmMethod::auto(args.n_steps),
    };
    let params = FbmParams::new(args.hurst, args.n_steps, args.horizon, method).map_err(|e| CliError::Validation(e.to_string()))?;
    let seed = SeedSpec::new(args.seed, args.stream);
    let path = sample_fbm(params, seed).map_err(|e| CliError::Numerical(e.to_string()))?;
    let csv = args.out.join(format!("{}.csv", args.name));
    let meta = args.out.join(format!("{}.json", args.name));
    io::write_text(&csv, &io::path_to_csv(&path, &io::default_columns(1)))?;
    #[derive(Serialize)]
    struct Sidecar {
        version: String,
        params: FbmParams,
        seed: SeedSpec,
    }
    io::write_text(
        &meta,
        &to_json(&Sidecar {
            version: version_string(),
            params,
            seed,
        }),
    )?;
    Ok(Outcome {
        lines: vec![format!("wrote {} and {}", csv.display(), meta.display())],
        files: vec![csv, meta],
        passed: true,
    })
}

fn run_frac(cmd: &FracCommand) -> Result<Outcome, CliError> {
    let text = match cmd {
        FracCommand::Norms {
            input,
            alpha,
            lambda,
            interval: iv,
        } => {
            let f = io::read_path_csv(input)?;
            to_json(&fractional_norms(&f, *alpha, interval(iv), *lambda)?)
        }
        FracCommand::Integral { f, g, alpha, interval: iv } => {
            let (mut f, mut g) = (io::read_path_csv(f)?, io::read_path_csv(g)?);
            if let Some((a, b)) = interval(iv) {
                f = f.window(a, b).map_err(|e| CliError::Validation(e.to_string()))?;
                g = g.window(a, b).map_err(|e| CliError::Validation(e.to_string()))?;
            }
            to_json(&serde_json::json!({ "integral": gls_integral(&f, &g, *alpha)? }))
        }
        FracCommand::YoungLove {
            f,
            g,
            lambda,
            mu,
            interval: iv,
        } => {
            let (f, g) = (io::read_path_csv(f)?, io::read_path_csv(g)?);
            to_json(&serde_json::json!({ "bound": young_love_bound(&f, &g, *lambda, *mu, interval(iv))? }))
        }
    };
    Ok(Outcome {
        files: Vec::new(),
        lines: vec![text.trim_end().to_string()],
        passed: true,
    })
}

fn run_solve(args: &SolveArgs, verbosity: u8) -> Result<Outcome, CliError> {
    let mut cfg: SolveConfig = io::read_json(&args.config)?;
    if let Some(s) = args.run.seed {
        cfg.master_seed = s;
    }
    let run = RunConfig {
        subcommand: "solve".into(),
        config: args.config.clone(),
        out_dir: args.run.out.clone(),
        seed: args.run.seed,
        workers: args.run.workers,
        verbosity,
    };
    let start = Instant::now();
    let path = solve(&cfg)?;
    let runtime = start.elapsed().as_secs_f64();
    let csv = run.out_dir.join(format!("{}.csv", args.name));
    let meta = run.out_dir.join(format!("{}.json", args.name));
    io::write_text(&csv, &io::path_to_csv(&path, &io::default_columns(path.dim())))?;
    #[derive(Serialize)]
    struct Sidecar<'a> {
        version: String,
        config: &'a SolveConfig,
        seed: SeedSpec,
        dims: [usize; 3],
        scheme: crate::solver::Scheme,
        runtime_seconds: f64,
    }
    io::write_text(
        &meta,
        &to_json(&Sidecar {
            version: version_string(),
            config: &cfg,
            seed: SeedSpec::new(cfg.master_seed, cfg.stream),
            dims: [cfg.spec.dim, cfg.spec.n_wiener(), cfg.spec.n_fractional()],
            scheme: cfg.scheme,
            runtime_seconds: runtime,
        }),
    )?;
    Ok(Outcome {
        lines: vec![format!("wrote {} and {}", csv.display(), meta.display())],
        files: vec![csv, meta],
        passed: true,
    })
}

/// Per-path distances of a convergence report as `replica,level,distance` rows.
fn distances_csv(report: &Report) -> Option<String> {
    let Report::Convergence(r) = report else { return None };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["replica", "level", "distance"]).expect("in-memory write");
    for level in &r.levels {
        for (i, d) in level.distances.iter().enumerate() {
            w.write_record([i.to_string(), level.level.to_string(), d.to_string()])
                .expect("in-memory write");
        }
    }
    Some(String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv"))
}

fn run_experiment_command(args: &ExperimentArgs, verbosity: u8) -> Result<Outcome, CliError> {
    let cfg = parse_and_validate(&args.config, args.run.seed)?;
    let expected = args.kind.config_name();
    if cfg.experiment.name() != expected {
        return Err(CliError::Validation(format!(
            "subcommand expects a {expected} config, got {}",
            cfg.experiment.name()
        )));
    }
    if args.run.workers == 0 {
        return Err(CliError::Validation("workers must be at least 1".into()));
    }
    let run = RunConfig {
        subcommand: format!("experiment {}", expected),
        config: args.config.clone(),
        out_dir: args.run.out.clone(),
        seed: args.run.seed,
        workers: args.run.workers,
        verbosity,
    };
    log::info!("running {} with {} workers", run.subcommand, run.workers);
    let start = Instant::now();
    let report = run_experiment(&cfg, run.workers)?;
    let runtime = start.elapsed().as_secs_f64();
    let stem = expected;
    let report_path = run.out_dir.join(format!("{stem}_report.json"));
    io::write_text(&report_path, &report.to_json())?;
    let mut files = vec![report_path.clone()];
    if let Some(csv) = distances_csv(&report) {
        let p = run.out_dir.join(format!("{stem}_paths.csv"));
        io::write_text(&p, &csv)?;
        files.push(p);
    }
    // timing lives outside the report so reports stay byte-identical across runs
    let timing = run.out_dir.join(format!("{stem}_timing.json"));
    io::write_text(&timing, &to_json(&serde_json::json!({ "run": run, "runtime_seconds": runtime })))?;
    files.push(timing);
    let mut lines: Vec<String> = report
        .criteria()
        .iter()
        .map(|c| format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
        .collect();
    lines.push(format!("report written to {}", report_path.display()));
    Ok(Outcome {
        files,
        lines,
        passed: report.passed(),
    })
}
