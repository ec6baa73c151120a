//! `ldplab`: sample, evaluate and verify from the command line.
//!
//! Exit codes: 0 ok, 2 usage, 3 numerical failure, 4 infeasible experiment,
//! 1 anything else (I/O).

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use ldplab_core::densities::{log_corner_density, log_inverted_t_density};
use ldplab_core::projections::{project_lp_ball, project_product};
use ldplab_core::rates::rate_truncated;
use ldplab_core::rng::par_draws;
use ldplab_core::samplers::{haar_orthogonal, haar_stiefel, uniform_lp_ball, wishart};
use ldplab_core::{DenseMatrix, Error, PGaussianParams, SeededRng};
use serde::Serialize;

use config::{CltParams, CompareParams, DickeyParams, Experiment, ExperimentConfig};
use output::{csv_row, emit, sidecar, sidecar_path, to_json};

/// Bad arguments or input files.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(
    name = "ldplab",
    version,
    about = "Haar Stiefel sampling and large-deviation experiments"
)]
struct Cli {
    /// Worker threads (default: all cores). LDPLAB_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw random matrices or vectors as CSV, one flattened draw per line.
    Sample(SampleArgs),
    /// Log-density of a Stiefel corner or of the inverted t law.
    Density(DensityArgs),
    /// Rate function of a matrix with its truncation report.
    Rate(RateArgs),
    /// Project an ℓ_p ball or product law through one Haar Stiefel matrix.
    Project(ProjectArgs),
    /// Distance between projected ball and product laws across n.
    Compare(CompareArgs),
    /// Run the experiment described by a JSON config file.
    Verify(VerifyArgs),
    /// Compare a Stiefel corner with its Wishart construction.
    Dickey(DickeyArgs),
    /// Test projected ℓ_p-ball marginals for normality.
    Clt(CltArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Distribution {
    Stiefel,
    Orthogonal,
    Wishart,
    Pgaussian,
    Lpball,
}

#[derive(Args, Serialize)]
struct SampleArgs {
    #[arg(long)]
    dist: Distribution,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    count: usize,
    /// Exponent for `pgaussian` and `lpball`; `inf` allowed for `pgaussian`.
    #[arg(long, default_value_t = 2.0)]
    #[serde(serialize_with = "config::write_exponent")]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination; a `.json` sidecar is written next to it.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct DensityArgs {
    /// JSON rows, e.g. `[[0.3, 0.1]]`.
    #[arg(long)]
    matrix: String,
    /// Stiefel dimension; the corner shape is the shape of `matrix`.
    #[arg(long, conflicts_with = "dof", required_unless_present = "dof")]
    n: Option<usize>,
    /// Degrees of freedom of the inverted t law.
    #[arg(long)]
    dof: Option<usize>,
}

#[derive(Args, Serialize)]
struct RateArgs {
    /// JSON rows.
    #[arg(long, conflicts_with = "file", required_unless_present = "file")]
    matrix: Option<String>,
    /// CSV written by `sample`.
    #[arg(long, requires = "rows")]
    file: Option<PathBuf>,
    /// Rows of the matrix stored on each CSV line.
    #[arg(long)]
    rows: Option<usize>,
    /// Zero-based CSV line.
    #[arg(long, default_value_t = 0)]
    line: usize,
    #[arg(long, default_value_t = usize::MAX)]
    max_level: usize,
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Law {
    Ball,
    Product,
}

#[derive(Args, Serialize)]
struct ProjectArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    #[serde(serialize_with = "config::write_exponent")]
    p: f64,
    #[arg(long, value_enum, default_value_t = Law::Ball)]
    law: Law,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    p: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    n_values: Vec<usize>,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_path` from the config.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DickeyArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CltArgs {
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads(cli.threads).and_then(|()| dispatch(cli.command));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if is_broken_pipe(&err) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.downcast_ref::<std::io::Error>()
        .is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::NumericalFailure(_) | Error::RecoveryFailure(_)) => 3,
        Some(Error::InfeasibleExperiment(_)) => 4,
        Some(_) => 2,
        None => 1,
    }
}

fn configure_threads(flag: Option<usize>) -> anyhow::Result<()> {
    let threads = match std::env::var("LDPLAB_THREADS") {
        Ok(value) => Some(
            value
                .trim()
                .parse::<usize>()
                .map_err(|_| UsageError(format!("LDPLAB_THREADS={value:?} is not a count")))?,
        ),
        Err(_) => flag,
    };
    if let Some(threads) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("starting worker threads")?;
    }
    Ok(())
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Sample(args) => cmd_sample(&args),
        Command::Density(args) => cmd_density(&args),
        Command::Rate(args) => cmd_rate(&args),
        Command::Project(args) => cmd_project(&args),
        Command::Compare(args) => run_flags(
            Experiment::Compare(CompareParams {
                k: args.k,
                p: args.p,
                n_values: args.n_values,
                count: args.count,
            }),
            args.seed,
            args.output,
        ),
        Command::Verify(args) => cmd_verify(&args),
        Command::Dickey(args) => run_flags(
            Experiment::Dickey(DickeyParams {
                k: args.k,
                m: args.m,
                n: args.n,
                samples: args.samples,
            }),
            args.seed,
            args.output,
        ),
        Command::Clt(args) => run_flags(
            Experiment::Clt(CltParams {
                k: args.k,
                p: args.p,
                n: args.n,
                samples: args.samples,
            }),
            args.seed,
            args.output,
        ),
    }
}

/// Writes `rows` as CSV to `output` (or stdout) with a sidecar echoing
/// `config`.
fn write_table<T: Serialize>(
    command: &str,
    config: &T,
    rows: &[Vec<f64>],
    output: Option<&Path>,
) -> anyhow::Result<()> {
    let text: String = rows.iter().map(|r| csv_row(r)).collect();
    emit(output, &text)?;
    if let Some(path) = output {
        emit(
            Some(&sidecar_path(path)),
            &to_json(&sidecar(command, config))?,
        )?;
    }
    Ok(())
}

fn cmd_sample(args: &SampleArgs) -> anyhow::Result<()> {
    let (k, n) = (args.k, args.n);
    if matches!(args.dist, Distribution::Stiefel | Distribution::Wishart) && k > n {
        return Err(UsageError("k must be ≤ n".into()).into());
    }
    if n == 0 {
        return Err(UsageError("n must be positive".into()).into());
    }
    let rng = &mut SeededRng::new(args.seed, 0);
    let rows: Vec<Vec<f64>> = match args.dist {
        Distribution::Stiefel => {
            par_draws(rng, args.count, |r| Ok(haar_stiefel(r, k, n)?.into_vec()))?
        }
        Distribution::Orthogonal => {
            par_draws(rng, args.count, |r| Ok(haar_orthogonal(r, n)?.into_vec()))?
        }
        Distribution::Wishart => par_draws(rng, args.count, |r| {
            Ok(wishart(r, k, n)?.to_dense().into_vec())
        })?,
        Distribution::Pgaussian => {
            let sampler = PGaussianParams::new(args.p)?.sampler();
            par_draws(rng, args.count, |r| {
                Ok((0..n).map(|_| sampler.draw(r)).collect())
            })?
        }
        Distribution::Lpball => par_draws(rng, args.count, |r| uniform_lp_ball(r, args.p, n, 1.0))?,
    };
    write_table("sample", args, &rows, args.output.as_deref())
}

fn cmd_density(args: &DensityArgs) -> anyhow::Result<()> {
    let a = output::parse_matrix_json(&args.matrix)?;
    let log = match (args.n, args.dof) {
        (Some(n), _) => log_corner_density(&a, a.rows(), a.cols(), n)?,
        (None, Some(dof)) => log_inverted_t_density(&a, dof)?,
        (None, None) => unreachable!("clap requires one of --n, --dof"),
    };
    // JSON has no -∞.
    let value = if log.is_outside_support() {
        serde_json::json!("-inf")
    } else {
        serde_json::json!(log.value())
    };
    emit(
        None,
        &to_json(&serde_json::json!({
            "log_density": value,
            "outside_support": log.is_outside_support(),
        }))?,
    )
}

fn cmd_rate(args: &RateArgs) -> anyhow::Result<()> {
    let a: DenseMatrix = match (&args.matrix, &args.file) {
        (Some(text), _) => output::parse_matrix_json(text)?,
        (None, Some(path)) => {
            output::read_matrix_csv(path, args.line, args.rows.expect("clap requires --rows"))?
        }
        (None, None) => unreachable!("clap requires one of --matrix, --file"),
    };
    if a.rows() == 0 {
        return Err(UsageError("matrix has no rows".into()).into());
    }
    let cols = a
        .to_column_list()
        .map_err(|e| UsageError(format!("malformed matrix: {e}")))?;
    let (rate, report) = rate_truncated(&cols, args.max_level, args.tol)?;
    let summary = match (rate.is_infinite(), report.boundary) {
        (true, true) => "+inf (boundary)".to_string(),
        _ => rate.to_string(),
    };
    emit(
        None,
        &format!(
            "{summary}\n{}",
            to_json(&serde_json::json!({ "rate": rate, "report": report }))?
        ),
    )
}

fn cmd_project(args: &ProjectArgs) -> anyhow::Result<()> {
    if args.k > args.n {
        return Err(UsageError("k must be ≤ n".into()).into());
    }
    let rng = &mut SeededRng::new(args.seed, 0);
    let v = haar_stiefel(rng, args.k, args.n)?;
    let cloud = match args.law {
        Law::Ball => project_lp_ball(rng, &v, args.p, args.count)?,
        Law::Product => project_product(rng, &v, PGaussianParams::new(args.p)?, args.count)?,
    };
    write_table("project", args, cloud.points(), args.output.as_deref())
}

fn run_flags(experiment: Experiment, seed: u64, output: Option<PathBuf>) -> anyhow::Result<()> {
    let config = ExperimentConfig {
        schema_version: config::SCHEMA_VERSION,
        seed,
        output_path: output
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default(),
        experiment,
    };
    run_config(&config, output.as_deref())
}

fn cmd_verify(args: &VerifyArgs) -> anyhow::Result<()> {
    let config = ExperimentConfig::load(&args.config)?;
    let output = args
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output_path));
    run_config(&config, Some(&output))
}

/// Runs the experiment and writes its JSON report (with the config echo) to
/// `output`, plus a `.csv` table beside it when the outcome has one.
fn run_config(config: &ExperimentConfig, output: Option<&Path>) -> anyhow::Result<()> {
    let outcome = config.experiment.run(config.seed)?;
    let document = serde_json::json!({
        "build": output::BUILD_ID,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "report": outcome,
    });
    let text = to_json(&document)?;
    match output {
        Some(path) => {
            emit(Some(path), &text)?;
            if let Some(csv) = outcome.to_csv() {
                emit(Some(&path.with_extension("csv")), &csv)?;
            }
            emit(None, &to_json(&outcome)?)
        }
        None => emit(None, &text),
    }
}
