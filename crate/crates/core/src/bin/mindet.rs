use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::LevelFilter;

use mindet::acceptance;
use mindet::error::{Error, Result};
use mindet::experiment::{reverify, run_experiment, write_artifacts, Artifact, ExperimentConfig};
use mindet::generators::{BumpSpec, DisjointPairSpec};
use mindet::grid::Grid;
use mindet::operators::OperatorSpec;
use mindet::verify::{FamilyKind, VerificationReport};

const EXIT_ERROR: u8 = 1;
const EXIT_FAILED: u8 = 2;

#[derive(Parser)]
#[command(
    name = "mindet",
    version,
    about = "Moment-indeterminate density families"
)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build and verify a perturbed family around a single bump.
    GenerateStieltjes {
        #[arg(long, default_value_t = 1.0)]
        half_width: f64,
        #[arg(long, default_value_t = 2.5)]
        lambda: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        phi: f64,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            default_value = "-1,-0.5,0,0.5,1"
        )]
        epsilons: Vec<f64>,
        #[arg(long, default_value_t = 8)]
        n_max: usize,
        #[arg(long, default_value_t = 4096)]
        n_points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build and verify a family of states f1 + e^{i beta} f2.
    GenerateOperator {
        #[arg(long, value_enum, default_value_t = OperatorKind::Translation)]
        operator: OperatorKind,
        /// Coupling of the gauged operator.
        #[arg(long, default_value_t = 0.3, allow_hyphen_values = true)]
        c: f64,
        /// Power of the gauged operator's potential.
        #[arg(long, default_value_t = 2)]
        n: u32,
        /// Distance between the two bump centers.
        #[arg(long, default_value_t = 3.0)]
        gap: f64,
        #[arg(long, default_value_t = 0.5)]
        half_width: f64,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            default_value = "0,1.5707963267948966,3.141592653589793,4.71238898038469"
        )]
        betas: Vec<f64>,
        #[arg(long, default_value_t = 8)]
        n_max: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run verification on the artifacts of an earlier run.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run the acceptance suite and print one line per criterion.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum OperatorKind {
    Translation,
    Gauged,
}

fn all_artifacts() -> BTreeSet<Artifact> {
    Artifact::ALL.into_iter().collect()
}

fn stieltjes_config(
    half_width: f64,
    lambda: f64,
    phi: f64,
    epsilons: Vec<f64>,
    n_max: usize,
    n_points: usize,
    out: PathBuf,
) -> Result<ExperimentConfig> {
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::ConfigInvalid(format!(
            "--half-width must be positive, got {half_width}"
        )));
    }
    let grid = Grid::symmetric(8.0 * half_width, n_points)
        .map_err(|e| Error::ConfigInvalid(format!("--n-points: {e}")))?;
    let config = ExperimentConfig {
        name: "generate-stieltjes".into(),
        kind: FamilyKind::Stieltjes,
        grid,
        generator: Some(BumpSpec::standard(0.0, half_width)),
        lambda: Some(lambda),
        phi: Some(phi),
        epsilons: Some(epsilons),
        pair: None,
        betas: None,
        operator: None,
        n_max,
        output_dir: out,
        emit: all_artifacts(),
    };
    config.validate()?;
    Ok(config)
}

/// Spacing `half_width / 256` and a power-of-two grid whose central quarter
/// holds both bumps.
fn operator_grid(gap: f64, half_width: f64) -> Result<Grid> {
    if !(half_width > 0.0 && half_width.is_finite() && gap.is_finite()) {
        return Err(Error::ConfigInvalid(format!(
            "--half-width and --gap must be finite with positive width, got {half_width}, {gap}"
        )));
    }
    let dx = half_width / 256.0;
    let needed = 8.0 * (0.5 * gap.abs() + half_width);
    let n_points = ((needed / dx).ceil() as usize).next_power_of_two().max(8);
    let range = n_points as f64 * dx;
    Grid::symmetric(0.5 * range, n_points).map_err(|e| Error::ConfigInvalid(e.to_string()))
}

#[allow(clippy::too_many_arguments)]
fn operator_config(
    kind: OperatorKind,
    c: f64,
    n: u32,
    gap: f64,
    half_width: f64,
    betas: Vec<f64>,
    n_max: usize,
    out: PathBuf,
) -> Result<ExperimentConfig> {
    let operator = match kind {
        OperatorKind::Translation => OperatorSpec::Translation,
        OperatorKind::Gauged => OperatorSpec::GaugedTranslation { c, power: n },
    };
    let config = ExperimentConfig {
        name: "generate-operator".into(),
        kind: FamilyKind::Operator,
        grid: operator_grid(gap, half_width)?,
        generator: None,
        lambda: None,
        phi: None,
        epsilons: None,
        pair: Some(DisjointPairSpec::symmetric(0.0, half_width, gap)),
        betas: Some(betas),
        operator: Some(operator),
        n_max,
        output_dir: out,
        emit: all_artifacts(),
    };
    config.validate()?;
    Ok(config)
}

fn summarize(report: &VerificationReport) {
    println!("n  max_spread  tolerance");
    for (n, (s, t)) in report
        .max_moment_spread
        .iter()
        .zip(&report.tolerances)
        .enumerate()
    {
        println!("{n:<2} {s:<11.3e} {t:.3e}");
    }
    println!("min pairwise L1: {:e}", report.min_pairwise_l1);
    for check in &report.condition_checks {
        let status = if check.pass { "pass" } else { "FAIL" };
        println!("check {}: {status} ({:e})", check.name, check.value);
    }
    match serde_json::to_string(&report.verdict) {
        Ok(v) => println!("verdict: {v}"),
        Err(_) => println!("verdict: {:?}", report.verdict),
    }
}

fn verdict_code(report: &VerificationReport) -> u8 {
    if report.verdict.confirmed() {
        0
    } else {
        EXIT_FAILED
    }
}

fn execute(config: &ExperimentConfig, out: Option<PathBuf>) -> Result<u8> {
    let outcome = run_experiment(config)?;
    let dir = out.unwrap_or_else(|| config.output_dir.clone());
    for path in write_artifacts(&config.name, &outcome, &config.emit, &dir)? {
        log::info!("wrote {}", path.display());
    }
    summarize(&outcome.report);
    Ok(verdict_code(&outcome.report))
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Run { config, out } => execute(&ExperimentConfig::load(&config)?, out),
        Command::GenerateStieltjes {
            half_width,
            lambda,
            phi,
            epsilons,
            n_max,
            n_points,
            out,
        } => execute(
            &stieltjes_config(half_width, lambda, phi, epsilons, n_max, n_points, out)?,
            None,
        ),
        Command::GenerateOperator {
            operator,
            c,
            n,
            gap,
            half_width,
            betas,
            n_max,
            out,
        } => execute(
            &operator_config(operator, c, n, gap, half_width, betas, n_max, out)?,
            None,
        ),
        Command::Verify { input } => {
            let (_, fresh) = reverify(&input)?;
            summarize(&fresh);
            Ok(verdict_code(&fresh))
        }
        Command::Selftest => {
            let results = acceptance::run_all();
            for r in &results {
                println!("{r}");
            }
            let passed = results.iter().filter(|r| r.pass).count();
            println!("{passed}/{} criteria passed", results.len());
            Ok(if passed == results.len() {
                0
            } else {
                EXIT_FAILED
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_ERROR,
            });
        }
    };
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
