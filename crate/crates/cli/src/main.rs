//! `bilinear` command-line tool.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use bilinear::io::{
    read_series_csv, write_coverage_table, write_estimation_table, write_region_csv, write_region_json,
    write_score_terms_csv, write_series_csv, write_size_power_table, EstimationRecord,
};
use bilinear::montecarlo::ExperimentMode;
use bilinear::{
    fit_gmle, intervals_for, run_experiment_with_workers, stationarity_region, test_b_zero, ErrorLaw, ExperimentSpec,
    GammaMethod, ModelParams, NullNuisance, ParamSpace, SeriesData,
};

mod manifest;

use manifest::{Manifest, RunConfig};

const AFTER_HELP: &str = "\
Exit codes:
  0  success (for `test`: H0 b = 0 not rejected)
  1  `test` only: H0 b = 0 rejected
  2  invalid arguments or unreadable input
  3  non-stationary parameters (simulate without --force, montecarlo)
  4  singular design or singular Sigma-hat
  5  any other failure

Every run writes a manifest next to its output (`<output>.manifest.json`, or
`manifest.json` inside the montecarlo output directory). `bilinear replay
<manifest>` reruns it and reproduces the outputs bit for bit.";

#[derive(Parser)]
#[command(
    name = "bilinear",
    version,
    about = "Simulation, QML estimation and boundary testing for the bilinear model Y_t = mu + phi*Y_{t-2} + b*Y_{t-2}*eps_{t-1} + eps_t"
)]
#[command(after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a series and write it as a one-column CSV (`y`).
    Simulate(SimulateArgs),
    /// Fit the quasi-likelihood and write estimates, sandwich and intervals as JSON.
    Estimate(EstimateArgs),
    /// One-sided test of b = 0. Exit 0 = fail to reject, exit 1 = reject.
    #[command(
        after_help = "Exit status follows grep: 0 when H0 b = 0 is not rejected, 1 when it is rejected, 2 or more on error."
    )]
    Test(TestArgs),
    /// Run a Monte Carlo experiment from a JSON spec and write table CSVs.
    Montecarlo(MonteCarloArgs),
    /// Evaluate the Lyapunov exponent on a (phi, b) grid.
    Region(RegionArgs),
    /// Rerun the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum LawArg {
    Gaussian,
    StudentT,
    Uniform,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    mu: f64,
    #[arg(long, allow_hyphen_values = true)]
    phi: f64,
    #[arg(long, allow_hyphen_values = true)]
    b: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = bilinear::model::DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long, value_enum, default_value_t = LawArg::Gaussian)]
    law: LawArg,
    /// Degrees of freedom for `--law student-t` (must exceed 4).
    #[arg(long, default_value_t = 5.0)]
    df: f64,
    /// Simulate even when the Lyapunov exponent is not negative.
    #[arg(long)]
    force: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    /// Series CSV with a `y` column.
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Confidence level of the reported intervals.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Allow b2 = 0 (the boundary box) instead of b2 >= 1e-8.
    #[arg(long)]
    boundary: bool,
    #[arg(long, default_value_t = bilinear::estimation::DEFAULT_TOL)]
    tol: f64,
    /// Limit draws for intervals when the fit lands on the boundary.
    #[arg(long, default_value_t = bilinear::inference::MIN_BOUNDARY_DRAWS)]
    draws: usize,
    /// Seed for the boundary-limit draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the per-observation scores at the estimate to this CSV.
    #[arg(long)]
    scores: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum NuisanceArg {
    Unrestricted,
    Restricted,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TestArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Nuisance values used for the null variance.
    #[arg(long, value_enum, default_value_t = NuisanceArg::Unrestricted)]
    nuisance: NuisanceArg,
}

#[derive(Debug, Clone, Args)]
pub struct MonteCarloArgs {
    /// Experiment spec (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(short, long)]
    output: PathBuf,
    /// Worker threads; 0 uses all cores. Output does not depend on this.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RegionArgs {
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    phi_min: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    phi_max: f64,
    #[arg(long, default_value_t = 81)]
    phi_steps: usize,
    #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
    b_min: f64,
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    b_max: f64,
    #[arg(long, default_value_t = 121)]
    b_steps: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// Quadrature nodes per panel.
    #[arg(long, default_value_t = 64)]
    nodes: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    manifest: PathBuf,
    /// Write to this output instead of the recorded one.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// An error together with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<bilinear::Error> for Failure {
    fn from(e: bilinear::Error) -> Self {
        use bilinear::Error as E;
        let code = match &e {
            E::NonStationaryParams { .. } => 3,
            E::SingularDesign(_) | E::SingularSigma { .. } | E::ZeroDenominator | E::DegenerateSigma44(_) => 4,
            E::InvalidParameter(_)
            | E::InvalidLength { .. }
            | E::UnsupportedQuadrature
            | E::InsufficientHistory { .. }
            | E::Csv(_)
            | E::Json(_) => 2,
            _ => 5,
        };
        let error = match &e {
            E::NonStationaryParams { gamma, .. } if *gamma > 0.0 => anyhow::Error::new(e)
                .context("gamma > 0: no stationary solution exists (use --force to simulate anyway)"),
            E::NonStationaryParams { .. } => {
                anyhow::Error::new(e).context("gamma is not clearly below 0 (use --force to simulate anyway)")
            }
            _ => e.into(),
        };
        Failure { code, error }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: 5, error }
    }
}

fn usage(error: anyhow::Error) -> Failure {
    Failure { code: 2, error }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => run(RunConfig::Simulate(a)),
        Command::Estimate(a) => run(RunConfig::Estimate(a)),
        Command::Test(a) => run(RunConfig::Test(a)),
        Command::Region(a) => run(RunConfig::Region(a)),
        Command::Montecarlo(a) => resolve_montecarlo(&a).and_then(run),
        Command::Replay(a) => replay(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn resolve_montecarlo(a: &MonteCarloArgs) -> Result<RunConfig, Failure> {
    let file = File::open(&a.config)
        .with_context(|| format!("cannot open {}", a.config.display()))
        .map_err(usage)?;
    let spec: ExperimentSpec = serde_json::from_reader(BufReader::new(file))
        .with_context(|| format!("cannot parse experiment spec {}", a.config.display()))
        .map_err(usage)?;
    Ok(RunConfig::Montecarlo {
        spec,
        workers: a.workers,
        output: a.output.clone(),
    })
}

fn replay(a: &ReplayArgs) -> CmdResult {
    let m = Manifest::read(&a.manifest).map_err(usage)?;
    let mut config = m.config;
    if let Some(out) = &a.output {
        config.set_output(out.clone());
    }
    if let (Some(path), Some(expected)) = (config.input(), &m.input_sha256) {
        let actual = manifest::sha256_file(path).map_err(usage)?;
        if &actual != expected {
            return Err(usage(anyhow::anyhow!(
                "input {} changed since the manifest was written",
                path.display()
            )));
        }
    }
    if m.version != bilinear::VERSION {
        log::warn!(
            "manifest was written by version {}, running {}",
            m.version,
            bilinear::VERSION
        );
    }
    run(config)
}

/// Runs a resolved command and writes its manifest.
fn run(config: RunConfig) -> CmdResult {
    let code = match &config {
        RunConfig::Simulate(a) => simulate(a)?,
        RunConfig::Estimate(a) => estimate(a)?,
        RunConfig::Test(a) => test(a)?,
        RunConfig::Montecarlo { spec, workers, output } => montecarlo(spec, *workers, output)?,
        RunConfig::Region(a) => region(a)?,
    };
    Manifest::new(config)?.write()?;
    Ok(code)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn read_series(path: &Path) -> Result<SeriesData, Failure> {
    let file = File::open(path)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(usage)?;
    Ok(read_series_csv(BufReader::new(file))?)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), Failure> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(bilinear::Error::from)?;
    w.write_all(b"\n").context("write failed")?;
    w.flush().context("write failed")?;
    Ok(())
}

fn simulate(a: &SimulateArgs) -> CmdResult {
    let params = ModelParams::new(a.mu, a.phi, a.sigma2, a.b)?;
    let law = match a.law {
        LawArg::Gaussian => ErrorLaw::Gaussian,
        LawArg::StudentT => ErrorLaw::StudentT { df: a.df },
        LawArg::Uniform => ErrorLaw::Uniform,
    };
    let data = if a.force {
        bilinear::model::simulate_unchecked(&params, law, a.n, a.burn_in, a.seed)?
    } else {
        bilinear::simulate(&params, law, a.n, a.burn_in, a.seed)?
    };
    let mut w = create(&a.output)?;
    write_series_csv(&data, &mut w)?;
    w.flush().context("write failed")?;
    Ok(0)
}

fn estimate(a: &EstimateArgs) -> CmdResult {
    let data = read_series(&a.input)?;
    let space = if a.boundary {
        ParamSpace::boundary()
    } else {
        ParamSpace::interior()
    };
    let fit = fit_gmle(&data, &space, a.tol)?;
    for w in &fit.warnings {
        log::warn!("{w}");
    }
    let intervals = intervals_for(&fit, a.level, a.draws, a.seed)?;
    write_json(&EstimationRecord::new(&fit, intervals), &a.output)?;
    if let Some(path) = &a.scores {
        let mut w = create(path)?;
        write_score_terms_csv(&fit.theta_hat, &data, &mut w)?;
        w.flush().context("write failed")?;
    }
    Ok(0)
}

fn test(a: &TestArgs) -> CmdResult {
    let data = read_series(&a.input)?;
    let nuisance = match a.nuisance {
        NuisanceArg::Unrestricted => NullNuisance::Unrestricted,
        NuisanceArg::Restricted => NullNuisance::Restricted,
    };
    let r = test_b_zero(&data, a.level, nuisance)?;
    write_json(&r, &a.output)?;
    Ok(u8::from(r.reject))
}

fn montecarlo(spec: &ExperimentSpec, workers: usize, dir: &Path) -> CmdResult {
    let summaries = run_experiment_with_workers(spec, workers)?;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for s in summaries.iter().filter(|s| s.aborted) {
        log::warn!(
            "cell {} n={} aborted after {} failed replications",
            s.cell.label(),
            s.cell.n,
            s.failures
        );
    }
    let write = |name: &str, f: &dyn Fn(&mut BufWriter<File>) -> bilinear::Result<()>| -> Result<(), Failure> {
        let mut w = create(&dir.join(name))?;
        f(&mut w)?;
        w.flush().context("write failed")?;
        Ok(())
    };
    match spec.mode {
        ExperimentMode::EstimationTables => write("estimation_table.csv", &|w| write_estimation_table(&summaries, w))?,
        ExperimentMode::SizePowerTable => write("size_power_table.csv", &|w| write_size_power_table(&summaries, w))?,
        ExperimentMode::Coverage => {
            write("estimation_table.csv", &|w| write_estimation_table(&summaries, w))?;
            write("coverage_table.csv", &|w| write_coverage_table(&summaries, w))?;
        }
    }
    write_json(&summaries, &dir.join("summaries.json"))?;
    Ok(0)
}

fn grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>, Failure> {
    if steps == 0 || !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(usage(anyhow::anyhow!("bad grid [{lo}, {hi}] with {steps} steps")));
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    let h = (hi - lo) / (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| if i + 1 == steps { hi } else { lo + h * i as f64 })
        .collect())
}

fn region(a: &RegionArgs) -> CmdResult {
    let phi = grid(a.phi_min, a.phi_max, a.phi_steps)?;
    let b = grid(a.b_min, a.b_max, a.b_steps)?;
    let points = stationarity_region(
        ErrorLaw::Gaussian,
        a.sigma2,
        &phi,
        &b,
        GammaMethod::Quadrature { nodes: a.nodes },
    )?;
    let mut w = create(&a.output)?;
    match a.format {
        Format::Csv => write_region_csv(&points, &mut w)?,
        Format::Json => write_region_json(&points, &mut w)?,
    }
    w.flush().context("write failed")?;
    Ok(0)
}
