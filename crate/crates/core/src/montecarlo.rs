//! Replicated simulate-then-estimate experiments.
//!
//! Replication `r` of cell `c` always draws from stream `(master_seed, c, r)`
//! and results are aggregated in `(c, r)` order, so the output does not
//! depend on the worker count.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{fit_gmle, DEFAULT_TOL};
use crate::inference::{intervals_for, test_b_zero_levels, NullNuisance, MIN_BOUNDARY_DRAWS};
use crate::likelihood::ParamSpace;
use crate::model::{simulate_with_rng, ErrorLaw, ModelParams, DEFAULT_BURN_IN};
use crate::rng;
use crate::stationarity::{stationarity_gamma, GammaMethod};

/// Desk-scale replication count for the estimation tables.
pub const DESK_TABLE_REPLICATIONS: usize = 300;
/// Desk-scale replication count for the size/power table.
pub const DESK_SIZE_POWER_REPLICATIONS: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    #[default]
    EstimationTables,
    SizePowerTable,
    Coverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    #[serde(default)]
    pub mu: f64,
    pub phi: f64,
    #[serde(default = "one")]
    pub sigma2: f64,
    /// Bilinear coefficient; ignored when `b_star` is given.
    #[serde(default)]
    pub b: f64,
    /// Local alternative `b = b_star * n^(-1/4)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_star: Option<f64>,
    #[serde(default)]
    pub law: ErrorLaw,
    pub n: usize,
    pub replications: usize,
}

fn one() -> f64 {
    1.0
}

impl CellSpec {
    pub fn new(b: f64, phi: f64, n: usize, replications: usize) -> Self {
        Self {
            mu: 0.0,
            phi,
            sigma2: 1.0,
            b,
            b_star: None,
            law: ErrorLaw::Gaussian,
            n,
            replications,
        }
    }

    pub fn local_alternative(b_star: f64, phi: f64, n: usize, replications: usize) -> Self {
        Self {
            b_star: Some(b_star),
            ..Self::new(0.0, phi, n, replications)
        }
    }

    pub fn effective_b(&self) -> f64 {
        match self.b_star {
            Some(s) => s * (self.n as f64).powf(-0.25),
            None => self.b,
        }
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.mu, self.phi, self.sigma2, self.effective_b())
    }

    /// Column label in the style `(b, phi)`.
    pub fn label(&self) -> String {
        match self.b_star {
            Some(s) => format!("(n={}, phi={}, b={}n^-0.25)", self.n, self.phi, s),
            None => format!("({}, {})", self.b, self.phi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub cells: Vec<CellSpec>,
    pub master_seed: u64,
    #[serde(default)]
    pub mode: ExperimentMode,
    /// Estimation box; defaults to the interior box.
    #[serde(default)]
    pub space: ParamSpace,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Test levels for the size/power mode.
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    /// Nominal level for the coverage mode.
    #[serde(default = "default_coverage_level")]
    pub coverage_level: f64,
    #[serde(default)]
    pub null_nuisance: NullNuisance,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn default_levels() -> Vec<f64> {
    vec![0.1, 0.05]
}

fn default_coverage_level() -> f64 {
    0.95
}

impl ExperimentSpec {
    pub fn new(cells: Vec<CellSpec>, master_seed: u64, mode: ExperimentMode) -> Self {
        Self {
            cells,
            master_seed,
            mode,
            space: ParamSpace::interior(),
            burn_in: DEFAULT_BURN_IN,
            levels: default_levels(),
            coverage_level: default_coverage_level(),
            null_nuisance: NullNuisance::Unrestricted,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::InvalidParameter("experiment has no cells".into()));
        }
        if self.cells.len() > u32::MAX as usize {
            return Err(Error::InvalidParameter("too many cells".into()));
        }
        for c in &self.cells {
            if c.replications < 2 || c.replications > u32::MAX as usize {
                return Err(Error::InvalidParameter(format!(
                    "cell {} needs at least 2 replications",
                    c.label()
                )));
            }
            c.params()?;
            c.law.validate()?;
        }
        self.space.validate()?;
        if self.mode == ExperimentMode::SizePowerTable
            && (self.levels.is_empty() || self.levels.iter().any(|l| !(*l > 0.0 && *l <= 1.0)))
        {
            return Err(Error::InvalidParameter(format!(
                "test levels must lie in (0, 1]: {:?}",
                self.levels
            )));
        }
        if !(self.coverage_level > 0.0 && self.coverage_level < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "coverage level must lie in (0, 1): {}",
                self.coverage_level
            )));
        }
        Ok(())
    }
}

/// `E`, `SD` and `SDhat` of one estimator over the successful replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub mean: f64,
    pub sd: f64,
    pub mean_estimated_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub cell: CellSpec,
    pub b: f64,
    pub successes: usize,
    pub failures: usize,
    pub aborted: bool,
    /// Keyed by `theta1..theta4`, `b_hat`, `two_b_b_hat` (estimation modes).
    pub estimates: Vec<(String, StatSummary)>,
    /// `(level, rejection rate)` (size/power mode).
    pub rejection_rates: Vec<(f64, f64)>,
    /// `(parameter, empirical coverage)` (coverage mode).
    pub coverage: Vec<(String, f64)>,
    /// Replications whose Omega-hat needed eigenvalue clipping.
    pub omega_clipped: usize,
    /// Replications where that clipping raised a warning.
    pub clip_warnings: usize,
    /// Replications whose estimate hit the lower `b2` face.
    pub at_boundary: usize,
}

impl McSummary {
    pub fn estimate(&self, name: &str) -> Option<&StatSummary> {
        self.estimates.iter().find(|(k, _)| k == name).map(|(_, s)| s)
    }

    pub fn rejection_rate(&self, level: f64) -> Option<f64> {
        self.rejection_rates.iter().find(|(l, _)| *l == level).map(|(_, r)| *r)
    }
}

pub const ESTIMATE_NAMES: [&str; 6] = ["theta1", "theta2", "theta3", "theta4", "b_hat", "two_b_b_hat"];
pub const COVERAGE_NAMES: [&str; 5] = ["mu", "phi", "sigma2", "b2", "b"];

/// Everything one replication contributes.
#[derive(Debug, Clone, Default)]
struct Replicate {
    values: [f64; 6],
    estimated_sd: [f64; 6],
    rejects: Vec<bool>,
    covered: Vec<bool>,
    omega_clipped: bool,
    clip_warning: bool,
    at_boundary: bool,
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<McSummary>> {
    run_experiment_with_workers(spec, 0)
}

/// Runs every cell on a pool of `workers` threads (0 picks rayon's default).
/// Output is identical for any worker count.
pub fn run_experiment_with_workers(spec: &ExperimentSpec, workers: usize) -> Result<Vec<McSummary>> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;
    pool.install(|| {
        spec.cells
            .iter()
            .enumerate()
            .map(|(c, cell)| run_cell(spec, c as u32, cell))
            .collect()
    })
}

fn run_cell(spec: &ExperimentSpec, cell_index: u32, cell: &CellSpec) -> Result<McSummary> {
    let params = cell.params()?;
    let method = match cell.law {
        ErrorLaw::Gaussian => GammaMethod::default(),
        _ => GammaMethod::MonteCarlo {
            samples: 200_000,
            seed: spec.master_seed,
        },
    };
    let report = stationarity_gamma(&params, cell.law, method)?;
    if !report.is_stationary {
        return Err(Error::NonStationaryParams {
            gamma: report.gamma,
            std_error: report.std_error,
        });
    }

    let outcomes: Vec<Result<Replicate>> = (0..cell.replications as u32)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::replication_stream(spec.master_seed, cell_index, r);
            let data = simulate_with_rng(&params, cell.law, cell.n, spec.burn_in, &mut rng)?;
            replicate(spec, &params, &data, rng.next_u64())
        })
        .collect();

    let ok: Vec<&Replicate> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let failures = outcomes.len() - ok.len();
    for e in outcomes.iter().filter_map(|o| o.as_ref().err()) {
        log::debug!("cell {}: replication failed: {e}", cell.label());
    }
    let aborted = 2 * failures > cell.replications;

    let mut summary = McSummary {
        cell: *cell,
        b: params.b,
        successes: ok.len(),
        failures,
        aborted,
        estimates: Vec::new(),
        rejection_rates: Vec::new(),
        coverage: Vec::new(),
        omega_clipped: ok.iter().filter(|r| r.omega_clipped).count(),
        clip_warnings: ok.iter().filter(|r| r.clip_warning).count(),
        at_boundary: ok.iter().filter(|r| r.at_boundary).count(),
    };
    if aborted {
        log::warn!(
            "cell {} aborted: {failures} of {} replications failed",
            cell.label(),
            cell.replications
        );
        return Ok(summary);
    }

    let count = ok.len() as f64;
    let rate = |k: usize, pick: fn(&Replicate) -> &Vec<bool>| ok.iter().filter(|r| pick(r)[k]).count() as f64 / count;
    match spec.mode {
        ExperimentMode::EstimationTables | ExperimentMode::Coverage => {
            summary.estimates = ESTIMATE_NAMES
                .iter()
                .enumerate()
                .map(|(k, name)| {
                    let values: Vec<f64> = ok.iter().map(|r| r.values[k]).collect();
                    let (mean, sd) = mean_sd(&values);
                    let mean_estimated_sd = ok.iter().map(|r| r.estimated_sd[k]).sum::<f64>() / count;
                    (
                        (*name).to_string(),
                        StatSummary {
                            mean,
                            sd,
                            mean_estimated_sd,
                        },
                    )
                })
                .collect();
            if spec.mode == ExperimentMode::Coverage {
                summary.coverage = COVERAGE_NAMES
                    .iter()
                    .enumerate()
                    .map(|(k, name)| ((*name).to_string(), rate(k, |r| &r.covered)))
                    .collect();
            }
        }
        ExperimentMode::SizePowerTable => {
            summary.rejection_rates = spec
                .levels
                .iter()
                .enumerate()
                .map(|(k, &l)| (l, rate(k, |r| &r.rejects)))
                .collect();
        }
    }
    Ok(summary)
}

/// `seed` drives the boundary-limit draws used when a fit lands on the edge
/// of the box in coverage mode.
fn replicate(
    spec: &ExperimentSpec,
    truth: &ModelParams,
    data: &crate::model::SeriesData,
    seed: u64,
) -> Result<Replicate> {
    match spec.mode {
        ExperimentMode::SizePowerTable => {
            let tests = test_b_zero_levels(data, &spec.levels, spec.null_nuisance)?;
            Ok(Replicate {
                rejects: tests.iter().map(|t| t.reject).collect(),
                at_boundary: tests.first().is_some_and(|t| t.statistic == 0.0),
                ..Default::default()
            })
        }
        ExperimentMode::EstimationTables | ExperimentMode::Coverage => {
            let fit = fit_gmle(data, &spec.space, DEFAULT_TOL)?;
            let t = fit.theta_hat;
            let b = truth.b;
            let mut rep = Replicate {
                values: [t.mu, t.phi, t.sigma2, t.b2, fit.b_hat, 2.0 * b * fit.b_hat],
                estimated_sd: [
                    fit.se_theta[0],
                    fit.se_theta[1],
                    fit.se_theta[2],
                    fit.se_theta[3],
                    fit.se_b_hat,
                    fit.se_b_pivot,
                ],
                omega_clipped: fit.omega_clipped,
                clip_warning: fit.warnings.iter().any(|w| w.contains("indefinite")),
                at_boundary: fit.at_boundary,
                ..Default::default()
            };
            if spec.mode == ExperimentMode::Coverage {
                let truth_values = [truth.mu, truth.phi, truth.sigma2, truth.b_squared(), truth.b];
                let intervals = intervals_for(&fit, spec.coverage_level, MIN_BOUNDARY_DRAWS, seed)?;
                rep.covered = intervals
                    .iter()
                    .zip(truth_values)
                    .map(|(iv, v)| iv.lo <= v && v <= iv.hi)
                    .collect();
            }
            Ok(rep)
        }
    }
}

/// Sample mean and sample standard deviation (divisor `n - 1`).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Runs `spec` in size/power mode at `levels`.
pub fn size_power_table(spec: &ExperimentSpec, levels: &[f64], workers: usize) -> Result<Vec<McSummary>> {
    let spec = ExperimentSpec {
        mode: ExperimentMode::SizePowerTable,
        levels: levels.to_vec(),
        ..spec.clone()
    };
    run_experiment_with_workers(&spec, workers)
}
