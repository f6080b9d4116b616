//! File formats. All numbers are written with 17 significant digits so that
//! every `f64` round-trips exactly.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{EstimationResult, Interval};
use crate::likelihood::{score_terms, ThetaVector};
use crate::model::SeriesData;
use crate::montecarlo::{McSummary, COVERAGE_NAMES, ESTIMATE_NAMES};
use crate::stationarity::RegionPoint;

pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Single column with header `y`.
pub fn write_series_csv<W: Write>(data: &SeriesData, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["y"])?;
    for v in data.values() {
        w.write_record([fmt_num(*v)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series_csv<R: Read>(input: R) -> Result<SeriesData> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = r.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::InvalidParameter("series CSV is empty".into()));
    }
    let col = headers
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| Error::InvalidParameter(format!("series CSV needs a `y` column, found {headers:?}")))?;
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = rec.get(col).unwrap_or("");
        let v: f64 = field
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("row {}: cannot parse `{field}` as a number", line + 1)))?;
        values.push(v);
    }
    SeriesData::new(values)
}

pub fn write_region_csv<W: Write>(points: &[RegionPoint], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["phi", "b", "gamma", "std_error", "stationary"])?;
    for p in points {
        w.write_record([
            fmt_num(p.phi),
            fmt_num(p.b),
            fmt_num(p.gamma),
            fmt_num(p.std_error),
            p.stationary.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_region_json<W: Write>(points: &[RegionPoint], out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, points)?;
    Ok(())
}

/// Per-term scores as `t, d_mu, d_phi, d_sigma2, d_b2` with one-based `t`.
pub fn write_score_terms_csv<W: Write>(theta: &ThetaVector, data: &SeriesData, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["t", "d_mu", "d_phi", "d_sigma2", "d_b2"])?;
    for (k, s) in score_terms(theta, data)?.into_iter().enumerate() {
        let t = k + data.likelihood_start() + 1;
        let mut row = vec![t.to_string()];
        row.extend(s.to_array().iter().map(|v| fmt_num(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeRecord {
    pub mu: f64,
    pub phi: f64,
    pub sigma2: f64,
    pub b2: f64,
    /// Standard error of `b_hat` by the delta method.
    pub b: f64,
    /// Standard error of the `2*b*b_hat` pivot.
    pub b_pivot: f64,
}

/// JSON shape of an [`EstimationResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationRecord {
    pub theta_hat: ThetaVector,
    pub b_hat: f64,
    pub b_tilde: f64,
    pub se: SeRecord,
    /// Row-major.
    pub sandwich: Vec<f64>,
    pub omega_hat: Vec<f64>,
    pub sigma_hat: Vec<f64>,
    pub loglik: f64,
    pub at_boundary: bool,
    pub clamped: bool,
    pub outer_iterations: usize,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intervals: Vec<Interval>,
    pub warnings: Vec<String>,
}

fn row_major(m: &nalgebra::Matrix4<f64>) -> Vec<f64> {
    (0..4).flat_map(|i| (0..4).map(move |j| m[(i, j)])).collect()
}

impl EstimationRecord {
    pub fn new(r: &EstimationResult, intervals: Vec<Interval>) -> Self {
        Self {
            theta_hat: r.theta_hat,
            b_hat: r.b_hat,
            b_tilde: r.b_tilde,
            se: SeRecord {
                mu: r.se_theta[0],
                phi: r.se_theta[1],
                sigma2: r.se_theta[2],
                b2: r.se_theta[3],
                b: r.se_b_hat,
                b_pivot: r.se_b_pivot,
            },
            sandwich: row_major(&r.sandwich),
            omega_hat: row_major(&r.omega_hat),
            sigma_hat: row_major(&r.sigma_hat),
            loglik: r.loglik_at_max,
            at_boundary: r.at_boundary,
            clamped: r.clamped,
            outer_iterations: r.outer_iterations,
            n: r.n,
            intervals,
            warnings: r.warnings.clone(),
        }
    }
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Rows `E`, `SD`, `SDhat` per estimator; one column per cell.
pub fn write_estimation_table<W: Write>(summaries: &[McSummary], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    let mut header = vec!["parameter".to_string(), "statistic".to_string()];
    header.extend(summaries.iter().map(|s| s.cell.label()));
    w.write_record(&header)?;
    for name in ESTIMATE_NAMES {
        for stat in ["E", "SD", "SDhat"] {
            let mut row = vec![name.to_string(), stat.to_string()];
            row.extend(summaries.iter().map(|s| match s.estimate(name) {
                Some(e) => fmt_num(match stat {
                    "E" => e.mean,
                    "SD" => e.sd,
                    _ => e.mean_estimated_sd,
                }),
                None => String::new(),
            }));
            w.write_record(&row)?;
        }
    }
    for (label, pick) in [
        ("successes", (|s: &McSummary| s.successes) as fn(&McSummary) -> usize),
        ("failures", |s| s.failures),
        ("omega_clipped", |s| s.omega_clipped),
        ("clip_warnings", |s| s.clip_warnings),
        ("at_boundary", |s| s.at_boundary),
    ] {
        let mut row = vec!["count".to_string(), label.to_string()];
        row.extend(summaries.iter().map(|s| pick(s).to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per cell and level.
pub fn write_size_power_table<W: Write>(summaries: &[McSummary], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record([
        "n",
        "phi",
        "b",
        "b_star",
        "level",
        "rejection_rate",
        "successes",
        "failures",
    ])?;
    for s in summaries {
        for (level, rate) in &s.rejection_rates {
            w.write_record([
                s.cell.n.to_string(),
                fmt_num(s.cell.phi),
                fmt_num(s.b),
                s.cell.b_star.map(fmt_num).unwrap_or_default(),
                fmt_num(*level),
                fmt_num(*rate),
                s.successes.to_string(),
                s.failures.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Empirical coverage per parameter; one column per cell.
pub fn write_coverage_table<W: Write>(summaries: &[McSummary], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    let mut header = vec!["parameter".to_string()];
    header.extend(summaries.iter().map(|s| s.cell.label()));
    w.write_record(&header)?;
    for name in COVERAGE_NAMES {
        let mut row = vec![name.to_string()];
        row.extend(summaries.iter().map(|s| {
            s.coverage
                .iter()
                .find(|(k, _)| k == name)
                .map(|(_, v)| fmt_num(*v))
                .unwrap_or_default()
        }));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
