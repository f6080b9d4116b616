//! Lyapunov exponent `gamma = E ln|phi + b*eps_1|` and the stationarity region.
//!
//! A negative `gamma` guarantees a unique strictly stationary ergodic
//! solution. When the model is irreducible (e.g. the innovations have a
//! continuous component at zero and `|phi| < 1`) it is also necessary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ErrorLaw, ModelParams};
use crate::quadrature::expected_log_abs_shifted_normal;
use crate::rng;

/// Smallest Gauss-Legendre order accepted per panel.
pub const MIN_QUADRATURE_ORDER: usize = 8;
/// Smallest Monte Carlo sample accepted.
pub const MIN_MC_SAMPLES: usize = 1_000;
/// Rounding floor reported as the quadrature error bound.
const QUADRATURE_ERROR_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum GammaMethod {
    /// Composite Gauss-Legendre against the normal density, `nodes` per panel.
    /// Gaussian law only.
    Quadrature {
        nodes: usize,
    },
    MonteCarlo {
        samples: usize,
        seed: u64,
    },
}

impl Default for GammaMethod {
    fn default() -> Self {
        GammaMethod::Quadrature { nodes: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMethodKind {
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub gamma: f64,
    pub std_error: f64,
    /// `gamma + 2 * std_error < 0`; points inside the error band count as
    /// non-stationary.
    pub is_stationary: bool,
    pub method: GammaMethodKind,
}

impl StationarityReport {
    fn new(gamma: f64, std_error: f64, method: GammaMethodKind) -> Self {
        Self {
            gamma,
            std_error,
            is_stationary: gamma + 2.0 * std_error < 0.0,
            method,
        }
    }
}

pub fn stationarity_gamma(params: &ModelParams, law: ErrorLaw, method: GammaMethod) -> Result<StationarityReport> {
    params.validate()?;
    law.validate()?;
    let kind = match method {
        GammaMethod::Quadrature { nodes } => {
            if law != ErrorLaw::Gaussian {
                return Err(Error::UnsupportedQuadrature);
            }
            if nodes < MIN_QUADRATURE_ORDER {
                return Err(Error::InvalidParameter(format!(
                    "quadrature needs at least {MIN_QUADRATURE_ORDER} nodes per panel, got {nodes}"
                )));
            }
            GammaMethodKind::Quadrature
        }
        GammaMethod::MonteCarlo { samples, .. } => {
            if samples < MIN_MC_SAMPLES {
                return Err(Error::InvalidParameter(format!(
                    "Monte Carlo needs at least {MIN_MC_SAMPLES} samples, got {samples}"
                )));
            }
            GammaMethodKind::MonteCarlo
        }
    };

    // phi + b*eps and phi - b*eps share a law for symmetric innovations.
    let b = if law.is_symmetric() { params.b.abs() } else { params.b };
    if b == 0.0 {
        return Ok(StationarityReport::new(params.phi.abs().ln(), 0.0, kind));
    }

    let report = match method {
        GammaMethod::Quadrature { nodes } => {
            let scale = b * params.sigma();
            let root = -params.phi / scale;
            let fine = scale.abs().ln() + expected_log_abs_shifted_normal(root, nodes);
            let coarse = scale.abs().ln() + expected_log_abs_shifted_normal(root, nodes / 2);
            StationarityReport::new(fine, (fine - coarse).abs().max(QUADRATURE_ERROR_FLOOR), kind)
        }
        GammaMethod::MonteCarlo { samples, seed } => {
            let mut rng = rng::stream(seed, u64::MAX);
            let sigma = params.sigma();
            let mut mean = 0.0;
            let mut m2 = 0.0;
            for k in 0..samples {
                let x = (params.phi + b * sigma * law.sample_standardized(&mut rng)).abs().ln();
                let delta = x - mean;
                mean += delta / (k + 1) as f64;
                m2 += delta * (x - mean);
            }
            let sd = (m2 / (samples - 1) as f64).sqrt();
            StationarityReport::new(mean, sd / (samples as f64).sqrt(), kind)
        }
    };
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub phi: f64,
    pub b: f64,
    pub gamma: f64,
    pub std_error: f64,
    pub stationary: bool,
}

/// Evaluates the criterion on the `phi_grid x b_grid` product, phi-major.
/// `sigma2` scales the innovations (1 for the standard picture).
pub fn stationarity_region(
    law: ErrorLaw,
    sigma2: f64,
    phi_grid: &[f64],
    b_grid: &[f64],
    method: GammaMethod,
) -> Result<Vec<RegionPoint>> {
    let mut out = Vec::with_capacity(phi_grid.len() * b_grid.len());
    for &phi in phi_grid {
        for &b in b_grid {
            let params = ModelParams::new(0.0, phi, sigma2, b)?;
            let report = stationarity_gamma(&params, law, method)?;
            out.push(RegionPoint {
                phi,
                b,
                gamma: report.gamma,
                std_error: report.std_error,
                stationary: report.is_stationary,
            });
        }
    }
    Ok(out)
}

/// Critical `|b|` at `phi = 0` for Gaussian innovations with unit variance:
/// `exp((EulerGamma + ln 2) / 2)`.
pub fn critical_b_at_zero_phi() -> f64 {
    (0.5 * (EULER_GAMMA + std::f64::consts::LN_2)).exp()
}

pub(crate) const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
