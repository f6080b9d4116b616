//! Gaussian quasi-log-likelihood built from the conditional mean
//! `mu + phi*Y_{t-2}` and conditional variance `sigma2 * (1 + b2*Y_{t-2}^2)`,
//! with its analytic score and Hessian in `theta = (mu, phi, sigma2, b2)`.
//!
//! Sums run over `t = 3..n` (one-based), conditioning on the first two
//! observations.

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SeriesData;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaVector {
    pub mu: f64,
    pub phi: f64,
    pub sigma2: f64,
    pub b2: f64,
}

impl ThetaVector {
    pub const NAMES: [&'static str; 4] = ["mu", "phi", "sigma2", "b2"];

    pub fn new(mu: f64, phi: f64, sigma2: f64, b2: f64) -> Self {
        Self { mu, phi, sigma2, b2 }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.mu, self.phi, self.sigma2, self.b2]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn with_b2(self, b2: f64) -> Self {
        Self { b2, ..self }
    }
}

/// Compact box the estimator searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub mu_bar: f64,
    pub phi_bar: f64,
    pub omega_lo: f64,
    pub omega_hi: f64,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
}

impl ParamSpace {
    /// Box for interior estimation, `b2 >= 1e-8`.
    pub fn interior() -> Self {
        Self {
            mu_bar: 10.0,
            phi_bar: 10.0,
            omega_lo: 1e-6,
            omega_hi: 1e3,
            alpha_lo: 1e-8,
            alpha_hi: 25.0,
        }
    }

    /// Box whose `b2` face sits at zero, for testing `b = 0`.
    pub fn boundary() -> Self {
        Self {
            alpha_lo: 0.0,
            ..Self::interior()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mu_bar > 0.0
            && self.phi_bar > 0.0
            && 0.0 < self.omega_lo
            && self.omega_lo < self.omega_hi
            && 0.0 <= self.alpha_lo
            && self.alpha_lo < self.alpha_hi
            && [self.mu_bar, self.phi_bar, self.omega_hi, self.alpha_hi]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "inadmissible parameter space {self:?}"
            )))
        }
    }

    pub fn contains(&self, theta: &ThetaVector) -> bool {
        theta.mu.abs() <= self.mu_bar
            && theta.phi.abs() <= self.phi_bar
            && (self.omega_lo..=self.omega_hi).contains(&theta.sigma2)
            && (self.alpha_lo..=self.alpha_hi).contains(&theta.b2)
    }
}

impl Default for ParamSpace {
    fn default() -> Self {
        Self::interior()
    }
}

/// `d l_t / d theta`, per term or summed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreVector {
    pub d_mu: f64,
    pub d_phi: f64,
    pub d_sigma2: f64,
    pub d_b2: f64,
}

impl ScoreVector {
    pub fn to_array(self) -> [f64; 4] {
        [self.d_mu, self.d_phi, self.d_sigma2, self.d_b2]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            d_mu: a[0],
            d_phi: a[1],
            d_sigma2: a[2],
            d_b2: a[3],
        }
    }
}

impl std::ops::Add for ScoreVector {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            d_mu: self.d_mu + o.d_mu,
            d_phi: self.d_phi + o.d_phi,
            d_sigma2: self.d_sigma2 + o.d_sigma2,
            d_b2: self.d_b2 + o.d_b2,
        }
    }
}

pub type HessianMatrix = Matrix4<f64>;

/// Shared pieces of every per-term formula.
struct Term {
    y_lag2: f64,
    /// `Y_t - mu - phi*Y_{t-2}`
    resid: f64,
    /// `1 + b2*Y_{t-2}^2`
    h: f64,
    sigma2: f64,
}

impl Term {
    fn new(theta: &ThetaVector, y_t: f64, y_lag2: f64) -> Result<Self> {
        let h = 1.0 + theta.b2 * y_lag2 * y_lag2;
        let variance = theta.sigma2 * h;
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::NonPositiveVariance(variance));
        }
        Ok(Self {
            y_lag2,
            resid: y_t - theta.mu - theta.phi * y_lag2,
            h,
            sigma2: theta.sigma2,
        })
    }

    fn variance(&self) -> f64 {
        self.sigma2 * self.h
    }

    /// `1 - resid^2 / (sigma2*h)`
    fn excess(&self) -> f64 {
        1.0 - self.resid * self.resid / self.variance()
    }
}

pub fn loglik_term(theta: &ThetaVector, y_t: f64, y_lag2: f64) -> Result<f64> {
    let t = Term::new(theta, y_t, y_lag2)?;
    let v = t.variance();
    Ok(-0.5 * (v.ln() + t.resid * t.resid / v))
}

pub fn score_term(theta: &ThetaVector, y_t: f64, y_lag2: f64) -> Result<ScoreVector> {
    let t = Term::new(theta, y_t, y_lag2)?;
    let v = t.variance();
    let e = t.excess();
    Ok(ScoreVector {
        d_mu: t.resid / v,
        d_phi: t.y_lag2 * t.resid / v,
        d_sigma2: -e / (2.0 * t.sigma2),
        d_b2: -t.y_lag2 * t.y_lag2 / (2.0 * t.h) * e,
    })
}

pub fn hessian_term(theta: &ThetaVector, y_t: f64, y_lag2: f64) -> Result<HessianMatrix> {
    let t = Term::new(theta, y_t, y_lag2)?;
    let (y, r, h, s2) = (t.y_lag2, t.resid, t.h, t.sigma2);
    let y2 = y * y;
    let v = s2 * h;
    let curv = 1.0 - 2.0 * r * r / v;

    let mm = -1.0 / v;
    let pp = -y2 / v;
    let ss = curv / (2.0 * s2 * s2);
    let bb = y2 * y2 / (2.0 * h * h) * curv;
    let mp = -y / v;
    let ms = -r / (s2 * v);
    let mb = -y2 * r / (s2 * h * h);
    let ps = -y * r / (s2 * v);
    let pb = -y2 * y * r / (s2 * h * h);
    let sb = -y2 * r * r / (2.0 * s2 * s2 * h * h);

    Ok(Matrix4::new(
        mm, mp, ms, mb, //
        mp, pp, ps, pb, //
        ms, ps, ss, sb, //
        mb, pb, sb, bb,
    ))
}

pub fn loglik_total(theta: &ThetaVector, data: &SeriesData) -> Result<f64> {
    data.lag2_pairs()
        .try_fold(0.0, |acc, (y, y2)| Ok(acc + loglik_term(theta, y, y2)?))
}

pub fn score_total(theta: &ThetaVector, data: &SeriesData) -> Result<ScoreVector> {
    data.lag2_pairs().try_fold(ScoreVector::default(), |acc, (y, y2)| {
        Ok(acc + score_term(theta, y, y2)?)
    })
}

pub fn hessian_total(theta: &ThetaVector, data: &SeriesData) -> Result<HessianMatrix> {
    data.lag2_pairs().try_fold(HessianMatrix::zeros(), |acc, (y, y2)| {
        Ok(acc + hessian_term(theta, y, y2)?)
    })
}

/// Per-term scores in time order, one entry per likelihood term.
pub fn score_terms(theta: &ThetaVector, data: &SeriesData) -> Result<Vec<ScoreVector>> {
    data.lag2_pairs().map(|(y, y2)| score_term(theta, y, y2)).collect()
}
