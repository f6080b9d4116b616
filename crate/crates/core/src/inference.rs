//! Inference when `b2` may sit on the boundary of the parameter box.
//!
//! With `b = 0` the estimator's limit is a projected normal: with
//! `Z ~ N(0, V)` and `V` the sandwich, it is `Z` when `Z_4 > 0` and
//! `Z - V[:,4] Z_4 / V_44` (fourth coordinate zero) otherwise. The test of
//! `b = 0` is one sided and uses the sandwich evaluated with `b2_hat := 0`.
//! Likelihood-ratio tests are not offered: the scores are not a martingale
//! difference, so Omega differs from the information matrix and Wilks fails.

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{
    confidence_intervals, covariance_hat, fit_gmle, normal_upper_quantile, profile_inner, EstimationResult, Interval,
    DEFAULT_TOL,
};
use crate::likelihood::{ParamSpace, ThetaVector};
use crate::model::SeriesData;
use crate::rng;

/// How `(mu, phi, sigma2)` enter the null variance estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullNuisance {
    /// Keep the unrestricted fit's values, only zero `b2`.
    #[default]
    Unrestricted,
    /// Refit with `b2` pinned at zero.
    Restricted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTestResult {
    /// `b2_hat` from the boundary-mode fit.
    pub statistic: f64,
    pub critical_value: f64,
    pub level: f64,
    pub reject: bool,
    #[serde(rename = "sigma44_null")]
    pub sigma44_hat_null: f64,
}

/// One-sided test of `b = 0` at `level`, rejecting when
/// `b2_hat > sqrt(sigma44_null) * z_level / sqrt(n)`.
///
/// `level = 1` is accepted and always rejects.
pub fn test_b_zero(data: &SeriesData, level: f64, nuisance: NullNuisance) -> Result<BoundaryTestResult> {
    Ok(test_b_zero_levels(data, &[level], nuisance)?.remove(0))
}

/// [`test_b_zero`] at several levels sharing one fit.
pub fn test_b_zero_levels(
    data: &SeriesData,
    levels: &[f64],
    nuisance: NullNuisance,
) -> Result<Vec<BoundaryTestResult>> {
    if let Some(bad) = levels.iter().find(|l| !(**l > 0.0 && **l <= 1.0)) {
        return Err(Error::InvalidParameter(format!(
            "test level must lie in (0, 1], got {bad}"
        )));
    }
    let fit = fit_gmle(data, &ParamSpace::boundary(), DEFAULT_TOL)?;
    let null_theta = match nuisance {
        NullNuisance::Unrestricted => fit.theta_hat.with_b2(0.0),
        NullNuisance::Restricted => profile_inner(0.0, data)?.theta(),
    };
    let cov = covariance_hat(data, &null_theta)?;
    let sigma44 = cov.sandwich[(3, 3)];
    let statistic = fit.theta_hat.b2;
    let root_n = (data.len() as f64).sqrt();
    Ok(levels
        .iter()
        .map(|&level| {
            let critical_value = if level >= 1.0 {
                f64::NEG_INFINITY
            } else {
                sigma44.max(0.0).sqrt() * normal_upper_quantile(level) / root_n
            };
            BoundaryTestResult {
                statistic,
                critical_value,
                level,
                reject: statistic > critical_value,
                sigma44_hat_null: sigma44,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLimitSample {
    pub draws: Vec<[f64; 4]>,
    pub source_covariance: Matrix4<f64>,
}

/// Draws from the projected-normal limit of `sqrt(n) * (theta_hat - theta_0)`
/// when `b2_0 = 0`.
pub fn simulate_boundary_limit(sandwich: &Matrix4<f64>, draws: usize, seed: u64) -> Result<BoundaryLimitSample> {
    simulate_shifted_limit(sandwich, draws, seed, 0.0)
}

/// Same limit with the boundary at `Z_4 = -shift`, i.e. the local limit when
/// `sqrt(n) * b2_0 = shift`.
pub fn simulate_shifted_limit(
    sandwich: &Matrix4<f64>,
    draws: usize,
    seed: u64,
    shift: f64,
) -> Result<BoundaryLimitSample> {
    let s44 = sandwich[(3, 3)];
    if !(s44 > 0.0) {
        return Err(Error::DegenerateSigma44(s44));
    }
    if draws == 0 {
        return Err(Error::InvalidParameter("need at least one draw".into()));
    }
    if !(shift >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "shift must be non-negative, got {shift}"
        )));
    }
    let sym = (sandwich + sandwich.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let root = eig.eigenvectors
        * Matrix4::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()))
        * eig.eigenvectors.transpose();
    let proj = Vector4::new(sym[(0, 3)] / s44, sym[(1, 3)] / s44, sym[(2, 3)] / s44, 1.0);

    let mut rng = rng::stream(seed, 0);
    let out = (0..draws)
        .map(|_| {
            let u = Vector4::from_fn(|_, _| StandardNormal.sample(&mut rng));
            let z = root * u;
            if z[3] > -shift {
                [z[0], z[1], z[2], z[3]]
            } else {
                let v = z - proj * (z[3] + shift);
                // Pin the fourth slot exactly rather than trust the rounding.
                [v[0], v[1], v[2], -shift]
            }
        })
        .collect();
    Ok(BoundaryLimitSample {
        draws: out,
        source_covariance: *sandwich,
    })
}

/// Minimum draws for [`boundary_interval`].
pub const MIN_BOUNDARY_DRAWS: usize = 100_000;

/// Intervals from empirical quantiles of `theta_hat - L / sqrt(n)` with `L`
/// drawn from the limit with its boundary at `-sqrt(n) * b2_hat`. Far from
/// the boundary this reduces to the Wald interval. The `b2` interval inverts
/// the censored-normal limit of `b2_hat` directly and never goes below zero.
pub fn boundary_interval(result: &EstimationResult, level: f64, draws: usize, seed: u64) -> Result<Vec<Interval>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    if draws < MIN_BOUNDARY_DRAWS {
        return Err(Error::InvalidParameter(format!(
            "boundary intervals need at least {MIN_BOUNDARY_DRAWS} draws"
        )));
    }
    let root_n = (result.n as f64).sqrt();
    let sample = simulate_shifted_limit(&result.sandwich, draws, seed, root_n * result.theta_hat.b2)?;
    let theta = result.theta_hat.to_array();
    let alpha = 1.0 - level;
    let mut out = Vec::with_capacity(4);
    for (i, name) in ThetaVector::NAMES.iter().enumerate() {
        let (lo, hi) = if i == 3 {
            // Inverting `b2_hat = max(b2 + Z_4 / sqrt(n), 0)` in `b2`.
            let half = result.sandwich[(3, 3)].sqrt() * normal_upper_quantile(0.5 * alpha) / root_n;
            ((theta[3] - half).max(0.0), theta[3] + half)
        } else {
            let mut values: Vec<f64> = sample.draws.iter().map(|d| theta[i] - d[i] / root_n).collect();
            values.sort_by(f64::total_cmp);
            (
                quantile_sorted(&values, 0.5 * alpha),
                quantile_sorted(&values, 1.0 - 0.5 * alpha),
            )
        };
        out.push(Interval {
            parameter: (*name).into(),
            estimate: theta[i],
            lo,
            hi,
        });
    }
    Ok(out)
}

/// Wald intervals in the interior; on the lower edge of the box, the
/// [`boundary_interval`]s plus a `b` interval read off the `b2` interval
/// (symmetric about zero when its lower end is zero).
pub fn intervals_for(result: &EstimationResult, level: f64, draws: usize, seed: u64) -> Result<Vec<Interval>> {
    if !result.at_boundary {
        return confidence_intervals(result, level);
    }
    let mut out = boundary_interval(result, level, draws, seed)?;
    let (lo, hi) = (out[3].lo.sqrt(), out[3].hi.sqrt());
    let (b_lo, b_hi) = if lo == 0.0 {
        (-hi, hi)
    } else if result.b_hat < 0.0 {
        (-hi, -lo)
    } else {
        (lo, hi)
    };
    out.push(Interval {
        parameter: "b".into(),
        estimate: result.b_hat,
        lo: b_lo,
        hi: b_hi,
    });
    Ok(out)
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}
