//! GARCH-type quasi-maximum-likelihood estimation.
//!
//! For fixed `b2` the score equations in `(mu, phi, sigma2)` have a closed
//! form solution: a weighted regression of `Y_t` on `[1, Y_{t-2}]` with
//! weights `1 / (1 + b2*Y_{t-2}^2)`. The estimator therefore reduces to a
//! one-dimensional search over `b2` on that profile. The sign of `b` is not
//! identified by the likelihood and comes from a separate weighted
//! least-squares estimator built on `E[r_t r_{t-1} | F_{t-2}] = b*sigma2*Y_{t-2}`.

use log::warn;
use nalgebra::{Matrix2, Matrix4, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::likelihood::{loglik_total, score_terms, ParamSpace, ScoreVector, ThetaVector};
use crate::model::SeriesData;
use crate::optim::brent_maximize;

/// Default bracket width on `b2` for the outer search.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Points in the coarse scan that picks the bracket.
pub const PRESCAN_POINTS: usize = 32;
const MAX_OUTER_ITER: usize = 500;
/// Smallest series [`covariance_hat`] accepts.
pub const MIN_COVARIANCE_LEN: usize = 6;

/// Relative eigenvalue level below which a negative eigenvalue of Omega-hat
/// triggers a warning before it is clipped.
const OMEGA_NEG_TOL: f64 = 1e-10;
/// Sigma-hat is singular when an eigenvalue falls below this fraction of
/// its mean eigenvalue.
const SIGMA_SINGULAR_TOL: f64 = 1e-12;
const DESIGN_SINGULAR_TOL: f64 = 1e-12;

/// Inner solution of the profile problem at a fixed `b2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileState {
    pub b2: f64,
    pub mu: f64,
    pub phi: f64,
    pub sigma2: f64,
    pub profile_loglik: f64,
}

impl ProfileState {
    pub fn theta(&self) -> ThetaVector {
        ThetaVector::new(self.mu, self.phi, self.sigma2, self.b2)
    }
}

pub fn profile_inner(b2: f64, data: &SeriesData) -> Result<ProfileState> {
    if !(b2 >= 0.0 && b2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "b2 must be finite and non-negative, got {b2}"
        )));
    }
    let n_eff = data.effective_len();
    if n_eff < 3 {
        return Err(Error::InvalidLength {
            n: data.len(),
            min: crate::model::MIN_SERIES_LEN,
        });
    }

    let mut sw = 0.0;
    let mut swx = 0.0;
    let mut swy = 0.0;
    let mut sum_log_h = 0.0;
    for (y, x) in data.lag2_pairs() {
        let h = 1.0 + b2 * x * x;
        let w = 1.0 / h;
        sw += w;
        swx += w * x;
        swy += w * y;
        sum_log_h += h.ln();
    }
    let x_bar = swx / sw;
    let y_bar = swy / sw;

    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut sx2 = 0.0;
    for (y, x) in data.lag2_pairs() {
        let w = 1.0 / (1.0 + b2 * x * x);
        let dx = x - x_bar;
        sxx += w * dx * dx;
        sxy += w * dx * (y - y_bar);
        sx2 += w * x * x;
    }
    if !(sxx > DESIGN_SINGULAR_TOL * sx2.max(f64::MIN_POSITIVE)) {
        return Err(Error::SingularDesign(format!(
            "weighted spread of Y_(t-2) is {sxx:e} at b2 = {b2}; the lagged regressor is (nearly) constant"
        )));
    }
    let phi = sxy / sxx;
    let mu = y_bar - phi * x_bar;

    let ssr: f64 = data
        .lag2_pairs()
        .map(|(y, x)| {
            let r = y - mu - phi * x;
            r * r / (1.0 + b2 * x * x)
        })
        .sum();
    let n = n_eff as f64;
    let sigma2 = ssr / n;
    if !(sigma2 > 0.0) {
        return Err(Error::SingularDesign(format!(
            "weighted regression fits exactly at b2 = {b2}; the variance estimate is zero"
        )));
    }
    let profile_loglik = -0.5 * (n * sigma2.ln() + sum_log_h + n);
    Ok(ProfileState {
        b2,
        mu,
        phi,
        sigma2,
        profile_loglik,
    })
}

/// Omega-hat, Sigma-hat and the sandwich `Sigma^-1 Omega Sigma^-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub omega: Matrix4<f64>,
    pub sigma: Matrix4<f64>,
    pub sandwich: Matrix4<f64>,
    /// Whether any negative eigenvalue of Omega-hat was set to zero.
    pub omega_clipped: bool,
    pub warnings: Vec<String>,
}

pub fn covariance_hat(data: &SeriesData, theta: &ThetaVector) -> Result<CovarianceEstimate> {
    if data.len() < MIN_COVARIANCE_LEN {
        return Err(Error::InvalidLength {
            n: data.len(),
            min: MIN_COVARIANCE_LEN,
        });
    }
    let scores = score_terms(theta, data)?;
    let (omega_raw, _) = omega_hat_from_scores(&scores);
    let sigma = sigma_hat_from_lags(theta, data.lag2_pairs().map(|(_, x)| x));

    let mut warnings = Vec::new();
    let (omega, omega_clipped) = clip_negative_eigenvalues(&omega_raw, &mut warnings);

    let eig = SymmetricEigen::new(sigma);
    let threshold = SIGMA_SINGULAR_TOL * sigma.trace() / 4.0;
    let min_eigenvalue = eig.eigenvalues.min();
    if !(min_eigenvalue > threshold) {
        return Err(Error::SingularSigma {
            min_eigenvalue,
            threshold,
        });
    }
    let sigma_inv =
        eig.eigenvectors * Matrix4::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l)) * eig.eigenvectors.transpose();
    let sandwich = symmetrize(&(sigma_inv * omega * sigma_inv));

    Ok(CovarianceEstimate {
        omega,
        sigma,
        sandwich,
        omega_clipped,
        warnings,
    })
}

/// Omega-hat from per-term scores `s_3..s_n`:
/// lag-pair Gram matrix over `N - 1` pairs minus the plain Gram matrix over
/// `N` terms. Also returns the plain Gram matrix.
pub fn omega_hat_from_scores(scores: &[ScoreVector]) -> (Matrix4<f64>, Matrix4<f64>) {
    let as_vec = |s: &ScoreVector| nalgebra::Vector4::from(s.to_array());
    let n = scores.len() as f64;
    let mut gram = Matrix4::zeros();
    for s in scores {
        let v = as_vec(s);
        gram += v * v.transpose();
    }
    gram /= n;
    let mut pair_gram = Matrix4::zeros();
    for w in scores.windows(2) {
        let v = as_vec(&w[0]) + as_vec(&w[1]);
        pair_gram += v * v.transpose();
    }
    pair_gram /= (scores.len() - 1) as f64;
    (symmetrize(&(pair_gram - gram)), gram)
}

/// Block-diagonal Sigma-hat evaluated over the lagged values `Y_{t-2}`.
pub fn sigma_hat_from_lags(theta: &ThetaVector, lags: impl Iterator<Item = f64>) -> Matrix4<f64> {
    let s2 = theta.sigma2;
    let mut loc = Matrix2::zeros();
    let mut scale = Matrix2::zeros();
    let mut count = 0usize;
    for x in lags {
        let x2 = x * x;
        let h = 1.0 + theta.b2 * x2;
        let w = 1.0 / (s2 * h);
        loc += Matrix2::new(w, w * x, w * x, w * x2);
        let cross = x2 / (2.0 * s2 * h);
        scale += Matrix2::new(1.0 / (2.0 * s2 * s2), cross, cross, x2 * x2 / (2.0 * h * h));
        count += 1;
    }
    let n = count as f64;
    let mut out = Matrix4::zeros();
    out.fixed_view_mut::<2, 2>(0, 0).copy_from(&(loc / n));
    out.fixed_view_mut::<2, 2>(2, 2).copy_from(&(scale / n));
    out
}

fn clip_negative_eigenvalues(m: &Matrix4<f64>, warnings: &mut Vec<String>) -> (Matrix4<f64>, bool) {
    let eig = SymmetricEigen::new(*m);
    let min = eig.eigenvalues.min();
    if min >= 0.0 {
        return (*m, false);
    }
    let scale = eig.eigenvalues.amax();
    if min < -OMEGA_NEG_TOL * scale {
        let msg = format!(
            "Omega-hat is indefinite (smallest eigenvalue {min:.3e}, largest |eigenvalue| {scale:.3e}); clipped to PSD"
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    let clipped =
        eig.eigenvectors * Matrix4::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0))) * eig.eigenvectors.transpose();
    (symmetrize(&clipped), true)
}

fn symmetrize(m: &Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

/// Weighted least-squares estimator of `b` whose sign fixes the sign of
/// `b_hat`. Sums over `t = 4..n` (one-based).
pub fn sign_estimator(data: &SeriesData, theta: &ThetaVector) -> Result<f64> {
    let y = data.values();
    if y.len() < crate::model::MIN_SERIES_LEN {
        return Err(Error::InvalidLength {
            n: y.len(),
            min: crate::model::MIN_SERIES_LEN,
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for t in 3..y.len() {
        let (y0, y1, y2, y3) = (y[t], y[t - 1], y[t - 2], y[t - 3]);
        let weight = 1.0 / ((1.0 + y2 * y2) * (1.0 + y3 * y3).sqrt());
        let r0 = y0 - theta.mu - theta.phi * y2;
        let r1 = y1 - theta.mu - theta.phi * y3;
        num += r0 * r1 * y2 * weight;
        den += y2 * y2 * weight;
    }
    den *= theta.sigma2;
    if den == 0.0 || !den.is_finite() {
        return Err(Error::ZeroDenominator);
    }
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub theta_hat: ThetaVector,
    pub b_tilde: f64,
    pub b_hat: f64,
    pub omega_hat: Matrix4<f64>,
    pub sigma_hat: Matrix4<f64>,
    pub sandwich: Matrix4<f64>,
    /// `sqrt(sandwich_ii / n)` for `(mu, phi, sigma2, b2)`.
    pub se_theta: [f64; 4],
    /// Standard error of `2*b*b_hat`, the same as that of `b2_hat`.
    pub se_b_pivot: f64,
    /// Delta-method standard error of `b_hat` itself, `se_b_pivot / (2|b_hat|)`.
    pub se_b_hat: f64,
    pub loglik_at_max: f64,
    pub outer_iterations: usize,
    pub at_boundary: bool,
    pub clamped: bool,
    /// `b_tilde` was exactly zero and `b_hat` took the positive root.
    pub sign_defaulted: bool,
    pub omega_clipped: bool,
    pub n: usize,
    pub warnings: Vec<String>,
}

/// Maximizes the quasi-likelihood over `space` and attaches the sign
/// estimator and sandwich covariance.
pub fn fit_gmle(data: &SeriesData, space: &ParamSpace, tol: f64) -> Result<EstimationResult> {
    space.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if data.len() < MIN_COVARIANCE_LEN {
        return Err(Error::InvalidLength {
            n: data.len(),
            min: MIN_COVARIANCE_LEN,
        });
    }
    let (best, outer_iterations) = maximize_profile(data, space, tol)?;
    let at_boundary = best.b2 == space.alpha_lo;

    let mut warnings = Vec::new();
    let mut theta = best.theta();
    let clamped_theta = ThetaVector::new(
        theta.mu.clamp(-space.mu_bar, space.mu_bar),
        theta.phi.clamp(-space.phi_bar, space.phi_bar),
        theta.sigma2.clamp(space.omega_lo, space.omega_hi),
        theta.b2,
    );
    let clamped = clamped_theta != theta;
    if clamped {
        let msg = format!("inner solution {theta:?} left the parameter box and was clamped");
        warn!("{msg}");
        warnings.push(msg);
        theta = clamped_theta;
    }
    let loglik_at_max = if clamped {
        loglik_total(&theta, data)?
    } else {
        best.profile_loglik
    };

    let b_tilde = sign_estimator(data, &theta)?;
    let sign_defaulted = b_tilde == 0.0;
    if sign_defaulted {
        warnings.push("sign estimator is exactly zero; b_hat takes the positive root".into());
    }
    let b_hat = if b_tilde < 0.0 {
        -theta.b2.sqrt()
    } else {
        theta.b2.sqrt()
    };

    let cov = covariance_hat(data, &theta)?;
    warnings.extend(cov.warnings.iter().cloned());
    let n = data.len();
    let se_theta = se_from_sandwich(&cov.sandwich, n);
    let se_b_pivot = se_theta[3];
    let se_b_hat = se_b_pivot / (2.0 * b_hat.abs());

    Ok(EstimationResult {
        theta_hat: theta,
        b_tilde,
        b_hat,
        omega_hat: cov.omega,
        sigma_hat: cov.sigma,
        sandwich: cov.sandwich,
        se_theta,
        se_b_pivot,
        se_b_hat,
        loglik_at_max,
        outer_iterations,
        at_boundary,
        clamped,
        sign_defaulted,
        omega_clipped: cov.omega_clipped,
        n,
        warnings,
    })
}

pub(crate) fn se_from_sandwich(sandwich: &Matrix4<f64>, n: usize) -> [f64; 4] {
    std::array::from_fn(|i| (sandwich[(i, i)].max(0.0) / n as f64).sqrt())
}

/// Coarse scan in `sqrt(b2)`, then Brent on the bracket around the best scan
/// point; both box endpoints are always candidates.
fn maximize_profile(data: &SeriesData, space: &ParamSpace, tol: f64) -> Result<(ProfileState, usize)> {
    let (r_lo, r_hi) = (space.alpha_lo.sqrt(), space.alpha_hi.sqrt());
    let grid: Vec<f64> = (0..PRESCAN_POINTS)
        .map(|k| {
            let r = r_lo + (r_hi - r_lo) * k as f64 / (PRESCAN_POINTS - 1) as f64;
            (r * r).clamp(space.alpha_lo, space.alpha_hi)
        })
        .collect();
    let scan = grid
        .iter()
        .map(|&b2| profile_inner(b2, data))
        .collect::<Result<Vec<_>>>()?;
    let best_k = scan
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.profile_loglik.total_cmp(&b.1.profile_loglik))
        .map(|(k, _)| k)
        .expect("non-empty scan");

    let lo = grid[best_k.saturating_sub(1)];
    let hi = grid[(best_k + 1).min(grid.len() - 1)];
    let refined = brent_maximize(
        |b2| profile_inner(b2, data).map(|s| s.profile_loglik),
        lo,
        hi,
        tol,
        MAX_OUTER_ITER,
    )?;

    let mut best = profile_inner(refined.x, data)?;
    for candidate in [&scan[0], &scan[scan.len() - 1], &scan[best_k]] {
        if candidate.profile_loglik >= best.profile_loglik {
            best = *candidate;
        }
    }
    Ok((best, refined.iterations))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub parameter: String,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Upper `level`-quantile of the standard normal, `P(N(0,1) > z) = tail`.
pub fn normal_upper_quantile(tail: f64) -> f64 {
    let normal = Normal::standard();
    normal.inverse_cdf(1.0 - tail)
}

/// Wald intervals for `theta` and an interval for `b` from the pivot
/// `2*b*sqrt(n)*(b_hat - b)` with `b` solved for.
pub fn confidence_intervals(result: &EstimationResult, level: f64) -> Result<Vec<Interval>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    if result.at_boundary {
        return Err(Error::BoundaryCase);
    }
    let z = normal_upper_quantile(0.5 * (1.0 - level));
    let theta = result.theta_hat.to_array();
    let mut out: Vec<Interval> = ThetaVector::NAMES
        .iter()
        .zip(theta.iter().zip(result.se_theta))
        .map(|(name, (&est, se))| Interval {
            parameter: (*name).into(),
            estimate: est,
            lo: est - z * se,
            hi: est + z * se,
        })
        .collect();
    let (lo, hi) = b_pivot_interval(result.b_hat, z * result.se_b_pivot);
    out.push(Interval {
        parameter: "b".into(),
        estimate: result.b_hat,
        lo,
        hi,
    });
    Ok(out)
}

/// Connected component containing `b_hat` of `{b : |2b(b_hat - b)| <= half_width}`.
/// Falls back to the delta-method interval when that component reaches
/// through zero.
pub fn b_pivot_interval(b_hat: f64, half_width: f64) -> (f64, f64) {
    let a = b_hat.abs();
    let c = half_width;
    let disc_inner = a * a - 2.0 * c;
    let (lo, hi) = if disc_inner >= 0.0 {
        (0.5 * (a + disc_inner.sqrt()), 0.5 * (a + (a * a + 2.0 * c).sqrt()))
    } else if a > 0.0 {
        let delta = c / (2.0 * a);
        (a - delta, a + delta)
    } else {
        (f64::NEG_INFINITY, f64::INFINITY)
    };
    if b_hat < 0.0 {
        (-hi, -lo)
    } else {
        (lo, hi)
    }
}
