//! The lag-2 bilinear model `Y_t = mu + phi*Y_{t-2} + b*Y_{t-2}*eps_{t-1} + eps_t`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::stationarity::{stationarity_gamma, GammaMethod};

/// Shortest series every estimator in this crate accepts.
pub const MIN_SERIES_LEN: usize = 5;

/// Zero-based index of the first observation with a usable `Y_{t-2}`.
pub const LIKELIHOOD_START: usize = 2;

/// Default number of discarded warm-up steps for [`simulate`].
pub const DEFAULT_BURN_IN: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mu: f64,
    pub phi: f64,
    pub sigma2: f64,
    pub b: f64,
}

impl ModelParams {
    pub fn new(mu: f64, phi: f64, sigma2: f64, b: f64) -> Result<Self> {
        let params = Self { mu, phi, sigma2, b };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.phi.is_finite() && self.b.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite parameter in {self:?}")));
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma2 must be positive and finite, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }

    pub fn b_squared(&self) -> f64 {
        self.b * self.b
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

/// Distribution of the innovations. Every law is standardized to mean zero
/// and variance `sigma2` of the owning [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorLaw {
    #[default]
    Gaussian,
    /// Student-t rescaled to unit variance before scaling; `df > 4` keeps the
    /// fourth moment finite.
    StudentT {
        df: f64,
    },
    Uniform,
}

impl ErrorLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ErrorLaw::StudentT { df } if !(df.is_finite() && df > 4.0) => Err(Error::InvalidParameter(format!(
                "Student-t degrees of freedom must exceed 4, got {df}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        true
    }

    /// One draw with mean zero and unit variance.
    pub fn sample_standardized<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ErrorLaw::Gaussian => StandardNormal.sample(rng),
            ErrorLaw::StudentT { df } => {
                // df was validated; StudentT::new only fails for df <= 0.
                let t: f64 = StudentT::new(df).expect("df > 4").sample(rng);
                t * ((df - 2.0) / df).sqrt()
            }
            ErrorLaw::Uniform => {
                let u: f64 = rng.random_range(-1.0..1.0);
                u * 3f64.sqrt()
            }
        }
    }

    /// `len` innovations with variance `sigma2`, drawn as one contiguous stream.
    pub fn draw_innovations<R: Rng + ?Sized>(&self, sigma2: f64, len: usize, rng: &mut R) -> Vec<f64> {
        let sigma = sigma2.sqrt();
        (0..len).map(|_| sigma * self.sample_standardized(rng)).collect()
    }

    /// Fourth moment of the standardized law, `E eps^4 / sigma^4`.
    pub fn standardized_kurtosis(&self) -> f64 {
        match *self {
            ErrorLaw::Gaussian => 3.0,
            ErrorLaw::StudentT { df } => 3.0 + 6.0 / (df - 4.0),
            ErrorLaw::Uniform => 1.8,
        }
    }
}

/// An observed path `Y_1..Y_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesData {
    values: Vec<f64>,
}

impl SeriesData {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < MIN_SERIES_LEN {
            return Err(Error::InvalidLength {
                n: values.len(),
                min: MIN_SERIES_LEN,
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite observation at index {bad}"
            )));
        }
        Ok(Self { values })
    }

    /// Skips the length check. Only for exercising single-term sums.
    #[cfg(test)]
    pub(crate) fn new_unchecked(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn likelihood_start(&self) -> usize {
        LIKELIHOOD_START
    }

    /// Number of likelihood terms, `n - 2`.
    pub fn effective_len(&self) -> usize {
        self.values.len().saturating_sub(LIKELIHOOD_START)
    }

    /// `(Y_t, Y_{t-2})` for every likelihood term, in time order.
    pub fn lag2_pairs(&self) -> impl ExactSizeIterator<Item = (f64, f64)> + '_ {
        self.values[LIKELIHOOD_START.min(self.values.len())..]
            .iter()
            .zip(&self.values)
            .map(|(&y, &y_lag2)| (y, y_lag2))
    }
}

/// Simulates `n` observations after `burn_in` warm-up steps, refusing
/// parameters whose Lyapunov exponent is not clearly negative.
pub fn simulate(params: &ModelParams, law: ErrorLaw, n: usize, burn_in: usize, seed: u64) -> Result<SeriesData> {
    params.validate()?;
    law.validate()?;
    check_length(n)?;
    let method = match law {
        ErrorLaw::Gaussian => GammaMethod::default(),
        _ => GammaMethod::MonteCarlo { samples: 200_000, seed },
    };
    let report = stationarity_gamma(params, law, method)?;
    if !report.is_stationary {
        return Err(Error::NonStationaryParams {
            gamma: report.gamma,
            std_error: report.std_error,
        });
    }
    simulate_unchecked(params, law, n, burn_in, seed)
}

/// Like [`simulate`] but skips the stationarity guard.
pub fn simulate_unchecked(
    params: &ModelParams,
    law: ErrorLaw,
    n: usize,
    burn_in: usize,
    seed: u64,
) -> Result<SeriesData> {
    let mut rng = rng::stream(seed, 0);
    simulate_with_rng(params, law, n, burn_in, &mut rng)
}

/// Simulation driven by a caller-owned generator. No stationarity guard.
pub fn simulate_with_rng<R: Rng + ?Sized>(
    params: &ModelParams,
    law: ErrorLaw,
    n: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<SeriesData> {
    params.validate()?;
    law.validate()?;
    check_length(n)?;
    let eps = law.draw_innovations(params.sigma2, burn_in + n, rng);
    let mut path = run_recursion(params, &eps);
    Ok(SeriesData {
        values: path.split_off(burn_in),
    })
}

/// Runs the recursion from `Y_{-1} = Y_0 = 0` over `eps[0] = eps_1, ...` and
/// returns every generated value.
pub fn run_recursion(params: &ModelParams, eps: &[f64]) -> Vec<f64> {
    let mut path = Vec::with_capacity(eps.len());
    let (mut y_lag1, mut y_lag2) = (0.0, 0.0);
    let mut eps_lag1 = 0.0;
    for &e in eps {
        let y = params.mu + (params.phi + params.b * eps_lag1) * y_lag2 + e;
        path.push(y);
        y_lag2 = y_lag1;
        y_lag1 = y;
        eps_lag1 = e;
    }
    path
}

/// Truncated stationary representation
/// `mu + eps_t + sum_{i=1..depth} prod_{r<i} (phi + b*eps_{t-2r-1}) * (mu + eps_{t-2i})`.
///
/// `eps_back[k]` holds `eps_{t-k}`, so `eps_back[0]` is the current innovation.
pub fn representation_truncated(params: &ModelParams, eps_back: &[f64], depth: usize) -> Result<f64> {
    if depth == 0 {
        return Err(Error::InvalidParameter(
            "representation depth must be at least 1".into(),
        ));
    }
    let needed = 2 * depth + 1;
    if eps_back.len() < needed {
        return Err(Error::InsufficientHistory {
            needed,
            got: eps_back.len(),
        });
    }
    let mut total = params.mu + eps_back[0];
    let mut product = 1.0;
    for i in 1..=depth {
        product *= params.phi + params.b * eps_back[2 * i - 1];
        total += product * (params.mu + eps_back[2 * i]);
    }
    Ok(total)
}

fn check_length(n: usize) -> Result<()> {
    if n < MIN_SERIES_LEN {
        return Err(Error::InvalidLength { n, min: MIN_SERIES_LEN });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    fn var(v: &[f64]) -> f64 {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    }

    #[test]
    fn constant_plus_noise_reduction() {
        let p = ModelParams::new(5.0, 0.0, 1.0, 0.0).unwrap();
        let y = simulate(&p, ErrorLaw::Gaussian, 10_000, 500, 11).unwrap();
        assert!((mean(y.values()) - 5.0).abs() < 0.05);
        assert!((var(y.values()) - 1.0).abs() < 0.05);
    }

    #[test]
    fn same_seed_same_path() {
        let p = ModelParams::new(0.0, 0.9, 1.0, 0.1).unwrap();
        let a = simulate(&p, ErrorLaw::Gaussian, 500, 500, 42).unwrap();
        let b = simulate(&p, ErrorLaw::Gaussian, 500, 500, 42).unwrap();
        let c = simulate(&p, ErrorLaw::Gaussian, 500, 500, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_short_and_explosive() {
        let p = ModelParams::new(0.0, 0.0, 1.0, 2.0).unwrap();
        assert!(matches!(
            simulate(&p, ErrorLaw::Gaussian, 100, 10, 1),
            Err(Error::NonStationaryParams { gamma, .. }) if gamma > 0.0
        ));
        assert!(simulate_unchecked(&p, ErrorLaw::Gaussian, 100, 10, 1).is_ok());
        let q = ModelParams::new(0.0, 0.5, 1.0, 0.0).unwrap();
        assert!(matches!(
            simulate(&q, ErrorLaw::Gaussian, 3, 10, 1),
            Err(Error::InvalidLength { n: 3, .. })
        ));
    }

    #[test]
    fn invalid_params_and_laws() {
        assert!(ModelParams::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(ModelParams::new(f64::NAN, 0.0, 1.0, 0.0).is_err());
        assert!(ErrorLaw::StudentT { df: 4.0 }.validate().is_err());
        assert!(ErrorLaw::StudentT { df: 5.0 }.validate().is_ok());
    }

    #[test]
    fn laws_are_standardized() {
        let mut rng = rng::stream(3, 0);
        for law in [ErrorLaw::Gaussian, ErrorLaw::StudentT { df: 8.0 }, ErrorLaw::Uniform] {
            let e = law.draw_innovations(4.0, 200_000, &mut rng);
            let m = mean(&e);
            let v = var(&e);
            assert!(m.abs() < 0.02, "{law:?} mean {m}");
            assert!((v - 4.0).abs() < 0.08, "{law:?} variance {v}");
        }
    }

    #[test]
    fn recursion_matches_hand_steps() {
        let p = ModelParams::new(0.5, 0.3, 1.0, 0.7).unwrap();
        let eps = [0.1, -0.2, 0.4, 0.3];
        let y = run_recursion(&p, &eps);
        let y1 = 0.5 + 0.1;
        let y2 = 0.5 - 0.2;
        let y3 = 0.5 + (0.3 + 0.7 * -0.2) * y1 + 0.4;
        let y4 = 0.5 + (0.3 + 0.7 * 0.4) * y2 + 0.3;
        for (got, want) in y.iter().zip([y1, y2, y3, y4]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn representation_special_cases() {
        let eps: Vec<f64> = (0..41).map(|k| ((k * 7919) % 13) as f64 / 13.0 - 0.5).collect();
        let white = ModelParams::new(1.5, 0.0, 1.0, 0.0).unwrap();
        for depth in [1, 5, 20] {
            let v = representation_truncated(&white, &eps, depth).unwrap();
            assert!((v - (1.5 + eps[0])).abs() < 1e-15);
        }

        let ar = ModelParams::new(0.2, 0.6, 1.0, 0.0).unwrap();
        let depth = 20;
        let want: f64 = 0.2
            + eps[0]
            + (1..=depth)
                .map(|i| 0.6f64.powi(i as i32) * (0.2 + eps[2 * i]))
                .sum::<f64>();
        let got = representation_truncated(&ar, &eps, depth).unwrap();
        assert!((got - want).abs() < 1e-13);

        assert!(matches!(
            representation_truncated(&ar, &eps[..10], 5),
            Err(Error::InsufficientHistory { needed: 11, got: 10 })
        ));
    }

    #[test]
    fn lag_pairs_align() {
        let s = SeriesData::new(vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let pairs: Vec<_> = s.lag2_pairs().collect();
        assert_eq!(pairs, vec![(3.0, 1.0), (4.0, 2.0), (5.0, 3.0)]);
        assert_eq!(s.effective_len(), 3);
        assert!(SeriesData::new(vec![1.0; 4]).is_err());
        assert!(SeriesData::new(vec![1.0, 2.0, f64::INFINITY, 1.0, 1.0]).is_err());
    }
}
