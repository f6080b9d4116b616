//! Simulation, GARCH-type quasi-maximum-likelihood estimation, sandwich
//! inference and boundary testing for the bilinear time-series model
//!
//! ```text
//! Y_t = mu + phi*Y_{t-2} + b*Y_{t-2}*eps_{t-1} + eps_t
//! ```
//!
//! with i.i.d. innovations of mean zero, variance `sigma2` and finite fourth
//! moment.

pub mod error;
pub mod estimation;
pub mod inference;
pub mod io;
pub mod likelihood;
pub mod model;
pub mod montecarlo;
pub mod optim;
pub mod quadrature;
pub mod rng;
pub mod stationarity;

pub use error::{Error, Result};
pub use estimation::{
    confidence_intervals, covariance_hat, fit_gmle, profile_inner, sign_estimator, EstimationResult, Interval,
    ProfileState,
};
pub use inference::{
    boundary_interval, intervals_for, simulate_boundary_limit, simulate_shifted_limit, test_b_zero, test_b_zero_levels,
    BoundaryLimitSample, BoundaryTestResult, NullNuisance,
};
pub use likelihood::{HessianMatrix, ParamSpace, ScoreVector, ThetaVector};
pub use model::{representation_truncated, simulate, ErrorLaw, ModelParams, SeriesData};
pub use montecarlo::{
    run_experiment, run_experiment_with_workers, size_power_table, CellSpec, ExperimentMode, ExperimentSpec, McSummary,
};
pub use stationarity::{stationarity_gamma, stationarity_region, GammaMethod, RegionPoint, StationarityReport};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
