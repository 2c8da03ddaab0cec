//! Poisson autoregressive PAR(p) count models.
//!
//! Simulation, hybrid backfitting (Poisson regression plus cubic smoothing
//! splines), a negative binomial filter-likelihood comparator, the
//! shared-coefficient multiple-series estimator, and a Monte Carlo harness.
//!
//! The model, GLM, spline and backfitting kernels are generic over
//! [`scalar::Scalar`] (`f32` or `f64`). The aliases below fix them at `f64`,
//! which is what the simulation, baseline and harness code use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod error;
pub mod glm;
pub mod harness;
pub mod hybrid;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod multi;
pub mod rng;
pub mod scalar;
pub mod simulate;
pub mod spline;
pub mod tables;

pub use baseline::{fit_par_filter_mle, negbin_predictive_loglik, BaselineConfig, BaselineFit};
pub use error::{ParError, Result};
pub use harness::{run_scenario, ScenarioReport, ScenarioSpec};
pub use hybrid::{estimate_rho_from_spline, fit_par_hybrid, one_step_means};
pub use metrics::{compute_metrics, relative_bias};
pub use model::{dynamic_mean, CountSeries, StructuralChangeSpec};
pub use multi::{bootstrap_pool, fit_multi_par};
pub use simulate::{simulate_multi_par, simulate_par, simulate_par_with_change, CovariateLaw};
pub use spline::{fit_smoothing_spline, spline_derivative_at};
pub use tables::{run_table, TableId};

pub type ParParams = model::ParParams<f64>;
pub type MultiParParams = model::MultiParParams<f64>;
pub type CovariatePanel = model::CovariatePanel<f64>;
pub type MeanPath = model::MeanPath<f64>;
pub type GlmFit = glm::GlmFit<f64>;
pub type SplineFit = spline::SplineFit<f64>;
pub type HybridConfig = hybrid::HybridConfig<f64>;
pub type ParFit = hybrid::ParFit<f64>;
pub type MultiConfig = multi::MultiConfig<f64>;
pub type MultiParFit = multi::MultiParFit<f64>;
pub type FitMetrics = metrics::FitMetrics<f64>;
