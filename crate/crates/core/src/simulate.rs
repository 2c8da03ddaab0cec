//! Data-generating processes: single series, temporary structural change, and
//! multiple series with shared dynamics.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ParError, Result};
use crate::linalg::Matrix;
use crate::model::{
    dynamic_mean, CountSeries, CovariatePanel, MeanPath, MultiParParams, ParParams, StructuralChangeSpec,
};
use crate::rng::{derive_seed, rng_from_seed, SimRng};

/// Discarded steps before recording.
pub const DEFAULT_BURN_IN: usize = 100;

/// Mean of the Poisson covariate law.
pub const POISSON_COVARIATE_MEAN: f64 = 5.0;

/// Distribution of simulated covariates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateLaw {
    /// Uniform(0, 1)
    Uniform,
    /// Normal(0, 1)
    Normal,
    /// Poisson(5)
    Poisson,
}

impl CovariateLaw {
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Self::Uniform => rng.random::<f64>(),
            Self::Normal => rng.sample(StandardNormal),
            Self::Poisson => Poisson::new(POISSON_COVARIATE_MEAN).expect("positive rate").sample(rng),
        }
    }

    /// `rows x k` panel of i.i.d. draws.
    pub fn panel<R: Rng + ?Sized>(self, rows: usize, k: usize, rng: &mut R) -> CovariatePanel<f64> {
        let data = (0..rows * k).map(|_| self.draw(rng)).collect();
        CovariatePanel::new(Matrix::new(rows, k, data).expect("shape")).expect("finite draws")
    }
}

impl fmt::Display for CovariateLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Uniform => "uniform",
            Self::Normal => "normal",
            Self::Poisson => "poisson",
        })
    }
}

impl FromStr for CovariateLaw {
    type Err = ParError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" | "uniform01" => Ok(Self::Uniform),
            "normal" | "normal01" => Ok(Self::Normal),
            "poisson" | "poisson5" => Ok(Self::Poisson),
            other => Err(ParError::InvalidParams(format!("unknown covariate law `{other}`"))),
        }
    }
}

/// A simulated series with its true dynamic means and the recorded covariates.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedSeries {
    pub series: CountSeries,
    pub means: MeanPath<f64>,
    pub covariates: CovariatePanel<f64>,
}

/// Exact Poisson draw; `rand_distr` uses inversion for small rates and
/// transformed rejection otherwise, both exact.
fn poisson_draw(rng: &mut SimRng, mean: f64) -> Result<u64> {
    let dist = Poisson::new(mean).map_err(|_| ParError::Domain { eta: mean.ln() })?;
    Ok(dist.sample(rng) as u64)
}

/// Simulates `t_len` recorded counts after `burn_in` discarded steps.
///
/// `covariates` must hold `burn_in + t_len` rows; the first `burn_in` drive the
/// discarded steps. The `p` pre-sample counts start at `round(exp(delta0))`.
pub fn simulate_par(
    params: &ParParams<f64>,
    covariates: &CovariatePanel<f64>,
    t_len: usize,
    seed: u64,
    burn_in: usize,
) -> Result<SimulatedSeries> {
    simulate_inner(params, None, covariates, t_len, seed, burn_in)
}

/// As [`simulate_par`], with `change.rho_during` in force over the centered window
/// of the recorded series.
pub fn simulate_par_with_change(
    params: &ParParams<f64>,
    change: &StructuralChangeSpec,
    covariates: &CovariatePanel<f64>,
    t_len: usize,
    seed: u64,
    burn_in: usize,
) -> Result<SimulatedSeries> {
    if change.rho_during.len() != params.order() {
        return Err(ParError::Dimension(format!(
            "change specifies {} coefficients for a lag-{} model",
            change.rho_during.len(),
            params.order()
        )));
    }
    simulate_inner(params, Some(change), covariates, t_len, seed, burn_in)
}

fn simulate_inner(
    params: &ParParams<f64>,
    change: Option<&StructuralChangeSpec>,
    covariates: &CovariatePanel<f64>,
    t_len: usize,
    seed: u64,
    burn_in: usize,
) -> Result<SimulatedSeries> {
    if !params.is_stationary() {
        return Err(ParError::NonStationary { sum: params.rho_sum() });
    }
    if covariates.rows() != t_len + burn_in {
        return Err(ParError::Dimension(format!(
            "need {} covariate rows (burn-in {burn_in} + T {t_len}), got {}",
            t_len + burn_in,
            covariates.rows()
        )));
    }
    if covariates.k() != params.delta.len() {
        return Err(ParError::Dimension(format!(
            "{} covariate columns for {} effects",
            covariates.k(),
            params.delta.len()
        )));
    }
    let p = params.order();
    let window = change.map_or(0..0, |c| c.window(t_len));
    let during = change.map(|c| ParParams {
        rho: c.rho_during.clone(),
        delta0: params.delta0,
        delta: params.delta.clone(),
    });

    let mut rng = rng_from_seed(seed);
    let start = params.reversion_level().round();
    // history[0] is y_{t-1}
    let mut history = vec![start; p];
    let mut values = Vec::with_capacity(t_len);
    let mut means = Vec::with_capacity(t_len);
    for step in 0..burn_in + t_len {
        let recorded = step.checked_sub(burn_in);
        let active = match (recorded, &during) {
            (Some(t), Some(d)) if window.contains(&t) => d,
            _ => params,
        };
        let m = dynamic_mean(active, &history, covariates.row(step))?;
        let y = poisson_draw(&mut rng, m)?;
        history.rotate_right(1);
        history[0] = y as f64;
        if recorded.is_some() {
            values.push(y);
            means.push(m);
        }
    }
    Ok(SimulatedSeries {
        series: CountSeries::new("y", values),
        means: MeanPath::new(0, means)?,
        covariates: covariates.slice_rows(burn_in..burn_in + t_len),
    })
}

/// Draws covariates from `law` and simulates; the covariate and count streams
/// are derived from `seed` independently.
pub fn simulate_with_law(
    params: &ParParams<f64>,
    change: Option<&StructuralChangeSpec>,
    law: CovariateLaw,
    t_len: usize,
    seed: u64,
) -> Result<SimulatedSeries> {
    let mut cov_rng = rng_from_seed(derive_seed(seed, 0));
    let covariates = law.panel(t_len + DEFAULT_BURN_IN, params.delta.len(), &mut cov_rng);
    let count_seed = derive_seed(seed, 1);
    match change {
        Some(c) => simulate_par_with_change(params, c, &covariates, t_len, count_seed, DEFAULT_BURN_IN),
        None => simulate_par(params, &covariates, t_len, count_seed, DEFAULT_BURN_IN),
    }
}

/// Simulates `N` independent series sharing `rho` and `delta`, series `i` with
/// intercept `delta0_by_series[i]`. `covariates[i]` must hold `burn_in + t_len` rows.
pub fn simulate_multi_par(
    params: &MultiParParams<f64>,
    covariates: &[CovariatePanel<f64>],
    t_len: usize,
    seed: u64,
    burn_in: usize,
) -> Result<Vec<SimulatedSeries>> {
    if covariates.len() != params.n_series() {
        return Err(ParError::Dimension(format!(
            "{} covariate panels for {} series",
            covariates.len(),
            params.n_series()
        )));
    }
    (0..params.n_series())
        .map(|i| {
            let mut s = simulate_par(
                &params.series_params(i),
                &covariates[i],
                t_len,
                derive_seed(seed, i as u64),
                burn_in,
            )?;
            s.series.label = format!("series{}", i + 1);
            Ok(s)
        })
        .collect()
}

/// Reversion levels `L_i ~ Normal(100, sd)` truncated below at 10 (by redraw);
/// returns `ln L_i`.
pub fn draw_reversion_intercepts<R: Rng + ?Sized>(n: usize, center: f64, sd: f64, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| loop {
            let z: f64 = rng.sample(StandardNormal);
            let level = center + sd * z;
            if level >= 10.0 {
                break level.ln();
            }
        })
        .collect()
}
