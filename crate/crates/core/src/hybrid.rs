//! Hybrid backfitting estimator for a single PAR(p) series.
//!
//! The transition is additive, `m_t = f1(lags) + f2(x_t)` with
//! `f1 = sum rho_i y_{t-i}` and `f2 = exp(delta0_star + x_t' delta)`. The
//! estimator alternates a log-link Poisson regression for `f2` on the
//! autoregression-adjusted counts with a cubic-smoothing-spline fit of the
//! covariate-adjusted working residuals, reading each `rho_i` off the spline as
//! its average analytic first derivative. After convergence the intercept is
//! mapped back through `delta0 = delta0_star - ln(1 - sum rho)`.

use serde::{Deserialize, Serialize};

use crate::error::{ParError, Result};
use crate::glm::{fit_poisson_log_link_with, GlmOptions};
use crate::linalg::{weighted_least_squares, Matrix};
use crate::metrics::{compute_metrics, FitMetrics};
use crate::model::{dynamic_mean, CountSeries, CovariatePanel, MeanPath, ParParams};
use crate::scalar::Scalar;
use crate::spline::{fit_weighted_smoothing_spline, Smoothing};

/// `1 - sum(rho)` is kept at least this far from zero.
pub const STATIONARITY_MARGIN: f64 = 1e-6;

/// Abscissa of the autoregressive smooth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LagAbscissa {
    /// Lagged observed counts `y_{t-i}`.
    Counts,
    /// Lagged working residuals `R_{t-i}`.
    Residuals,
}

/// Treatment of negative autoregression-adjusted counts in the covariate refit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkingResponse {
    /// Regress `|y_t - sum rho_i y_{t-i}|`.
    Absolute,
    /// Regress the signed adjusted counts.
    Signed,
}

/// Observation weights of the autoregressive smooth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothWeights {
    /// Inverse of the current fitted mean `sum rho_i y_{t-i} + exp(eta_t)`.
    InverseMean,
    Unit,
}

#[derive(Clone, Debug)]
pub struct HybridConfig<T> {
    /// Outer iteration cap.
    pub max_iter: usize,
    /// Stop when every parameter's relative change falls below this.
    pub rel_tol: T,
    pub smoothing: Smoothing<T>,
    pub abscissa: LagAbscissa,
    pub working_response: WorkingResponse,
    pub weights: SmoothWeights,
    /// When false the autoregressive steps are skipped and `rho` stays 0.
    pub autoregression: bool,
    /// Inner additive backfit for `p > 1`.
    pub inner_tol: T,
    pub inner_max_iter: usize,
}

impl<T: Scalar> Default for HybridConfig<T> {
    fn default() -> Self {
        Self {
            max_iter: 500,
            rel_tol: T::lit(1e-6),
            smoothing: Smoothing::Gcv,
            abscissa: LagAbscissa::Counts,
            working_response: WorkingResponse::Absolute,
            weights: SmoothWeights::InverseMean,
            autoregression: true,
            inner_tol: T::lit(1e-8),
            inner_max_iter: 200,
        }
    }
}

/// Output of the hybrid estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParFit<T> {
    /// Final estimates with `delta0` on the mean-reversion scale.
    pub params: ParParams<T>,
    /// Intercept of the covariate component, `ln(1 - sum rho) + delta0`.
    pub delta0_star: T,
    pub iterations: usize,
    pub converged: bool,
    /// The stationarity projection was active at termination.
    pub projected: bool,
    /// A spline fit fell back to least squares at some iteration.
    pub spline_fallback: bool,
    /// Reason for stopping early, if any.
    pub failure: Option<String>,
    /// `(rho..., delta0_star, delta...)` after the start-up steps and each iteration.
    pub history: Vec<Vec<T>>,
    pub mean_path: MeanPath<T>,
    pub metrics: FitMetrics<T>,
}

/// Per-lag average derivatives of the autoregressive smooth.
#[derive(Clone, Debug, PartialEq)]
pub struct LagSlopes<T> {
    pub rho: Vec<T>,
    /// Smoothing weight used for each lag in the final pass.
    pub lambdas: Vec<T>,
    /// Least-squares slopes were used because a spline could not be fit.
    pub fallback: bool,
    pub inner_iterations: usize,
    pub inner_converged: bool,
}

/// Average derivative of a smooth of `response[t]` on the lags of `abscissa`.
///
/// `abscissa` has the full series length `T`; `response` holds the `T - p`
/// usable points `t = p..T`, as do the optional `weights`. For `p > 1` the smooth is additive across lags and
/// fitted by backfitting univariate splines on partial residuals. With
/// [`Smoothing::Gcv`] each lag's weight is chosen on the first pass and then
/// held for the remaining cycles.
pub fn lag_slopes<T: Scalar>(
    response: &[T],
    abscissa: &[T],
    weights: Option<&[T]>,
    p: usize,
    smoothing: &[Smoothing<T>],
    inner_tol: T,
    inner_max_iter: usize,
) -> Result<LagSlopes<T>> {
    let t_len = abscissa.len();
    if p == 0 || t_len < p + 4 || response.len() != t_len - p || smoothing.len() != p {
        return Err(ParError::Dimension(format!(
            "lag smooth needs T >= p + 4 and T - p responses (T = {t_len}, p = {p}, responses = {})",
            response.len()
        )));
    }
    let n = response.len();
    let nn = T::from_count(n);
    let mut smoothing = smoothing.to_vec();
    let lag_cols: Vec<Vec<T>> = (1..=p).map(|i| (p..t_len).map(|t| abscissa[t - i]).collect()).collect();

    let fallback = |cycle: usize| -> Result<LagSlopes<T>> {
        Ok(LagSlopes {
            rho: least_squares_slopes(response, &lag_cols)?,
            lambdas: vec![T::nan(); p],
            fallback: true,
            inner_iterations: cycle,
            inner_converged: true,
        })
    };

    if p == 1 {
        return match fit_weighted_smoothing_spline(&lag_cols[0], response, weights, smoothing[0]) {
            Ok(fit) => Ok(LagSlopes {
                rho: vec![lag_cols[0].iter().map(|&v| fit.derivative(v)).sum::<T>() / nn],
                lambdas: vec![fit.lambda],
                fallback: false,
                inner_iterations: 1,
                inner_converged: true,
            }),
            Err(ParError::Degenerate(_)) => fallback(1),
            Err(e) => Err(e),
        };
    }

    let alpha = response.iter().copied().sum::<T>() / nn;
    // Components start at the least-squares linear fit.
    let mut slopes = match least_squares_slopes(response, &lag_cols) {
        Ok(s) => s,
        Err(_) => vec![T::zero(); p],
    };
    let mut parts: Vec<Vec<T>> = lag_cols
        .iter()
        .zip(&slopes)
        .map(|(col, &b)| {
            let m = col.iter().copied().sum::<T>() / nn;
            col.iter().map(|&v| b * (v - m)).collect()
        })
        .collect();
    for cycle in 1..=inner_max_iter {
        let mut change = T::zero();
        for i in 0..p {
            let partial: Vec<T> = (0..n)
                .map(|t| response[t] - alpha - (0..p).filter(|&j| j != i).map(|j| parts[j][t]).sum::<T>())
                .collect();
            let fit = match fit_weighted_smoothing_spline(&lag_cols[i], &partial, weights, smoothing[i]) {
                Ok(f) => f,
                Err(ParError::Degenerate(_)) => return fallback(cycle),
                Err(e) => return Err(e),
            };
            smoothing[i] = Smoothing::Fixed(fit.lambda);
            let fm = fit.fitted_values.iter().copied().sum::<T>() / nn;
            parts[i] = fit.fitted_values.iter().map(|&v| v - fm).collect();
            let s = lag_cols[i].iter().map(|&v| fit.derivative(v)).sum::<T>() / nn;
            change = change.max((s - slopes[i]).abs());
            slopes[i] = s;
        }
        if change < inner_tol {
            return Ok(LagSlopes {
                rho: slopes,
                lambdas: lambdas_of(&smoothing),
                fallback: false,
                inner_iterations: cycle,
                inner_converged: true,
            });
        }
    }
    Ok(LagSlopes {
        rho: slopes,
        lambdas: lambdas_of(&smoothing),
        fallback: false,
        inner_iterations: inner_max_iter,
        inner_converged: false,
    })
}

fn lambdas_of<T: Scalar>(smoothing: &[Smoothing<T>]) -> Vec<T> {
    smoothing
        .iter()
        .map(|s| match s {
            Smoothing::Fixed(l) => *l,
            Smoothing::Gcv => T::nan(),
        })
        .collect()
}

fn least_squares_slopes<T: Scalar>(response: &[T], lag_cols: &[Vec<T>]) -> Result<Vec<T>> {
    let n = response.len();
    let rows: Vec<Vec<T>> = (0..n)
        .map(|t| std::iter::once(T::one()).chain(lag_cols.iter().map(|c| c[t])).collect())
        .collect();
    let design = Matrix::from_rows(&rows)?;
    let beta = weighted_least_squares(&design, response, &vec![T::one(); n])
        .map_err(|_| ParError::Degenerate("collinear lags in least-squares fallback".into()))?;
    Ok(beta[1..].to_vec())
}

/// `rho_i` as the average derivative of a smooth of `R_t` on `R_{t-i}`.
pub fn estimate_rho_from_spline<T: Scalar>(residuals: &[T], p: usize) -> Result<Vec<T>> {
    if residuals.len() < p + 4 {
        return Err(ParError::Dimension(format!(
            "{} residuals for lag order {p}; need at least p + 4",
            residuals.len()
        )));
    }
    let cfg = HybridConfig::<T>::default();
    Ok(lag_slopes(
        &residuals[p..],
        residuals,
        None,
        p,
        &vec![cfg.smoothing; p],
        cfg.inner_tol,
        cfg.inner_max_iter,
    )?
    .rho)
}

/// In-sample one-step means for `t = p..T` from the observed lags.
pub fn one_step_means<T: Scalar>(
    params: &ParParams<T>,
    series: &CountSeries,
    covariates: &CovariatePanel<T>,
) -> Result<MeanPath<T>> {
    let p = params.order();
    if covariates.rows() != series.len() {
        return Err(ParError::Dimension(format!(
            "{} covariate rows for {} counts",
            covariates.rows(),
            series.len()
        )));
    }
    let y: Vec<T> = series.as_reals();
    let mut lags = vec![T::zero(); p];
    let means = (p..y.len())
        .map(|t| {
            for (i, l) in lags.iter_mut().enumerate() {
                *l = y[t - 1 - i];
            }
            dynamic_mean(params, &lags, covariates.row(t))
        })
        .collect::<Result<Vec<T>>>()?;
    MeanPath::new(p, means)
}

/// Shortest series either estimator accepts for lag order `p` and `k` covariates.
pub fn min_series_len(p: usize, k: usize) -> usize {
    20.max(5 * (p + k))
}

/// Scales `rho` so that `sum(rho) <= 1 - margin`; returns whether it did.
fn project_stationary<T: Scalar>(rho: &mut [T]) -> bool {
    let cap = T::one() - T::lit(STATIONARITY_MARGIN);
    let s: T = rho.iter().copied().sum();
    if s >= cap {
        let f = cap / s;
        for r in rho.iter_mut() {
            *r *= f;
        }
        true
    } else {
        false
    }
}

fn max_relative_change<T: Scalar>(old: &[T], new: &[T]) -> T {
    let floor = T::lit(1e-8);
    old.iter()
        .zip(new)
        .map(|(&o, &n)| (n - o).abs() / o.abs().max(floor))
        .fold(T::zero(), T::max)
}

fn theta<T: Scalar>(rho: &[T], beta: &[T]) -> Vec<T> {
    let mut v = rho.to_vec();
    v.extend_from_slice(beta);
    v
}

/// Fits a PAR(p) model to one series by hybrid backfitting.
pub fn fit_par_hybrid<T: Scalar>(
    series: &CountSeries,
    covariates: &CovariatePanel<T>,
    p: usize,
    config: &HybridConfig<T>,
) -> Result<ParFit<T>> {
    let t_len = series.len();
    let k = covariates.k();
    if p == 0 {
        return Err(ParError::InvalidParams("lag order must be at least 1".into()));
    }
    if covariates.rows() != t_len {
        return Err(ParError::Dimension(format!(
            "{} covariate rows for {t_len} counts",
            covariates.rows()
        )));
    }
    let min_len = min_series_len(p, k);
    if t_len < min_len {
        return Err(ParError::Degenerate(format!(
            "series of length {t_len} is too short for p = {p}, k = {k} (need {min_len})"
        )));
    }
    let y: Vec<T> = series.as_reals();
    let full_design = covariates.matrix().with_intercept();
    let design = full_design.slice_rows(p..t_len);
    let eta_all = |beta: &[T]| full_design.mul_vec(beta);

    let mut glm_opts = GlmOptions::<T>::default();
    let mut state = LoopState {
        smoother: LagSmoother::new(p, config.smoothing),
        history: Vec::new(),
        projected: false,
    };

    // Step 1: covariate fit ignoring the autoregression.
    let glm0 = fit_poisson_log_link_with(&y[p..], &design, &glm_opts)?;
    if !glm0.converged {
        return finish(
            series,
            covariates,
            vec![T::zero(); p],
            glm0.coefficients,
            0,
            false,
            Some("initial Poisson regression did not converge".into()),
            state,
        );
    }
    let mut beta = glm0.coefficients;
    let mut rho = vec![T::zero(); p];

    if !config.autoregression {
        state.history.push(theta(&rho, &beta));
        return finish(series, covariates, rho, beta, 0, true, None, state);
    }

    // Steps 2-3: residuals from the covariate fit, then the lag smooth.
    rho = state.smooth_step(&y, &eta_all(&beta), &rho, config)?;
    state.history.push(theta(&rho, &beta));

    for iter in 1..=config.max_iter {
        // Steps 4/8 and 5: autoregression-adjusted counts, covariate refit.
        let adjusted = adjusted_counts(&y, &rho, config.working_response);
        glm_opts.start = Some(beta.clone());
        let glm = match fit_poisson_log_link_with(&adjusted, &design, &glm_opts) {
            Ok(g) => g,
            Err(ParError::Degenerate(msg)) => {
                return finish(series, covariates, rho, beta, iter, false, Some(msg), state);
            }
            Err(e) => return Err(e),
        };
        if !glm.converged {
            return finish(
                series,
                covariates,
                rho,
                glm.coefficients,
                iter,
                false,
                Some("covariate refit did not converge".into()),
                state,
            );
        }
        // Steps 6-7: covariate-adjusted residuals, lag smooth.
        let new_rho = state.smooth_step(&y, &eta_all(&glm.coefficients), &rho, config)?;
        let old = theta(&rho, &beta);
        beta = glm.coefficients;
        rho = new_rho;
        let new = theta(&rho, &beta);
        let change = max_relative_change(&old, &new);
        state.history.push(new);
        if !change.is_finite() {
            return finish(
                series,
                covariates,
                rho,
                beta,
                iter,
                false,
                Some("non-finite parameter change".into()),
                state,
            );
        }
        if change < config.rel_tol {
            let ok = !state.projected;
            let why = (!ok).then(|| "stationarity projection active at termination".to_string());
            return finish(series, covariates, rho, beta, iter, ok, why, state);
        }
    }
    let iters = config.max_iter;
    finish(
        series,
        covariates,
        rho,
        beta,
        iters,
        false,
        Some("iteration cap reached".into()),
        state,
    )
}

struct LoopState<T> {
    smoother: LagSmoother<T>,
    history: Vec<Vec<T>>,
    projected: bool,
}

impl<T: Scalar> LoopState<T> {
    fn smooth_step(&mut self, y: &[T], eta: &[T], rho: &[T], config: &HybridConfig<T>) -> Result<Vec<T>> {
        let mut rho = self.smoother.slopes(y, eta, rho, config)?;
        self.projected = project_stationary(&mut rho);
        Ok(rho)
    }
}

/// Per-series state of the autoregressive smooth: GCV weights are chosen on
/// the first call and then held.
#[derive(Clone, Debug)]
pub(crate) struct LagSmoother<T> {
    smoothing: Vec<Smoothing<T>>,
    pub(crate) fallback: bool,
}

impl<T: Scalar> LagSmoother<T> {
    pub(crate) fn new(p: usize, smoothing: Smoothing<T>) -> Self {
        Self {
            smoothing: vec![smoothing; p],
            fallback: false,
        }
    }

    /// Lag slopes of the working residuals `y - exp(eta)`; `rho` is the
    /// current estimate used for the observation weights.
    pub(crate) fn slopes(&mut self, y: &[T], eta: &[T], rho: &[T], config: &HybridConfig<T>) -> Result<Vec<T>> {
        let p = rho.len();
        let resid: Vec<T> = y.iter().zip(eta).map(|(&v, &e)| v - e.exp()).collect();
        let weights: Option<Vec<T>> = match config.weights {
            SmoothWeights::Unit => None,
            SmoothWeights::InverseMean => Some(
                (p..y.len())
                    .map(|t| {
                        let m = eta[t].exp() + (0..p).map(|i| rho[i] * y[t - 1 - i]).sum::<T>();
                        T::one() / m.max(T::one())
                    })
                    .collect(),
            ),
        };
        let abscissa = match config.abscissa {
            LagAbscissa::Counts => y,
            LagAbscissa::Residuals => &resid[..],
        };
        let slopes = lag_slopes(
            &resid[p..],
            abscissa,
            weights.as_deref(),
            p,
            &self.smoothing,
            config.inner_tol,
            config.inner_max_iter,
        )?;
        self.fallback |= slopes.fallback;
        if !slopes.fallback {
            self.smoothing = slopes.lambdas.iter().map(|&l| Smoothing::Fixed(l)).collect();
        }
        Ok(slopes.rho)
    }
}

/// Autoregression-adjusted counts `y_t - sum rho_i y_{t-i}` for `t = p..T`.
pub(crate) fn adjusted_counts<T: Scalar>(y: &[T], rho: &[T], mode: WorkingResponse) -> Vec<T> {
    let p = rho.len();
    (p..y.len())
        .map(|t| {
            let r = y[t] - (0..p).map(|i| rho[i] * y[t - 1 - i]).sum::<T>();
            match mode {
                WorkingResponse::Absolute => r.abs(),
                WorkingResponse::Signed => r,
            }
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn finish<T: Scalar>(
    series: &CountSeries,
    covariates: &CovariatePanel<T>,
    rho: Vec<T>,
    beta: Vec<T>,
    iterations: usize,
    converged: bool,
    failure: Option<String>,
    state: LoopState<T>,
) -> Result<ParFit<T>> {
    let delta0_star = beta[0];
    let delta = beta[1..].to_vec();
    let unusable = |e: ParError| ParError::Estimation(format!("final estimates unusable: {e}"));
    let params = ParParams::from_derived(rho, delta0_star, delta).map_err(unusable)?;
    let mean_path = one_step_means(&params, series, covariates).map_err(unusable)?;
    let metrics = compute_metrics(series, &mean_path)?;
    Ok(ParFit {
        params,
        delta0_star,
        iterations,
        converged,
        projected: state.projected,
        spline_fallback: state.smoother.fallback,
        failure,
        history: state.history,
        mean_path,
        metrics,
    })
}
