//! Multiple-PAR(1) estimator: shared autoregression and covariate effects,
//! series-specific mean-reversion intercepts.
//!
//! Each iteration fits one Poisson regression per series, averages the
//! covariate slopes, smooths every series' working residuals for its own
//! `rho_i`, and pools those by bootstrap into the shared `rho`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ParError, Result};
use crate::glm::{fit_poisson_log_link_with, GlmOptions};
use crate::hybrid::{
    adjusted_counts, fit_par_hybrid, one_step_means, HybridConfig, LagAbscissa, LagSmoother, STATIONARITY_MARGIN,
};
use crate::linalg::Matrix;
use crate::metrics::{compute_metrics, metrics_from_pairs, FitMetrics};
use crate::model::{CountSeries, CovariatePanel, MeanPath, MultiParParams};
use crate::rng::{derive_seed, rng_from_seed};
use crate::scalar::Scalar;

pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 500;

#[derive(Clone, Debug)]
pub struct MultiConfig<T> {
    /// Per-series iteration settings; `abscissa` defaults to lagged residuals.
    pub hybrid: HybridConfig<T>,
    pub bootstrap_resamples: usize,
    pub seed: u64,
    /// Weight per-series slopes by usable length instead of the plain mean.
    pub length_weighted: bool,
}

impl<T: Scalar> Default for MultiConfig<T> {
    fn default() -> Self {
        Self {
            hybrid: HybridConfig {
                abscissa: LagAbscissa::Residuals,
                ..HybridConfig::default()
            },
            bootstrap_resamples: DEFAULT_BOOTSTRAP_RESAMPLES,
            seed: 0,
            length_weighted: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiParFit<T> {
    /// Labels of the series that entered the fit, in input order.
    pub labels: Vec<String>,
    /// Shared `rho`, shared `delta`, and per-series `delta0` on the reversion scale.
    pub params: MultiParParams<T>,
    /// Per-series spline estimates from the final iteration, before pooling.
    pub per_series_rho: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    pub projected: bool,
    pub failure: Option<String>,
    /// Series dropped because their regression could not be fit.
    pub excluded: Vec<String>,
    pub mean_paths: Vec<MeanPath<T>>,
    pub per_series_metrics: Vec<FitMetrics<T>>,
    /// Metrics over all series' fitted points together.
    pub metrics: FitMetrics<T>,
    pub history: Vec<Vec<T>>,
}

/// Mean of `b` bootstrap-resample means of `values`.
pub fn bootstrap_pool<T: Scalar>(values: &[T], b: usize, seed: u64) -> Result<T> {
    if values.is_empty() || b == 0 {
        return Err(ParError::InvalidParams(
            "bootstrap pooling needs at least one value and one resample".into(),
        ));
    }
    let n = values.len();
    let nn = T::from_count(n);
    let mut rng = rng_from_seed(seed);
    let mut draws = vec![0usize; n];
    for _ in 0..b * n {
        draws[rng.random_range(0..n)] += 1;
    }
    // mean of the resample means, accumulated relative to the first value
    let base = values[0];
    let shift = values
        .iter()
        .zip(&draws)
        .map(|(&v, &c)| T::from_count(c) * (v - base))
        .sum::<T>();
    Ok(base + shift / (nn * T::from_count(b)))
}

struct SeriesData<T> {
    label: String,
    y: Vec<T>,
    full_design: Matrix<T>,
    design: Matrix<T>,
}

/// Fits the multiple-PAR(1) model to `panel[i]` with covariates `covariates[i]`.
pub fn fit_multi_par<T: Scalar>(
    panel: &[CountSeries],
    covariates: &[CovariatePanel<T>],
    config: &MultiConfig<T>,
) -> Result<MultiParFit<T>> {
    if panel.len() != covariates.len() {
        return Err(ParError::Dimension(format!(
            "{} series but {} covariate panels",
            panel.len(),
            covariates.len()
        )));
    }
    match panel.len() {
        0 => return Err(ParError::InvalidParams("no series supplied".into())),
        1 => return single_series(&panel[0], &covariates[0], &config.hybrid),
        _ => {}
    }
    let k = covariates[0].k();
    if covariates.iter().any(|c| c.k() != k) {
        return Err(ParError::Dimension("covariate panels differ in width".into()));
    }
    let cfg = &config.hybrid;
    let mut data = Vec::with_capacity(panel.len());
    for (s, c) in panel.iter().zip(covariates) {
        if c.rows() != s.len() {
            return Err(ParError::Dimension(format!(
                "series {}: {} covariate rows for {} counts",
                s.label,
                c.rows(),
                s.len()
            )));
        }
        if s.len() < 20.max(5 * (1 + k)) {
            return Err(ParError::Degenerate(format!(
                "series {} is too short ({} points)",
                s.label,
                s.len()
            )));
        }
        let full_design = c.matrix().with_intercept();
        let design = full_design.slice_rows(1..s.len());
        data.push(SeriesData {
            label: s.label.clone(),
            y: s.as_reals(),
            full_design,
            design,
        });
    }

    // Step 1: per-series regressions ignoring the autoregression.
    let mut glm_opts = GlmOptions::<T>::default();
    let mut excluded = Vec::new();
    let mut betas = Vec::with_capacity(data.len());
    let mut kept = Vec::with_capacity(data.len());
    for d in data {
        match fit_poisson_log_link_with(&d.y[1..], &d.design, &glm_opts) {
            Ok(g) => {
                betas.push(g.coefficients);
                kept.push(d);
            }
            Err(ParError::Singular(_)) | Err(ParError::Degenerate(_)) => excluded.push(d.label),
            Err(e) => return Err(e),
        }
    }
    let data = kept;
    if data.len() < 2 {
        return Err(ParError::Estimation(format!(
            "{} series excluded; fewer than two remain",
            excluded.len()
        )));
    }
    let n = data.len();
    // pooling visits series in label order so the result does not depend on input order
    let mut by_label: Vec<usize> = (0..n).collect();
    by_label.sort_by(|&a, &b| data[a].label.cmp(&data[b].label));

    let pool_slopes = |betas: &[Vec<T>]| -> Vec<T> {
        let weight = |i: usize| {
            if config.length_weighted {
                T::from_count(data[i].y.len() - 1)
            } else {
                T::one()
            }
        };
        let wsum = by_label.iter().map(|&i| weight(i)).sum::<T>();
        (1..=k)
            .map(|j| by_label.iter().map(|&i| weight(i) * betas[i][j]).sum::<T>() / wsum)
            .collect()
    };
    let eta_of = |i: usize, intercept: T, delta: &[T]| -> Vec<T> {
        let mut b = Vec::with_capacity(k + 1);
        b.push(intercept);
        b.extend_from_slice(delta);
        data[i].full_design.mul_vec(&b)
    };
    // the same resamples are drawn at every iteration
    let pool_seed = derive_seed(config.seed, 0);
    let pool_rho = |per: &[T]| -> Result<(T, bool)> {
        let ordered: Vec<T> = by_label.iter().map(|&i| per[i]).collect();
        let pooled = bootstrap_pool(&ordered, config.bootstrap_resamples, pool_seed)?;
        let cap = T::one() - T::lit(STATIONARITY_MARGIN);
        Ok(if pooled >= cap {
            (cap, true)
        } else if pooled < T::zero() {
            (T::zero(), true)
        } else {
            (pooled, false)
        })
    };

    let mut smoothers: Vec<LagSmoother<T>> = (0..n).map(|_| LagSmoother::new(1, cfg.smoothing)).collect();
    let mut delta = pool_slopes(&betas);
    let mut intercepts: Vec<T> = betas.iter().map(|b| b[0]).collect();

    // Steps 2-4: residual smooths and the first pooled rho.
    let mut per_rho = Vec::with_capacity(n);
    for i in 0..n {
        let eta = eta_of(i, intercepts[i], &delta);
        per_rho.push(smoothers[i].slopes(&data[i].y, &eta, &[T::zero()], cfg)?[0]);
    }
    let (mut rho, mut projected) = pool_rho(&per_rho)?;
    let theta = |rho: T, intercepts: &[T], delta: &[T]| -> Vec<T> {
        let mut v = vec![rho];
        v.extend_from_slice(intercepts);
        v.extend_from_slice(delta);
        v
    };
    let mut history = vec![theta(rho, &intercepts, &delta)];

    let mut outcome: Option<(bool, Option<String>)> = None;
    let mut iterations = 0;
    'outer: for iter in 1..=cfg.max_iter {
        iterations = iter;
        // Steps 5-6: adjusted counts, per-series regressions, pooled slopes.
        let mut new_betas = Vec::with_capacity(n);
        for (i, d) in data.iter().enumerate() {
            let adjusted = adjusted_counts(&d.y, &[rho], cfg.working_response);
            glm_opts.start = Some(betas[i].clone());
            match fit_poisson_log_link_with(&adjusted, &d.design, &glm_opts) {
                Ok(g) if g.converged => new_betas.push(g.coefficients),
                Ok(_) => {
                    outcome = Some((false, Some(format!("regression for {} did not converge", d.label))));
                    break 'outer;
                }
                Err(e @ (ParError::Degenerate(_) | ParError::Singular(_))) => {
                    outcome = Some((false, Some(format!("regression for {}: {e}", d.label))));
                    break 'outer;
                }
                Err(e) => return Err(e),
            }
        }
        let new_delta = pool_slopes(&new_betas);
        let new_intercepts: Vec<T> = new_betas.iter().map(|b| b[0]).collect();
        // Steps 7-9: residual smooths and pooling.
        let mut new_per_rho = Vec::with_capacity(n);
        for i in 0..n {
            let eta = eta_of(i, new_intercepts[i], &new_delta);
            new_per_rho.push(smoothers[i].slopes(&data[i].y, &eta, &[rho], cfg)?[0]);
        }
        let (new_rho, proj) = pool_rho(&new_per_rho)?;
        let old = theta(rho, &intercepts, &delta);
        let new = theta(new_rho, &new_intercepts, &new_delta);
        betas = new_betas;
        delta = new_delta;
        intercepts = new_intercepts;
        rho = new_rho;
        per_rho = new_per_rho;
        projected = proj;
        let floor = T::lit(1e-8);
        let change = old
            .iter()
            .zip(&new)
            .map(|(&o, &v)| (v - o).abs() / o.abs().max(floor))
            .fold(T::zero(), T::max);
        history.push(new);
        if !change.is_finite() {
            outcome = Some((false, Some("non-finite parameter change".into())));
            break;
        }
        if change < cfg.rel_tol {
            outcome = Some(if projected {
                (false, Some("shared rho projected at termination".into()))
            } else {
                (true, None)
            });
            break;
        }
    }
    let (converged, failure) = outcome.unwrap_or((false, Some("iteration cap reached".into())));

    let scale = (T::one() - rho).ln();
    let delta0: Vec<T> = intercepts.iter().map(|&d| d - scale).collect();
    let unusable = |e: ParError| ParError::Estimation(format!("final estimates unusable: {e}"));
    let params = MultiParParams::new(rho, delta, delta0).map_err(unusable)?;
    let mut mean_paths = Vec::with_capacity(n);
    let mut per_series_metrics = Vec::with_capacity(n);
    let mut pairs = Vec::new();
    let kept_labels: Vec<String> = data.iter().map(|d| d.label.clone()).collect();
    for (i, label) in kept_labels.iter().enumerate() {
        let (s, c) = panel
            .iter()
            .zip(covariates)
            .find(|(s, _)| &s.label == label)
            .expect("kept series comes from the panel");
        let path = one_step_means(&params.series_params(i), s, c).map_err(unusable)?;
        per_series_metrics.push(compute_metrics(s, &path)?);
        pairs.extend(
            s.values[path.start..]
                .iter()
                .zip(&path.means)
                .map(|(&y, &m)| (T::from_u64(y).expect("count"), m)),
        );
        mean_paths.push(path);
    }
    let metrics = metrics_from_pairs(pairs)?;
    Ok(MultiParFit {
        labels: kept_labels,
        params,
        per_series_rho: per_rho,
        iterations,
        converged,
        projected,
        failure,
        excluded,
        mean_paths,
        per_series_metrics,
        metrics,
        history,
    })
}

fn single_series<T: Scalar>(
    series: &CountSeries,
    covariates: &CovariatePanel<T>,
    config: &HybridConfig<T>,
) -> Result<MultiParFit<T>> {
    let fit = fit_par_hybrid(series, covariates, 1, config)?;
    let rho = fit.params.rho[0];
    let params = MultiParParams {
        rho,
        delta: fit.params.delta.clone(),
        delta0_by_series: vec![fit.params.delta0],
    };
    Ok(MultiParFit {
        labels: vec![series.label.clone()],
        params,
        per_series_rho: vec![rho],
        iterations: fit.iterations,
        converged: fit.converged,
        projected: fit.projected,
        failure: fit.failure,
        excluded: Vec::new(),
        per_series_metrics: vec![fit.metrics],
        metrics: fit.metrics,
        mean_paths: vec![fit.mean_path],
        history: fit.history,
    })
}
