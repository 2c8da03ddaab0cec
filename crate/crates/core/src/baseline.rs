//! Filter-likelihood comparator: maximum likelihood on the one-step negative
//! binomial predictive obtained from a conjugate gamma prior on the mean.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{ParError, Result};
use crate::glm::fit_poisson_log_link;
use crate::hybrid::{min_series_len, one_step_means};
use crate::metrics::{compute_metrics, FitMetrics};
use crate::model::{dynamic_mean, CountSeries, CovariatePanel, MeanPath, ParParams};
use crate::rng::{derive_seed, rng_from_seed};

/// Lower and upper margin on each autoregressive coefficient.
pub const RHO_MARGIN: f64 = 1e-6;
/// An optimum with `sum(rho)` this close to 1 sits on the stationarity bound.
pub const BOUND_SLACK: f64 = 1e-4;
const LOG_KAPPA_MIN: f64 = -9.21;
const LOG_KAPPA_MAX: f64 = 23.03;

/// Gamma prior on the conditional mean, `Gamma(shape, rate)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    pub shape: f64,
    pub rate: f64,
}

impl FilterState {
    /// Prior with mean `mean` and variance `mean^2 / dispersion`.
    pub fn conjugate(mean: f64, dispersion: f64) -> Result<Self> {
        if !(mean > 0.0 && mean.is_finite() && dispersion > 0.0 && dispersion.is_finite()) {
            return Err(ParError::InvalidParams(format!(
                "gamma prior needs positive finite mean and dispersion, got {mean} and {dispersion}"
            )));
        }
        Ok(Self {
            shape: dispersion,
            rate: dispersion / mean,
        })
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    /// Log of the negative binomial predictive pmf at `y`.
    pub fn predictive_log_pmf(&self, y: u64) -> f64 {
        negbin_log_pmf(y, self.mean(), self.shape)
    }
}

/// `log NB(y; mean m, size kappa)`, variance `m + m^2 / kappa`.
pub fn negbin_log_pmf(y: u64, m: f64, kappa: f64) -> f64 {
    let yf = y as f64;
    ln_gamma_ratio(yf, kappa) - ln_gamma(yf + 1.0) + nb_kernel(yf, m, kappa)
}

/// `ln Gamma(y + kappa) - ln Gamma(kappa)`.
fn ln_gamma_ratio(y: f64, kappa: f64) -> f64 {
    if y == 0.0 {
        0.0
    } else if y <= 32.0 {
        (0..y as u64).map(|j| (kappa + j as f64).ln()).sum()
    } else {
        ln_gamma(y + kappa) - ln_gamma(kappa)
    }
}

/// `kappa ln(kappa / (kappa + m)) + y ln(m / (kappa + m))`.
fn nb_kernel(y: f64, m: f64, kappa: f64) -> f64 {
    let r = m / kappa;
    let tail = if y == 0.0 { 0.0 } else { y * (m.ln() - (kappa + m).ln()) };
    -kappa * r.ln_1p() + tail
}

/// Sum over `t = p..T` of the one-step negative binomial log predictive.
///
/// Returns negative infinity when any term is not finite.
pub fn negbin_predictive_loglik(
    params: &ParParams<f64>,
    dispersion: f64,
    series: &CountSeries,
    covariates: &CovariatePanel<f64>,
) -> Result<f64> {
    if !params.is_stationary() {
        return Err(ParError::NonStationary { sum: params.rho_sum() });
    }
    if !(dispersion > 0.0) {
        return Err(ParError::InvalidParams(format!(
            "dispersion must be positive, got {dispersion}"
        )));
    }
    if covariates.rows() != series.len() {
        return Err(ParError::Dimension(format!(
            "{} covariate rows for {} counts",
            covariates.rows(),
            series.len()
        )));
    }
    Ok(loglik_unchecked(params, dispersion, series, covariates))
}

fn loglik_unchecked(
    params: &ParParams<f64>,
    kappa: f64,
    series: &CountSeries,
    covariates: &CovariatePanel<f64>,
) -> f64 {
    let p = params.order();
    let y = &series.values;
    let mut lags = vec![0.0; p];
    let mut total = 0.0;
    for t in p..y.len() {
        for (i, l) in lags.iter_mut().enumerate() {
            *l = y[t - 1 - i] as f64;
        }
        let m = match dynamic_mean(params, &lags, covariates.row(t)) {
            Ok(m) if m > 0.0 => m,
            _ => return f64::NEG_INFINITY,
        };
        total += negbin_log_pmf(y[t], m, kappa);
        if !total.is_finite() {
            return f64::NEG_INFINITY;
        }
    }
    total
}

#[derive(Clone, Debug)]
pub struct BaselineConfig {
    pub starts: usize,
    /// Objective evaluations allowed per start.
    pub max_evals: usize,
    /// Stop once the simplex objective spread falls below this.
    pub tol: f64,
    pub seed: u64,
    /// First start, typically a hybrid fit of the same data.
    pub warm_start: Option<ParParams<f64>>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            starts: 5,
            max_evals: 2000,
            tol: 1e-8,
            seed: 0,
            warm_start: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BaselineFit {
    pub params: ParParams<f64>,
    #[serde(deserialize_with = "crate::io::nan_if_null")]
    pub dispersion: f64,
    #[serde(deserialize_with = "crate::io::nan_if_null")]
    pub loglik: f64,
    /// Objective evaluations across all starts.
    pub optimizer_evals: usize,
    pub converged: bool,
    pub failure: Option<String>,
    pub mean_path: MeanPath<f64>,
    pub metrics: FitMetrics<f64>,
}

/// Unconstrained coordinates `(u_1..u_p, delta0, delta..., ln kappa)`.
///
/// `rho_i = eps + (1 - (p + 1) eps) exp(u_i) / (1 + sum_j exp(u_j))`, which for
/// `p = 1` is the logistic map onto `[eps, 1 - eps]`.
#[derive(Clone, Copy, Debug)]
pub struct Reparam {
    pub p: usize,
    pub k: usize,
}

impl Reparam {
    pub fn dim(&self) -> usize {
        self.p + self.k + 2
    }

    pub fn encode(&self, params: &ParParams<f64>, dispersion: f64) -> Vec<f64> {
        let scale = 1.0 - (self.p as f64 + 1.0) * RHO_MARGIN;
        let s: Vec<f64> = params
            .rho
            .iter()
            .map(|&r| ((r - RHO_MARGIN) / scale).clamp(1e-12, 1.0))
            .collect();
        let s0 = (1.0 - s.iter().sum::<f64>()).max(1e-12);
        let mut theta: Vec<f64> = s.iter().map(|si| (si / s0).ln()).collect();
        theta.push(params.delta0);
        theta.extend_from_slice(&params.delta);
        theta.push(dispersion.ln());
        theta
    }

    pub fn decode(&self, theta: &[f64]) -> Option<(ParParams<f64>, f64)> {
        let p = self.p;
        let u = &theta[..p];
        let top = u.iter().copied().fold(0.0_f64, f64::max);
        let e: Vec<f64> = u.iter().map(|&v| (v - top).exp()).collect();
        let denom = (-top).exp() + e.iter().sum::<f64>();
        let scale = 1.0 - (p as f64 + 1.0) * RHO_MARGIN;
        let rho: Vec<f64> = e.iter().map(|ei| RHO_MARGIN + scale * ei / denom).collect();
        let delta0 = theta[p];
        let delta = theta[p + 1..p + 1 + self.k].to_vec();
        let kappa = theta[p + 1 + self.k].clamp(LOG_KAPPA_MIN, LOG_KAPPA_MAX).exp();
        ParParams::estimated(rho, delta0, delta)
            .ok()
            .map(|params| (params, kappa))
    }
}

struct Simplex {
    best: Vec<f64>,
    value: f64,
    evals: usize,
    met_tol: bool,
}

/// Nelder-Mead minimization with standard coefficients.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, start: &[f64], steps: &[f64], max_evals: usize, tol: f64) -> Simplex {
    let n = start.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut pts: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut x = start.to_vec();
        x[i] += steps[i];
        pts.push(x);
    }
    let mut vals: Vec<f64> = pts.iter().map(|x| eval(x)).collect();
    let mut evals = n + 1;
    let mut met_tol = false;
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        if vals[0].is_finite() && vals[n] - vals[0] <= tol {
            met_tol = true;
            break;
        }
        if evals >= max_evals {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| pts[..n].iter().map(|x| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |c: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + c * (pts[n][j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = eval(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = eval(&xe);
            evals += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(-0.5);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = eval(&xc);
            (xc, fc)
        };
        evals += 1;
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let x: Vec<f64> = (0..n).map(|j| pts[0][j] + 0.5 * (pts[i][j] - pts[0][j])).collect();
            vals[i] = eval(&x);
            pts[i] = x;
        }
        evals += n;
    }
    Simplex {
        best: pts.swap_remove(0),
        value: vals[0],
        evals,
        met_tol,
    }
}

/// Poisson regression of the usable counts on the covariates, `rho = 0.3`
/// spread evenly across lags, and a moment estimate of the dispersion.
fn default_start(series: &CountSeries, covariates: &CovariatePanel<f64>, p: usize) -> Result<ParParams<f64>> {
    let y: Vec<f64> = series.as_reals();
    let design = covariates.matrix().with_intercept().slice_rows(p..y.len());
    let glm = fit_poisson_log_link(&y[p..], &design)?;
    ParParams::estimated(
        vec![0.3 / p as f64; p],
        glm.coefficients[0],
        glm.coefficients[1..].to_vec(),
    )
}

fn moment_dispersion(params: &ParParams<f64>, series: &CountSeries, covariates: &CovariatePanel<f64>) -> f64 {
    let Ok(path) = one_step_means(params, series, covariates) else {
        return 100.0;
    };
    let (mut excess, mut sq) = (0.0, 0.0);
    for (t, &m) in path.means.iter().enumerate() {
        let e = series.values[path.start + t] as f64 - m;
        excess += e * e - m;
        sq += m * m;
    }
    if excess > 0.0 {
        (sq / excess).clamp(0.1, 1e6)
    } else {
        1e6
    }
}

/// Maximizes the negative binomial predictive likelihood over
/// `(rho, delta0, delta, kappa)` from `config.starts` simplex searches.
pub fn fit_par_filter_mle(
    series: &CountSeries,
    covariates: &CovariatePanel<f64>,
    p: usize,
    config: &BaselineConfig,
) -> Result<BaselineFit> {
    if p == 0 {
        return Err(ParError::InvalidParams("lag order must be at least 1".into()));
    }
    if covariates.rows() != series.len() {
        return Err(ParError::Dimension(format!(
            "{} covariate rows for {} counts",
            covariates.rows(),
            series.len()
        )));
    }
    let k = covariates.k();
    let min_len = min_series_len(p, k);
    if series.len() < min_len {
        return Err(ParError::Degenerate(format!(
            "series of length {} is too short for p = {p}, k = {k} (need {min_len})",
            series.len()
        )));
    }
    if config.starts == 0 {
        return Err(ParError::InvalidParams(
            "at least one optimizer start is required".into(),
        ));
    }
    if let Some(w) = &config.warm_start {
        if w.order() != p || w.delta.len() != k {
            return Err(ParError::Dimension("warm start does not match p and k".into()));
        }
    }
    let map = Reparam { p, k };
    let first = match &config.warm_start {
        Some(w) => w.clone(),
        None => default_start(series, covariates, p)?,
    };
    let kappa0 = moment_dispersion(&first, series, covariates);
    let origin = map.encode(&first, kappa0);

    let objective = |theta: &[f64]| match map.decode(theta) {
        Some((params, kappa)) => -loglik_unchecked(&params, kappa, series, covariates),
        None => f64::INFINITY,
    };
    let mut steps = vec![0.5; p];
    steps.push(0.1);
    steps.extend(std::iter::repeat_n(0.1, k));
    steps.push(1.0);

    let mut rng = rng_from_seed(derive_seed(config.seed, 0));
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut total_evals = 0;
    let mut best: Option<Simplex> = None;
    let mut any_met = false;
    for s in 0..config.starts {
        let start: Vec<f64> = if s == 0 {
            origin.clone()
        } else {
            origin
                .iter()
                .zip(&steps)
                .map(|(&v, &h)| v + h * unit.sample(&mut rng))
                .collect()
        };
        let run = nelder_mead(&objective, &start, &steps, config.max_evals, config.tol);
        total_evals += run.evals;
        if !run.value.is_finite() {
            continue;
        }
        any_met |= run.met_tol;
        if best.as_ref().is_none_or(|b| run.value < b.value) {
            best = Some(run);
        }
    }
    let Some(run) = best else {
        return Err(ParError::Estimation(
            "negative binomial likelihood is not finite at any optimizer start".into(),
        ));
    };
    let (params, dispersion) = map
        .decode(&run.best)
        .ok_or_else(|| ParError::Estimation("optimum outside the stationary region".into()))?;
    let on_bound = params.rho_sum() > 1.0 - BOUND_SLACK;
    let failure = if !any_met {
        Some(format!(
            "no start reached tolerance within {} evaluations",
            config.max_evals
        ))
    } else if on_bound {
        Some("optimum on the stationarity bound".into())
    } else {
        None
    };
    let mean_path = one_step_means(&params, series, covariates)?;
    let metrics = compute_metrics(series, &mean_path)?;
    Ok(BaselineFit {
        loglik: -run.value,
        params,
        dispersion,
        optimizer_evals: total_evals,
        converged: failure.is_none(),
        failure,
        mean_path,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{simulate_with_law, CovariateLaw};
    use proptest::prelude::*;
    use statrs::distribution::{Discrete, NegativeBinomial, Poisson};

    #[test]
    fn zero_count_closed_form() {
        assert!((negbin_log_pmf(0, 1.0, 1.0) + std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn matches_reference_pmf() {
        for &(m, kappa) in &[(1.0, 1.0), (7.5, 0.3), (100.0, 20.0), (3000.0, 4.0), (50.0, 1e4)] {
            let nb = NegativeBinomial::new(kappa, kappa / (kappa + m)).unwrap();
            for y in [0u64, 1, 2, 5, 31, 32, 33, 90, 250, 4000] {
                let ours = negbin_log_pmf(y, m, kappa);
                let theirs = nb.ln_pmf(y);
                assert!(
                    (ours - theirs).abs() < 1e-8 * theirs.abs().max(1.0),
                    "y={y} m={m} k={kappa}: {ours} vs {theirs}"
                );
            }
        }
    }

    #[test]
    fn large_dispersion_is_poisson() {
        let params = ParParams::new(vec![0.4], 100f64.ln(), vec![0.3]).unwrap();
        let sim = simulate_with_law(&params, None, CovariateLaw::Normal, 101, 3).unwrap();
        let nb = negbin_predictive_loglik(&params, 1e8, &sim.series, &sim.covariates).unwrap();
        let means = one_step_means(&params, &sim.series, &sim.covariates).unwrap();
        let pois: f64 = means
            .means
            .iter()
            .enumerate()
            .map(|(i, &m)| Poisson::new(m).unwrap().ln_pmf(sim.series.values[means.start + i]))
            .sum();
        assert_eq!(means.len(), 100);
        assert!((nb - pois).abs() < 1e-3, "{nb} vs {pois}");
    }

    #[test]
    fn predictive_moments() {
        let state = FilterState::conjugate(12.0, 3.0).unwrap();
        assert!((state.mean() - 12.0).abs() < 1e-12);
        assert!((state.variance() - 48.0).abs() < 1e-12);
        let (mut s1, mut s2, mut mass) = (0.0, 0.0, 0.0);
        for y in 0..2000u64 {
            let pr = state.predictive_log_pmf(y).exp();
            mass += pr;
            s1 += y as f64 * pr;
            s2 += (y * y) as f64 * pr;
        }
        assert!((mass - 1.0).abs() < 1e-10);
        assert!((s1 - 12.0).abs() < 1e-8);
        assert!((s2 - s1 * s1 - (12.0 + 144.0 / 3.0)).abs() < 1e-6);
        assert!(FilterState::conjugate(0.0, 1.0).is_err());
    }

    #[test]
    fn loglik_rejects_bad_inputs() {
        let params = ParParams::new(vec![0.4], 3.0, vec![0.3]).unwrap();
        let sim = simulate_with_law(&params, None, CovariateLaw::Normal, 50, 1).unwrap();
        assert!(negbin_predictive_loglik(&params, 0.0, &sim.series, &sim.covariates).is_err());
        let bad = ParParams::estimated(vec![-0.5], 3.0, vec![0.3]).unwrap();
        assert!(negbin_predictive_loglik(&bad, 1.0, &sim.series, &sim.covariates).is_err());
        let short = sim.covariates.slice_rows(0..40);
        assert!(negbin_predictive_loglik(&params, 1.0, &sim.series, &short).is_err());
    }

    #[test]
    fn likelihood_peaks_near_truth() {
        let params = ParParams::new(vec![0.5], 100f64.ln(), vec![0.5]).unwrap();
        let mut wins = 0;
        for r in 0..20 {
            let sim = simulate_with_law(&params, None, CovariateLaw::Normal, 500, r).unwrap();
            let at = |rho: f64| {
                let p = ParParams::new(vec![rho], params.delta0, params.delta.clone()).unwrap();
                negbin_predictive_loglik(&p, 1e6, &sim.series, &sim.covariates).unwrap()
            };
            let truth = at(0.5);
            if truth > at(0.3) && truth > at(0.7) {
                wins += 1;
            }
        }
        assert!(wins >= 19, "{wins}");
    }

    #[test]
    fn fit_reports_its_own_loglik_and_never_regresses() {
        let params = ParParams::new(vec![0.6], 100f64.ln(), vec![0.5]).unwrap();
        let sim = simulate_with_law(&params, None, CovariateLaw::Normal, 200, 11).unwrap();
        let config = BaselineConfig {
            warm_start: Some(params.clone()),
            seed: 4,
            ..BaselineConfig::default()
        };
        let fit = fit_par_filter_mle(&sim.series, &sim.covariates, 1, &config).unwrap();
        let again = negbin_predictive_loglik(&fit.params, fit.dispersion, &sim.series, &sim.covariates).unwrap();
        assert_eq!(fit.loglik, again);
        let map = Reparam { p: 1, k: 1 };
        let kappa0 = moment_dispersion(&params, &sim.series, &sim.covariates);
        let (p0, k0) = map.decode(&map.encode(&params, kappa0)).unwrap();
        let start = negbin_predictive_loglik(&p0, k0, &sim.series, &sim.covariates).unwrap();
        assert!(fit.loglik >= start);
        assert!(fit.converged);
        assert!((fit.params.rho[0] - 0.6).abs() < 0.1);
        assert!(fit.optimizer_evals > 0);
    }

    #[test]
    fn deterministic_given_seed() {
        let params = ParParams::new(vec![0.2], 100f64.ln(), vec![0.25]).unwrap();
        let sim = simulate_with_law(&params, None, CovariateLaw::Uniform, 100, 2).unwrap();
        let config = BaselineConfig {
            seed: 9,
            ..BaselineConfig::default()
        };
        let a = fit_par_filter_mle(&sim.series, &sim.covariates, 1, &config).unwrap();
        let b = fit_par_filter_mle(&sim.series, &sim.covariates, 1, &config).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.loglik, b.loglik);
    }

    #[test]
    fn second_order_fit_runs() {
        let params = ParParams::new(vec![0.3, 0.2], 100f64.ln(), vec![0.4]).unwrap();
        let sim = simulate_with_law(&params, None, CovariateLaw::Normal, 300, 8).unwrap();
        let fit = fit_par_filter_mle(&sim.series, &sim.covariates, 2, &BaselineConfig::default()).unwrap();
        assert_eq!(fit.params.order(), 2);
        assert!(fit.params.rho_sum() < 1.0);
        assert!((fit.params.rho_sum() - 0.5).abs() < 0.15, "{:?}", fit.params.rho);
    }

    #[test]
    fn rejects_bad_requests() {
        let params = ParParams::new(vec![0.2], 3.0, vec![0.25]).unwrap();
        let sim = simulate_with_law(&params, None, CovariateLaw::Normal, 15, 2).unwrap();
        let config = BaselineConfig::default();
        assert!(matches!(
            fit_par_filter_mle(&sim.series, &sim.covariates, 1, &config),
            Err(ParError::Degenerate(_))
        ));
        let sim = simulate_with_law(&params, None, CovariateLaw::Normal, 60, 2).unwrap();
        assert!(fit_par_filter_mle(&sim.series, &sim.covariates, 0, &config).is_err());
        let wrong = BaselineConfig {
            warm_start: Some(ParParams::new(vec![0.2, 0.1], 3.0, vec![0.25]).unwrap()),
            ..BaselineConfig::default()
        };
        assert!(matches!(
            fit_par_filter_mle(&sim.series, &sim.covariates, 1, &wrong),
            Err(ParError::Dimension(_))
        ));
    }

    proptest! {
        #[test]
        fn reparameterization_round_trips(
            rho in 1e-3f64..0.99,
            delta0 in -2.0f64..8.0,
            delta in -1.0f64..1.0,
            kappa in 0.01f64..1e6,
        ) {
            let map = Reparam { p: 1, k: 1 };
            let params = ParParams::new(vec![rho], delta0, vec![delta]).unwrap();
            let theta = map.encode(&params, kappa);
            prop_assert_eq!(theta.len(), map.dim());
            let (back, k) = map.decode(&theta).unwrap();
            prop_assert!((back.rho[0] - rho).abs() < 1e-8);
            prop_assert!((back.delta0 - delta0).abs() < 1e-12);
            prop_assert!((back.delta[0] - delta).abs() < 1e-12);
            prop_assert!((k - kappa).abs() < 1e-8 * kappa);
        }

        #[test]
        fn simplex_map_round_trips(a in 0.01f64..0.5, b in 0.01f64..0.45) {
            let map = Reparam { p: 2, k: 0 };
            let params = ParParams::new(vec![a, b], 1.0, vec![]).unwrap();
            let (back, _) = map.decode(&map.encode(&params, 5.0)).unwrap();
            prop_assert!((back.rho[0] - a).abs() < 1e-8);
            prop_assert!((back.rho[1] - b).abs() < 1e-8);
        }

        #[test]
        fn decoded_rho_is_stationary(u in prop::collection::vec(-40.0f64..40.0, 1..4)) {
            let map = Reparam { p: u.len(), k: 0 };
            let mut theta = u.clone();
            theta.push(0.0);
            theta.push(0.0);
            let (params, _) = map.decode(&theta).unwrap();
            prop_assert!(params.rho.iter().all(|&r| r >= RHO_MARGIN * 0.999));
            prop_assert!(params.rho_sum() <= 1.0 - RHO_MARGIN + 1e-12);
            prop_assert!(params.rho_sum() < 1.0);
        }
    }
}
