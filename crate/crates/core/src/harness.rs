//! Monte Carlo scenario runner: simulate, fit, aggregate.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{fit_par_filter_mle, BaselineConfig};
use crate::error::{ParError, Result};
use crate::hybrid::{fit_par_hybrid, HybridConfig};
use crate::metrics::{mean_and_sd, relative_bias};
use crate::model::{CovariatePanel, MultiParParams, ParParams, StructuralChangeSpec};
use crate::multi::{fit_multi_par, MultiConfig};
use crate::rng::{derive_seed, rng_from_seed};
use crate::simulate::{
    draw_reversion_intercepts, simulate_multi_par, simulate_with_law, CovariateLaw, DEFAULT_BURN_IN,
};

pub const DEFAULT_REPLICATES: usize = 200;
pub const DEFAULT_REVERSION_LEVEL: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Hybrid,
    Baseline,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Hybrid => "hybrid",
            Self::Baseline => "baseline",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorSet {
    Hybrid,
    Baseline,
    Both,
}

impl EstimatorSet {
    pub fn members(self) -> Vec<Estimator> {
        match self {
            Self::Hybrid => vec![Estimator::Hybrid],
            Self::Baseline => vec![Estimator::Baseline],
            Self::Both => vec![Estimator::Hybrid, Estimator::Baseline],
        }
    }
}

impl FromStr for EstimatorSet {
    type Err = ParError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hybrid" => Ok(Self::Hybrid),
            "baseline" => Ok(Self::Baseline),
            "both" => Ok(Self::Both),
            other => Err(ParError::InvalidParams(format!(
                "unknown estimator set `{other}` (expected hybrid, baseline or both)"
            ))),
        }
    }
}

impl fmt::Display for EstimatorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Hybrid => "hybrid",
            Self::Baseline => "baseline",
            Self::Both => "both",
        })
    }
}

/// Panel design: `n_series` series with reversion levels `Normal(level, reversion_sd)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiBlock {
    pub n_series: usize,
    pub reversion_sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub rho: f64,
    pub delta: f64,
    pub reversion_level: f64,
    pub covariate_law: CovariateLaw,
    pub t_len: usize,
    pub replicates: usize,
    pub estimators: EstimatorSet,
    pub change: Option<StructuralChangeSpec>,
    pub multi: Option<MultiBlock>,
    /// Skips the check against the published simulation grids.
    pub custom: bool,
}

impl ScenarioSpec {
    /// Single-series PAR(1) scenario at reversion level 100 with 200 replicates.
    pub fn single(rho: f64, delta: f64, covariate_law: CovariateLaw, t_len: usize, estimators: EstimatorSet) -> Self {
        Self {
            rho,
            delta,
            reversion_level: DEFAULT_REVERSION_LEVEL,
            covariate_law,
            t_len,
            replicates: DEFAULT_REPLICATES,
            estimators,
            change: None,
            multi: None,
            custom: false,
        }
    }

    /// Temporary change from `rho` to `rho_during` over the middle `fraction`,
    /// Normal covariate with effect 0.25.
    pub fn structural_change(rho: f64, rho_during: f64, fraction: f64, t_len: usize) -> Self {
        Self {
            change: Some(StructuralChangeSpec {
                rho_during: vec![rho_during],
                window_fraction: fraction,
            }),
            ..Self::single(rho, 0.25, CovariateLaw::Normal, t_len, EstimatorSet::Hybrid)
        }
    }

    /// Panel with shared `rho = 0.6`, `delta = 0.5`, Normal covariate.
    pub fn multi(n_series: usize, t_len: usize, reversion_sd: f64) -> Self {
        Self {
            multi: Some(MultiBlock { n_series, reversion_sd }),
            ..Self::single(0.6, 0.5, CovariateLaw::Normal, t_len, EstimatorSet::Hybrid)
        }
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ParError::InvalidParams(msg));
        if self.replicates == 0 {
            return bad("at least one replicate is required".into());
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho = {} outside [0, 1)", self.rho));
        }
        if !(self.reversion_level > 0.0 && self.reversion_level.is_finite()) {
            return bad(format!("reversion level {} must be positive", self.reversion_level));
        }
        if !self.delta.is_finite() {
            return bad("covariate effect must be finite".into());
        }
        if let Some(c) = &self.change {
            StructuralChangeSpec::new(c.rho_during.clone(), c.window_fraction)?;
            if c.rho_during.len() != 1 {
                return bad("scenarios simulate PAR(1); the change must carry one coefficient".into());
            }
        }
        if let Some(m) = &self.multi {
            if m.n_series == 0 || !(m.reversion_sd >= 0.0) {
                return bad("panel needs at least one series and a nonnegative reversion sd".into());
            }
            if self.estimators != EstimatorSet::Hybrid {
                return bad("panel scenarios support the hybrid estimator only".into());
            }
            if self.change.is_some() {
                return bad("panel scenarios do not take a structural change".into());
            }
        }
        if self.t_len < 20 {
            return bad(format!("series length {} below 20", self.t_len));
        }
        if self.custom {
            return Ok(());
        }
        let in_set = |v: f64, set: &[f64]| set.iter().any(|s| (s - v).abs() < 1e-12);
        let level_ok = in_set(self.reversion_level, &[DEFAULT_REVERSION_LEVEL]);
        let ok = match (&self.change, &self.multi) {
            (None, None) => {
                in_set(self.rho, &[0.2, 0.6, 0.95])
                    && in_set(self.delta, &[0.25, 0.5])
                    && [100, 200, 500].contains(&self.t_len)
            }
            (Some(c), None) => {
                matches!(
                    (self.rho, c.rho_during[0]),
                    (a, b) if (in_set(a, &[0.2]) && in_set(b, &[0.6, 0.95]))
                        || (in_set(a, &[0.6, 0.8]) && in_set(b, &[0.95]))
                ) && in_set(c.window_fraction, &[0.1, 0.25])
                    && [100, 300, 500].contains(&self.t_len)
                    && in_set(self.delta, &[0.25])
                    && self.covariate_law == CovariateLaw::Normal
            }
            (None, Some(m)) => {
                in_set(self.rho, &[0.6])
                    && in_set(self.delta, &[0.5])
                    && self.covariate_law == CovariateLaw::Normal
                    && [10, 20, 50].contains(&m.n_series)
                    && [50, 100].contains(&self.t_len)
                    && in_set(m.reversion_sd, &[5.0, 10.0, 20.0])
            }
            (Some(_), Some(_)) => false,
        };
        if ok && level_ok {
            Ok(())
        } else {
            bad("scenario is outside the published simulation grids; set `custom` to run it".into())
        }
    }
}

/// One estimator's result on one replicate. Failed fits carry empty estimates
/// and NaN metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub seed: u64,
    pub estimator: Estimator,
    pub converged: bool,
    pub failure: Option<String>,
    pub iterations: usize,
    pub rho: Vec<f64>,
    /// One intercept, or one per series for panels.
    pub delta0: Vec<f64>,
    pub delta: Vec<f64>,
    #[serde(deserialize_with = "crate::io::nan_if_null")]
    pub mape: f64,
    #[serde(deserialize_with = "crate::io::nan_if_null")]
    pub rmse: f64,
}

impl ReplicateRecord {
    fn failed(replicate: usize, seed: u64, estimator: Estimator, err: &ParError) -> Self {
        Self {
            replicate,
            seed,
            estimator,
            converged: false,
            failure: Some(err.to_string()),
            iterations: 0,
            rho: Vec::new(),
            delta0: Vec::new(),
            delta: Vec::new(),
            mape: f64::NAN,
            rmse: f64::NAN,
        }
    }
}

/// Mean, standard error (SD across replicates) and relative bias of one parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    #[serde(deserialize_with = "crate::io::nan_if_null")]
    pub mean: f64,
    #[serde(deserialize_with = "crate::io::nan_if_null")]
    pub se: f64,
    #[serde(deserialize_with = "crate::io::nan_if_null")]
    pub relative_bias: f64,
}

impl ParamSummary {
    pub fn of(estimates: &[f64], truth: f64) -> Self {
        let (mean, se) = mean_and_sd(estimates);
        Self {
            mean,
            se,
            relative_bias: relative_bias(estimates, truth).unwrap_or(f64::NAN),
        }
    }
}

/// Aggregates over the convergent replicates of one estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub rho: ParamSummary,
    pub delta: ParamSummary,
    #[serde(deserialize_with = "crate::io::nan_if_null")]
    pub mape: f64,
    #[serde(deserialize_with = "crate::io::nan_if_null")]
    pub rmse: f64,
    /// Percent of replicates that converged.
    pub convergence_rate: f64,
    pub converged: usize,
    pub replicates: usize,
    #[serde(deserialize_with = "crate::io::nan_if_null")]
    pub mean_iterations: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub spec: ScenarioSpec,
    pub master_seed: u64,
    pub summaries: Vec<EstimatorSummary>,
    pub records: Vec<ReplicateRecord>,
}

impl ScenarioReport {
    pub fn summary(&self, estimator: Estimator) -> Option<&EstimatorSummary> {
        self.summaries.iter().find(|s| s.estimator == estimator)
    }
}

/// Aggregates `records` of `estimator` against the true `rho` and `delta`.
pub fn summarize(records: &[ReplicateRecord], estimator: Estimator, rho: f64, delta: f64) -> EstimatorSummary {
    let mine: Vec<&ReplicateRecord> = records.iter().filter(|r| r.estimator == estimator).collect();
    let ok: Vec<&ReplicateRecord> = mine.iter().copied().filter(|r| r.converged).collect();
    let col = |f: &dyn Fn(&ReplicateRecord) -> f64| -> Vec<f64> { ok.iter().map(|r| f(r)).collect() };
    let mean = |v: Vec<f64>| mean_and_sd(&v).0;
    let n = mine.len();
    EstimatorSummary {
        estimator,
        rho: ParamSummary::of(&col(&|r| r.rho[0]), rho),
        delta: ParamSummary::of(&col(&|r| r.delta[0]), delta),
        mape: mean(col(&|r| r.mape)),
        rmse: mean(col(&|r| r.rmse)),
        convergence_rate: if n == 0 {
            f64::NAN
        } else {
            100.0 * ok.len() as f64 / n as f64
        },
        converged: ok.len(),
        replicates: n,
        mean_iterations: mean(col(&|r| r.iterations as f64)),
    }
}

/// Runs every replicate of `spec` (in parallel) and aggregates per estimator.
///
/// Replicate `r` uses seed `derive_seed(master_seed, r)`, so its records do not
/// depend on the replicate count or on scheduling.
pub fn run_scenario(spec: &ScenarioSpec, master_seed: u64) -> Result<ScenarioReport> {
    spec.validate()?;
    let records: Vec<ReplicateRecord> = (0..spec.replicates)
        .into_par_iter()
        .map(|r| run_replicate(spec, r, derive_seed(master_seed, r as u64)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let summaries = spec
        .estimators
        .members()
        .into_iter()
        .map(|e| summarize(&records, e, spec.rho, spec.delta))
        .collect();
    Ok(ScenarioReport {
        spec: spec.clone(),
        master_seed,
        summaries,
        records,
    })
}

/// Simulates and fits one replicate. Only simulation errors propagate; estimator
/// errors become non-convergent records.
pub fn run_replicate(spec: &ScenarioSpec, replicate: usize, seed: u64) -> Result<Vec<ReplicateRecord>> {
    match &spec.multi {
        Some(block) => run_panel_replicate(spec, block, replicate, seed).map(|r| vec![r]),
        None => run_single_replicate(spec, replicate, seed),
    }
}

fn run_single_replicate(spec: &ScenarioSpec, replicate: usize, seed: u64) -> Result<Vec<ReplicateRecord>> {
    let params = ParParams::new(vec![spec.rho], spec.reversion_level.ln(), vec![spec.delta])?;
    let sim = simulate_with_law(
        &params,
        spec.change.as_ref(),
        spec.covariate_law,
        spec.t_len,
        derive_seed(seed, 0),
    )?;
    let hybrid = fit_par_hybrid(&sim.series, &sim.covariates, 1, &HybridConfig::default());
    let mut out = Vec::new();
    let members = spec.estimators.members();
    if members.contains(&Estimator::Hybrid) {
        out.push(match &hybrid {
            Ok(f) => ReplicateRecord {
                replicate,
                seed,
                estimator: Estimator::Hybrid,
                converged: f.converged,
                failure: f.failure.clone(),
                iterations: f.iterations,
                rho: f.params.rho.clone(),
                delta0: vec![f.params.delta0],
                delta: f.params.delta.clone(),
                mape: f.metrics.mape,
                rmse: f.metrics.rmse,
            },
            Err(e) => ReplicateRecord::failed(replicate, seed, Estimator::Hybrid, e),
        });
    }
    if members.contains(&Estimator::Baseline) {
        let config = BaselineConfig {
            seed: derive_seed(seed, 1),
            warm_start: hybrid.as_ref().ok().map(|f| f.params.clone()),
            ..BaselineConfig::default()
        };
        out.push(match fit_par_filter_mle(&sim.series, &sim.covariates, 1, &config) {
            Ok(f) => ReplicateRecord {
                replicate,
                seed,
                estimator: Estimator::Baseline,
                converged: f.converged,
                failure: f.failure,
                iterations: f.optimizer_evals,
                rho: f.params.rho,
                delta0: vec![f.params.delta0],
                delta: f.params.delta,
                mape: f.metrics.mape,
                rmse: f.metrics.rmse,
            },
            Err(e) => ReplicateRecord::failed(replicate, seed, Estimator::Baseline, &e),
        });
    }
    Ok(out)
}

fn run_panel_replicate(
    spec: &ScenarioSpec,
    block: &MultiBlock,
    replicate: usize,
    seed: u64,
) -> Result<ReplicateRecord> {
    let mut rng = rng_from_seed(derive_seed(seed, 0));
    let intercepts = draw_reversion_intercepts(block.n_series, spec.reversion_level, block.reversion_sd, &mut rng);
    let params = MultiParParams::new(spec.rho, vec![spec.delta], intercepts)?;
    let panels: Vec<CovariatePanel<f64>> = (0..block.n_series)
        .map(|_| spec.covariate_law.panel(spec.t_len + DEFAULT_BURN_IN, 1, &mut rng))
        .collect();
    let sims = simulate_multi_par(&params, &panels, spec.t_len, derive_seed(seed, 1), DEFAULT_BURN_IN)?;
    let series: Vec<_> = sims.iter().map(|s| s.series.clone()).collect();
    let covariates: Vec<_> = sims.iter().map(|s| s.covariates.clone()).collect();
    let config = MultiConfig {
        seed: derive_seed(seed, 2),
        ..MultiConfig::default()
    };
    Ok(match fit_multi_par(&series, &covariates, &config) {
        Ok(f) => ReplicateRecord {
            replicate,
            seed,
            estimator: Estimator::Hybrid,
            converged: f.converged,
            failure: f.failure,
            iterations: f.iterations,
            rho: vec![f.params.rho],
            delta0: f.params.delta0_by_series,
            delta: f.params.delta,
            mape: f.metrics.mape,
            rmse: f.metrics.rmse,
        },
        Err(e) => ReplicateRecord::failed(replicate, seed, Estimator::Hybrid, &e),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(rho: f64, estimators: EstimatorSet, reps: usize) -> ScenarioSpec {
        ScenarioSpec::single(rho, 0.5, CovariateLaw::Normal, 100, estimators).with_replicates(reps)
    }

    #[test]
    fn single_replicate_both_estimators_is_reproducible() {
        let spec = quick(0.2, EstimatorSet::Both, 1);
        let a = run_scenario(&spec, 42).unwrap();
        let b = run_scenario(&spec, 42).unwrap();
        assert_eq!(a.records.len(), 2);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn replicate_records_do_not_depend_on_count() {
        let small = run_scenario(&quick(0.6, EstimatorSet::Hybrid, 5), 3).unwrap();
        let large = run_scenario(&quick(0.6, EstimatorSet::Hybrid, 10), 3).unwrap();
        assert_eq!(small.records[..], large.records[..5]);
    }

    #[test]
    fn aggregates_recompute_from_records() {
        let rep = run_scenario(&quick(0.2, EstimatorSet::Hybrid, 12), 9).unwrap();
        let s = rep.summary(Estimator::Hybrid).unwrap();
        let rhos: Vec<f64> = rep.records.iter().filter(|r| r.converged).map(|r| r.rho[0]).collect();
        let (m, sd) = mean_and_sd(&rhos);
        assert!((s.rho.mean - m).abs() < 1e-12);
        assert!((s.rho.se - sd).abs() < 1e-12);
        assert!((0.0..=100.0).contains(&s.convergence_rate));
        assert_eq!(s.replicates, 12);
    }

    #[test]
    fn failures_are_recorded_not_raised() {
        let records = vec![
            ReplicateRecord::failed(0, 1, Estimator::Hybrid, &ParError::Estimation("x".into())),
            ReplicateRecord {
                replicate: 1,
                seed: 2,
                estimator: Estimator::Hybrid,
                converged: true,
                failure: None,
                iterations: 4,
                rho: vec![0.25],
                delta0: vec![4.6],
                delta: vec![0.5],
                mape: 8.0,
                rmse: 10.0,
            },
        ];
        let s = summarize(&records, Estimator::Hybrid, 0.2, 0.5);
        assert_eq!(s.convergence_rate, 50.0);
        assert_eq!(s.rho.mean, 0.25);
        assert!((s.rho.relative_bias - 25.0).abs() < 1e-9);
        assert_eq!(s.mape, 8.0);
    }

    #[test]
    fn grid_validation() {
        assert!(quick(0.2, EstimatorSet::Hybrid, 1).validate().is_ok());
        let off = ScenarioSpec::single(0.3, 0.5, CovariateLaw::Normal, 100, EstimatorSet::Hybrid);
        assert!(off.validate().is_err());
        assert!(ScenarioSpec { custom: true, ..off }.validate().is_ok());
        assert!(ScenarioSpec::structural_change(0.8, 0.95, 0.1, 300).validate().is_ok());
        assert!(ScenarioSpec::structural_change(0.6, 0.6, 0.1, 300).validate().is_err());
        assert!(ScenarioSpec::multi(20, 50, 5.0).validate().is_ok());
        let mut m = ScenarioSpec::multi(20, 50, 5.0);
        m.estimators = EstimatorSet::Both;
        assert!(m.validate().is_err());
        assert!(quick(0.2, EstimatorSet::Hybrid, 0).validate().is_err());
    }

    #[test]
    fn panel_scenario_runs() {
        let spec = ScenarioSpec::multi(10, 50, 5.0).with_replicates(2);
        let rep = run_scenario(&spec, 1).unwrap();
        assert_eq!(rep.records.len(), 2);
        assert!(rep.records.iter().all(|r| r.converged || r.failure.is_some()));
        assert!(rep
            .records
            .iter()
            .filter(|r| !r.rho.is_empty())
            .all(|r| r.delta0.len() == 10));
    }

    #[test]
    fn estimator_set_parses() {
        assert_eq!("Both".parse::<EstimatorSet>().unwrap(), EstimatorSet::Both);
        assert!("kalman".parse::<EstimatorSet>().is_err());
    }
}
