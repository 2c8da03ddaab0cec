//! Structured results written to `results.json` and their text rendering.
//!
//! `report` re-renders from `results.json`, so the text printed by a command
//! and by a later `report` on its directory are identical.

use std::fmt::Write as _;

use par_core::baseline::BaselineFit;
use par_core::harness::{EstimatorSummary, ScenarioReport};
use par_core::tables::{scenario_label, TableReport};
use par_core::{CovariateLaw, MultiParFit, ParFit, ParParams, StructuralChangeSpec};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub params: ParParams,
    pub change: Option<StructuralChangeSpec>,
    pub covariate_law: CovariateLaw,
    pub t_len: usize,
    pub mean_count: f64,
    pub max_count: u64,
    pub zeros: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitReport {
    pub label: String,
    pub p: usize,
    pub t_len: usize,
    pub covariates: Vec<String>,
    pub hybrid: Option<ParFit>,
    pub baseline: Option<BaselineFit>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultiReport {
    pub covariates: Vec<String>,
    pub fit: MultiParFit,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarketSummary {
    pub label: String,
    pub months: usize,
    pub first: String,
    pub last: String,
    pub mean_count: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IngestSummary {
    pub covariate: String,
    pub markets: Vec<MarketSummary>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "command", content = "results", rename_all = "kebab-case")]
pub enum RunResults {
    Simulate(SimulateSummary),
    Fit(FitReport),
    FitMulti(MultiReport),
    Experiment(ScenarioReport),
    RunTable(TableReport),
    Ingest(IngestSummary),
}

impl RunResults {
    pub fn render(&self) -> String {
        match self {
            Self::Simulate(s) => render_simulate(s),
            Self::Fit(f) => render_fit(f),
            Self::FitMulti(m) => render_multi(m),
            Self::Experiment(r) => render_experiment(r),
            Self::RunTable(t) => t.to_tsv(),
            Self::Ingest(i) => render_ingest(i),
        }
    }
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "NA".into()
    }
}

fn nums(v: &[f64]) -> String {
    if v.is_empty() {
        return "-".into();
    }
    v.iter().map(|&x| num(x)).collect::<Vec<_>>().join(",")
}

fn render_simulate(s: &SimulateSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "rho\t{}", nums(&s.params.rho));
    let _ = writeln!(out, "delta0\t{}", num(s.params.delta0));
    let _ = writeln!(out, "delta\t{}", nums(&s.params.delta));
    let _ = writeln!(out, "covariate_law\t{}", s.covariate_law);
    if let Some(c) = &s.change {
        let _ = writeln!(out, "change_rho\t{}", nums(&c.rho_during));
        let _ = writeln!(out, "change_fraction\t{}", num(c.window_fraction));
    }
    let _ = writeln!(out, "T\t{}", s.t_len);
    let _ = writeln!(out, "mean_count\t{}", num(s.mean_count));
    let _ = writeln!(out, "max_count\t{}", s.max_count);
    let _ = writeln!(out, "zeros\t{}", s.zeros);
    out
}

fn render_fit(f: &FitReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "series\t{}", f.label);
    let _ = writeln!(out, "T\t{}", f.t_len);
    let _ = writeln!(out, "p\t{}", f.p);
    let covs = if f.covariates.is_empty() {
        "-".to_string()
    } else {
        f.covariates.join(",")
    };
    let _ = writeln!(out, "covariates\t{covs}");
    if let Some(h) = &f.hybrid {
        out.push_str("\n[hybrid]\n");
        let _ = writeln!(out, "converged\t{}", h.converged);
        let _ = writeln!(out, "iterations\t{}", h.iterations);
        if let Some(why) = &h.failure {
            let _ = writeln!(out, "failure\t{why}");
        }
        let _ = writeln!(out, "projected\t{}", h.projected);
        let _ = writeln!(out, "rho\t{}", nums(&h.params.rho));
        let _ = writeln!(out, "delta0\t{}", num(h.params.delta0));
        let _ = writeln!(out, "delta0_star\t{}", num(h.delta0_star));
        let _ = writeln!(out, "delta\t{}", nums(&h.params.delta));
        let _ = writeln!(out, "MAPE\t{}", num(h.metrics.mape));
        let _ = writeln!(out, "rMSE\t{}", num(h.metrics.rmse));
        let _ = writeln!(out, "MAD\t{}", num(h.metrics.mad));
    }
    if let Some(b) = &f.baseline {
        out.push_str("\n[baseline]\n");
        let _ = writeln!(out, "converged\t{}", b.converged);
        let _ = writeln!(out, "evaluations\t{}", b.optimizer_evals);
        if let Some(why) = &b.failure {
            let _ = writeln!(out, "failure\t{why}");
        }
        let _ = writeln!(out, "rho\t{}", nums(&b.params.rho));
        let _ = writeln!(out, "delta0\t{}", num(b.params.delta0));
        let _ = writeln!(out, "delta\t{}", nums(&b.params.delta));
        let _ = writeln!(out, "dispersion\t{}", num(b.dispersion));
        let _ = writeln!(out, "loglik\t{}", num(b.loglik));
        let _ = writeln!(out, "MAPE\t{}", num(b.metrics.mape));
        let _ = writeln!(out, "rMSE\t{}", num(b.metrics.rmse));
        let _ = writeln!(out, "MAD\t{}", num(b.metrics.mad));
    }
    out
}

fn render_multi(m: &MultiReport) -> String {
    let f = &m.fit;
    let mut out = String::new();
    let _ = writeln!(out, "series\t{}", f.labels.len());
    let covs = if m.covariates.is_empty() {
        "-".to_string()
    } else {
        m.covariates.join(",")
    };
    let _ = writeln!(out, "covariates\t{covs}");
    let _ = writeln!(out, "converged\t{}", f.converged);
    let _ = writeln!(out, "iterations\t{}", f.iterations);
    if let Some(why) = &f.failure {
        let _ = writeln!(out, "failure\t{why}");
    }
    if !f.excluded.is_empty() {
        let _ = writeln!(out, "excluded\t{}", f.excluded.join(","));
    }
    let _ = writeln!(out, "shared_rho\t{}", num(f.params.rho));
    let _ = writeln!(out, "delta\t{}", nums(&f.params.delta));
    let _ = writeln!(out, "MAPE\t{}", num(f.metrics.mape));
    let _ = writeln!(out, "rMSE\t{}", num(f.metrics.rmse));
    let _ = writeln!(out, "MAD\t{}", num(f.metrics.mad));
    out.push_str("\nmarket\tintercept\tMAD\tMAPE\trMSE\n");
    for (i, label) in f.labels.iter().enumerate() {
        let met = &f.per_series_metrics[i];
        let _ = writeln!(
            out,
            "{label}\t{}\t{}\t{}\t{}",
            num(f.params.delta0_by_series[i]),
            num(met.mad),
            num(met.mape),
            num(met.rmse)
        );
    }
    out
}

fn summary_line(s: &EstimatorSummary) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}/{}\t{}",
        s.estimator,
        num(s.rho.mean),
        num(s.rho.se),
        num(s.rho.relative_bias),
        num(s.delta.mean),
        num(s.delta.se),
        num(s.delta.relative_bias),
        num(s.mape),
        num(s.rmse),
        num(s.convergence_rate),
        s.converged,
        s.replicates,
        num(s.mean_iterations),
    )
}

fn render_experiment(r: &ScenarioReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# scenario {}", scenario_label(&r.spec));
    let _ = writeln!(out, "# master_seed={} replicates={}", r.master_seed, r.spec.replicates);
    out.push_str(
        "estimator\trho\trho_se\trho_rb\tdelta\tdelta_se\tdelta_rb\tMAPE\trMSE\tconv_pct\tconverged\tmean_iter\n",
    );
    for s in &r.summaries {
        out.push_str(&summary_line(s));
        out.push('\n');
    }
    out
}

fn render_ingest(i: &IngestSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "covariate\t{}", i.covariate);
    out.push_str("market\tmonths\tfirst\tlast\tmean_count\n");
    for m in &i.markets {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            m.label,
            m.months,
            m.first,
            m.last,
            num(m.mean_count)
        );
    }
    for w in &i.warnings {
        let _ = writeln!(out, "warning\t{w}");
    }
    out
}
