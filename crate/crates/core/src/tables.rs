//! Published simulation tables: scenario grids, reference values, side-by-side reports.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ParError, Result};
use crate::harness::{
    run_scenario, Estimator, EstimatorSet, EstimatorSummary, ScenarioReport, ScenarioSpec, DEFAULT_REPLICATES,
};
use crate::rng::derive_seed_from_label;
use crate::simulate::CovariateLaw;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TableId {
    T2,
    T3,
    T4,
    T5,
    T6,
    T7,
    T8,
    T9,
    T10,
    T12,
    T13,
    T14,
}

impl TableId {
    pub const ALL: [TableId; 12] = [
        Self::T2,
        Self::T3,
        Self::T4,
        Self::T5,
        Self::T6,
        Self::T7,
        Self::T8,
        Self::T9,
        Self::T10,
        Self::T12,
        Self::T13,
        Self::T14,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Self::T2 => "Estimates for rho, standard error and relative bias, Normal covariate",
            Self::T3 => "Estimates for delta, standard error and relative bias, Normal covariate",
            Self::T4 => "Predictive ability and convergence rate, Normal covariate",
            Self::T5 => "Estimates for rho, standard error and relative bias, Uniform covariate",
            Self::T6 => "Estimates for delta, standard error and relative bias, Uniform covariate",
            Self::T7 => "Predictive ability and convergence rate, Uniform covariate",
            Self::T8 => "Estimates for rho, standard error and relative bias, Poisson covariate",
            Self::T9 => "Estimates for delta, standard error and relative bias, Poisson covariate",
            Self::T10 => "Predictive ability and convergence rate, Poisson covariate",
            Self::T12 => "Estimates of rho under temporary structural change",
            Self::T13 => "Predictive ability under temporary structural change",
            Self::T14 => "Multiple-series estimates, standard errors, relative bias, MAPE and rMSE",
        }
    }

    fn law(self) -> Option<CovariateLaw> {
        match self {
            Self::T2 | Self::T3 | Self::T4 => Some(CovariateLaw::Normal),
            Self::T5 | Self::T6 | Self::T7 => Some(CovariateLaw::Uniform),
            Self::T8 | Self::T9 | Self::T10 => Some(CovariateLaw::Poisson),
            _ => None,
        }
    }

    /// Reference rows in grid order.
    pub fn reference(self) -> Vec<Vec<f64>> {
        fn rows<const N: usize>(t: &[[f64; N]]) -> Vec<Vec<f64>> {
            t.iter().map(|r| r.to_vec()).collect()
        }
        match self {
            Self::T2 => rows(&REF_T2),
            Self::T3 => rows(&REF_T3),
            Self::T4 => rows(&REF_T4),
            Self::T5 => rows(&REF_T5),
            Self::T6 => rows(&REF_T6),
            Self::T7 => rows(&REF_T7),
            Self::T8 => rows(&REF_T8),
            Self::T9 => rows(&REF_T9),
            Self::T10 => rows(&REF_T10),
            Self::T12 => rows(&REF_T12),
            Self::T13 => rows(&REF_T13),
            Self::T14 => rows(&REF_T14),
        }
    }

    pub fn columns(self) -> Vec<&'static str> {
        match self {
            Self::T2 | Self::T5 | Self::T8 => vec![
                "hybrid_rho",
                "hybrid_se",
                "hybrid_rel_bias",
                "baseline_rho",
                "baseline_se",
                "baseline_rel_bias",
            ],
            Self::T3 | Self::T6 | Self::T9 => vec![
                "hybrid_delta",
                "hybrid_se",
                "hybrid_rel_bias",
                "baseline_delta",
                "baseline_se",
                "baseline_rel_bias",
            ],
            Self::T4 | Self::T7 | Self::T10 => vec![
                "hybrid_mape",
                "hybrid_rmse",
                "hybrid_conv",
                "baseline_mape",
                "baseline_rmse",
                "baseline_conv",
            ],
            Self::T12 => vec!["rho", "se", "rel_bias"],
            Self::T13 => vec!["mape", "rmse"],
            Self::T14 => vec![
                "rho",
                "se_rho",
                "rel_bias_rho",
                "delta",
                "se_delta",
                "rel_bias_delta",
                "mape",
                "rmse",
            ],
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

impl FromStr for TableId {
    type Err = ParError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().trim_start_matches(['T', 't']);
        Self::ALL
            .iter()
            .copied()
            .find(|id| id.to_string()[1..] == *key)
            .ok_or_else(|| ParError::UnknownTable(s.to_string()))
    }
}

/// Replicates after scaling the default 200, at least 1.
pub fn scaled_replicates(scale: f64) -> Result<usize> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(ParError::InvalidParams(format!("scale factor {scale} outside (0, 1]")));
    }
    Ok(((DEFAULT_REPLICATES as f64 * scale).round() as usize).max(1))
}

const CHANGES: [(f64, f64); 4] = [(0.2, 0.6), (0.2, 0.95), (0.6, 0.95), (0.8, 0.95)];

/// Scenario grid of a table in reference-row order.
pub fn table_scenarios(id: TableId, replicates: usize) -> Vec<ScenarioSpec> {
    let mut specs = Vec::new();
    match id {
        TableId::T12 | TableId::T13 => {
            for (from, to) in CHANGES {
                for fraction in [0.1, 0.25] {
                    for t in [100, 300, 500] {
                        specs.push(ScenarioSpec::structural_change(from, to, fraction, t));
                    }
                }
            }
        }
        TableId::T14 => {
            for sd in [5.0, 10.0, 20.0] {
                for t in [50, 100] {
                    for n in [10, 20, 50] {
                        specs.push(ScenarioSpec::multi(n, t, sd));
                    }
                }
            }
        }
        _ => {
            let law = id.law().expect("single-series table");
            for rho in [0.2, 0.6, 0.95] {
                for delta in [0.25, 0.5] {
                    for t in [100, 200, 500] {
                        specs.push(ScenarioSpec::single(rho, delta, law, t, EstimatorSet::Both));
                    }
                }
            }
        }
    }
    specs.into_iter().map(|s| s.with_replicates(replicates)).collect()
}

/// Short stable description of a scenario; also keys its seed.
pub fn scenario_label(spec: &ScenarioSpec) -> String {
    match (&spec.change, &spec.multi) {
        (Some(c), _) => format!(
            "rho {}->{} middle {}% T={}",
            spec.rho,
            c.rho_during[0],
            (c.window_fraction * 100.0).round(),
            spec.t_len
        ),
        (None, Some(m)) => format!("N={} T={} sd={}", m.n_series, spec.t_len, m.reversion_sd),
        (None, None) => format!(
            "{} rho={} delta={} T={}",
            spec.covariate_law, spec.rho, spec.delta, spec.t_len
        ),
    }
}

/// Seed of a scenario under `master_seed`, shared by every table containing it.
pub fn scenario_seed(master_seed: u64, spec: &ScenarioSpec) -> u64 {
    derive_seed_from_label(master_seed, &scenario_label(spec))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub column: String,
    #[serde(deserialize_with = "crate::io::nan_if_null")]
    pub value: f64,
    #[serde(deserialize_with = "crate::io::nan_if_null")]
    pub reference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub cells: Vec<TableCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub id: TableId,
    pub master_seed: u64,
    pub replicates: usize,
    pub rows: Vec<TableRow>,
    pub scenarios: Vec<ScenarioReport>,
}

impl TableReport {
    /// Tab-separated rendering: one `value` and one `ref` column per metric.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}: {}", self.id, self.id.title());
        let _ = writeln!(out, "# master_seed={} replicates={}", self.master_seed, self.replicates);
        out.push_str("scenario");
        for c in self.id.columns() {
            let _ = write!(out, "\t{c}\t{c}_ref");
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.label);
            for cell in &row.cells {
                let _ = write!(out, "\t{}\t{}", display(cell.value), display(cell.reference));
            }
            out.push('\n');
        }
        out
    }
}

fn display(v: f64) -> String {
    if !v.is_finite() {
        "NA".into()
    } else if v.abs() >= 1e5 {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

fn table_values(id: TableId, report: &ScenarioReport) -> Vec<f64> {
    let nan = f64::NAN;
    let pick = |e: Estimator| report.summary(e);
    let triple = |s: Option<&EstimatorSummary>, delta: bool| match s {
        Some(s) => {
            let p = if delta { s.delta } else { s.rho };
            vec![p.mean, p.se, p.relative_bias]
        }
        None => vec![nan; 3],
    };
    let predictive = |s: Option<&EstimatorSummary>| match s {
        Some(s) => vec![s.mape, s.rmse, s.convergence_rate],
        None => vec![nan; 3],
    };
    let h = pick(Estimator::Hybrid);
    let b = pick(Estimator::Baseline);
    match id {
        TableId::T2 | TableId::T5 | TableId::T8 => [triple(h, false), triple(b, false)].concat(),
        TableId::T3 | TableId::T6 | TableId::T9 => [triple(h, true), triple(b, true)].concat(),
        TableId::T4 | TableId::T7 | TableId::T10 => [predictive(h), predictive(b)].concat(),
        TableId::T12 => triple(h, false),
        TableId::T13 => h.map_or(vec![nan; 2], |s| vec![s.mape, s.rmse]),
        TableId::T14 => [
            triple(h, false),
            triple(h, true),
            h.map_or(vec![nan; 2], |s| vec![s.mape, s.rmse]),
        ]
        .concat(),
    }
}

/// Builds a side-by-side report from already-run scenarios in grid order.
pub fn assemble_table(id: TableId, master_seed: u64, scenarios: Vec<ScenarioReport>) -> Result<TableReport> {
    let reference = id.reference();
    if scenarios.len() != reference.len() {
        return Err(ParError::Dimension(format!(
            "{id} has {} rows, got {} scenarios",
            reference.len(),
            scenarios.len()
        )));
    }
    let columns = id.columns();
    let rows = scenarios
        .iter()
        .zip(&reference)
        .map(|(rep, refs)| TableRow {
            label: scenario_label(&rep.spec),
            cells: columns
                .iter()
                .zip(table_values(id, rep))
                .zip(refs)
                .map(|((c, value), &reference)| TableCell {
                    column: (*c).to_string(),
                    value,
                    reference,
                })
                .collect(),
        })
        .collect();
    Ok(TableReport {
        id,
        master_seed,
        replicates: scenarios.first().map_or(0, |s| s.spec.replicates),
        rows,
        scenarios,
    })
}

/// Runs every scenario of a table at `scale * 200` replicates.
pub fn run_table(id: TableId, master_seed: u64, scale: f64) -> Result<TableReport> {
    let replicates = scaled_replicates(scale)?;
    let scenarios = table_scenarios(id, replicates)
        .iter()
        .map(|spec| run_scenario(spec, scenario_seed(master_seed, spec)))
        .collect::<Result<Vec<_>>>()?;
    assemble_table(id, master_seed, scenarios)
}

const REF_T2: [[f64; 6]; 18] = [
    [0.1968, 0.0444, 17.57, 0.198, 0.0416, 16.44],
    [0.1983, 0.0324, 12.33, 0.1995, 0.0299, 11.5],
    [0.1984, 0.02, 8.07, 0.1992, 0.0188, 7.49],
    [0.1998, 0.0275, 11.0, 0.1998, 0.0201, 8.07],
    [0.2005, 0.0199, 7.92, 0.2011, 0.0144, 5.64],
    [0.2, 0.0123, 4.87, 0.2004, 0.0095, 3.79],
    [0.5788, 0.0539, 7.5, 0.5855, 0.0522, 7.03],
    [0.5911, 0.0401, 5.37, 0.5942, 0.0388, 5.18],
    [0.5956, 0.0245, 3.08, 0.5973, 0.0247, 3.21],
    [0.5932, 0.0364, 4.85, 0.5979, 0.0282, 3.85],
    [0.5972, 0.0283, 3.51, 0.6008, 0.022, 2.81],
    [0.5992, 0.0154, 2.05, 0.6005, 0.0133, 1.8],
    [0.8739, 0.0543, 8.1, 0.9025, 0.0547, 5.56],
    [0.9147, 0.0284, 3.89, 0.9301, 0.0268, 2.71],
    [0.9338, 0.0171, 1.9, 0.9405, 0.0162, 1.47],
    [0.8806, 0.0495, 7.41, 0.9118, 0.0503, 4.72],
    [0.916, 0.0282, 3.7, 0.9361, 0.0259, 2.33],
    [0.9351, 0.0171, 1.76, 0.9434, 0.0163, 1.28],
];

const REF_T3: [[f64; 6]; 18] = [
    [0.2481, 0.0194, 6.2, 0.2486, 0.0185, 5.79],
    [0.2485, 0.0131, 4.05, 0.2489, 0.0121, 3.87],
    [0.2488, 0.008, 2.6, 0.2491, 0.0076, 2.49],
    [0.4995, 0.021, 3.36, 0.4993, 0.0168, 2.57],
    [0.4997, 0.0142, 2.22, 0.5001, 0.0103, 1.67],
    [0.4996, 0.0087, 1.4, 0.4999, 0.007, 1.14],
    [0.2372, 0.0423, 14.17, 0.2415, 0.0408, 13.31],
    [0.2431, 0.0297, 9.77, 0.2454, 0.0281, 9.3],
    [0.2462, 0.0174, 5.77, 0.2477, 0.0171, 5.68],
    [0.4862, 0.0473, 7.78, 0.4966, 0.0407, 6.38],
    [0.4909, 0.0337, 5.39, 0.5003, 0.0272, 4.33],
    [0.4939, 0.019, 3.23, 0.5001, 0.0167, 2.72],
    [0.0545, 0.0731, 78.37, 0.1769, 0.2478, 74.87],
    [0.0597, 0.0544, 76.14, 0.1919, 0.1424, 50.49],
    [0.0678, 0.0343, 72.86, 0.2195, 0.0921, 31.83],
    [0.134, 0.0758, 73.2, 0.3816, 0.3372, 53.59],
    [0.1422, 0.056, 71.55, 0.4521, 0.196, 33.26],
    [0.1495, 0.0362, 70.1, 0.4466, 0.1827, 21.57],
];

const REF_T4: [[f64; 6]; 18] = [
    [7.91, 9.87, 100.0, 7.9, 9.86, 100.0],
    [8.07, 10.06, 100.0, 8.06, 10.06, 100.0],
    [8.1, 10.13, 100.0, 8.1, 10.13, 100.0],
    [7.93, 10.32, 100.0, 7.9, 10.27, 100.0],
    [8.08, 10.54, 100.0, 8.06, 10.5, 100.0],
    [8.1, 10.61, 100.0, 8.09, 10.6, 100.0],
    [7.82, 9.84, 100.0, 7.82, 9.84, 100.0],
    [7.97, 10.02, 100.0, 7.97, 10.01, 100.0],
    [8.02, 10.1, 100.0, 8.01, 10.1, 100.0],
    [7.66, 10.36, 100.0, 7.62, 10.3, 100.0],
    [7.79, 10.52, 100.0, 7.76, 10.48, 100.0],
    [7.82, 10.61, 100.0, 7.8, 10.6, 100.0],
    [8.7, 10.26, 96.0, 7.99, 9.84, 99.0],
    [9.28, 10.67, 97.0, 8.19, 10.01, 99.0],
    [9.63, 10.97, 98.0, 8.26, 10.09, 100.0],
    [8.39, 10.79, 94.0, 7.65, 10.31, 99.0],
    [8.84, 11.24, 96.0, 7.82, 10.5, 97.0],
    [9.18, 11.56, 98.0, 7.87, 10.56, 99.0],
];

const REF_T5: [[f64; 6]; 18] = [
    [0.1849, 0.0925, 38.26, 0.1837, 0.093, 38.44],
    [0.1904, 0.0621, 24.14, 0.1906, 0.0624, 24.49],
    [0.1952, 0.0368, 14.47, 0.1954, 0.0362, 14.12],
    [0.1977, 0.0671, 27.21, 0.1978, 0.0638, 25.86],
    [0.1974, 0.0432, 16.71, 0.1977, 0.0415, 16.08],
    [0.1975, 0.0263, 10.17, 0.1971, 0.0256, 9.99],
    [0.5588, 0.0852, 12.61, 0.5652, 0.0859, 12.41],
    [0.5802, 0.0556, 7.73, 0.5845, 0.0561, 7.65],
    [0.5906, 0.0352, 4.78, 0.5924, 0.0349, 4.71],
    [0.5726, 0.0716, 10.09, 0.5764, 0.0694, 9.71],
    [0.5848, 0.0494, 6.81, 0.5886, 0.0491, 6.63],
    [0.5929, 0.0297, 4.05, 0.5945, 0.0295, 4.0],
    [0.8695, 0.0565, 8.55, 0.8953, 0.0563, 6.11],
    [0.9095, 0.0334, 4.39, 0.9249, 0.0328, 3.15],
    [0.9338, 0.0156, 1.86, 0.9403, 0.0155, 1.41],
    [0.8741, 0.0535, 8.02, 0.8987, 0.0539, 5.73],
    [0.9116, 0.0319, 4.17, 0.9266, 0.0312, 2.97],
    [0.9335, 0.0161, 1.88, 0.94, 0.016, 1.46],
];

const REF_T6: [[f64; 6]; 18] = [
    [0.2451, 0.0466, 14.78, 0.246, 0.0463, 14.47],
    [0.246, 0.0331, 10.38, 0.2467, 0.0327, 10.09],
    [0.2488, 0.0215, 6.92, 0.2491, 0.0213, 6.92],
    [0.5005, 0.0547, 8.24, 0.4999, 0.0522, 7.95],
    [0.4986, 0.0365, 5.57, 0.4984, 0.0358, 5.43],
    [0.4986, 0.0237, 3.77, 0.4982, 0.0235, 3.79],
    [0.2279, 0.0905, 28.94, 0.2336, 0.0942, 29.69],
    [0.2374, 0.061, 19.65, 0.2414, 0.0628, 19.9],
    [0.2447, 0.0417, 13.62, 0.2464, 0.0421, 13.68],
    [0.4757, 0.1078, 17.63, 0.4817, 0.1088, 17.4],
    [0.4846, 0.0767, 12.27, 0.4907, 0.0778, 12.23],
    [0.4941, 0.0492, 8.0, 0.4966, 0.0496, 7.97],
    [0.05, 0.2195, 97.08, 0.1979, 0.6664, 153.37],
    [0.0481, 0.1627, 87.34, 0.2078, 0.5648, 120.29],
    [0.064, 0.1194, 77.57, 0.2318, 0.2653, 83.84],
    [0.1276, 0.1956, 75.25, 0.3566, 0.6658, 81.18],
    [0.1288, 0.1614, 74.25, 0.4049, 0.5264, 65.16],
    [0.1461, 0.1168, 70.79, 0.4413, 0.2771, 44.35],
];

const REF_T7: [[f64; 6]; 18] = [
    [7.52, 10.49, 100.0, 7.52, 10.5, 100.0],
    [7.58, 10.6, 100.0, 7.58, 10.6, 100.0],
    [7.58, 10.61, 100.0, 7.58, 10.61, 100.0],
    [7.04, 11.2, 100.0, 7.04, 11.2, 100.0],
    [7.11, 11.32, 100.0, 7.11, 11.32, 100.0],
    [7.11, 11.34, 100.0, 7.11, 11.34, 100.0],
    [7.51, 10.48, 100.0, 7.51, 10.48, 100.0],
    [7.57, 10.58, 100.0, 7.57, 10.58, 100.0],
    [7.58, 10.6, 100.0, 7.58, 10.6, 100.0],
    [7.03, 11.2, 100.0, 7.03, 11.21, 100.0],
    [7.08, 11.31, 100.0, 7.08, 11.31, 100.0],
    [7.09, 11.34, 100.0, 7.09, 11.34, 100.0],
    [8.26, 10.75, 94.0, 7.72, 10.38, 100.0],
    [8.64, 11.21, 97.0, 7.78, 10.59, 100.0],
    [8.94, 11.5, 96.0, 7.81, 10.62, 100.0],
    [7.64, 11.51, 94.0, 7.17, 11.14, 100.0],
    [7.92, 11.93, 96.0, 7.22, 11.32, 100.0],
    [8.19, 12.19, 99.0, 7.25, 11.34, 100.0],
];

const REF_T8: [[f64; 6]; 18] = [
    [0.2008, 0.0141, 5.61, 0.1996, 0.0127, 3.88],
    [0.1999, 0.0093, 3.68, 0.2005, 0.0152, 3.08],
    [0.1993, 0.0061, 2.44, 0.1996, 0.004, 1.58],
    [0.1999, 0.0044, 1.72, 0.1834, 0.1254, 9.09],
    [0.1997, 0.0023, 0.9, 0.1941, 0.0351, 3.38],
    [0.2001, 0.0015, 0.6, 0.2025, 0.0445, 4.12],
    [0.5979, 0.0194, 2.51, 0.5981, 0.0289, 2.24],
    [0.5987, 0.0125, 1.68, 0.5966, 0.0337, 1.8],
    [0.5993, 0.0086, 1.11, 0.5985, 0.0193, 1.05],
    [0.5998, 0.0049, 0.64, 0.5999, 0.0024, 0.31],
    [0.5997, 0.0029, 0.37, 0.5931, 0.0653, 1.4],
    [0.6001, 0.0018, 0.23, 0.595, 0.0337, 1.0],
    [0.8975, 0.0396, 5.65, 0.9331, 0.0318, 2.68],
    [0.9236, 0.0257, 2.96, 0.9435, 0.0175, 1.34],
    [0.9391, 0.0139, 1.42, 0.9476, 0.0086, 0.7],
    [0.9347, 0.0209, 1.82, 0.9515, 0.0092, 0.46],
    [0.9428, 0.0131, 0.99, 0.9517, 0.009, 0.37],
    [0.9479, 0.0043, 0.4, 0.9517, 0.0091, 0.31],
];

const REF_T9: [[f64; 6]; 18] = [
    [0.2501, 0.0046, 1.48, 0.269, 0.1915, 8.76],
    [0.2498, 0.003, 0.93, 0.2588, 0.1196, 4.41],
    [0.2498, 0.0019, 0.61, 0.2498, 0.0014, 0.48],
    [0.5001, 0.0029, 0.46, 0.5134, 0.1222, 3.24],
    [0.4998, 0.0014, 0.23, 0.5449, 0.2693, 9.14],
    [0.5, 0.0009, 0.14, 0.5405, 0.222, 8.19],
    [0.2488, 0.0117, 3.75, 0.2577, 0.1046, 5.74],
    [0.2491, 0.0073, 2.41, 0.2678, 0.1802, 9.17],
    [0.2494, 0.0049, 1.58, 0.2582, 0.1128, 4.47],
    [0.4999, 0.0061, 0.99, 0.5003, 0.0024, 0.36],
    [0.4992, 0.0029, 0.46, 0.5202, 0.1948, 4.36],
    [0.4997, 0.0019, 0.3, 0.525, 0.1641, 5.16],
    [0.1172, 0.0329, 53.1, 0.2299, 0.1016, 32.07],
    [0.1341, 0.026, 46.36, 0.238, 0.0565, 17.65],
    [0.1472, 0.0164, 41.11, 0.2447, 0.0313, 10.02],
    [0.3765, 0.0722, 24.72, 0.506, 0.0301, 4.38],
    [0.4079, 0.0486, 18.43, 0.5035, 0.0252, 3.26],
    [0.432, 0.0217, 13.59, 0.5024, 0.0164, 1.83],
];

const REF_T10: [[f64; 6]; 18] = [
    [4.28, 20.11, 100.0, 6.075e9, 9.056e11, 92.0],
    [4.28, 20.11, 100.0, 3.221e5, 2.531e7, 86.0],
    [4.28, 20.26, 100.0, 4.27, 20.22, 85.0],
    [2.28, 49.47, 100.0, 7857.18, 1.606e7, 37.0],
    [2.29, 48.17, 100.0, 2.271e6, 1.757e9, 36.0],
    [2.26, 50.42, 100.0, 8.534e5, 5.065e9, 30.0],
    [4.07, 20.04, 100.0, 1.553e5, 6.383e6, 90.0],
    [4.09, 20.18, 100.0, 2.102e7, 1.803e9, 96.0],
    [4.08, 20.25, 100.0, 1.081e6, 7.513e6, 90.0],
    [1.96, 51.52, 100.0, 1.93, 47.88, 46.0],
    [1.93, 51.07, 98.0, 3.533e9, 1.967e13, 46.0],
    [1.92, 49.95, 100.0, 82323.16, 3.782e8, 44.0],
    [4.12, 20.67, 93.0, 3.95, 20.0, 100.0],
    [4.18, 21.07, 96.0, 3.95, 20.21, 98.0],
    [4.25, 21.41, 98.0, 3.96, 20.27, 100.0],
    [1.97, 64.84, 89.0, 1.7, 51.38, 63.0],
    [1.91, 66.2, 94.0, 1.73, 52.35, 57.0],
    [1.83, 61.92, 96.0, 1.73, 51.61, 41.0],
];

const REF_T12: [[f64; 3]; 24] = [
    [0.2132, 0.0935, 36.52],
    [0.2231, 0.0563, 24.12],
    [0.223, 0.0474, 21.1],
    [0.2575, 0.0965, 44.97],
    [0.2698, 0.0563, 37.21],
    [0.2718, 0.0465, 37.32],
    [0.2999, 0.1259, 65.47],
    [0.3459, 0.0897, 74.43],
    [0.3652, 0.0794, 82.87],
    [0.4376, 0.1423, 121.21],
    [0.5126, 0.089, 156.28],
    [0.5256, 0.0788, 162.82],
    [0.6118, 0.0796, 10.82],
    [0.6549, 0.0513, 10.12],
    [0.6657, 0.0434, 11.54],
    [0.6794, 0.0831, 16.14],
    [0.7363, 0.0521, 22.72],
    [0.7479, 0.0446, 24.66],
    [0.7649, 0.0694, 7.5],
    [0.8087, 0.0386, 4.01],
    [0.8172, 0.0295, 3.53],
    [0.7905, 0.071, 7.21],
    [0.8414, 0.0381, 5.9],
    [0.8497, 0.0297, 6.39],
];

const REF_T13: [[f64; 2]; 24] = [
    [8.52, 10.71],
    [8.56, 10.86],
    [8.58, 10.85],
    [8.98, 11.3],
    [9.09, 11.55],
    [9.12, 11.57],
    [9.75, 12.53],
    [10.1, 13.14],
    [10.33, 13.37],
    [11.83, 14.8],
    [12.56, 15.78],
    [12.71, 15.92],
    [8.32, 10.45],
    [8.55, 10.77],
    [8.58, 10.8],
    [8.86, 10.99],
    [9.16, 11.39],
    [9.17, 11.39],
    [7.97, 9.95],
    [8.17, 10.21],
    [8.2, 10.24],
    [8.14, 10.04],
    [8.37, 10.33],
    [8.38, 10.36],
];

const REF_T14: [[f64; 8]; 18] = [
    [0.5434, 0.0302, 9.62, 0.4387, 0.0321, 12.58, 8.09, 10.75],
    [0.5416, 0.0223, 9.74, 0.4355, 0.0227, 12.91, 8.09, 10.76],
    [0.5434, 0.0137, 9.44, 0.4369, 0.0143, 12.61, 8.08, 10.73],
    [0.5696, 0.0231, 5.48, 0.4632, 0.0249, 7.67, 7.94, 10.68],
    [0.5691, 0.0155, 5.17, 0.4624, 0.0172, 7.55, 7.93, 10.68],
    [0.569, 0.0097, 5.17, 0.4623, 0.0104, 7.55, 7.93, 10.67],
    [0.5446, 0.0307, 9.42, 0.44, 0.0312, 12.23, 8.1, 10.76],
    [0.5434, 0.022, 9.47, 0.4375, 0.0226, 12.54, 8.1, 10.75],
    [0.5424, 0.0143, 9.6, 0.4362, 0.0149, 12.77, 8.1, 10.74],
    [0.5705, 0.0222, 5.22, 0.4639, 0.0242, 7.45, 7.95, 10.68],
    [0.5685, 0.0149, 5.27, 0.462, 0.0162, 7.62, 7.95, 10.67],
    [0.5693, 0.0096, 5.11, 0.4626, 0.0103, 7.49, 7.95, 10.66],
    [0.5416, 0.0312, 9.92, 0.4373, 0.0325, 12.82, 8.2, 10.8],
    [0.5418, 0.0234, 9.72, 0.4361, 0.0236, 12.81, 8.21, 10.79],
    [0.5438, 0.0147, 9.36, 0.4374, 0.0154, 12.53, 8.19, 10.74],
    [0.57, 0.0225, 5.27, 0.463, 0.0244, 7.62, 8.02, 10.71],
    [0.5682, 0.0162, 5.33, 0.461, 0.0175, 7.81, 8.03, 10.7],
    [0.569, 0.0098, 5.17, 0.4618, 0.0105, 7.64, 8.06, 10.67],
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        for id in TableId::ALL {
            let specs = table_scenarios(id, 1);
            assert_eq!(specs.len(), id.reference().len(), "{id}");
            assert!(id.reference().iter().all(|r| r.len() == id.columns().len()), "{id}");
            assert!(specs.iter().all(|s| s.validate().is_ok()), "{id}");
        }
        assert_eq!(table_scenarios(TableId::T2, 1).len(), 18);
        assert_eq!(table_scenarios(TableId::T12, 1).len(), 24);
    }

    #[test]
    fn scale_arithmetic() {
        assert_eq!(scaled_replicates(1.0).unwrap(), 200);
        assert_eq!(scaled_replicates(0.25).unwrap(), 50);
        assert_eq!(scaled_replicates(0.001).unwrap(), 1);
        assert!(scaled_replicates(0.0).is_err());
        assert!(scaled_replicates(1.5).is_err());
    }

    #[test]
    fn panel_grid_order() {
        let specs = table_scenarios(TableId::T14, 1);
        let key: Vec<(usize, usize, f64)> = specs
            .iter()
            .map(|s| {
                let m = s.multi.unwrap();
                (m.n_series, s.t_len, m.reversion_sd)
            })
            .collect();
        assert_eq!(key[0], (10, 50, 5.0));
        assert_eq!(key[3], (10, 100, 5.0));
        assert_eq!(key[11], (50, 100, 10.0));
        assert_eq!(key[17], (50, 100, 20.0));
    }

    #[test]
    fn reference_spot_checks() {
        assert_eq!(TableId::T2.reference()[0][0], 0.1968);
        assert_eq!(TableId::T14.reference()[11][0], 0.5693);
        assert_eq!(TableId::T12.reference()[20][0], 0.8172);
        assert_eq!(TableId::T10.reference()[0][3], 6.075e9);
    }

    #[test]
    fn ids_parse() {
        assert_eq!("T10".parse::<TableId>().unwrap(), TableId::T10);
        assert_eq!("t2".parse::<TableId>().unwrap(), TableId::T2);
        assert_eq!("14".parse::<TableId>().unwrap(), TableId::T14);
        assert!(matches!("T11".parse::<TableId>(), Err(ParError::UnknownTable(_))));
        assert!("T1".parse::<TableId>().is_err());
    }

    #[test]
    fn shared_scenarios_share_seeds() {
        let a = &table_scenarios(TableId::T2, 1)[4];
        let b = &table_scenarios(TableId::T4, 1)[4];
        assert_eq!(scenario_seed(5, a), scenario_seed(5, b));
        assert_ne!(scenario_seed(5, a), scenario_seed(6, a));
    }

    #[test]
    fn tiny_table_renders() {
        let specs = table_scenarios(TableId::T13, 1);
        let reports = specs
            .iter()
            .take(24)
            .map(|s| {
                run_scenario(
                    &ScenarioSpec {
                        t_len: s.t_len.min(100),
                        ..s.clone()
                    },
                    1,
                )
            })
            .collect::<Result<Vec<_>>>()
            .unwrap();
        let t = assemble_table(TableId::T13, 1, reports).unwrap();
        let tsv = t.to_tsv();
        assert_eq!(tsv.lines().count(), 3 + 24);
        assert!(tsv.lines().nth(2).unwrap().starts_with("scenario\tmape\tmape_ref"));
    }
}
