//! Domain types of the Poisson autoregressive model and its dynamic-mean recursion.
//!
//! The transition is
//! `m_t = sum_i rho_i * y_{t-i} + (1 - sum_i rho_i) * exp(delta0 + x_t' delta)`,
//! equivalently `sum_i rho_i * y_{t-i} + exp(delta0_star + x_t' delta)` with
//! `delta0_star = ln(1 - sum rho) + delta0`.

use serde::{Deserialize, Serialize};

use crate::error::{ParError, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::Scalar;

/// Autoregressive coefficients, mean-reversion intercept and covariate effects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParParams<T> {
    pub rho: Vec<T>,
    pub delta0: T,
    pub delta: Vec<T>,
}

impl<T: Scalar> ParParams<T> {
    /// Validated constructor: every `rho_i >= 0`, `sum(rho) < 1`, finite reversion level.
    pub fn new(rho: Vec<T>, delta0: T, delta: Vec<T>) -> Result<Self> {
        if rho.is_empty() {
            return Err(ParError::InvalidParams("lag order must be at least 1".into()));
        }
        if let Some(r) = rho.iter().find(|r| !(r.is_finite() && **r >= T::zero())) {
            return Err(ParError::InvalidParams(format!(
                "autoregressive coefficient {r} must be finite and nonnegative"
            )));
        }
        let params = Self::estimated(rho, delta0, delta)?;
        Ok(params)
    }

    /// Constructor for estimates: coefficients may be negative but must keep
    /// `sum(rho) < 1` so the reparameterized intercept exists.
    pub fn estimated(rho: Vec<T>, delta0: T, delta: Vec<T>) -> Result<Self> {
        let params = Self { rho, delta0, delta };
        let s = params.rho_sum();
        if !(s < T::one()) || !s.is_finite() {
            return Err(ParError::NonStationary { sum: s.to_f64_lossy() });
        }
        let level = delta0.exp();
        if !(level.is_finite() && level > T::zero()) {
            return Err(ParError::InvalidParams(format!(
                "reversion level exp({delta0}) is not a positive finite number"
            )));
        }
        if params.delta.iter().any(|d| !d.is_finite()) {
            return Err(ParError::InvalidParams("non-finite covariate effect".into()));
        }
        Ok(params)
    }

    /// Rebuilds natural-scale parameters from the reparameterized intercept.
    pub fn from_derived(rho: Vec<T>, delta0_star: T, delta: Vec<T>) -> Result<Self> {
        let s: T = rho.iter().copied().sum();
        if !(s < T::one()) {
            return Err(ParError::NonStationary { sum: s.to_f64_lossy() });
        }
        Self::estimated(rho, delta0_star - (T::one() - s).ln(), delta)
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.rho.len()
    }

    #[inline]
    pub fn rho_sum(&self) -> T {
        self.rho.iter().copied().sum()
    }

    pub fn is_stationary(&self) -> bool {
        self.rho.iter().all(|r| *r >= T::zero()) && self.rho_sum() < T::one()
    }

    pub fn reversion_level(&self) -> T {
        self.delta0.exp()
    }

    pub fn derived_intercept(&self) -> DerivedIntercept<T> {
        DerivedIntercept {
            delta0_star: (T::one() - self.rho_sum()).ln() + self.delta0,
        }
    }

    /// Flattened `(rho..., delta0, delta...)`.
    pub fn to_vec(&self) -> Vec<T> {
        let mut v = self.rho.clone();
        v.push(self.delta0);
        v.extend_from_slice(&self.delta);
        v
    }
}

/// `delta0_star = ln(1 - sum rho) + delta0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedIntercept<T> {
    pub delta0_star: T,
}

/// Observed nonnegative counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountSeries {
    pub label: String,
    pub values: Vec<u64>,
}

impl CountSeries {
    pub fn new(label: impl Into<String>, values: Vec<u64>) -> Self {
        Self {
            label: label.into(),
            values,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_reals<T: Scalar>(&self) -> Vec<T> {
        self.values
            .iter()
            .map(|&v| T::from_u64(v).expect("count representable"))
            .collect()
    }
}

/// Covariate rows aligned index-for-index with a count series (`T x k`).
#[derive(Clone, Debug, PartialEq)]
pub struct CovariatePanel<T>(Matrix<T>);

impl<T: Scalar> CovariatePanel<T> {
    pub fn new(matrix: Matrix<T>) -> Result<Self> {
        if matrix.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(ParError::InvalidParams("non-finite covariate entry".into()));
        }
        Ok(Self(matrix))
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    /// Single-covariate panel.
    pub fn from_column(values: &[T]) -> Result<Self> {
        Self::new(Matrix::new(values.len(), 1, values.to_vec())?)
    }

    /// Panel with `rows` rows and no covariates.
    pub fn empty(rows: usize) -> Self {
        Self(Matrix::zeros(rows, 0))
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.0.cols()
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[T] {
        self.0.row(t)
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Self {
        Self(self.0.slice_rows(range))
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows()).map(|t| self.0.get(t, j)).collect()
    }
}

/// Dynamic means `m_t` for `t = start..start + means.len()` (0-based).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanPath<T> {
    pub start: usize,
    pub means: Vec<T>,
}

impl<T: Scalar> MeanPath<T> {
    pub fn new(start: usize, means: Vec<T>) -> Result<Self> {
        if let Some(m) = means.iter().find(|m| !(**m > T::zero() && m.is_finite())) {
            return Err(ParError::Domain { eta: m.to_f64_lossy() });
        }
        Ok(Self { start, means })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }
}

/// Temporary change of the autoregressive coefficients over a centered window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralChangeSpec {
    pub rho_during: Vec<f64>,
    pub window_fraction: f64,
}

impl StructuralChangeSpec {
    pub fn new(rho_during: Vec<f64>, window_fraction: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&window_fraction) {
            return Err(ParError::InvalidParams(format!(
                "window fraction {window_fraction} outside [0, 1)"
            )));
        }
        let s: f64 = rho_during.iter().sum();
        if rho_during.iter().any(|r| !(*r >= 0.0)) || !(s < 1.0) {
            return Err(ParError::NonStationary { sum: s });
        }
        Ok(Self {
            rho_during,
            window_fraction,
        })
    }

    /// Window length `L = round(fraction * T)`.
    pub fn window_len(&self, series_len: usize) -> usize {
        (self.window_fraction * series_len as f64).round() as usize
    }

    /// 0-based half-open window. The 1-based start is `floor((T - L) / 2) + 1`.
    pub fn window(&self, series_len: usize) -> std::ops::Range<usize> {
        let len = self.window_len(series_len).min(series_len);
        let start = (series_len - len) / 2;
        start..start + len
    }
}

/// Multiple-series parameters: shared `rho` and `delta`, one intercept per series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiParParams<T> {
    pub rho: T,
    pub delta: Vec<T>,
    pub delta0_by_series: Vec<T>,
}

impl<T: Scalar> MultiParParams<T> {
    pub fn new(rho: T, delta: Vec<T>, delta0_by_series: Vec<T>) -> Result<Self> {
        if !(rho >= T::zero() && rho < T::one()) {
            return Err(ParError::NonStationary {
                sum: rho.to_f64_lossy(),
            });
        }
        if delta0_by_series
            .iter()
            .any(|d| !(d.exp().is_finite() && d.exp() > T::zero()))
        {
            return Err(ParError::InvalidParams(
                "every series needs a positive finite reversion level".into(),
            ));
        }
        Ok(Self {
            rho,
            delta,
            delta0_by_series,
        })
    }

    pub fn n_series(&self) -> usize {
        self.delta0_by_series.len()
    }

    /// Single-series view of series `i`.
    pub fn series_params(&self, i: usize) -> ParParams<T> {
        ParParams {
            rho: vec![self.rho],
            delta0: self.delta0_by_series[i],
            delta: self.delta.clone(),
        }
    }
}

fn check_lengths<T: Scalar>(params: &ParParams<T>, lagged: &[T], row: &[T]) -> Result<()> {
    if lagged.len() != params.order() {
        return Err(ParError::Dimension(format!(
            "expected {} lagged counts, got {}",
            params.order(),
            lagged.len()
        )));
    }
    if row.len() != params.delta.len() {
        return Err(ParError::Dimension(format!(
            "expected {} covariates, got {}",
            params.delta.len(),
            row.len()
        )));
    }
    Ok(())
}

/// Dynamic mean in the convex-combination form.
///
/// `lagged_counts[0]` is `y_{t-1}`, `lagged_counts[1]` is `y_{t-2}`, and so on.
pub fn dynamic_mean<T: Scalar>(params: &ParParams<T>, lagged_counts: &[T], covariate_row: &[T]) -> Result<T> {
    check_lengths(params, lagged_counts, covariate_row)?;
    let eta = params.delta0 + dot(covariate_row, &params.delta);
    let level = eta.exp();
    let m = dot(&params.rho, lagged_counts) + (T::one() - params.rho_sum()) * level;
    if !level.is_finite() || !m.is_finite() {
        return Err(ParError::Domain {
            eta: eta.to_f64_lossy(),
        });
    }
    Ok(m)
}

/// Dynamic mean in the additive form with the absorbed intercept `delta0_star`.
pub fn dynamic_mean_additive<T: Scalar>(
    rho: &[T],
    intercept: DerivedIntercept<T>,
    delta: &[T],
    lagged_counts: &[T],
    covariate_row: &[T],
) -> Result<T> {
    if lagged_counts.len() != rho.len() || covariate_row.len() != delta.len() {
        return Err(ParError::Dimension("lag or covariate length mismatch".into()));
    }
    let eta = intercept.delta0_star + dot(covariate_row, delta);
    let m = dot(rho, lagged_counts) + eta.exp();
    if !m.is_finite() {
        return Err(ParError::Domain {
            eta: eta.to_f64_lossy(),
        });
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pure_reversion_level() {
        let p = ParParams::new(vec![0.0], 100f64.ln(), vec![0.0]).unwrap();
        let m = dynamic_mean(&p, &[7.0], &[0.0]).unwrap();
        assert!((m - 100.0).abs() < 1e-12);
    }

    #[test]
    fn additive_form_arithmetic() {
        let m = dynamic_mean_additive(
            &[0.5],
            DerivedIntercept {
                delta0_star: 50f64.ln(),
            },
            &[],
            &[100.0],
            &[],
        )
        .unwrap();
        assert!((m - 100.0).abs() < 1e-12);
    }

    #[test]
    fn both_forms_agree_on_worked_example() {
        let p = ParParams::new(vec![0.2], 100f64.ln(), vec![0.3]).unwrap();
        let convex = dynamic_mean(&p, &[100.0], &[0.0]).unwrap();
        let additive = dynamic_mean_additive(&p.rho, p.derived_intercept(), &p.delta, &[100.0], &[0.0]).unwrap();
        assert!((convex - 100.0).abs() < 1e-12);
        assert!(((convex - additive) / convex).abs() < 1e-12);
    }

    #[test]
    fn overflow_is_a_domain_error() {
        let p = ParParams::new(vec![0.1], 1.0, vec![1.0]).unwrap();
        assert!(matches!(dynamic_mean(&p, &[1.0], &[1e4]), Err(ParError::Domain { .. })));
    }

    #[test]
    fn rejects_nonstationary_and_negative() {
        assert!(matches!(
            ParParams::new(vec![0.6, 0.5], 0.0, vec![]),
            Err(ParError::NonStationary { .. })
        ));
        assert!(ParParams::new(vec![-0.1], 0.0, vec![]).is_err());
        assert!(ParParams::estimated(vec![-0.1], 0.0, vec![]).is_ok());
    }

    #[test]
    fn lag_length_checked() {
        let p = ParParams::new(vec![0.1, 0.2], 0.0, vec![]).unwrap();
        assert!(matches!(dynamic_mean(&p, &[1.0], &[]), Err(ParError::Dimension(_))));
    }

    #[test]
    fn change_window_is_centered() {
        let c = StructuralChangeSpec::new(vec![0.95], 0.10).unwrap();
        // 1-based t in [46, 55]
        assert_eq!(c.window(100), 45..55);
        let c = StructuralChangeSpec::new(vec![0.95], 0.25).unwrap();
        assert_eq!(c.window_len(300), 75);
        assert_eq!(c.window(300), 112..187);
        let empty = StructuralChangeSpec::new(vec![0.95], 0.001).unwrap();
        assert!(empty.window(100).is_empty());
    }

    #[test]
    fn f32_dynamic_mean() {
        let p = ParParams::<f32>::new(vec![0.5], 50f32.ln() - 0.5f32.ln(), vec![]).unwrap();
        let m = dynamic_mean(&p, &[100.0], &[]).unwrap();
        assert!((m - 100.0).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn dynamic_mean_positive_and_forms_agree(
            rho in proptest::collection::vec(0.0f64..0.3, 1..4),
            delta0 in -2.0f64..6.0,
            delta in proptest::collection::vec(-1.0f64..1.0, 0..3),
            seed_lags in proptest::collection::vec(0u32..500, 3),
            xs in proptest::collection::vec(-2.0f64..2.0, 3),
        ) {
            let p = ParParams::new(rho, delta0, delta).unwrap();
            let lags: Vec<f64> = seed_lags[..p.order()].iter().map(|&v| f64::from(v)).collect();
            let row = &xs[..p.delta.len()];
            let a = dynamic_mean(&p, &lags, row).unwrap();
            let b = dynamic_mean_additive(&p.rho, p.derived_intercept(), &p.delta, &lags, row).unwrap();
            prop_assert!(a > 0.0);
            prop_assert!(((a - b) / a).abs() < 1e-12);
        }
    }
}
