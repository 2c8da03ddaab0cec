//! Predictive-accuracy and Monte Carlo summary metrics.

use serde::{Deserialize, Serialize};

use crate::error::{ParError, Result};
use crate::model::{CountSeries, MeanPath};
use crate::scalar::Scalar;

/// In-sample one-step accuracy of fitted means against observed counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics<T> {
    /// Mean absolute percentage error, in percent, over nonzero actuals.
    pub mape: T,
    pub rmse: T,
    /// Mean absolute deviation.
    pub mad: T,
    /// Zero actuals left out of the MAPE.
    pub mape_excluded: usize,
}

/// Compares `predicted` with the aligned slice of `actual`.
pub fn compute_metrics<T: Scalar>(actual: &CountSeries, predicted: &MeanPath<T>) -> Result<FitMetrics<T>> {
    let end = predicted.start + predicted.len();
    if end > actual.len() {
        return Err(ParError::Dimension(format!(
            "mean path covers t < {end} but the series has {} points",
            actual.len()
        )));
    }
    let pairs = actual.values[predicted.start..end]
        .iter()
        .zip(&predicted.means)
        .map(|(&y, &m)| (T::from_u64(y).expect("count"), m));
    metrics_from_pairs(pairs)
}

/// Metrics over `(actual, predicted)` pairs.
pub fn metrics_from_pairs<T: Scalar>(pairs: impl IntoIterator<Item = (T, T)>) -> Result<FitMetrics<T>> {
    let mut n = 0usize;
    let mut abs_sum = T::zero();
    let mut sq_sum = T::zero();
    let mut pct_sum = T::zero();
    let mut pct_n = 0usize;
    for (y, m) in pairs {
        let e = y - m;
        abs_sum += e.abs();
        sq_sum += e * e;
        if y > T::zero() {
            pct_sum += e.abs() / y;
            pct_n += 1;
        }
        n += 1;
    }
    if n == 0 {
        return Err(ParError::UndefinedMetric("no aligned observations".into()));
    }
    let nn = T::from_count(n);
    let mape = if pct_n > 0 {
        T::lit(100.0) * pct_sum / T::from_count(pct_n)
    } else {
        T::nan()
    };
    Ok(FitMetrics {
        mape,
        rmse: (sq_sum / nn).sqrt(),
        mad: abs_sum / nn,
        mape_excluded: n - pct_n,
    })
}

/// `100 * mean(|estimate - truth|) / |truth|`.
pub fn relative_bias(estimates: &[f64], truth: f64) -> Result<f64> {
    if truth == 0.0 {
        return Err(ParError::UndefinedMetric("relative bias with zero truth".into()));
    }
    if estimates.is_empty() {
        return Err(ParError::UndefinedMetric("relative bias of no estimates".into()));
    }
    let mad = estimates.iter().map(|e| (e - truth).abs()).sum::<f64>() / estimates.len() as f64;
    Ok(100.0 * mad / truth.abs())
}

/// Sample mean and sample standard deviation (`n - 1` denominator).
pub fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand_distr::{Distribution, Normal, Poisson};

    #[test]
    fn perfect_prediction() {
        let y = CountSeries::new("y", vec![3, 5, 8]);
        let m = MeanPath::<f64>::new(0, vec![3.0, 5.0, 8.0]).unwrap();
        let r = compute_metrics(&y, &m).unwrap();
        assert_eq!((r.mape, r.rmse, r.mad), (0.0, 0.0, 0.0));
    }

    #[test]
    fn hand_arithmetic() {
        let y = CountSeries::new("y", vec![100, 100]);
        let m = MeanPath::<f64>::new(0, vec![90.0, 110.0]).unwrap();
        let r = compute_metrics(&y, &m).unwrap();
        assert!((r.mape - 10.0).abs() < 1e-12);
        assert!((r.rmse - 10.0).abs() < 1e-12);
        assert!((r.mad - 10.0).abs() < 1e-12);
    }

    #[test]
    fn zero_actuals_excluded_from_mape() {
        let y = CountSeries::new("y", vec![0, 100, 7]);
        let m = MeanPath::<f64>::new(1, vec![90.0, 7.0]).unwrap();
        let r = compute_metrics(&y, &m).unwrap();
        assert_eq!(r.mape_excluded, 0);
        let m = MeanPath::<f64>::new(0, vec![1.0, 90.0]).unwrap();
        let r = compute_metrics(&y, &m).unwrap();
        assert_eq!(r.mape_excluded, 1);
        assert!((r.mape - 10.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_noise_against_constant_mean() {
        // E|Y - 100| ~ 10 sqrt(2/pi) = 7.98
        let mut rng = rng_from_seed(5);
        let pois = Poisson::new(100.0).unwrap();
        let y: Vec<u64> = (0..10_000).map(|_| pois.sample(&mut rng) as u64).collect();
        let r = compute_metrics(
            &CountSeries::new("y", y),
            &MeanPath::<f64>::new(0, vec![100.0; 10_000]).unwrap(),
        )
        .unwrap();
        assert!((r.mape - 7.98).abs() < 0.25, "{}", r.mape);
        assert!((r.rmse - 10.0).abs() < 0.25, "{}", r.rmse);
    }

    #[test]
    fn relative_bias_cases() {
        assert!((relative_bias(&[0.18, 0.22], 0.2).unwrap() - 10.0).abs() < 1e-9);
        assert_eq!(relative_bias(&[0.2, 0.2], 0.2).unwrap(), 0.0);
        assert!(relative_bias(&[0.1], 0.0).is_err());
    }

    #[test]
    fn relative_bias_half_normal_identity() {
        let mut rng = rng_from_seed(12);
        let d = Normal::new(0.2, 0.0444).unwrap();
        let draws: Vec<f64> = (0..200).map(|_| d.sample(&mut rng)).collect();
        let rb = relative_bias(&draws, 0.2).unwrap();
        let expected = 100.0 * 0.0444 * (2.0 / std::f64::consts::PI).sqrt() / 0.2;
        // sampling sd of the mean absolute deviation over 200 draws is ~ 4% of it
        assert!((rb - expected).abs() < 0.15 * expected, "{rb} vs {expected}");
    }

    #[test]
    fn mean_sd() {
        let (m, s) = mean_and_sd(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-12);
    }
}
