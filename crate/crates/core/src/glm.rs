//! Log-link Poisson regression by iteratively reweighted least squares.
//!
//! Responses may be non-integer or negative: the working-response update
//! `z = eta + (y - mu) / mu` with weights `mu` is defined for any real `y`, and
//! convergence is judged on the coefficient change alone.

use serde::{Deserialize, Serialize};

use crate::error::{ParError, Result};
use crate::linalg::{cholesky_solve, Matrix};
use crate::scalar::Scalar;

/// Linear predictors beyond this magnitude trigger step-halving.
const ETA_LIMIT: f64 = 50.0;
const MAX_HALVINGS: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlmFit<T> {
    /// Intercept first when the design carries an intercept column.
    pub coefficients: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    pub fitted_values: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct GlmOptions<T> {
    pub max_iter: usize,
    /// Convergence on `max |beta_new - beta_old|`.
    pub tol: T,
    /// Warm start; defaults to `eta = ln(max(y, mean(y) / 10))`.
    pub start: Option<Vec<T>>,
}

impl<T: Scalar> Default for GlmOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: T::lit(1e-10).max(T::epsilon() * T::lit(1e3)),
            start: None,
        }
    }
}

/// Quasi log-likelihood `sum(y * eta - exp(eta))`; concave in the coefficients
/// for any real responses, and the Poisson log-likelihood up to a constant when
/// responses are counts.
fn quasi_loglik<T: Scalar>(y: &[T], eta: &[T]) -> T {
    y.iter().zip(eta).map(|(&yi, &e)| yi * e - e.exp()).sum()
}

fn eta_ok<T: Scalar>(eta: &[T]) -> bool {
    let lim = T::lit(ETA_LIMIT);
    eta.iter().all(|e| e.is_finite() && e.abs() <= lim)
}

/// One weighted least-squares solve of the IRLS update.
fn irls_step<T: Scalar>(design: &Matrix<T>, y: &[T], eta: &[T]) -> Result<Vec<T>> {
    let k = design.cols();
    let mut xtwx = vec![T::zero(); k * k];
    let mut xtwz = vec![T::zero(); k];
    for i in 0..design.rows() {
        let mu = eta[i].exp();
        let z = eta[i] + (y[i] - mu) / mu;
        let row = design.row(i);
        for a in 0..k {
            let xa = row[a] * mu;
            xtwz[a] += xa * z;
            for b in 0..=a {
                xtwx[a * k + b] += xa * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            xtwx[b * k + a] = xtwx[a * k + b];
        }
    }
    cholesky_solve(&mut xtwx, k, &mut xtwz).map_err(|_| ParError::Singular("Poisson regression design"))?;
    Ok(xtwz)
}

/// Fits `E[y] = exp(design * beta)`.
pub fn fit_poisson_log_link<T: Scalar>(responses: &[T], design: &Matrix<T>) -> Result<GlmFit<T>> {
    fit_poisson_log_link_with(responses, design, &GlmOptions::default())
}

pub fn fit_poisson_log_link_with<T: Scalar>(
    responses: &[T],
    design: &Matrix<T>,
    opts: &GlmOptions<T>,
) -> Result<GlmFit<T>> {
    let n = responses.len();
    let k = design.cols();
    if design.rows() != n {
        return Err(ParError::Dimension(format!(
            "{n} responses for a design with {} rows",
            design.rows()
        )));
    }
    if n <= k {
        return Err(ParError::Degenerate(format!("{n} observations for {k} coefficients")));
    }
    if responses.iter().any(|y| !y.is_finite()) {
        return Err(ParError::InvalidParams("non-finite response".into()));
    }
    let ybar = responses.iter().copied().sum::<T>() / T::from_count(n);
    if !(ybar > T::zero()) {
        return Err(ParError::Degenerate(format!(
            "mean response {ybar} is not positive; log-link fit undefined"
        )));
    }

    let (mut beta, mut eta) = match &opts.start {
        Some(b) if b.len() == k && eta_ok(&design.mul_vec(b)) => (b.clone(), design.mul_vec(b)),
        _ => {
            let floor = ybar / T::lit(10.0);
            let eta0: Vec<T> = responses.iter().map(|&y| y.max(floor).ln()).collect();
            let beta = irls_step(design, responses, &eta0)?;
            let eta = design.mul_vec(&beta);
            if !eta_ok(&eta) {
                return Ok(failed(beta, 1, &eta));
            }
            (beta, eta)
        }
    };
    let mut ll = quasi_loglik(responses, &eta);

    for iter in 1..=opts.max_iter {
        let proposal = irls_step(design, responses, &eta)?;
        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand: Vec<T> = beta.iter().zip(&proposal).map(|(&b, &p)| b + step * (p - b)).collect();
            let cand_eta = design.mul_vec(&cand);
            if eta_ok(&cand_eta) {
                let cand_ll = quasi_loglik(responses, &cand_eta);
                // small slack: Newton steps at the optimum can lose a few ulps
                let slack = T::lit(1e-9) * (T::one() + ll.abs());
                if cand_ll.is_finite() && cand_ll >= ll - slack {
                    accepted = Some((cand, cand_eta, cand_ll));
                    break;
                }
            }
            step *= T::lit(0.5);
        }
        let Some((cand, cand_eta, cand_ll)) = accepted else {
            return Ok(failed(beta, iter, &eta));
        };
        let change = beta
            .iter()
            .zip(&cand)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max);
        beta = cand;
        eta = cand_eta;
        ll = cand_ll;
        if change < opts.tol {
            return Ok(GlmFit {
                fitted_values: eta.iter().map(|e| e.exp()).collect(),
                coefficients: beta,
                iterations: iter,
                converged: true,
            });
        }
    }
    Ok(failed(beta, opts.max_iter, &eta))
}

fn failed<T: Scalar>(coefficients: Vec<T>, iterations: usize, eta: &[T]) -> GlmFit<T> {
    GlmFit {
        coefficients,
        iterations,
        converged: false,
        fitted_values: eta.iter().map(|e| e.exp()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;
    use rand_distr::{Distribution, Poisson, StandardNormal};

    fn intercept_only(n: usize) -> Matrix<f64> {
        Matrix::new(n, 1, vec![1.0; n]).unwrap()
    }

    #[test]
    fn intercept_only_is_log_mean() {
        let fit = fit_poisson_log_link(&[2.0, 4.0, 6.0], &intercept_only(3)).unwrap();
        assert!(fit.converged);
        assert!((fit.coefficients[0] - 4f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn constant_response_gives_zero_slopes() {
        let x: [f64; 6] = [0.3, -1.2, 2.0, 0.7, 1.1, -0.4];
        let design = Matrix::from_rows(&x.iter().map(|&v| vec![1.0, v, v * v]).collect::<Vec<_>>()).unwrap();
        let fit = fit_poisson_log_link(&[7.0; 6], &design).unwrap();
        assert!((fit.coefficients[0] - 7f64.ln()).abs() < 1e-9);
        assert!(fit.coefficients[1].abs() < 1e-9 && fit.coefficients[2].abs() < 1e-9);
    }

    fn simulated(n: usize, seed: u64) -> (Vec<f64>, Matrix<f64>) {
        let mut rng = rng_from_seed(seed);
        let mut rows = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = rng.sample(StandardNormal);
            let mu = (4.6 + 0.5 * x).exp();
            y.push(Poisson::new(mu).unwrap().sample(&mut rng));
            rows.push(vec![1.0, x]);
        }
        (y, Matrix::from_rows(&rows).unwrap())
    }

    #[test]
    fn recovers_slope_and_satisfies_score_equations() {
        let (y, design) = simulated(5000, 17);
        let fit = fit_poisson_log_link(&y, &design).unwrap();
        assert!(fit.converged);
        assert!((fit.coefficients[1] - 0.5).abs() < 0.02);
        for j in 0..2 {
            let score: f64 = (0..y.len())
                .map(|i| design.get(i, j) * (y[i] - fit.fitted_values[i]))
                .sum();
            assert!(score.abs() < 1e-6 * y.len() as f64, "score {score}");
        }
    }

    #[test]
    fn row_permutation_invariant() {
        let (y, design) = simulated(300, 3);
        let fit = fit_poisson_log_link(&y, &design).unwrap();
        let idx: Vec<usize> = (0..300).rev().map(|i| (i * 7) % 300).collect();
        let yp: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| design.row(i).to_vec()).collect();
        let fit2 = fit_poisson_log_link(&yp, &Matrix::from_rows(&rows).unwrap()).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&fit2.coefficients) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn negative_responses_reach_fixed_point() {
        let x = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5];
        let y = [2.0, -1.0, 4.0, 3.0, 7.0, 5.0, 12.0, 11.0];
        let design = Matrix::from_rows(&x.iter().map(|&v| vec![1.0, v]).collect::<Vec<_>>()).unwrap();
        let fit = fit_poisson_log_link(&y, &design).unwrap();
        assert!(fit.converged);
        for j in 0..2 {
            let score: f64 = (0..8).map(|i| design.get(i, j) * (y[i] - fit.fitted_values[i])).sum();
            assert!(score.abs() < 1e-8);
        }
    }

    #[test]
    fn rank_deficient_design_is_singular() {
        let design = Matrix::from_rows(&(0..5).map(|i| vec![1.0, 2.0, f64::from(i)]).collect::<Vec<_>>()).unwrap();
        let r = fit_poisson_log_link(&[1.0, 2.0, 3.0, 4.0, 5.0], &design);
        assert!(matches!(r, Err(ParError::Singular(_))));
    }

    #[test]
    fn nonpositive_mean_is_degenerate() {
        let r = fit_poisson_log_link(&[-1.0, 0.0, 0.5, -2.0], &intercept_only(4));
        assert!(matches!(r, Err(ParError::Degenerate(_))));
    }

    #[test]
    fn loglik_monotone_across_iterations() {
        let (y, design) = simulated(200, 9);
        let mut prev = f64::NEG_INFINITY;
        for iters in 1..8 {
            let opts = GlmOptions {
                max_iter: iters,
                tol: 0.0,
                start: None,
            };
            let fit = fit_poisson_log_link_with(&y, &design, &opts).unwrap();
            let eta = design.mul_vec(&fit.coefficients);
            let ll = quasi_loglik(&y, &eta);
            assert!(ll >= prev - 1e-9 * prev.abs().max(1.0));
            prev = ll;
        }
    }

    #[test]
    fn f32_intercept_only() {
        let design = Matrix::<f32>::new(3, 1, vec![1.0; 3]).unwrap();
        let fit = fit_poisson_log_link(&[2.0f32, 4.0, 6.0], &design).unwrap();
        assert!((fit.coefficients[0] - 4f32.ln()).abs() < 1e-5);
    }
}
