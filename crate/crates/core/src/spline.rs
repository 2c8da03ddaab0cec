//! Cubic smoothing splines in Reinsch form.
//!
//! Minimizes `sum_i (y_i - f(x_i))^2 + lambda * int f''(x)^2 dx` over natural
//! cubic splines with knots at the distinct abscissae. Tied abscissae are
//! collapsed to their mean response with multiplicity weights. The penalized
//! system `(R + lambda Q' W^-1 Q) gamma = Q' ybar` is pentadiagonal and solved by
//! a banded LDL' factorization; the smoother trace needed by generalized
//! cross-validation comes from the band of the inverse of that factorization.
//!
//! `lambda` is expressed on the abscissa rescaled to the unit interval, so the
//! same value means the same smoothness whatever the units of `x`.

use serde::{Deserialize, Serialize};

use crate::error::{ParError, Result};
use crate::linalg::simple_regression;
use crate::scalar::Scalar;

/// Size of the logarithmic GCV grid.
pub const GCV_GRID_SIZE: usize = 31;
/// Effective degrees of freedom at the smooth end of the grid.
const EDF_SMOOTH_END: f64 = 2.05;

/// Abscissae closer than this fraction of their range are treated as ties.
pub const TIE_TOLERANCE: f64 = 1e-6;

/// Smoothing-parameter choice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Smoothing<T> {
    Fixed(T),
    /// Generalized cross-validation over a logarithmic grid spanning
    /// effective degrees of freedom of about 2 up to about `n / 2`.
    Gcv,
}

/// One evaluated grid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcvPoint<T> {
    pub lambda: T,
    pub edf: T,
    pub score: T,
}

/// A fitted natural cubic smoothing spline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineFit<T> {
    /// Sorted distinct abscissae.
    pub knots: Vec<T>,
    /// Per-interval `[a, b, c, d]`: `f(x) = a + b s + c s^2 + d s^3`, `s = x - knots[i]`.
    pub coefficients: Vec<[T; 4]>,
    pub lambda: T,
    /// Trace of the smoother matrix.
    pub edf: T,
    /// Fitted values at the input abscissae, in input order.
    pub fitted_values: Vec<T>,
    /// Grid evaluated when `lambda` was chosen by GCV.
    pub gcv_grid: Vec<GcvPoint<T>>,
}

/// Data after sorting and tie-collapsing.
struct Collapsed<T> {
    /// Unit-range abscissae.
    u: Vec<T>,
    x: Vec<T>,
    ybar: Vec<T>,
    w: Vec<T>,
    /// Input index -> collapsed index.
    group_of: Vec<usize>,
    /// Within-group sum of squares (constant in lambda).
    within_ss: T,
    n_obs: usize,
    x_min: T,
    range: T,
}

fn collapse<T: Scalar>(x: &[T], y: &[T], weights: Option<&[T]>) -> Result<Collapsed<T>> {
    if x.len() != y.len() || weights.is_some_and(|w| w.len() != x.len()) {
        return Err(ParError::Dimension(format!(
            "{} abscissae, {} responses",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(ParError::InvalidParams("non-finite spline input".into()));
    }
    // weights rescaled to mean one
    let obs_w: Vec<T> = match weights {
        None => vec![T::one(); x.len()],
        Some(w) => {
            if w.iter().any(|v| !(v.is_finite() && *v > T::zero())) {
                return Err(ParError::InvalidParams(
                    "spline weights must be finite and positive".into(),
                ));
            }
            let m = w.iter().copied().sum::<T>() / T::from_count(w.len());
            w.iter().map(|&v| v / m).collect()
        }
    };
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("finite").then(a.cmp(&b)));
    let (x_min, x_max) = match (order.first(), order.last()) {
        (Some(&a), Some(&b)) => (x[a], x[b]),
        _ => return Err(ParError::Degenerate("empty spline input".into())),
    };
    let range = x_max - x_min;
    let tie_tol = range * T::lit(TIE_TOLERANCE);

    let mut group_of = vec![0; x.len()];
    let mut xs: Vec<T> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match xs.last() {
            Some(&last) if x[i] - last <= tie_tol => {
                members.last_mut().expect("group").push(i);
            }
            _ => {
                xs.push(x[i]);
                members.push(vec![i]);
            }
        }
        group_of[i] = xs.len() - 1;
    }
    if xs.len() < 4 {
        return Err(ParError::Degenerate(format!(
            "{} distinct abscissae; a smoothing spline needs at least 4",
            xs.len()
        )));
    }
    let mut ybar = Vec::with_capacity(xs.len());
    let mut w = Vec::with_capacity(xs.len());
    let mut within_ss = T::zero();
    for group in &members {
        // sort values so the group mean does not depend on input order
        let mut vals: Vec<(T, T)> = group.iter().map(|&i| (y[i], obs_w[i])).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let wsum = vals.iter().map(|v| v.1).sum::<T>();
        let m = vals.iter().map(|&(v, wi)| wi * v).sum::<T>() / wsum;
        within_ss += vals.iter().map(|&(v, wi)| wi * (v - m) * (v - m)).sum::<T>();
        ybar.push(m);
        w.push(wsum);
    }
    let u = xs.iter().map(|&v| (v - x_min) / range).collect();
    Ok(Collapsed {
        u,
        x: xs,
        ybar,
        w,
        group_of,
        within_ss,
        n_obs: x.len(),
        x_min,
        range,
    })
}

/// Banded pieces of the Reinsch system for fixed knots and weights.
struct ReinschSystem<T> {
    h: Vec<T>,
    /// Tridiagonal R: diagonal and first super-diagonal.
    r0: Vec<T>,
    r1: Vec<T>,
    /// Q' W^-1 Q: diagonal, first and second super-diagonals.
    s0: Vec<T>,
    s1: Vec<T>,
    s2: Vec<T>,
    qty: Vec<T>,
    winv: Vec<T>,
}

impl<T: Scalar> ReinschSystem<T> {
    fn new(u: &[T], ybar: &[T], w: &[T]) -> Self {
        let n = u.len();
        let m = n - 2;
        let h: Vec<T> = u.windows(2).map(|p| p[1] - p[0]).collect();
        let winv: Vec<T> = w.iter().map(|&v| T::one() / v).collect();
        let three = T::lit(3.0);
        let six = T::lit(6.0);
        let mut r0 = vec![T::zero(); m];
        let mut r1 = vec![T::zero(); m];
        for j in 0..m {
            r0[j] = (h[j] + h[j + 1]) / three;
            if j + 1 < m {
                r1[j] = h[j + 1] / six;
            }
        }
        // Column j of Q has rows j, j+1, j+2.
        let q = |j: usize| -> [T; 3] {
            let a = T::one() / h[j];
            let c = T::one() / h[j + 1];
            [a, -a - c, c]
        };
        let mut s0 = vec![T::zero(); m];
        let mut s1 = vec![T::zero(); m];
        let mut s2 = vec![T::zero(); m];
        let mut qty = vec![T::zero(); m];
        for j in 0..m {
            let cj = q(j);
            s0[j] = cj[0] * cj[0] * winv[j] + cj[1] * cj[1] * winv[j + 1] + cj[2] * cj[2] * winv[j + 2];
            qty[j] = cj[0] * ybar[j] + cj[1] * ybar[j + 1] + cj[2] * ybar[j + 2];
            if j + 1 < m {
                let ck = q(j + 1);
                s1[j] = cj[1] * ck[0] * winv[j + 1] + cj[2] * ck[1] * winv[j + 2];
            }
            if j + 2 < m {
                let ck = q(j + 2);
                s2[j] = cj[2] * ck[0] * winv[j + 2];
            }
        }
        Self {
            h,
            r0,
            r1,
            s0,
            s1,
            s2,
            qty,
            winv,
        }
    }

    fn q_col(&self, j: usize) -> [T; 3] {
        let a = T::one() / self.h[j];
        let c = T::one() / self.h[j + 1];
        [a, -a - c, c]
    }
}

/// LDL' factor of a symmetric pentadiagonal matrix.
struct BandLdl<T> {
    d: Vec<T>,
    /// l1[i] = L[i][i-1], l2[i] = L[i][i-2]
    l1: Vec<T>,
    l2: Vec<T>,
}

impl<T: Scalar> BandLdl<T> {
    fn factor(b0: &[T], b1: &[T], b2: &[T]) -> Result<Self> {
        let m = b0.len();
        let mut d = vec![T::zero(); m];
        let mut l1 = vec![T::zero(); m];
        let mut l2 = vec![T::zero(); m];
        for i in 0..m {
            if i >= 2 {
                l2[i] = b2[i - 2] / d[i - 2];
            }
            if i >= 1 {
                let mut v = b1[i - 1];
                if i >= 2 {
                    v -= l2[i] * l1[i - 1] * d[i - 2];
                }
                l1[i] = v / d[i - 1];
            }
            let mut di = b0[i];
            if i >= 1 {
                di -= l1[i] * l1[i] * d[i - 1];
            }
            if i >= 2 {
                di -= l2[i] * l2[i] * d[i - 2];
            }
            if !(di > T::zero()) || !di.is_finite() {
                return Err(ParError::Singular("smoothing spline band system"));
            }
            d[i] = di;
        }
        Ok(Self { d, l1, l2 })
    }

    fn solve(&self, rhs: &[T]) -> Vec<T> {
        let m = rhs.len();
        let mut z = rhs.to_vec();
        for i in 0..m {
            if i >= 1 {
                let v = self.l1[i] * z[i - 1];
                z[i] -= v;
            }
            if i >= 2 {
                let v = self.l2[i] * z[i - 2];
                z[i] -= v;
            }
        }
        for (v, d) in z.iter_mut().zip(&self.d) {
            *v /= *d;
        }
        for i in (0..m).rev() {
            if i + 1 < m {
                let v = self.l1[i + 1] * z[i + 1];
                z[i] -= v;
            }
            if i + 2 < m {
                let v = self.l2[i + 2] * z[i + 2];
                z[i] -= v;
            }
        }
        z
    }

    /// Entries of the inverse within bandwidth 2: `(inv[i][i], inv[i][i+1], inv[i][i+2])`.
    fn inverse_band(&self) -> (Vec<T>, Vec<T>, Vec<T>) {
        let m = self.d.len();
        let mut c0 = vec![T::zero(); m];
        let mut c1 = vec![T::zero(); m];
        let mut c2 = vec![T::zero(); m];
        for i in (0..m).rev() {
            let a = if i + 1 < m { self.l1[i + 1] } else { T::zero() };
            let b = if i + 2 < m { self.l2[i + 2] } else { T::zero() };
            let s11 = if i + 1 < m { c0[i + 1] } else { T::zero() };
            let s12 = if i + 2 < m { c1[i + 1] } else { T::zero() };
            let s22 = if i + 2 < m { c0[i + 2] } else { T::zero() };
            if i + 2 < m {
                c2[i] = -a * s12 - b * s22;
            }
            if i + 1 < m {
                c1[i] = -a * s11 - b * s12;
            }
            c0[i] = T::one() / self.d[i] - a * c1[i] - b * c2[i];
        }
        (c0, c1, c2)
    }
}

/// Fit at one smoothing weight.
struct Solved<T> {
    g: Vec<T>,
    gamma: Vec<T>,
    edf: T,
}

fn solve_at<T: Scalar>(sys: &ReinschSystem<T>, ybar: &[T], lambda: T, want_trace: bool) -> Result<Solved<T>> {
    let m = sys.r0.len();
    let n = m + 2;
    let b0: Vec<T> = (0..m).map(|j| sys.r0[j] + lambda * sys.s0[j]).collect();
    let b1: Vec<T> = (0..m).map(|j| sys.r1[j] + lambda * sys.s1[j]).collect();
    let b2: Vec<T> = (0..m).map(|j| lambda * sys.s2[j]).collect();
    let ldl = BandLdl::factor(&b0, &b1, &b2)?;
    let gamma = ldl.solve(&sys.qty);
    // g = ybar - lambda W^-1 Q gamma
    let mut qg = vec![T::zero(); n];
    for j in 0..m {
        let c = sys.q_col(j);
        qg[j] += c[0] * gamma[j];
        qg[j + 1] += c[1] * gamma[j];
        qg[j + 2] += c[2] * gamma[j];
    }
    let g: Vec<T> = (0..n).map(|i| ybar[i] - lambda * sys.winv[i] * qg[i]).collect();

    let edf = if want_trace {
        let (c0, c1, c2) = ldl.inverse_band();
        let inv = |a: usize, b: usize| -> T {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            match hi - lo {
                0 => c0[lo],
                1 => c1[lo],
                2 => c2[lo],
                _ => T::zero(),
            }
        };
        // diag(Q B^-1 Q'): row i of Q touches columns i-2, i-1, i
        let mut tr = T::zero();
        for i in 0..n {
            let mut cols: [(usize, T); 3] = [(0, T::zero()); 3];
            let mut k = 0;
            for j in i.saturating_sub(2)..=i.min(m - 1) {
                if j + 2 < i {
                    continue;
                }
                cols[k] = (j, sys.q_col(j)[i - j]);
                k += 1;
            }
            let mut acc = T::zero();
            for a in 0..k {
                for b in 0..k {
                    acc += cols[a].1 * cols[b].1 * inv(cols[a].0, cols[b].0);
                }
            }
            tr += sys.winv[i] * acc;
        }
        T::from_count(n) - lambda * tr
    } else {
        T::nan()
    };
    Ok(Solved { g, gamma, edf })
}

fn gcv_score<T: Scalar>(c: &Collapsed<T>, s: &Solved<T>) -> T {
    let n_obs = T::from_count(c.n_obs);
    let rss = c
        .ybar
        .iter()
        .zip(&s.g)
        .zip(&c.w)
        .map(|((&y, &g), &w)| w * (y - g) * (y - g))
        .sum::<T>()
        + c.within_ss;
    let denom = T::one() - s.edf / n_obs;
    rss / n_obs / (denom * denom)
}

/// Smoothing weight at which the smoother trace equals `target`, by bisection in `ln(lambda)`.
fn lambda_for_edf<T: Scalar>(sys: &ReinschSystem<T>, ybar: &[T], target: T) -> Result<T> {
    let edf = |ln_l: T| -> Result<T> { Ok(solve_at(sys, ybar, ln_l.exp(), true)?.edf) };
    let mut lo = T::lit(-30.0);
    let mut hi = T::lit(30.0);
    // edf decreases in lambda
    if edf(lo)? <= target {
        return Ok(lo.exp());
    }
    if edf(hi)? >= target {
        return Ok(hi.exp());
    }
    for _ in 0..40 {
        let mid = (lo + hi) / T::lit(2.0);
        if edf(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < T::lit(1e-3) {
            break;
        }
    }
    Ok(((lo + hi) / T::lit(2.0)).exp())
}

/// GCV curve over the logarithmic grid, smooth end first.
fn gcv_curve_collapsed<T: Scalar>(c: &Collapsed<T>, sys: &ReinschSystem<T>) -> Result<Vec<GcvPoint<T>>> {
    let n_distinct = c.x.len();
    let hi_target = (T::from_count(c.n_obs) / T::lit(2.0))
        .min(T::from_count(n_distinct) - T::lit(0.5))
        .max(T::lit(EDF_SMOOTH_END + 0.5));
    let lam_smooth = lambda_for_edf(sys, &c.ybar, T::lit(EDF_SMOOTH_END))?;
    let lam_rough = lambda_for_edf(sys, &c.ybar, hi_target)?;
    let (a, b) = (lam_smooth.ln(), lam_rough.ln());
    let steps = T::from_count(GCV_GRID_SIZE - 1);
    (0..GCV_GRID_SIZE)
        .map(|i| {
            let lambda = (a + (b - a) * T::from_count(i) / steps).exp();
            let s = solve_at(sys, &c.ybar, lambda, true)?;
            Ok(GcvPoint {
                lambda,
                edf: s.edf,
                score: gcv_score(c, &s),
            })
        })
        .collect()
}

/// GCV scores over the default grid for `(x, y)`.
pub fn gcv_curve<T: Scalar>(x: &[T], y: &[T]) -> Result<Vec<GcvPoint<T>>> {
    let c = collapse(x, y, None)?;
    let sys = ReinschSystem::new(&c.u, &c.ybar, &c.w);
    gcv_curve_collapsed(&c, &sys)
}

/// Fits a natural cubic smoothing spline of `y` on `x`.
pub fn fit_smoothing_spline<T: Scalar>(x: &[T], y: &[T], smoothing: Smoothing<T>) -> Result<SplineFit<T>> {
    fit_weighted_smoothing_spline(x, y, None, smoothing)
}

/// Weighted fit minimizing `sum_i w_i (y_i - f(x_i))^2 + lambda * int f''^2`.
///
/// Weights are rescaled to mean one, so `lambda` is comparable with the
/// unweighted fit and GCV uses the weighted residual sum of squares.
pub fn fit_weighted_smoothing_spline<T: Scalar>(
    x: &[T],
    y: &[T],
    weights: Option<&[T]>,
    smoothing: Smoothing<T>,
) -> Result<SplineFit<T>> {
    let c = collapse(x, y, weights)?;
    let sys = ReinschSystem::new(&c.u, &c.ybar, &c.w);
    let (lambda, grid) = match smoothing {
        Smoothing::Fixed(l) => {
            if !(l >= T::zero()) || !l.is_finite() {
                return Err(ParError::InvalidParams(format!(
                    "smoothing weight {l} must be finite and >= 0"
                )));
            }
            (l, Vec::new())
        }
        Smoothing::Gcv => {
            let grid = gcv_curve_collapsed(&c, &sys)?;
            let best = grid
                .iter()
                .fold(None::<GcvPoint<T>>, |acc, p| match acc {
                    Some(b) if b.score <= p.score => Some(b),
                    _ => Some(*p),
                })
                .expect("non-empty grid");
            (best.lambda, grid)
        }
    };
    let solved = solve_at(&sys, &c.ybar, lambda, true)?;
    Ok(build_fit(&c, &solved, lambda, grid))
}

fn build_fit<T: Scalar>(c: &Collapsed<T>, s: &Solved<T>, lambda: T, grid: Vec<GcvPoint<T>>) -> SplineFit<T> {
    let n = c.x.len();
    let r2 = c.range * c.range;
    // second derivatives in original units; natural ends
    let mut gam = vec![T::zero(); n];
    for (j, &v) in s.gamma.iter().enumerate() {
        gam[j + 1] = v / r2;
    }
    let two = T::lit(2.0);
    let six = T::lit(6.0);
    let coefficients = (0..n - 1)
        .map(|i| {
            let h = c.x[i + 1] - c.x[i];
            let a = s.g[i];
            let b = (s.g[i + 1] - s.g[i]) / h - h * (two * gam[i] + gam[i + 1]) / six;
            let cc = gam[i] / two;
            let d = (gam[i + 1] - gam[i]) / (six * h);
            [a, b, cc, d]
        })
        .collect();
    let fitted_values = c.group_of.iter().map(|&g| s.g[g]).collect();
    let _ = c.x_min;
    SplineFit {
        knots: c.x.clone(),
        coefficients,
        lambda,
        edf: s.edf,
        fitted_values,
        gcv_grid: grid,
    }
}

impl<T: Scalar> SplineFit<T> {
    fn interval(&self, x0: T) -> usize {
        let n = self.knots.len();
        match self.knots.binary_search_by(|k| k.partial_cmp(&x0).expect("finite")) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    fn end_slope(&self) -> T {
        let [_, b, c, d] = *self.coefficients.last().expect("intervals");
        let h = self.knots[self.knots.len() - 1] - self.knots[self.knots.len() - 2];
        b + T::lit(2.0) * c * h + T::lit(3.0) * d * h * h
    }

    fn end_value(&self) -> T {
        let [a, b, c, d] = *self.coefficients.last().expect("intervals");
        let h = self.knots[self.knots.len() - 1] - self.knots[self.knots.len() - 2];
        a + h * (b + h * (c + h * d))
    }

    /// Fitted function; linear beyond the boundary knots.
    pub fn evaluate(&self, x0: T) -> T {
        let first = self.knots[0];
        let last = *self.knots.last().expect("knots");
        if x0 < first {
            let [a, b, _, _] = self.coefficients[0];
            return a + b * (x0 - first);
        }
        if x0 > last {
            return self.end_value() + self.end_slope() * (x0 - last);
        }
        let i = self.interval(x0);
        let [a, b, c, d] = self.coefficients[i];
        let s = x0 - self.knots[i];
        a + s * (b + s * (c + s * d))
    }

    /// Exact first derivative of the fitted piecewise cubic.
    pub fn derivative(&self, x0: T) -> T {
        let first = self.knots[0];
        let last = *self.knots.last().expect("knots");
        if x0 < first {
            return self.coefficients[0][1];
        }
        if x0 > last {
            return self.end_slope();
        }
        let i = self.interval(x0);
        let [_, b, c, d] = self.coefficients[i];
        let s = x0 - self.knots[i];
        b + s * (T::lit(2.0) * c + T::lit(3.0) * d * s)
    }
}

/// First derivative of `fit` at `x0`.
pub fn spline_derivative_at<T: Scalar>(fit: &SplineFit<T>, x0: T) -> Result<T> {
    if !x0.is_finite() {
        return Err(ParError::InvalidParams("non-finite query point".into()));
    }
    Ok(fit.derivative(x0))
}

/// Least-squares line as a fallback for inputs with too few distinct abscissae.
pub fn least_squares_slope<T: Scalar>(x: &[T], y: &[T]) -> Option<T> {
    simple_regression(x, y).map(|(_, b)| b)
}
