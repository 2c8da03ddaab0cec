//! Small dense helpers: row-major matrices and Cholesky solves for normal equations.

use crate::error::{ParError, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(ParError::Dimension(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(ParError::Dimension(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Rows `range` as a new matrix.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            rows: range.len(),
            cols: self.cols,
            data: self.data[range.start * self.cols..range.end * self.cols].to_vec(),
        }
    }

    /// Prepends a column of ones.
    pub fn with_intercept(&self) -> Self {
        let cols = self.cols + 1;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.push(T::one());
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: self.rows,
            cols,
            data,
        }
    }

    /// `self * v`.
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Solves `A x = b` in place for symmetric positive definite `A` (n x n, row-major).
/// `a` is overwritten with its Cholesky factor, `b` with the solution.
pub fn cholesky_solve<T: Scalar>(a: &mut [T], n: usize, b: &mut [T]) -> Result<()> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let scale = (0..n)
        .map(|i| a[i * n + i].abs())
        .fold(T::zero(), T::max)
        .max(T::min_positive_value());
    let tiny = scale * T::epsilon() * T::lit(16.0);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > tiny) {
            return Err(ParError::Singular("normal equations"));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    Ok(())
}

/// Weighted least squares: minimizes `sum w_i (y_i - x_i' beta)^2`.
pub fn weighted_least_squares<T: Scalar>(design: &Matrix<T>, y: &[T], w: &[T]) -> Result<Vec<T>> {
    let k = design.cols();
    let mut xtwx = vec![T::zero(); k * k];
    let mut xtwy = vec![T::zero(); k];
    for i in 0..design.rows() {
        let row = design.row(i);
        let wi = w[i];
        for a in 0..k {
            let xa = row[a] * wi;
            xtwy[a] += xa * y[i];
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
    cholesky_solve(&mut xtwx, k, &mut xtwy)?;
    Ok(xtwy)
}

/// Ordinary least-squares slope and intercept of `y` on `x`.
pub fn simple_regression<T: Scalar>(x: &[T], y: &[T]) -> Option<(T, T)> {
    let n = T::from_count(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if !(sxx > T::zero()) {
        return None;
    }
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}
