//! Small dense linear algebra for the step systems and Vandermonde solves.
//!
//! Sizes here are tiny (a handful of unknowns per Newton step, `s + 1` rows
//! per starting-quadrature solve), so plain LU with partial pivoting is both
//! adequate and easy to audit.

use crate::error::{FviError, Result};

/// Solves `A x = b` in place for a row-major `n x n` matrix.
pub(crate) fn solve_dense(a: &mut [f64], b: &mut [f64]) -> Result<()> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    for col in 0..n {
        let mut pivot = col;
        let mut best = a[col * n + col].abs();
        for row in col + 1..n {
            let cand = a[row * n + col].abs();
            if cand > best {
                best = cand;
                pivot = row;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return Err(FviError::Degenerate(format!(
                "singular {n}x{n} system (pivot {best:.3e} in column {col})"
            )));
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            b.swap(col, pivot);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / d;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[row * n + j] -= factor * a[col * n + j];
            }
            b[row] -= factor * b[col];
        }
    }
    for row in (0..n).rev() {
        let mut sum = b[row];
        for j in row + 1..n {
            sum -= a[row * n + j] * b[j];
        }
        b[row] = sum / a[row * n + row];
    }
    Ok(())
}

/// Infinity-norm condition estimate via the explicit inverse.
pub(crate) fn condition_inf(a: &[f64], n: usize) -> f64 {
    let norm = inf_norm(a, n);
    let mut inv = vec![0.0; n * n];
    for col in 0..n {
        let mut rhs = vec![0.0; n];
        rhs[col] = 1.0;
        let mut work = a.to_vec();
        if solve_dense(&mut work, &mut rhs).is_err() {
            return f64::INFINITY;
        }
        for row in 0..n {
            inv[row * n + col] = rhs[row];
        }
    }
    norm * inf_norm(&inv, n)
}

fn inf_norm(a: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|row| (0..n).map(|j| a[row * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Neumaier compensated summation. Used where the terms cancel almost
/// completely (starting-quadrature right-hand sides) and plain summation
/// would leave O(N eps) noise that later gets amplified by `h^{-alpha-q}`.
pub(crate) fn compensated_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// Max-norm, propagating NaN (`f64::max` would silently drop it).
pub(crate) fn inf_norm_vec(v: &[f64]) -> f64 {
    let mut m = 0.0_f64;
    for x in v {
        if x.is_nan() {
            return f64::NAN;
        }
        m = m.max(x.abs());
    }
    m
}
