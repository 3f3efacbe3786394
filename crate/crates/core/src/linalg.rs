//! Small dense helpers shared by the solvers.
//!
//! Factorisations come from `nalgebra`; this module adds the vector helpers,
//! a checked symmetric eigenvalue wrapper and a Lawson–Hanson NNLS used by the
//! KKT residual check.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_traits::Float;

use crate::{Error, Result};

/// Sweep budget handed to the symmetric eigensolver.
pub const EIGEN_MAX_ITER: usize = 10_000;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn norm2(a: &[f64]) -> f64 {
    Float::sqrt(dot(a, a))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::Dimension {
            what: "eigen input",
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    let eig = SymmetricEigen::try_new(a.clone(), f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::EigenNoConvergence { sweeps: EIGEN_MAX_ITER })?;
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    Ok(ev)
}

/// Non-negative least squares, `min ‖A x − b‖₂` s.t. `x ≥ 0` (Lawson–Hanson).
///
/// `a` is given column-wise: `a[j]` is column `j`, all of length `b.len()`.
/// Returns the solution and the residual vector `A x − b`.
pub fn nnls(a: &[Vec<f64>], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let ncols = a.len();
    let nrows = b.len();
    let mut x = vec![0.0; ncols];
    let mut passive = vec![false; ncols];
    let residual = |x: &[f64]| -> Vec<f64> {
        let mut r: Vec<f64> = b.iter().map(|v| -v).collect();
        for (j, col) in a.iter().enumerate() {
            if x[j] != 0.0 {
                for (ri, cv) in r.iter_mut().zip(col) {
                    *ri += cv * x[j];
                }
            }
        }
        r
    };
    let bnorm = norm_inf(b).max(1.0);
    let col_scale = a.iter().fold(0.0f64, |s, c| s.max(norm_inf(c))).max(1.0);
    let tol = 1e-13 * bnorm * col_scale * (nrows.max(ncols) as f64);
    let max_outer = 3 * ncols + 10;
    for _ in 0..max_outer {
        let r = residual(&x);
        // w = -Aᵀ r is the negative gradient of ½‖Ax-b‖²
        let (best, _) = (0..ncols)
            .filter(|&j| !passive[j])
            .map(|j| (j, -dot(&a[j], &r)))
            .fold((usize::MAX, tol), |acc, c| if c.1 > acc.1 { c } else { acc });
        if best == usize::MAX {
            break;
        }
        passive[best] = true;
        loop {
            let idx: Vec<usize> = (0..ncols).filter(|&j| passive[j]).collect();
            let z = least_squares_subset(a, b, &idx);
            if idx.iter().zip(&z).all(|(_, &zj)| zj > 0.0) {
                for (&j, &zj) in idx.iter().zip(&z) {
                    x[j] = zj;
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (&j, &zj) in idx.iter().zip(&z) {
                if zj <= 0.0 {
                    let denom = x[j] - zj;
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (&j, &zj) in idx.iter().zip(&z) {
                x[j] += alpha * (zj - x[j]);
                if x[j] <= 1e-15 * (1.0 + zj.abs()) {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if idx.iter().all(|&j| !passive[j]) {
                break;
            }
        }
    }
    let r = residual(&x);
    (x, r)
}

/// Least squares on a column subset via regularised normal equations.
fn least_squares_subset(a: &[Vec<f64>], b: &[f64], idx: &[usize]) -> Vec<f64> {
    let k = idx.len();
    let mut g = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    for (p, &i) in idx.iter().enumerate() {
        rhs[p] = dot(&a[i], b);
        for (q, &j) in idx.iter().enumerate().take(p + 1) {
            let v = dot(&a[i], &a[j]);
            g[(p, q)] = v;
            g[(q, p)] = v;
        }
    }
    let trace = g.trace().max(1.0);
    let mut reg = 1e-14 * trace;
    loop {
        let mut gr = g.clone();
        for i in 0..k {
            gr[(i, i)] += reg;
        }
        if let Some(ch) = gr.cholesky() {
            let mut sol = ch.solve(&rhs);
            // one refinement step against the unregularised system
            let res = &rhs - &g * &sol;
            sol += ch.solve(&res);
            return sol.iter().copied().collect();
        }
        reg *= 100.0;
    }
}
