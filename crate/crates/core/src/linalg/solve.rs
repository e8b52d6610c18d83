use num_complex::Complex64;

use super::ComplexMatrix;
use crate::error::{invalid, Error, Result};

/// Relative pivot size below which a factorization is declared rank deficient.
const PIVOT_TOL: f64 = 1e-12;

/// Least-squares solution of `A X = B` for tall, full-column-rank `A`.
///
/// Householder QR on `A`, with the reflections applied to `B` alongside, so
/// the normal-equation matrix `A^H A` is never formed. The result equals
/// `(A^H A)^{-1} A^H B`.
pub fn ls_solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (m, n) = a.shape();
    if m < n {
        return Err(invalid(format!("ls_solve needs rows >= cols, got {m}x{n}")));
    }
    if b.rows() != m {
        return Err(invalid(format!(
            "right-hand side has {} rows, expected {m}",
            b.rows()
        )));
    }
    let k = b.cols();
    let mut r = a.clone();
    let mut qb = b.clone();
    let mut diag = vec![0.0f64; n];

    for col in 0..n {
        let norm = (col..m).map(|i| r[(i, col)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Singular(format!("column {col} is zero after elimination")));
        }
        let x0 = r[(col, col)];
        let phase = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * norm;
        let mut v: Vec<Complex64> = (col..m).map(|i| r[(i, col)]).collect();
        v[0] -= alpha;
        let vnorm = v.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
        if vnorm > 0.0 {
            for z in &mut v {
                *z /= vnorm;
            }
            reflect(&mut r, &v, col, col);
            reflect(&mut qb, &v, col, 0);
        }
        r[(col, col)] = alpha;
        for i in col + 1..m {
            r[(i, col)] = Complex64::new(0.0, 0.0);
        }
        diag[col] = alpha.norm();
    }

    let max_pivot = diag.iter().copied().fold(0.0, f64::max);
    if let Some(i) = diag.iter().position(|&d| d < PIVOT_TOL * max_pivot) {
        return Err(Error::Singular(format!(
            "pivot {i} is {:.3e} against max {:.3e}",
            diag[i], max_pivot
        )));
    }

    let mut x = ComplexMatrix::zeros(n, k);
    for c in 0..k {
        for i in (0..n).rev() {
            let mut acc = qb[(i, c)];
            for j in i + 1..n {
                acc -= r[(i, j)] * x[(j, c)];
            }
            x[(i, c)] = acc / r[(i, i)];
        }
    }
    Ok(x)
}

/// Applies `I - 2 v v^H` to rows `row0..` of `m`, columns `col0..`.
fn reflect(m: &mut ComplexMatrix, v: &[Complex64], row0: usize, col0: usize) {
    for c in col0..m.cols() {
        let mut dot = Complex64::new(0.0, 0.0);
        for (i, vi) in v.iter().enumerate() {
            dot += vi.conj() * m[(row0 + i, c)];
        }
        let dot = dot * 2.0;
        for (i, vi) in v.iter().enumerate() {
            m[(row0 + i, c)] -= vi * dot;
        }
    }
}

/// Lower-triangular `L` with `L L^H = R` for Hermitian positive definite `R`.
pub fn cholesky_factor(r: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (n, m) = r.shape();
    if n != m {
        return Err(invalid(format!("cholesky needs a square matrix, got {n}x{m}")));
    }
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = r[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return Err(Error::Decomposition(format!(
                "non-positive pivot {d:.3e} at {j}; matrix is not positive definite"
            )));
        }
        let d = d.sqrt();
        l[(j, j)] = Complex64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = r[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}
