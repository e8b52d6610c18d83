use crate::error::{invalid, Result};
use crate::linalg::{ls_solve, ComplexMatrix};

fn support_columns(h: &ComplexMatrix, support: &[usize]) -> Result<ComplexMatrix> {
    if support.is_empty() {
        return Err(invalid("empty support"));
    }
    if let Some(&a) = support.iter().find(|&&a| a == 0 || a > h.cols()) {
        return Err(invalid(format!("antenna {a} outside 1..={}", h.cols())));
    }
    if support.len() > h.rows() {
        return Err(invalid(format!(
            "support of size {} exceeds {} receive antennas",
            support.len(),
            h.rows()
        )));
    }
    let cols: Vec<usize> = support.iter().map(|a| a - 1).collect();
    Ok(h.select_columns(&cols))
}

/// Zero-forcing (interference cancellation) matrix `(H_J^H H_J)^{-1} H_J^H`
/// for a 1-based support `J`.
pub fn zf_matrix(h: &ComplexMatrix, support: &[usize]) -> Result<ComplexMatrix> {
    let hj = support_columns(h, support)?;
    ls_solve(&hj, &ComplexMatrix::identity(h.rows()))
}

/// Least-squares symbol estimate `N_u x T` on the given support.
pub fn zf_estimate(y: &ComplexMatrix, h: &ComplexMatrix, support: &[usize]) -> Result<ComplexMatrix> {
    if y.rows() != h.rows() {
        return Err(invalid(format!(
            "received block has {} rows, channel has {}",
            y.rows(),
            h.rows()
        )));
    }
    let hj = support_columns(h, support)?;
    ls_solve(&hj, y)
}
