//! Exhaustive maximum-likelihood detection over TACs and symbol vectors.
//!
//! The TAC is constant over a frame, so per-slot minimal residuals are summed
//! per TAC and the TAC with the smallest total wins.

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::linalg::ComplexMatrix;
use crate::phy::{QamConstellation, TacTable};

#[derive(Clone, Debug, PartialEq)]
pub struct MlDecision {
    pub tac_index: usize,
    /// Per-slot argmin symbols, `N_u x T`.
    pub s_hat: ComplexMatrix,
    /// Summed residual `sum_j ||y_j - H_J s_j||^2` at the decision.
    pub metric: f64,
}

/// Hypotheses searched per slot, `N_L * M^N_u` (saturating).
pub fn ml_hypotheses(table: &TacTable, qam: &QamConstellation) -> u128 {
    (qam.order() as u128)
        .checked_pow(table.n_u() as u32)
        .and_then(|v| v.checked_mul(table.len() as u128))
        .unwrap_or(u128::MAX)
}

/// Labels of symbol vector `combo`, first link in the most significant digit.
fn combo_labels(combo: usize, m: usize, n_u: usize, out: &mut [usize]) {
    let mut c = combo;
    for u in (0..n_u).rev() {
        out[u] = c % m;
        c /= m;
    }
}

fn check_dims(y: &ComplexMatrix, h: &ComplexMatrix, table: &TacTable) -> Result<()> {
    if y.rows() != h.rows() {
        return Err(invalid(format!("received block has {} rows, channel has {}", y.rows(), h.rows())));
    }
    if h.cols() != table.n_t() {
        return Err(invalid(format!("channel has {} columns, table expects {}", h.cols(), table.n_t())));
    }
    Ok(())
}

/// Best per-slot symbols and total residual for one TAC hypothesis.
pub fn ml_tac_cost(
    y: &ComplexMatrix,
    h: &ComplexMatrix,
    table: &TacTable,
    qam: &QamConstellation,
    tac_index: usize,
) -> Result<(f64, ComplexMatrix)> {
    check_dims(y, h, table)?;
    if tac_index >= table.len() {
        return Err(invalid(format!("TAC index {tac_index} outside table of {}", table.len())));
    }
    let n_r = h.rows();
    let n_u = table.n_u();
    let m = qam.order();
    let combos = m.checked_pow(n_u as u32).ok_or_else(|| invalid("symbol search space overflows"))?;
    let cols = table.columns(tac_index);

    // H_J s for every symbol vector, stored contiguously
    let mut labels = vec![0usize; n_u];
    let mut cand = vec![Complex64::new(0.0, 0.0); combos * n_r];
    for c in 0..combos {
        combo_labels(c, m, n_u, &mut labels);
        let out = &mut cand[c * n_r..(c + 1) * n_r];
        for (u, &l) in labels.iter().enumerate() {
            let s = qam.point(l);
            for (r, o) in out.iter_mut().enumerate() {
                *o += h[(r, cols[u])] * s;
            }
        }
    }

    let slots = y.cols();
    let mut s_hat = ComplexMatrix::zeros(n_u, slots);
    let mut total = 0.0;
    let mut yj = vec![Complex64::new(0.0, 0.0); n_r];
    for j in 0..slots {
        for (r, v) in yj.iter_mut().enumerate() {
            *v = y[(r, j)];
        }
        let mut best = 0;
        let mut best_res = f64::INFINITY;
        for c in 0..combos {
            let res: f64 = cand[c * n_r..(c + 1) * n_r]
                .iter()
                .zip(&yj)
                .map(|(a, b)| (b - a).norm_sqr())
                .sum();
            if res < best_res {
                best_res = res;
                best = c;
            }
        }
        total += best_res;
        combo_labels(best, m, n_u, &mut labels);
        for (u, &l) in labels.iter().enumerate() {
            s_hat[(u, j)] = qam.point(l);
        }
    }
    Ok((total, s_hat))
}

/// Frame-level ML decision. Lowest TAC index and lowest symbol label win ties.
pub fn ml_detect(y: &ComplexMatrix, h: &ComplexMatrix, table: &TacTable, qam: &QamConstellation) -> Result<MlDecision> {
    check_dims(y, h, table)?;
    let mut best: Option<MlDecision> = None;
    for t in 0..table.len() {
        let (metric, s_hat) = ml_tac_cost(y, h, table, qam, t)?;
        if best.as_ref().map_or(true, |b| metric < b.metric) {
            best = Some(MlDecision { tac_index: t, s_hat, metric });
        }
    }
    best.ok_or_else(|| invalid("empty TAC table"))
}
