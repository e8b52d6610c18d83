//! Simultaneous orthogonal matching pursuit for the shared support of all
//! slots in a frame.

use num_complex::Complex64;

use super::zf::zf_estimate;
use crate::error::{invalid, Result};
use crate::linalg::ComplexMatrix;
use crate::phy::binomial;

/// Support chosen by SOMP along with the residual energy after each step.
#[derive(Clone, Debug, PartialEq)]
pub struct SompTrace {
    /// 1-based, in selection order.
    pub picks: Vec<usize>,
    /// `||R||_F` before the first step and after every step.
    pub residual_norms: Vec<f64>,
}

impl SompTrace {
    /// 1-based support, sorted.
    pub fn support(&self) -> Vec<usize> {
        let mut s = self.picks.clone();
        s.sort_unstable();
        s
    }
}

/// Scores within this relative margin count as tied; the lower index wins.
const TIE_RTOL: f64 = 1e-9;

pub fn somp_trace(y: &ComplexMatrix, h: &ComplexMatrix, n_u: usize) -> Result<SompTrace> {
    let (n_r, n_t) = h.shape();
    if y.rows() != n_r {
        return Err(invalid(format!("received block has {} rows, channel has {n_r}", y.rows())));
    }
    if n_u == 0 || n_u >= n_t {
        return Err(invalid(format!("need 0 < n_u < n_t, got {n_u} of {n_t}")));
    }
    let norms: Vec<f64> = (0..n_t)
        .map(|k| (0..n_r).map(|r| h[(r, k)].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    if let Some(k) = norms.iter().position(|&n| n == 0.0) {
        return Err(invalid(format!("channel column {} has zero norm", k + 1)));
    }

    let mut residual = y.clone();
    let mut picks: Vec<usize> = Vec::with_capacity(n_u);
    let mut residual_norms = vec![residual.frobenius_norm()];
    for _ in 0..n_u {
        let mut best = None;
        let mut best_score = f64::NEG_INFINITY;
        for k in 0..n_t {
            if picks.contains(&(k + 1)) {
                continue;
            }
            let mut score = 0.0;
            for j in 0..residual.cols() {
                let mut dot = Complex64::new(0.0, 0.0);
                for r in 0..n_r {
                    dot += h[(r, k)].conj() * residual[(r, j)];
                }
                score += dot.norm();
            }
            score /= norms[k];
            if score > best_score * (1.0 + TIE_RTOL) {
                best_score = score;
                best = Some(k + 1);
            }
        }
        picks.push(best.expect("at least one unpicked column"));
        let est = zf_estimate(y, h, &picks)?;
        let cols: Vec<usize> = picks.iter().map(|a| a - 1).collect();
        residual = y.sub(&h.select_columns(&cols).matmul(&est)?)?;
        residual_norms.push(residual.frobenius_norm());
    }
    Ok(SompTrace { picks, residual_norms })
}

/// SOMP support estimate: 1-based antenna indices, sorted.
pub fn somp_detect(y: &ComplexMatrix, h: &ComplexMatrix, n_u: usize) -> Result<Vec<usize>> {
    Ok(somp_trace(y, h, n_u)?.support())
}

/// Support of size `n_u` minimising the least-squares residual, found by
/// trying every subset. Lexicographically first subset wins ties.
pub fn exhaustive_support(y: &ComplexMatrix, h: &ComplexMatrix, n_u: usize) -> Result<Vec<usize>> {
    let n_t = h.cols();
    if n_u == 0 || n_u > n_t {
        return Err(invalid(format!("need 0 < n_u <= n_t, got {n_u} of {n_t}")));
    }
    if binomial(n_t, n_u) > 1 << 20 {
        return Err(invalid("too many supports to enumerate"));
    }
    let mut cur: Vec<usize> = (1..=n_u).collect();
    let mut best = cur.clone();
    let mut best_res = f64::INFINITY;
    loop {
        let est = zf_estimate(y, h, &cur)?;
        let cols: Vec<usize> = cur.iter().map(|a| a - 1).collect();
        let res = y.sub(&h.select_columns(&cols).matmul(&est)?)?.norm_sqr();
        if res < best_res {
            best_res = res;
            best = cur.clone();
        }
        let mut i = n_u;
        while i > 0 && cur[i - 1] == n_t - n_u + i {
            i -= 1;
        }
        if i == 0 {
            return Ok(best);
        }
        cur[i - 1] += 1;
        for j in i..n_u {
            cur[j] = cur[j - 1] + 1;
        }
    }
}
