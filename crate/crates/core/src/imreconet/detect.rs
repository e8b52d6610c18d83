//! Inference: activation probabilities, TAC decision, ZF and enhancement.

use super::data::frames_tensor;
use crate::cvnn::{Model, Tensor};
use crate::detectors::{zf_estimate, Detection};
use crate::error::{invalid, Result};
use crate::linalg::ComplexMatrix;
use crate::phy::{demap_frame, QamConstellation, TacTable};

/// Frames per inference batch.
pub const INFER_CHUNK: usize = 256;

/// Activation probabilities for each frame. Only `Y` is consumed.
pub fn aapd_probabilities(aapd: &Model, ys: &[&ComplexMatrix]) -> Result<Vec<Vec<f64>>> {
    let dims = &aapd.input_signature().dims;
    let (rows, cols) = (dims[1], dims[2]);
    let mut out = Vec::with_capacity(ys.len());
    for chunk in ys.chunks(INFER_CHUNK) {
        let p = aapd.predict(&frames_tensor(chunk, rows, cols)?)?;
        out.extend((0..p.batch()).map(|b| p.sample(b).to_vec()));
    }
    Ok(out)
}

/// Top-`N_u` antennas, replaced by the best-scoring legal entry when that set
/// is not in the table.
pub fn tac_from_probabilities(p: &[f64], table: &TacTable) -> Result<usize> {
    if p.len() != table.n_t() {
        return Err(invalid(format!("{} probabilities for {} antennas", p.len(), table.n_t())));
    }
    Ok(table.legalize_by_score(p))
}

pub fn predict_tac(aapd: &Model, y: &ComplexMatrix, table: &TacTable) -> Result<(Vec<f64>, usize)> {
    let p = aapd_probabilities(aapd, &[y])?.pop().expect("one frame");
    let tac = tac_from_probabilities(&p, table)?;
    Ok((p, tac))
}

/// Runs the SE on a list of `N_u x T` estimates.
pub fn enhance(se: &Model, estimates: &[ComplexMatrix]) -> Result<Vec<ComplexMatrix>> {
    let dims = &se.input_signature().dims;
    let (rows, cols) = (dims[1], dims[2]);
    let refs: Vec<&ComplexMatrix> = estimates.iter().collect();
    let mut out = Vec::with_capacity(estimates.len());
    for chunk in refs.chunks(INFER_CHUNK) {
        let s = se.predict(&frames_tensor(chunk, rows, cols)?)?;
        out.extend((0..s.batch()).map(|b| unpack(&s, b, rows, cols)));
    }
    Ok(out)
}

fn unpack(t: &Tensor, b: usize, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_vec(rows, cols, t.complex_sample(b)).expect("consistent shape")
}

/// Trained AAPD and SE pair.
#[derive(Clone, Debug, PartialEq)]
pub struct ImRecoNet {
    pub aapd: Model,
    pub se: Model,
}

impl ImRecoNet {
    pub fn detect_frame(
        &self,
        y: &ComplexMatrix,
        h_est: &ComplexMatrix,
        table: &TacTable,
        qam: &QamConstellation,
    ) -> Result<Detection> {
        Ok(self.detect_batch(&[(y, h_est)], table, qam)?.pop().expect("one frame"))
    }

    /// Detects frames given as `(Y, H_est)` pairs; batched through both nets.
    pub fn detect_batch(
        &self,
        frames: &[(&ComplexMatrix, &ComplexMatrix)],
        table: &TacTable,
        qam: &QamConstellation,
    ) -> Result<Vec<Detection>> {
        let ys: Vec<&ComplexMatrix> = frames.iter().map(|f| f.0).collect();
        let probs = aapd_probabilities(&self.aapd, &ys)?;
        let tacs = probs.iter().map(|p| tac_from_probabilities(p, table)).collect::<Result<Vec<_>>>()?;
        self.detect_with_tacs(frames, &tacs, table, qam)
    }

    /// ZF, enhancement and demapping for externally chosen TACs.
    pub fn detect_with_tacs(
        &self,
        frames: &[(&ComplexMatrix, &ComplexMatrix)],
        tacs: &[usize],
        table: &TacTable,
        qam: &QamConstellation,
    ) -> Result<Vec<Detection>> {
        if frames.len() != tacs.len() {
            return Err(invalid(format!("{} frames but {} TACs", frames.len(), tacs.len())));
        }
        if let Some(t) = tacs.iter().find(|&&t| t >= table.len()) {
            return Err(invalid(format!("TAC index {t} outside table of {}", table.len())));
        }
        let zf = frames
            .iter()
            .zip(tacs)
            .map(|(&(y, h), &t)| zf_estimate(y, h, table.tac(t)))
            .collect::<Result<Vec<_>>>()?;
        let enhanced = enhance(&self.se, &zf)?;
        Ok(enhanced
            .into_iter()
            .zip(tacs)
            .map(|(s_hat, &tac_index)| {
                let bits = demap_frame(tac_index, &s_hat, table, qam);
                Detection { tac_index, s_hat, bits }
            })
            .collect())
    }
}
