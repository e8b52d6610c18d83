//! Training sets in tensor form.

use crate::cvnn::Tensor;
use crate::error::{invalid, Result};
use crate::linalg::ComplexMatrix;
use crate::phy::{FrameRecord, TacTable};

/// Received frames with their activation patterns.
#[derive(Clone, Debug)]
pub struct AapdSet {
    pub inputs: Tensor,
    /// Flattened `[frames, N_t]` 0/1 labels.
    pub labels: Vec<f64>,
    pub tacs: Vec<usize>,
}

impl AapdSet {
    pub fn from_records(records: &[FrameRecord], table: &TacTable) -> Result<Self> {
        let first = records.first().ok_or_else(|| invalid("empty AAPD dataset"))?;
        let (n_r, t) = first.y.shape();
        let ys: Vec<&ComplexMatrix> = records.iter().map(|r| &r.y).collect();
        let inputs = frames_tensor(&ys, n_r, t)?;
        let mut labels = Vec::with_capacity(records.len() * table.n_t());
        for r in records {
            if r.tac_index >= table.len() {
                return Err(invalid(format!("TAC index {} outside table", r.tac_index)));
            }
            labels.extend(table.aap(r.tac_index).flags().iter().map(|&g| f64::from(g)));
        }
        Ok(Self { inputs, labels, tacs: records.iter().map(|r| r.tac_index).collect() })
    }

    pub fn len(&self) -> usize {
        self.tacs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tacs.is_empty()
    }
}

/// ZF estimates paired with the transmitted symbols.
#[derive(Clone, Debug)]
pub struct SeSet {
    pub inputs: Tensor,
    pub targets: Tensor,
}

impl SeSet {
    pub fn new(estimates: &[ComplexMatrix], truth: &[&ComplexMatrix]) -> Result<Self> {
        if estimates.is_empty() || estimates.len() != truth.len() {
            return Err(invalid(format!(
                "SE dataset needs matching non-empty lists, got {} and {}",
                estimates.len(),
                truth.len()
            )));
        }
        let (n_u, t) = estimates[0].shape();
        let est: Vec<&ComplexMatrix> = estimates.iter().collect();
        Ok(Self { inputs: frames_tensor(&est, n_u, t)?, targets: frames_tensor(truth, n_u, t)? })
    }

    pub fn len(&self) -> usize {
        self.inputs.batch()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Packs equally sized matrices into a `[batch, 2, rows, cols]` planar tensor.
pub fn frames_tensor(mats: &[&ComplexMatrix], rows: usize, cols: usize) -> Result<Tensor> {
    let mut data = Vec::with_capacity(mats.len());
    for m in mats {
        if m.shape() != (rows, cols) {
            return Err(invalid(format!("matrix is {:?}, expected ({rows}, {cols})", m.shape())));
        }
        data.push(m.data());
    }
    Tensor::from_complex(&[1, rows, cols], &data)
}

/// Rows `idx` of a batch tensor.
pub(crate) fn gather(t: &Tensor, idx: &[usize]) -> Tensor {
    let mut shape = t.shape().to_vec();
    shape[0] = idx.len();
    let mut data = Vec::with_capacity(idx.len() * t.sample_len());
    for &i in idx {
        data.extend_from_slice(t.sample(i));
    }
    Tensor::from_vec(&shape, data).expect("consistent shape")
}

pub(crate) fn gather_labels(labels: &[f64], width: usize, idx: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(idx.len() * width);
    for &i in idx {
        out.extend_from_slice(&labels[i * width..(i + 1) * width]);
    }
    out
}
