use super::{ml_detect, somp_detect, zf_estimate};
use crate::error::{invalid, Result};
use crate::linalg::ComplexMatrix;
use crate::phy::{demap_frame, QamConstellation, TacTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClassicalMethod {
    Ml,
    Somp,
}

impl ClassicalMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ml => "ml",
            Self::Somp => "somp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ml" => Ok(Self::Ml),
            "somp" => Ok(Self::Somp),
            other => Err(invalid(format!("unknown classical detector '{other}'"))),
        }
    }
}

/// Output of a complete detector: TAC decision, symbol estimate and bits.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub tac_index: usize,
    pub s_hat: ComplexMatrix,
    pub bits: Vec<u8>,
}

pub fn classical_pipeline(
    y: &ComplexMatrix,
    h_est: &ComplexMatrix,
    table: &TacTable,
    qam: &QamConstellation,
    method: ClassicalMethod,
) -> Result<Detection> {
    let (tac_index, s_hat) = match method {
        ClassicalMethod::Ml => {
            let d = ml_detect(y, h_est, table, qam)?;
            (d.tac_index, d.s_hat)
        }
        ClassicalMethod::Somp => {
            let support = somp_detect(y, h_est, table.n_u())?;
            let t = table.legalize_by_overlap(&support);
            (t, zf_estimate(y, h_est, table.tac(t))?)
        }
    };
    let bits = demap_frame(tac_index, &s_hat, table, qam);
    Ok(Detection { tac_index, s_hat, bits })
}
