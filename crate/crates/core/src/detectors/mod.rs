//! Classical detectors: exhaustive ML, SOMP support recovery and ZF symbol
//! estimation on a known support.

mod ml;
mod pipeline;
mod somp;
mod zf;

pub use ml::{ml_detect, ml_hypotheses, ml_tac_cost, MlDecision};
pub use pipeline::{classical_pipeline, ClassicalMethod, Detection};
pub use somp::{exhaustive_support, somp_detect, somp_trace, SompTrace};
pub use zf::{zf_estimate, zf_matrix};

/// Per-slot hypothesis count above which ML is considered impractical.
pub const ML_HYPOTHESIS_WARN: u128 = 10_000_000;
