//! The two-stage learned detector: an activation-pattern CNN (AAPD) picks the
//! antenna combination from `Y` alone, ZF recovers the symbols with the
//! estimated channel, and a residual CNN (SE) refines them.

mod arch;
mod data;
mod detect;
mod train;

pub use arch::{aapd_input, aapd_specs, build_aapd, build_se, se_input, se_specs, AapdWidths, SeWidths, Variant};
pub use data::{frames_tensor, AapdSet, SeSet};
pub use detect::{aapd_probabilities, enhance, predict_tac, tac_from_probabilities, ImRecoNet, INFER_CHUNK};
pub use train::{
    evaluate_aapd, evaluate_se, se_gain, train_aapd, train_full, train_se, zf_inputs, LogEvent, Stage, StageReport,
    TrainConfig, TrainStatus, TrainedPair,
};

#[cfg(test)]
mod tests;
