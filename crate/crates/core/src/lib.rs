//! Index-modulation MIMO toolkit.
//!
//! * [`linalg`]: complex matrices, seeded sampling, least squares.
//! * [`phy`]: antenna-combination codebooks, QAM, frame assembly, channels.
//! * [`detectors`]: maximum-likelihood, SOMP and zero-forcing detection.
//! * [`cvnn`]: a small complex-valued CNN engine with real-valued twins.
//! * [`imreconet`]: the two-stage learned detector and its training.
//! * [`harness`]: configuration, dataset files and experiment runners.

pub mod cvnn;
pub mod detectors;
pub mod error;
pub mod harness;
pub mod imreconet;
pub mod linalg;
pub mod phy;

pub use error::{Error, Result};
