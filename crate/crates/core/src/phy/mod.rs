//! IM-MIMO physical layer: codebooks, modulation, framing, channels, metrics.

mod channel;
mod frame;
mod metrics;
mod qam;
mod record;
mod tac;

pub use channel::{
    apply_channel, corrupt_csi, exponential_correlation, make_correlated, noise_variance,
    pilot_error_variance, rayleigh_channel, ChannelRealization,
};
pub use frame::{assemble_frame, demap_frame, frame_bit_count, hard_decide, random_bits, spread_symbols, Frame};
pub use metrics::{aap_accuracy, ber, bit_errors, ErrorCounter};
pub use qam::QamConstellation;
pub use record::{simulate_frame, FrameRecord};
pub use tac::{binomial, legal_tac_count, top_k, Aap, TacStrategy, TacTable};
