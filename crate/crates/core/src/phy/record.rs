//! A fully simulated frame: what was sent, what arrived, and the channel.

use super::{apply_channel, assemble_frame, frame_bit_count, random_bits, Aap, ChannelRealization, QamConstellation, TacTable};
use crate::error::Result;
use crate::linalg::{ComplexMatrix, Rng};

#[derive(Clone, Debug, PartialEq)]
pub struct FrameRecord {
    pub bits: Vec<u8>,
    pub tac_index: usize,
    /// Received frame, `N_r x T`.
    pub y: ComplexMatrix,
    /// True channel.
    pub h: ComplexMatrix,
    /// Receiver estimate of `h`.
    pub h_est: ComplexMatrix,
    /// Transmitted symbols, `N_u x T`.
    pub s: ComplexMatrix,
}

impl FrameRecord {
    pub fn aap(&self, table: &TacTable) -> Aap {
        table.aap(self.tac_index)
    }
}

/// Draws random bits, assembles the frame and passes it through `chan`.
pub fn simulate_frame(
    table: &TacTable,
    qam: &QamConstellation,
    slots: usize,
    chan: &ChannelRealization,
    snr_db: f64,
    rng: &mut Rng,
) -> Result<FrameRecord> {
    let bits = random_bits(rng, frame_bit_count(table, qam, slots));
    let frame = assemble_frame(&bits, table, qam, slots)?;
    let y = apply_channel(&frame, chan, snr_db, rng)?;
    Ok(FrameRecord {
        bits,
        tac_index: frame.tac_index,
        y,
        h: chan.h.clone(),
        h_est: chan.h_est.clone(),
        s: frame.s,
    })
}
