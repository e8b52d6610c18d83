//! Frame assembly and the inverse bit demapping.
//!
//! Bit layout of one frame: `log2 N_L` spatial bits (MSB first, selecting the
//! TAC), followed by `N_u * d` symbol bits for every slot. Within a slot the
//! bits are consumed link by link, so link `u` of slot `j` takes bits
//! `b1 + (j * N_u + u) * d ..`.

use num_complex::Complex64;

use super::{QamConstellation, TacTable};
use crate::error::{invalid, Result};
use crate::linalg::{ComplexMatrix, Rng};

/// One IM-MIMO frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub bits: Vec<u8>,
    pub tac_index: usize,
    /// Transmitted symbols, `N_u x T`.
    pub s: ComplexMatrix,
    /// Zero-padded transmit matrix, `N_t x T`.
    pub x: ComplexMatrix,
}

impl Frame {
    pub fn slots(&self) -> usize {
        self.s.cols()
    }
}

/// Total bits carried by one frame.
pub fn frame_bit_count(table: &TacTable, qam: &QamConstellation, slots: usize) -> usize {
    table.spatial_bits() + table.n_u() * qam.bits_per_symbol() * slots
}

pub fn random_bits(rng: &mut Rng, n: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let word = rng.next_u64();
        let take = (n - out.len()).min(64);
        out.extend((0..take).map(|i| ((word >> (63 - i)) & 1) as u8));
    }
    out
}

/// Places the `N_u x T` symbols onto the TAC rows of an `N_t x T` matrix.
pub fn spread_symbols(s: &ComplexMatrix, antennas: &[usize], n_t: usize) -> ComplexMatrix {
    let mut x = ComplexMatrix::zeros(n_t, s.cols());
    for (u, &a) in antennas.iter().enumerate() {
        for j in 0..s.cols() {
            x[(a - 1, j)] = s[(u, j)];
        }
    }
    x
}

pub fn assemble_frame(
    bits: &[u8],
    table: &TacTable,
    qam: &QamConstellation,
    slots: usize,
) -> Result<Frame> {
    let expected = frame_bit_count(table, qam, slots);
    if bits.len() != expected {
        return Err(invalid(format!(
            "frame needs {expected} bits, got {}",
            bits.len()
        )));
    }
    if slots == 0 {
        return Err(invalid("frame needs at least one slot"));
    }
    let b1 = table.spatial_bits();
    let d = qam.bits_per_symbol();
    let n_u = table.n_u();
    let tac_index = table.index_from_bits(&bits[..b1]);
    let mut s = ComplexMatrix::zeros(n_u, slots);
    for j in 0..slots {
        for u in 0..n_u {
            let start = b1 + (j * n_u + u) * d;
            s[(u, j)] = qam.map_bits(&bits[start..start + d]);
        }
    }
    let x = spread_symbols(&s, table.tac(tac_index), table.n_t());
    Ok(Frame {
        bits: bits.to_vec(),
        tac_index,
        s,
        x,
    })
}

/// Inverse of [`assemble_frame`] with hard nearest-point symbol decisions.
pub fn demap_frame(
    tac_index: usize,
    s_hat: &ComplexMatrix,
    table: &TacTable,
    qam: &QamConstellation,
) -> Vec<u8> {
    let (n_u, slots) = s_hat.shape();
    let mut out = table.bits_from_index(tac_index);
    out.reserve(n_u * slots * qam.bits_per_symbol());
    for j in 0..slots {
        for u in 0..n_u {
            qam.demap_into(s_hat[(u, j)], &mut out);
        }
    }
    out
}

/// Snaps every entry to its nearest constellation point.
pub fn hard_decide(s_hat: &ComplexMatrix, qam: &QamConstellation) -> ComplexMatrix {
    let data: Vec<Complex64> = s_hat.data().iter().map(|&z| qam.nearest_point(z)).collect();
    ComplexMatrix::from_vec(s_hat.rows(), s_hat.cols(), data).expect("same shape")
}
