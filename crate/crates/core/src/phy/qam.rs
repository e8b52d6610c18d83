//! Square Gray-coded QAM with unit average energy.
//!
//! A symbol label carries `d = log2 M` bits, MSB first. The first `d/2` bits
//! pick the in-phase level and the rest the quadrature level; along each axis
//! level `i` sits at amplitude `L - 1 - 2i` and carries Gray label `i ^ (i >> 1)`.
//! For 4QAM this gives `00 -> (1 + j)/sqrt(2)`.

use num_complex::Complex64;

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct QamConstellation {
    m: usize,
    bits_per_symbol: usize,
    levels: usize,
    scale: f64,
    points: Vec<Complex64>,
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

impl QamConstellation {
    pub fn new(m: usize) -> Result<Self> {
        if m < 4 || !m.is_power_of_two() || m.trailing_zeros() % 2 != 0 {
            return Err(invalid(format!("QAM order must be a power of 4, got {m}")));
        }
        let bits_per_symbol = m.trailing_zeros() as usize;
        let levels = 1usize << (bits_per_symbol / 2);
        let scale = (2.0 * (m as f64 - 1.0) / 3.0).sqrt().recip();
        // Gray label -> level position along one axis
        let mut position_of_label = vec![0; levels];
        for i in 0..levels {
            position_of_label[gray(i)] = i;
        }
        let half = bits_per_symbol / 2;
        let amp = |pos: usize| (levels as f64 - 1.0 - 2.0 * pos as f64) * scale;
        let points = (0..m)
            .map(|label| {
                let li = label >> half;
                let lq = label & (levels - 1);
                Complex64::new(amp(position_of_label[li]), amp(position_of_label[lq]))
            })
            .collect();
        Ok(Self {
            m,
            bits_per_symbol,
            levels,
            scale,
            points,
        })
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    /// Points indexed by label.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    pub fn min_distance(&self) -> f64 {
        2.0 * self.scale
    }

    /// MSB-first bits to a point.
    pub fn map_bits(&self, bits: &[u8]) -> Complex64 {
        debug_assert_eq!(bits.len(), self.bits_per_symbol);
        let label = bits.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b & 1));
        self.points[label]
    }

    fn slice_axis(&self, x: f64) -> usize {
        let pos = ((self.levels as f64 - 1.0 - x / self.scale) / 2.0).round();
        let pos = pos.clamp(0.0, self.levels as f64 - 1.0) as usize;
        gray(pos)
    }

    /// Label of the nearest point (per-axis slicing is exact on a square grid).
    pub fn nearest_label(&self, z: Complex64) -> usize {
        let half = self.bits_per_symbol / 2;
        (self.slice_axis(z.re) << half) | self.slice_axis(z.im)
    }

    pub fn nearest_point(&self, z: Complex64) -> Complex64 {
        self.points[self.nearest_label(z)]
    }

    /// Appends the MSB-first bits of the nearest point's label.
    pub fn demap_into(&self, z: Complex64, out: &mut Vec<u8>) {
        let label = self.nearest_label(z);
        let d = self.bits_per_symbol;
        out.extend((0..d).map(|i| ((label >> (d - 1 - i)) & 1) as u8));
    }
}
