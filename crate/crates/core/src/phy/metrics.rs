//! Bit-error and activation-pattern accuracy metrics.

use crate::error::{invalid, Result};

pub fn bit_errors(truth: &[u8], decided: &[u8]) -> Result<usize> {
    if truth.len() != decided.len() {
        return Err(invalid(format!(
            "bit vectors differ in length: {} vs {}",
            truth.len(),
            decided.len()
        )));
    }
    Ok(truth.iter().zip(decided).filter(|(a, b)| a != b).count())
}

/// Fraction of mismatched bits.
pub fn ber(truth: &[u8], decided: &[u8]) -> Result<f64> {
    let errors = bit_errors(truth, decided)?;
    if truth.is_empty() {
        return Ok(0.0);
    }
    Ok(errors as f64 / truth.len() as f64)
}

/// Fraction of frames whose detected TAC equals the transmitted one.
pub fn aap_accuracy(truth: &[usize], decided: &[usize]) -> Result<f64> {
    if truth.len() != decided.len() {
        return Err(invalid(format!(
            "TAC vectors differ in length: {} vs {}",
            truth.len(),
            decided.len()
        )));
    }
    if truth.is_empty() {
        return Ok(1.0);
    }
    let hits = truth.iter().zip(decided).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Running totals for a Monte-Carlo run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ErrorCounter {
    pub frames: u64,
    pub tac_hits: u64,
    pub bits: u64,
    pub bit_errors: u64,
}

impl ErrorCounter {
    pub fn record(&mut self, truth_bits: &[u8], bits: &[u8], truth_tac: usize, tac: usize) -> Result<()> {
        self.bit_errors += bit_errors(truth_bits, bits)? as u64;
        self.bits += truth_bits.len() as u64;
        self.frames += 1;
        self.tac_hits += u64::from(truth_tac == tac);
        Ok(())
    }

    pub fn merge(&mut self, other: &ErrorCounter) {
        self.frames += other.frames;
        self.tac_hits += other.tac_hits;
        self.bits += other.bits;
        self.bit_errors += other.bit_errors;
    }

    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits as f64
        }
    }

    pub fn aap_accuracy(&self) -> f64 {
        if self.frames == 0 {
            1.0
        } else {
            self.tac_hits as f64 / self.frames as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_flipped() {
        let a = vec![0, 1, 1, 0, 1];
        assert_eq!(ber(&a, &a).unwrap(), 0.0);
        let flipped: Vec<u8> = a.iter().map(|b| 1 - b).collect();
        assert_eq!(ber(&a, &flipped).unwrap(), 1.0);
        assert!(ber(&a, &a[..3]).is_err());
    }

    #[test]
    fn accuracy_counts_frames() {
        let truth: Vec<usize> = (0..10).collect();
        let mut hat = truth.clone();
        assert_eq!(aap_accuracy(&truth, &hat).unwrap(), 1.0);
        hat[3] = 7;
        assert!((aap_accuracy(&truth, &hat).unwrap() - 0.9).abs() < 1e-15);
        assert!(aap_accuracy(&truth, &hat[..2]).is_err());
    }

    #[test]
    fn counter_accumulates() {
        let mut c = ErrorCounter::default();
        c.record(&[0, 0, 1, 1], &[0, 1, 1, 1], 2, 2).unwrap();
        c.record(&[0, 0, 1, 1], &[0, 0, 1, 1], 1, 3).unwrap();
        assert_eq!(c.bit_errors, 1);
        assert_eq!(c.bits, 8);
        assert_eq!(c.ber(), 0.125);
        assert_eq!(c.aap_accuracy(), 0.5);
    }
}
