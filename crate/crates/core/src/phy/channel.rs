//! Rayleigh, Kronecker-correlated and imperfectly estimated MIMO channels.

use num_complex::Complex64;

use super::Frame;
use crate::error::{invalid, Result};
use crate::linalg::{cholesky_factor, complex_gaussian, ComplexMatrix, Rng};

/// The channel seen by one frame plus the receiver's estimate of it.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    /// True channel `N_r x N_t`, constant over the frame.
    pub h: ComplexMatrix,
    /// Receiver-side estimate.
    pub h_est: ComplexMatrix,
    pub rho: f64,
    pub csi_error_var: f64,
}

impl ChannelRealization {
    /// Perfect CSI: the estimate is the channel itself.
    pub fn perfect(h: ComplexMatrix, rho: f64) -> Self {
        Self {
            h_est: h.clone(),
            h,
            rho,
            csi_error_var: 0.0,
        }
    }

    pub fn with_estimate_error(h: ComplexMatrix, rho: f64, error_var: f64, rng: &mut Rng) -> Result<Self> {
        let h_est = corrupt_csi(&h, error_var, rng)?;
        Ok(Self {
            h,
            h_est,
            rho,
            csi_error_var: error_var,
        })
    }
}

/// i.i.d. Rayleigh channel with `CN(0, 1/N_r)` entries, so every column has
/// unit expected energy.
pub fn rayleigh_channel(rng: &mut Rng, n_r: usize, n_t: usize) -> ComplexMatrix {
    complex_gaussian(rng, n_r, n_t, 1.0 / n_r as f64).expect("positive variance")
}

/// Exponential correlation matrix, `rho^(j-i)` above the diagonal and the
/// conjugate below.
pub fn exponential_correlation(n: usize, rho: f64) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |i, j| {
        let v = rho.powi(i.abs_diff(j) as i32);
        Complex64::new(v, 0.0)
    })
}

/// Kronecker-correlated channel `L_r H L_t^H`, where `L L^H = R` are the
/// Cholesky factors of the receive and transmit correlation matrices (same
/// `rho` on both sides). The lower-triangular factor stands in for the PSD
/// square root: both give the same second-order statistics.
pub fn make_correlated(h: &ComplexMatrix, rho: f64) -> Result<ComplexMatrix> {
    if !(0.0..1.0).contains(&rho) {
        return Err(invalid(format!("correlation must lie in [0, 1), got {rho}")));
    }
    if rho == 0.0 {
        return Ok(h.clone());
    }
    let (n_r, n_t) = h.shape();
    let l_r = cholesky_factor(&exponential_correlation(n_r, rho))?;
    let l_t = cholesky_factor(&exponential_correlation(n_t, rho))?;
    l_r.matmul(h)?.matmul(&l_t.conj_transpose())
}

/// `H + dH` with `dH` i.i.d. `CN(0, error_var)`.
pub fn corrupt_csi(h: &ComplexMatrix, error_var: f64, rng: &mut Rng) -> Result<ComplexMatrix> {
    if !(error_var >= 0.0) || !error_var.is_finite() {
        return Err(invalid(format!("CSI error variance must be >= 0, got {error_var}")));
    }
    if error_var == 0.0 {
        return Ok(h.clone());
    }
    let dh = complex_gaussian(rng, h.rows(), h.cols(), error_var)?;
    h.add(&dh)
}

/// Estimation-error variance `N_t sigma_z^2 / (N_p E_p)` for `N_p` pilots of
/// power `E_p`.
pub fn pilot_error_variance(n_t: usize, sigma_z2: f64, n_pilots: usize, pilot_power: f64) -> f64 {
    n_t as f64 * sigma_z2 / (n_pilots as f64 * pilot_power)
}

/// Per-entry noise variance for a target SNR in dB.
///
/// With unit-energy symbols and unit expected column energy,
/// `E||Hx||^2 = N_u` while `E||n||^2 = N_r sigma^2`. Infinite SNR means no
/// noise.
pub fn noise_variance(n_u: usize, n_r: usize, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        return 0.0;
    }
    n_u as f64 / (n_r as f64 * 10f64.powf(snr_db / 10.0))
}

/// `Y = H X + N` with the true channel.
pub fn apply_channel(
    frame: &Frame,
    chan: &ChannelRealization,
    snr_db: f64,
    rng: &mut Rng,
) -> Result<ComplexMatrix> {
    let (n_r, n_t) = chan.h.shape();
    if frame.x.rows() != n_t {
        return Err(invalid(format!(
            "channel has {n_t} transmit antennas, frame has {}",
            frame.x.rows()
        )));
    }
    let n_u = frame.s.rows();
    let clean = chan.h.matmul(&frame.x)?;
    let var = noise_variance(n_u, n_r, snr_db);
    if var == 0.0 {
        return Ok(clean);
    }
    let noise = complex_gaussian(rng, n_r, frame.x.cols(), var)?;
    clean.add(&noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::{assemble_frame, frame_bit_count, random_bits, QamConstellation, TacStrategy, TacTable};

    #[test]
    fn zero_rho_is_identity() {
        let mut rng = Rng::new(1);
        let h = rayleigh_channel(&mut rng, 3, 4);
        assert_eq!(make_correlated(&h, 0.0).unwrap(), h);
        assert!(make_correlated(&h, 1.0).is_err());
        assert!(make_correlated(&h, -0.1).is_err());
    }

    #[test]
    fn two_by_two_correlation() {
        let r = exponential_correlation(2, 0.5);
        let l = cholesky_factor(&r).unwrap();
        assert!((l[(1, 0)].re - 0.5).abs() < 1e-15);
        assert!((l[(1, 1)].re - 0.75f64.sqrt()).abs() < 1e-15);
        assert_eq!(r[(0, 1)].re, 0.5);
    }

    #[test]
    fn correlated_row_covariance() {
        let (n_r, n_t, rho) = (3, 4, 0.5);
        let mut rng = Rng::new(21);
        let mut acc = ComplexMatrix::zeros(n_r, n_r);
        let trials = 100_000;
        for _ in 0..trials {
            let hc = make_correlated(&rayleigh_channel(&mut rng, n_r, n_t), rho).unwrap();
            let g = hc.matmul(&hc.conj_transpose()).unwrap();
            acc = acc.add(&g).unwrap();
        }
        let acc = acc.scale(1.0 / trials as f64);
        // E[H_c H_c^H] = (tr R_t / N_r) R_r
        let expect = exponential_correlation(n_r, rho).scale(n_t as f64 / n_r as f64);
        for i in 0..n_r {
            for j in 0..n_r {
                let e = expect[(i, j)].re;
                assert!((acc[(i, j)] - expect[(i, j)]).norm() < 0.02 * e.max(0.1), "{i},{j}: {} vs {e}", acc[(i, j)]);
            }
        }
    }

    #[test]
    fn csi_error_statistics() {
        let mut rng = Rng::new(8);
        let h = rayleigh_channel(&mut rng, 4, 4);
        assert_eq!(corrupt_csi(&h, 0.0, &mut rng).unwrap(), h);
        assert!(corrupt_csi(&h, -1.0, &mut rng).is_err());
        assert_eq!(pilot_error_variance(4, 1.0, 4, 1.0), 1.0);

        let big = ComplexMatrix::zeros(1000, 1000);
        let est = corrupt_csi(&big, 0.01, &mut rng).unwrap();
        let var = est.norm_sqr() / 1e6;
        assert!((var - 0.01).abs() < 1e-4, "var {var}");
    }

    #[test]
    fn noiseless_channel_is_exact() {
        let table = TacTable::build(4, 1, TacStrategy::Lexicographic).unwrap();
        let qam = QamConstellation::new(4).unwrap();
        let mut rng = Rng::new(3);
        let bits = random_bits(&mut rng, frame_bit_count(&table, &qam, 5));
        let f = assemble_frame(&bits, &table, &qam, 5).unwrap();
        let chan = ChannelRealization::perfect(rayleigh_channel(&mut rng, 4, 4), 0.0);
        let y = apply_channel(&f, &chan, f64::INFINITY, &mut rng).unwrap();
        assert_eq!(y, chan.h.matmul(&f.x).unwrap());

        let bad = ChannelRealization::perfect(rayleigh_channel(&mut rng, 4, 3), 0.0);
        assert!(apply_channel(&f, &bad, 10.0, &mut rng).is_err());
    }

    #[test]
    fn identity_channel_passes_symbol() {
        let table = TacTable::build(4, 1, TacStrategy::Lexicographic).unwrap();
        let qam = QamConstellation::new(4).unwrap();
        let f = assemble_frame(&[0, 0, 1, 1], &table, &qam, 1).unwrap();
        let chan = ChannelRealization::perfect(ComplexMatrix::identity(4), 0.0);
        let mut rng = Rng::new(0);
        let y = apply_channel(&f, &chan, 30.0, &mut rng).unwrap();
        assert!((y[(0, 0)] - f.s[(0, 0)]).norm() < 0.2);
        assert!(y[(1, 0)].norm() < 0.2);
    }

    #[test]
    fn measured_snr_matches_target() {
        let table = TacTable::build(4, 1, TacStrategy::Lexicographic).unwrap();
        let qam = QamConstellation::new(4).unwrap();
        let mut rng = Rng::new(99);
        let (mut sig, mut noise) = (0.0, 0.0);
        for _ in 0..100_000 {
            let bits = random_bits(&mut rng, frame_bit_count(&table, &qam, 1));
            let f = assemble_frame(&bits, &table, &qam, 1).unwrap();
            let chan = ChannelRealization::perfect(rayleigh_channel(&mut rng, 4, 4), 0.0);
            let clean = chan.h.matmul(&f.x).unwrap();
            let y = apply_channel(&f, &chan, 10.0, &mut rng).unwrap();
            sig += clean.norm_sqr();
            noise += y.sub(&clean).unwrap().norm_sqr();
        }
        let snr = 10.0 * (sig / noise).log10();
        assert!((snr - 10.0).abs() < 0.1, "measured {snr} dB");
    }
}
