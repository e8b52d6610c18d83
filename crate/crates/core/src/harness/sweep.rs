//! BER against channel-estimation error at a fixed SNR.
//!
//! Every sweep point reuses the same frames and the same standard-normal
//! error draws, scaled to the point's variance, so the points differ only in
//! the error size.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{fmt_f64, DetectorKind, ExperimentConfig};
use super::dataset::{frame_seed, generate, Split};
use super::eval::{load_net, run_detector};
use crate::error::{Error, Result};
use crate::imreconet::ImRecoNet;
use crate::linalg::{complex_gaussian, ComplexMatrix, Rng};
use crate::phy::FrameRecord;

pub const SWEEP_SCHEMA: &str = "imnet-sweep/1";
pub const SWEEP_HEADER: &str = "detector,sigma_c_db,csi_error_var,ber,aap_accuracy,frames,bit_errors,total_bits";

const CSI_STREAM: u64 = 1 << 40;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub detector: String,
    pub sigma_c_db: f64,
    pub csi_error_var: f64,
    pub ber: f64,
    pub aap_accuracy: f64,
    pub frames: u64,
    pub bit_errors: u64,
    pub total_bits: u64,
}

/// Error variance of a sweep point given in dB; `-inf` is perfect CSI.
pub fn sigma_c_variance(db: f64) -> f64 {
    if db == f64::NEG_INFINITY {
        0.0
    } else {
        10f64.powf(db / 10.0)
    }
}

/// Unit-variance error draws, one matrix per frame.
fn unit_errors(cfg: &ExperimentConfig, count: usize) -> Vec<ComplexMatrix> {
    let seed = frame_seed(cfg.seed, Split::Test, cfg.sweep_snr_db);
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::stream(seed, CSI_STREAM + i as u64);
            complex_gaussian(&mut rng, cfg.n_r, cfg.n_t, 1.0).expect("positive variance")
        })
        .collect()
}

/// Runs the sweep on `frames` test frames generated at the sweep SNR with
/// perfect CSI.
pub fn sweep_records(
    cfg: &ExperimentConfig,
    detectors: &[DetectorKind],
    records: &[FrameRecord],
    net: Option<&ImRecoNet>,
) -> Result<Vec<SweepRow>> {
    let table = cfg.table()?;
    let qam = cfg.qam()?;
    let errors = unit_errors(cfg, records.len());
    let mut points = cfg.sigma_c_db.clone();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut rows = Vec::new();
    for &db in &points {
        let var = sigma_c_variance(db);
        let noisy: Vec<FrameRecord> = records
            .iter()
            .zip(&errors)
            .map(|(r, e)| {
                let mut r = r.clone();
                r.h_est = r.h.add(&e.scale(var.sqrt()))?;
                Ok(r)
            })
            .collect::<Result<_>>()?;
        for &kind in detectors {
            let c = run_detector(kind, net, &noisy, &table, &qam)?;
            rows.push(SweepRow {
                detector: kind.name().to_string(),
                sigma_c_db: db,
                csi_error_var: var,
                ber: c.ber(),
                aap_accuracy: c.aap_accuracy(),
                frames: c.frames,
                bit_errors: c.bit_errors,
                total_bits: c.bits,
            });
        }
    }
    rows.sort_by(|a, b| a.detector.cmp(&b.detector).then(a.sigma_c_db.total_cmp(&b.sigma_c_db)));
    Ok(rows)
}

/// Sweep over the test split size of the configuration, using the
/// checkpoints trained at the sweep SNR.
pub fn sweep(cfg: &ExperimentConfig, detectors: &[DetectorKind], ckpt_dir: Option<&Path>) -> Result<Vec<SweepRow>> {
    let mut perfect = cfg.clone();
    perfect.csi_error_var = 0.0;
    let records = generate(&perfect, Split::Test, cfg.sweep_snr_db, cfg.split_counts()[2])?;
    let net = if detectors.contains(&DetectorKind::ImReco) {
        let dir = ckpt_dir.ok_or_else(|| Error::Config("imreconet sweep needs a checkpoint directory".into()))?;
        Some(load_net(dir, cfg.sweep_snr_db)?)
    } else {
        None
    };
    sweep_records(cfg, detectors, &records, net.as_ref())
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut s = format!("# schema={SWEEP_SCHEMA}\n{SWEEP_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.6e},{:.6e},{:.6},{},{},{}",
            r.detector,
            fmt_f64(r.sigma_c_db),
            r.csi_error_var,
            r.ber,
            r.aap_accuracy,
            r.frames,
            r.bit_errors,
            r.total_bits
        );
    }
    s
}
