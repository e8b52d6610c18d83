//! Detector evaluation and result emission.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{fmt_f64, DetectorKind, ExperimentConfig};
use super::dataset::{load_split, Split};
use crate::cvnn::checkpoint;
use crate::detectors::{classical_pipeline, ClassicalMethod, Detection};
use crate::error::{Error, Result};
use crate::imreconet::{ImRecoNet, INFER_CHUNK};
use crate::phy::{ErrorCounter, FrameRecord, QamConstellation, TacTable};

pub const EVAL_SCHEMA: &str = "imnet-eval/1";
pub const EVAL_HEADER: &str = "detector,snr_db,ber,aap_accuracy,frames,bit_errors,total_bits,wall_time_s";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalRow {
    pub detector: String,
    pub snr_db: f64,
    pub ber: f64,
    pub aap_accuracy: f64,
    pub frames: u64,
    pub bit_errors: u64,
    pub total_bits: u64,
    pub wall_time_s: f64,
}

/// Runs one detector over `records`. Frames are processed in parallel and
/// the counts merged in frame order.
pub fn run_detector(
    kind: DetectorKind,
    net: Option<&ImRecoNet>,
    records: &[FrameRecord],
    table: &TacTable,
    qam: &QamConstellation,
) -> Result<ErrorCounter> {
    let counters: Vec<ErrorCounter> = records
        .par_chunks(INFER_CHUNK)
        .map(|chunk| {
            let dets: Vec<Detection> = match kind {
                DetectorKind::Ml | DetectorKind::Somp => {
                    let method = if kind == DetectorKind::Ml { ClassicalMethod::Ml } else { ClassicalMethod::Somp };
                    chunk
                        .iter()
                        .map(|r| classical_pipeline(&r.y, &r.h_est, table, qam, method))
                        .collect::<Result<_>>()?
                }
                DetectorKind::ImReco => {
                    let net = net.ok_or_else(|| Error::Config("imreconet needs trained checkpoints".into()))?;
                    let frames: Vec<_> = chunk.iter().map(|r| (&r.y, &r.h_est)).collect();
                    net.detect_batch(&frames, table, qam)?
                }
            };
            let mut c = ErrorCounter::default();
            for (r, d) in chunk.iter().zip(&dets) {
                c.record(&r.bits, &d.bits, r.tac_index, d.tac_index)?;
            }
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let mut total = ErrorCounter::default();
    for c in &counters {
        total.merge(c);
    }
    Ok(total)
}

pub fn row(kind: DetectorKind, snr_db: f64, c: &ErrorCounter, wall: f64) -> EvalRow {
    EvalRow {
        detector: kind.name().to_string(),
        snr_db,
        ber: c.ber(),
        aap_accuracy: c.aap_accuracy(),
        frames: c.frames,
        bit_errors: c.bit_errors,
        total_bits: c.bits,
        wall_time_s: wall,
    }
}

pub fn checkpoint_paths(dir: &Path, snr_db: f64) -> (PathBuf, PathBuf) {
    let tag = fmt_f64(snr_db);
    (dir.join(format!("aapd_snr{tag}.cvnn")), dir.join(format!("se_snr{tag}.cvnn")))
}

/// Loads the AAPD/SE pair trained at `snr_db`.
pub fn load_net(dir: &Path, snr_db: f64) -> Result<ImRecoNet> {
    let (a, s) = checkpoint_paths(dir, snr_db);
    for p in [&a, &s] {
        if !p.exists() {
            return Err(Error::Config(format!("missing checkpoint {}", p.display())));
        }
    }
    Ok(ImRecoNet { aapd: checkpoint::load(&a)?.0, se: checkpoint::load(&s)?.0 })
}

/// Evaluates the configured detectors on in-memory test sets, one per SNR.
pub fn evaluate_records(
    cfg: &ExperimentConfig,
    detectors: &[DetectorKind],
    sets: &[(f64, Vec<FrameRecord>)],
    nets: &dyn Fn(f64) -> Result<Option<ImRecoNet>>,
) -> Result<Vec<EvalRow>> {
    let table = cfg.table()?;
    let qam = cfg.qam()?;
    let mut rows = Vec::new();
    for (snr, records) in sets {
        let net = if detectors.contains(&DetectorKind::ImReco) { nets(*snr)? } else { None };
        for &kind in detectors {
            let start = Instant::now();
            let c = run_detector(kind, net.as_ref(), records, &table, &qam)?;
            rows.push(row(kind, *snr, &c, start.elapsed().as_secs_f64()));
        }
    }
    sort_rows(&mut rows);
    Ok(rows)
}

/// Evaluates on the test split files in `data_dir`.
pub fn evaluate(
    cfg: &ExperimentConfig,
    detectors: &[DetectorKind],
    data_dir: &Path,
    ckpt_dir: Option<&Path>,
) -> Result<Vec<EvalRow>> {
    if detectors.contains(&DetectorKind::ImReco) && ckpt_dir.is_none() {
        return Err(Error::Config("imreconet evaluation needs a checkpoint directory".into()));
    }
    let mut sets = Vec::new();
    for &snr in &cfg.snr_db {
        sets.push((snr, load_split(cfg, data_dir, Split::Test, snr)?.records));
    }
    let nets = |snr: f64| -> Result<Option<ImRecoNet>> { ckpt_dir.map(|d| load_net(d, snr)).transpose() };
    evaluate_records(cfg, detectors, &sets, &nets)
}

pub fn sort_rows(rows: &mut [EvalRow]) {
    rows.sort_by(|a, b| a.detector.cmp(&b.detector).then(a.snr_db.total_cmp(&b.snr_db)));
}

pub fn rows_to_csv(rows: &[EvalRow]) -> String {
    let mut s = format!("# schema={EVAL_SCHEMA}\n{EVAL_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.6e},{:.6},{},{},{},{:.3}",
            r.detector,
            fmt_f64(r.snr_db),
            r.ber,
            r.aap_accuracy,
            r.frames,
            r.bit_errors,
            r.total_bits,
            r.wall_time_s
        );
    }
    s
}

pub fn rows_to_json(rows: &[EvalRow]) -> Result<String> {
    #[derive(Serialize)]
    struct Doc<'a> {
        schema: &'a str,
        rows: &'a [EvalRow],
    }
    serde_json::to_string_pretty(&Doc { schema: EVAL_SCHEMA, rows }).map_err(|e| Error::Format(e.to_string()))
}
