//! Per-SNR training runs with checkpoints and a line-delimited JSON log.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use super::config::ExperimentConfig;
use super::dataset::{load_split, Split};
use super::eval::checkpoint_paths;
use crate::cvnn::checkpoint;
use crate::error::{Error, Result};
use crate::imreconet::{train_full, LogEvent, TrainStatus, TrainedPair};
use crate::phy::FrameRecord;

pub const TRAIN_LOG: &str = "train_log.jsonl";

/// Trains one checkpoint pair on in-memory splits; every log event is handed
/// to `log` as a JSON object tagged with the SNR.
pub fn train_records(
    cfg: &ExperimentConfig,
    snr_db: f64,
    train: &[FrameRecord],
    val: &[FrameRecord],
    log: &mut dyn FnMut(Value),
) -> Result<TrainedPair> {
    let table = cfg.table()?;
    let mut sink = |e: &LogEvent| {
        let mut v = serde_json::to_value(e).expect("log events serialize");
        v["snr_db"] = json!(snr_db);
        log(v);
    };
    let pair = train_full(train, val, &table, &cfg.train, &mut sink)?;
    if pair.aapd.status == TrainStatus::EpochCap {
        log(json!({
            "event": "warning",
            "snr_db": snr_db,
            "stage": "aapd",
            "message": format!(
                "validation BCE {:.4} did not reach gamma1 = {} within {} epochs; keeping epoch {}",
                pair.aapd.best_val_loss, cfg.train.gamma1, pair.aapd.epochs_run, pair.aapd.best_epoch
            ),
        }));
    }
    Ok(pair)
}

/// Trains on the split files in `data_dir` for every SNR point and writes
/// `aapd_snr*.cvnn`, `se_snr*.cvnn` and the log into `out_dir`.
pub fn train_all(cfg: &ExperimentConfig, data_dir: &Path, out_dir: &Path) -> Result<Vec<(f64, TrainedPair)>> {
    fs::create_dir_all(out_dir)
        .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", out_dir.display())))?;
    let mut log_file = fs::File::create(out_dir.join(TRAIN_LOG))?;
    let mut io_err = None;
    let mut out = Vec::new();
    for &snr in &cfg.snr_db {
        let train = load_split(cfg, data_dir, Split::Train, snr)?;
        let val = load_split(cfg, data_dir, Split::Val, snr)?;
        let mut log = |v: Value| {
            if io_err.is_none() {
                if let Err(e) = writeln!(log_file, "{v}") {
                    io_err = Some(e);
                }
            }
            if v["event"] == "warning" {
                eprintln!("warning: {}", v["message"].as_str().unwrap_or_default());
            }
        };
        let pair = train_records(cfg, snr, &train.records, &val.records, &mut log)?;
        if let Some(e) = io_err.take() {
            return Err(e.into());
        }
        let (a, s) = checkpoint_paths(out_dir, snr);
        checkpoint::save(&a, &pair.net.aapd, None)?;
        checkpoint::save(&s, &pair.net.se, None)?;
        out.push((snr, pair));
    }
    Ok(out)
}
