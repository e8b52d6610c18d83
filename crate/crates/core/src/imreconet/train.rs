//! Two-stage training: AAPD first, then the SE on estimates produced with the
//! frozen AAPD.

use std::time::Instant;

use serde::Serialize;

use super::arch::{build_aapd, build_se, AapdWidths, SeWidths, Variant};
use super::data::{gather, gather_labels, AapdSet, SeSet};
use super::detect::{aapd_probabilities, enhance, tac_from_probabilities};
use crate::cvnn::{bce, checkpoint, mse, Adam, Model, Tensor};
use crate::detectors::zf_estimate;
use crate::error::{invalid, Result};
use crate::linalg::{ComplexMatrix, Rng};
use crate::phy::{FrameRecord, TacTable};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub max_epochs: usize,
    /// Validation BCE at which AAPD training stops.
    pub gamma1: f64,
    /// Absolute validation MSE target for the SE. When unset the target is
    /// the validation MSE of the raw ZF input divided by `gamma2_ratio`.
    pub gamma2: Option<f64>,
    pub gamma2_ratio: f64,
    pub seed: u64,
    pub variant: Variant,
    pub aapd_widths: AapdWidths,
    pub se_widths: SeWidths,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch: 100,
            max_epochs: 200,
            gamma1: 0.05,
            gamma2: None,
            gamma2_ratio: 1.05,
            seed: 0,
            variant: Variant::Complex,
            aapd_widths: AapdWidths::default(),
            se_widths: SeWidths::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || self.batch < 2 || self.max_epochs == 0 {
            return Err(invalid("training needs lr > 0, batch >= 2 and at least one epoch"));
        }
        if !(self.gamma1 > 0.0) || !(self.gamma2_ratio > 0.0) || self.gamma2.is_some_and(|g| !(g > 0.0)) {
            return Err(invalid("stopping thresholds must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Aapd,
    Se,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainStatus {
    /// Validation loss reached the stopping threshold.
    Converged,
    /// Epoch cap hit first; the best checkpoint is still returned.
    EpochCap,
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    StageStart {
        stage: Stage,
        t_s: f64,
        train_frames: usize,
        val_frames: usize,
        target: f64,
    },
    /// Epoch 0 is the untrained model.
    Epoch {
        stage: Stage,
        epoch: usize,
        train_loss: Option<f64>,
        val_loss: f64,
        val_accuracy: Option<f64>,
        best: bool,
        t_s: f64,
    },
    StageEnd {
        stage: Stage,
        t_s: f64,
        status: TrainStatus,
        best_epoch: usize,
        best_val_loss: f64,
    },
}

#[derive(Clone, Debug)]
pub struct StageReport {
    pub status: TrainStatus,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub epochs_run: usize,
}

struct Clock(Instant);

impl Clock {
    fn t(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

struct Validation {
    loss: f64,
    accuracy: Option<f64>,
}

/// Shared mini-batch loop with best-checkpoint tracking. The returned model
/// is the best checkpoint reloaded from its serialized form.
#[allow(clippy::too_many_arguments)]
fn run_stage(
    stage: Stage,
    mut model: Model,
    n_train: usize,
    cfg: &TrainConfig,
    target: f64,
    clock: &Clock,
    sink: &mut dyn FnMut(&LogEvent),
    mut batch_loss: impl FnMut(&Tensor, &[usize]) -> Result<(f64, Tensor)>,
    batch_input: impl Fn(&[usize]) -> Tensor,
    validate: impl Fn(&Model) -> Result<Validation>,
) -> Result<(Model, StageReport)> {
    let salt = match stage {
        Stage::Aapd => 1 << 32,
        Stage::Se => 2 << 32,
    };
    let mut adam = Adam::new(cfg.lr);
    let v0 = validate(&model)?;
    let mut best = (v0.loss, 0usize, checkpoint::to_bytes(&model, None));
    sink(&LogEvent::Epoch {
        stage,
        epoch: 0,
        train_loss: None,
        val_loss: v0.loss,
        val_accuracy: v0.accuracy,
        best: true,
        t_s: clock.t(),
    });
    let mut status = if v0.loss <= target { TrainStatus::Converged } else { TrainStatus::EpochCap };
    let mut epochs_run = 0;
    let mut order: Vec<usize> = (0..n_train).collect();
    while status == TrainStatus::EpochCap && epochs_run < cfg.max_epochs {
        epochs_run += 1;
        let mut rng = Rng::stream(cfg.seed, salt + epochs_run as u64);
        rng.shuffle(&mut order);
        let (mut total, mut seen) = (0.0, 0usize);
        for idx in order.chunks(cfg.batch) {
            // batch statistics need two samples
            if idx.len() < 2 {
                continue;
            }
            let x = batch_input(idx);
            model.zero_grad();
            let (out, trace) = model.forward_train(&x)?;
            let (loss, grad) = batch_loss(&out, idx)?;
            model.backward(&trace, &grad)?;
            adam.step(&mut model);
            total += loss * idx.len() as f64;
            seen += idx.len();
        }
        let v = validate(&model)?;
        let improved = v.loss < best.0;
        if improved {
            best = (v.loss, epochs_run, checkpoint::to_bytes(&model, None));
        }
        sink(&LogEvent::Epoch {
            stage,
            epoch: epochs_run,
            train_loss: Some(total / seen.max(1) as f64),
            val_loss: v.loss,
            val_accuracy: v.accuracy,
            best: improved,
            t_s: clock.t(),
        });
        if v.loss <= target {
            status = TrainStatus::Converged;
        }
    }
    if !best.0.is_finite() {
        return Err(crate::Error::State(format!("{stage:?} training diverged")));
    }
    sink(&LogEvent::StageEnd { stage, t_s: clock.t(), status, best_epoch: best.1, best_val_loss: best.0 });
    let (model, _) = checkpoint::from_bytes(&best.2)?;
    let report = StageReport { status, best_epoch: best.1, best_val_loss: best.0, epochs_run };
    Ok((model, report))
}

/// Mean BCE and exact-TAC accuracy of `model` on `set`.
pub fn evaluate_aapd(model: &Model, set: &AapdSet, table: &TacTable) -> Result<(f64, f64)> {
    let n_t = table.n_t();
    let mut loss = 0.0;
    let mut hits = 0usize;
    let all: Vec<usize> = (0..set.len()).collect();
    for idx in all.chunks(super::detect::INFER_CHUNK) {
        let p = model.predict(&gather(&set.inputs, idx))?;
        let (l, _) = bce(&p, &gather_labels(&set.labels, n_t, idx))?;
        loss += l * idx.len() as f64;
        for (b, &i) in idx.iter().enumerate() {
            if tac_from_probabilities(p.sample(b), table)? == set.tacs[i] {
                hits += 1;
            }
        }
    }
    Ok((loss / set.len() as f64, hits as f64 / set.len() as f64))
}

/// Mean per-frame squared error of `model` (or of the raw input when `None`).
pub fn evaluate_se(model: Option<&Model>, set: &SeSet) -> Result<f64> {
    let all: Vec<usize> = (0..set.len()).collect();
    let mut loss = 0.0;
    for idx in all.chunks(super::detect::INFER_CHUNK) {
        let x = gather(&set.inputs, idx);
        let out = match model {
            Some(m) => m.predict(&x)?,
            None => x,
        };
        let (l, _) = mse(&out, &gather(&set.targets, idx))?;
        loss += l * idx.len() as f64;
    }
    Ok(loss / set.len() as f64)
}

pub fn train_aapd(
    model: Model,
    train: &AapdSet,
    val: &AapdSet,
    table: &TacTable,
    cfg: &TrainConfig,
    sink: &mut dyn FnMut(&LogEvent),
) -> Result<(Model, StageReport)> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(invalid("AAPD training needs non-empty train and validation sets"));
    }
    let clock = Clock(Instant::now());
    train_aapd_at(model, train, val, table, cfg, &clock, sink)
}

fn train_aapd_at(
    model: Model,
    train: &AapdSet,
    val: &AapdSet,
    table: &TacTable,
    cfg: &TrainConfig,
    clock: &Clock,
    sink: &mut dyn FnMut(&LogEvent),
) -> Result<(Model, StageReport)> {
    let n_t = table.n_t();
    sink(&LogEvent::StageStart {
        stage: Stage::Aapd,
        t_s: clock.t(),
        train_frames: train.len(),
        val_frames: val.len(),
        target: cfg.gamma1,
    });
    run_stage(
        Stage::Aapd,
        model,
        train.len(),
        cfg,
        cfg.gamma1,
        clock,
        sink,
        |p, idx| bce(p, &gather_labels(&train.labels, n_t, idx)),
        |idx| gather(&train.inputs, idx),
        |m| {
            let (loss, acc) = evaluate_aapd(m, val, table)?;
            Ok(Validation { loss, accuracy: Some(acc) })
        },
    )
}

pub fn train_se(
    model: Model,
    train: &SeSet,
    val: &SeSet,
    cfg: &TrainConfig,
    sink: &mut dyn FnMut(&LogEvent),
) -> Result<(Model, StageReport)> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(invalid("SE training needs non-empty train and validation sets"));
    }
    let clock = Clock(Instant::now());
    train_se_at(model, train, val, cfg, &clock, sink)
}

fn train_se_at(
    model: Model,
    train: &SeSet,
    val: &SeSet,
    cfg: &TrainConfig,
    clock: &Clock,
    sink: &mut dyn FnMut(&LogEvent),
) -> Result<(Model, StageReport)> {
    let target = match cfg.gamma2 {
        Some(g) => g,
        None => evaluate_se(None, val)? / cfg.gamma2_ratio,
    };
    sink(&LogEvent::StageStart {
        stage: Stage::Se,
        t_s: clock.t(),
        train_frames: train.len(),
        val_frames: val.len(),
        target,
    });
    run_stage(
        Stage::Se,
        model,
        train.len(),
        cfg,
        target,
        clock,
        sink,
        |out, idx| mse(out, &gather(&train.targets, idx)),
        |idx| gather(&train.inputs, idx),
        |m| Ok(Validation { loss: evaluate_se(Some(m), val)?, accuracy: None }),
    )
}

/// ZF estimates on the TACs chosen by a frozen AAPD.
pub fn zf_inputs(aapd: &Model, records: &[FrameRecord], table: &TacTable) -> Result<Vec<ComplexMatrix>> {
    let ys: Vec<&ComplexMatrix> = records.iter().map(|r| &r.y).collect();
    let probs = aapd_probabilities(aapd, &ys)?;
    records
        .iter()
        .zip(&probs)
        .map(|(r, p)| zf_estimate(&r.y, &r.h_est, table.tac(tac_from_probabilities(p, table)?)))
        .collect()
}

#[derive(Clone, Debug)]
pub struct TrainedPair {
    pub net: super::ImRecoNet,
    pub aapd: StageReport,
    pub se: StageReport,
}

/// Full two-stage training on frame records: AAPD to `gamma1`, freeze, build
/// the ZF dataset with it, then SE to the `gamma2` target.
pub fn train_full(
    train: &[FrameRecord],
    val: &[FrameRecord],
    table: &TacTable,
    cfg: &TrainConfig,
    sink: &mut dyn FnMut(&LogEvent),
) -> Result<TrainedPair> {
    cfg.validate()?;
    let first = train.first().ok_or_else(|| invalid("empty training set"))?;
    if val.is_empty() {
        return Err(invalid("empty validation set"));
    }
    let (n_r, t) = first.y.shape();
    let n_u = first.s.rows();
    if table.n_u() != n_u || first.h.cols() != table.n_t() {
        return Err(invalid("frame records do not match the TAC table"));
    }
    let clock = Clock(Instant::now());

    let mut rng = Rng::stream(cfg.seed, 1);
    let aapd0 = build_aapd(n_r, t, table.n_t(), cfg.variant, cfg.aapd_widths, &mut rng)?;
    let a_train = AapdSet::from_records(train, table)?;
    let a_val = AapdSet::from_records(val, table)?;
    let (aapd, aapd_report) = train_aapd_at(aapd0, &a_train, &a_val, table, cfg, &clock, sink)?;
    drop((a_train, a_val));

    let s_train = SeSet::new(&zf_inputs(&aapd, train, table)?, &symbols(train))?;
    let s_val = SeSet::new(&zf_inputs(&aapd, val, table)?, &symbols(val))?;
    let mut rng = Rng::stream(cfg.seed, 2);
    let se0 = build_se(n_u, t, cfg.variant, cfg.se_widths, &mut rng)?;
    let (se, se_report) = train_se_at(se0, &s_train, &s_val, cfg, &clock, sink)?;
    Ok(TrainedPair { net: super::ImRecoNet { aapd, se }, aapd: aapd_report, se: se_report })
}

/// Mean squared symbol error of the SE output and of its ZF input on `set`.
pub fn se_gain(se: &Model, estimates: &[ComplexMatrix], truth: &[&ComplexMatrix]) -> Result<(f64, f64)> {
    let out = enhance(se, estimates)?;
    let err = |a: &[ComplexMatrix]| -> Result<f64> {
        let mut acc = 0.0;
        for (x, s) in a.iter().zip(truth) {
            acc += x.sub(s)?.norm_sqr();
        }
        Ok(acc / a.len() as f64)
    };
    Ok((err(&out)?, err(estimates)?))
}

fn symbols(records: &[FrameRecord]) -> Vec<&ComplexMatrix> {
    records.iter().map(|r| &r.s).collect()
}
