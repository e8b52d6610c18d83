//! Parameter counts, FLOPs per frame and measured single-frame latency.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::config::{DetectorKind, ExperimentConfig};
use super::dataset::{generate, Split};
use super::eval::load_net;
use crate::detectors::{classical_pipeline, ClassicalMethod};
use crate::error::Result;
use crate::imreconet::{build_aapd, build_se, ImRecoNet, Variant};
use crate::linalg::Rng;

pub const BENCH_HEADER: &str = "detector,params,flops_per_frame,median_latency_us,trials";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub detector: String,
    pub params: usize,
    pub flops_per_frame: u64,
    pub median_latency_us: f64,
    pub trials: usize,
}

/// ML cost: for every TAC and symbol vector, each slot needs `H_J s`
/// (`N_r N_u` complex MACs) and the residual energy (`N_r`), at 8 FLOPs per
/// complex MAC.
pub fn ml_flops(cfg: &ExperimentConfig, n_l: usize) -> u64 {
    let hyp = n_l as u64 * (cfg.m as u64).pow(cfg.n_u as u32);
    8 * hyp * cfg.t as u64 * (cfg.n_r * (cfg.n_u + 1)) as u64
}

/// ZF on a known support: QR of `N_r x N_u`, projection of `Y` and back
/// substitution, counted in complex MACs.
fn zf_macs(n_r: u64, k: u64, t: u64) -> u64 {
    n_r * k * k + n_r * k * t + k * k * t / 2
}

/// SOMP cost: per iteration `k`, correlations against all `N_t` columns, a
/// least-squares refit on `k` columns and the residual update; then the ZF
/// estimate on the final support.
pub fn somp_flops(cfg: &ExperimentConfig) -> u64 {
    let (n_t, n_r, t) = (cfg.n_t as u64, cfg.n_r as u64, cfg.t as u64);
    let mut macs = 0;
    for k in 1..=cfg.n_u as u64 {
        macs += n_t * n_r * t + zf_macs(n_r, k, t) + n_r * k * t;
    }
    8 * (macs + zf_macs(n_r, cfg.n_u as u64, t))
}

/// Network cost: both forward passes plus the ZF stage in between.
pub fn net_flops(cfg: &ExperimentConfig, net: &ImRecoNet) -> u64 {
    net.aapd.count_flops() + net.se.count_flops() + 8 * zf_macs(cfg.n_r as u64, cfg.n_u as u64, cfg.t as u64)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn untrained(cfg: &ExperimentConfig, variant: Variant) -> Result<ImRecoNet> {
    let mut rng = Rng::stream(cfg.seed, 1);
    let aapd = build_aapd(cfg.n_r, cfg.t, cfg.n_t, variant, cfg.train.aapd_widths, &mut rng)?;
    let se = build_se(cfg.n_u, cfg.t, variant, cfg.train.se_widths, &mut rng)?;
    Ok(ImRecoNet { aapd, se })
}

/// Benchmarks the configured detectors. Networks come from `ckpt_dir` when
/// given (trained at the first SNR point), otherwise they are freshly
/// initialized; latency does not depend on the weights.
pub fn bench(cfg: &ExperimentConfig, variants: &[Variant], ckpt_dir: Option<&Path>) -> Result<Vec<BenchRow>> {
    let table = cfg.table()?;
    let qam = cfg.qam()?;
    let snr = cfg.snr_db[0];
    let trials = cfg.bench_trials;
    let frames = generate(cfg, Split::Test, snr, trials)?;
    let time = |f: &mut dyn FnMut(usize) -> Result<()>| -> Result<f64> {
        let mut lat = Vec::with_capacity(trials);
        for i in 0..trials {
            let start = Instant::now();
            f(i)?;
            lat.push(start.elapsed().as_secs_f64() * 1e6);
        }
        Ok(median(lat))
    };
    let mut rows = Vec::new();
    for &kind in &cfg.detectors {
        match kind {
            DetectorKind::Ml | DetectorKind::Somp => {
                let (method, flops) = if kind == DetectorKind::Ml {
                    (ClassicalMethod::Ml, ml_flops(cfg, table.len()))
                } else {
                    (ClassicalMethod::Somp, somp_flops(cfg))
                };
                let lat = time(&mut |i| {
                    let r = &frames[i];
                    classical_pipeline(&r.y, &r.h_est, &table, &qam, method).map(drop)
                })?;
                rows.push(BenchRow { detector: kind.name().into(), params: 0, flops_per_frame: flops, median_latency_us: lat, trials });
            }
            DetectorKind::ImReco => {
                for &variant in variants {
                    let net = match ckpt_dir {
                        Some(dir) if variant == cfg.train.variant => load_net(dir, snr)?,
                        _ => untrained(cfg, variant)?,
                    };
                    let lat = time(&mut |i| {
                        let r = &frames[i];
                        net.detect_frame(&r.y, &r.h_est, &table, &qam).map(drop)
                    })?;
                    rows.push(BenchRow {
                        detector: format!("imreconet-{}", variant.name()),
                        params: net.aapd.count_params() + net.se.count_params(),
                        flops_per_frame: net_flops(cfg, &net),
                        median_latency_us: lat,
                        trials,
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn bench_to_csv(rows: &[BenchRow]) -> String {
    let mut s = format!("{BENCH_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{:.1},{}", r.detector, r.params, r.flops_per_frame, r.median_latency_us, r.trials);
    }
    s
}
