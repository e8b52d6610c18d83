use proptest::prelude::*;

use super::*;
use crate::cvnn::Tensor;
use crate::detectors::{classical_pipeline, zf_estimate, ClassicalMethod};
use crate::linalg::{ComplexMatrix, Rng};
use crate::phy::{
    rayleigh_channel, simulate_frame, ChannelRealization, FrameRecord, QamConstellation, TacStrategy, TacTable,
};

const SMALL: AapdWidths = AapdWidths { conv1: 4, conv2: 4, fc1: 16, fc2: 8 };

fn frames(n: usize, table: &TacTable, qam: &QamConstellation, n_r: usize, snr: f64, seed: u64) -> Vec<FrameRecord> {
    let h = rayleigh_channel(&mut Rng::new(seed), n_r, table.n_t());
    let chan = ChannelRealization::perfect(h, 0.0);
    (0..n)
        .map(|i| simulate_frame(table, qam, 8, &chan, snr, &mut Rng::stream(seed, i as u64 + 1)).unwrap())
        .collect()
}

fn small_cfg(epochs: usize) -> TrainConfig {
    TrainConfig { max_epochs: epochs, batch: 16, aapd_widths: SMALL, se_widths: SeWidths { hidden: 4 }, ..Default::default() }
}

#[test]
fn default_networks_halve_parameters() {
    for (n_r, t, n_t, n_u) in [(1, 16, 4, 1), (2, 16, 8, 2), (4, 8, 16, 4)] {
        let mut rng = Rng::new(1);
        let c = build_aapd(n_r, t, n_t, Variant::Complex, AapdWidths::default(), &mut rng).unwrap();
        let r = build_aapd(n_r, t, n_t, Variant::Real, AapdWidths::default(), &mut rng).unwrap();
        assert_eq!(2 * c.count_params(), r.count_params());
        let c = build_se(n_u, t, Variant::Complex, SeWidths::default(), &mut rng).unwrap();
        let r = build_se(n_u, t, Variant::Real, SeWidths::default(), &mut rng).unwrap();
        assert_eq!(2 * c.count_params(), r.count_params());
    }
}

#[test]
fn aapd_outputs_are_probabilities() {
    let mut rng = Rng::new(2);
    for variant in [Variant::Complex, Variant::Real] {
        let m = build_aapd(2, 8, 6, variant, SMALL, &mut rng).unwrap();
        let ys: Vec<ComplexMatrix> = (0..5).map(|_| rayleigh_channel(&mut rng, 2, 8).scale(3.0)).collect();
        let refs: Vec<&ComplexMatrix> = ys.iter().collect();
        for p in aapd_probabilities(&m, &refs).unwrap() {
            assert_eq!(p.len(), 6);
            assert!(p.iter().all(|v| v.is_finite() && *v > 0.0 && *v < 1.0));
        }
    }
}

#[test]
fn invalid_dimensions_rejected() {
    let mut rng = Rng::new(3);
    assert!(build_aapd(0, 8, 4, Variant::Complex, SMALL, &mut rng).is_err());
    assert!(build_aapd(1, 8, 5, Variant::Complex, SMALL, &mut rng).is_err());
    assert!(build_se(1, 0, Variant::Real, SeWidths::default(), &mut rng).is_err());
    assert!(Variant::parse("quaternion").is_err());
    assert_eq!(Variant::parse("Real").unwrap(), Variant::Real);
}

#[test]
fn fresh_se_is_identity() {
    let mut rng = Rng::new(4);
    for variant in [Variant::Complex, Variant::Real] {
        let se = build_se(2, 8, variant, SeWidths::default(), &mut rng).unwrap();
        let s: Vec<ComplexMatrix> = (0..3).map(|_| rayleigh_channel(&mut rng, 2, 8)).collect();
        assert_eq!(enhance(&se, &s).unwrap(), s);
    }
}

#[test]
fn legalization_examples() {
    let lex = TacTable::build(4, 1, TacStrategy::Lexicographic).unwrap();
    let t = tac_from_probabilities(&[0.9, 0.1, 0.8, 0.2], &lex).unwrap();
    assert_eq!(lex.tac(t), &[1]);

    let preset = TacTable::preset_4x2();
    let t = tac_from_probabilities(&[0.9, 0.1, 0.8, 0.2], &preset).unwrap();
    assert_eq!(preset.tac(t), &[1, 3]);
    // {1,2} is not legal; sums are {1,3}=1.0, {1,4}=0.95, {2,4}=0.9, {2,3}=0.95
    let t = tac_from_probabilities(&[0.9, 0.85, 0.1, 0.05], &preset).unwrap();
    assert_eq!(preset.tac(t), &[1, 3]);

    assert!(tac_from_probabilities(&[0.5; 3], &preset).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn legalized_tac_is_in_table(p in prop::collection::vec(0.0f64..1.0, 6), n_u in 1usize..5) {
        let table = TacTable::build(6, n_u, TacStrategy::Lexicographic).unwrap();
        let t = tac_from_probabilities(&p, &table).unwrap();
        prop_assert!(t < table.len());
        prop_assert!(table.index_of(table.tac(t)).is_some());
    }
}

#[test]
fn aapd_ignores_channel_estimate() {
    let table = TacTable::build(4, 2, TacStrategy::Lexicographic).unwrap();
    let qam = QamConstellation::new(4).unwrap();
    let recs = frames(4, &table, &qam, 2, 10.0, 5);
    let mut rng = Rng::new(6);
    let net = ImRecoNet {
        aapd: build_aapd(2, 8, 4, Variant::Complex, SMALL, &mut rng).unwrap(),
        se: build_se(2, 8, Variant::Complex, SeWidths::default(), &mut rng).unwrap(),
    };
    for r in &recs {
        let other = rayleigh_channel(&mut rng, 2, 4);
        let a = net.detect_frame(&r.y, &r.h_est, &table, &qam).unwrap();
        let b = net.detect_frame(&r.y, &other, &table, &qam).unwrap();
        assert_eq!(a.tac_index, b.tac_index);
        assert_eq!(predict_tac(&net.aapd, &r.y, &table).unwrap().1, a.tac_index);
        // same inputs, same answer
        assert_eq!(net.detect_frame(&r.y, &r.h_est, &table, &qam).unwrap(), a);
    }
}

#[test]
fn oracle_tac_with_identity_se_matches_zf_pipeline() {
    let table = TacTable::build(4, 1, TacStrategy::Lexicographic).unwrap();
    let qam = QamConstellation::new(16).unwrap();
    let recs = frames(50, &table, &qam, 2, 15.0, 7);
    let mut rng = Rng::new(8);
    let net = ImRecoNet {
        aapd: build_aapd(2, 8, 4, Variant::Complex, SMALL, &mut rng).unwrap(),
        se: build_se(1, 8, Variant::Complex, SeWidths::default(), &mut rng).unwrap(),
    };
    let pairs: Vec<_> = recs.iter().map(|r| (&r.y, &r.h_est)).collect();
    let tacs: Vec<usize> = recs.iter().map(|r| r.tac_index).collect();
    let dets = net.detect_with_tacs(&pairs, &tacs, &table, &qam).unwrap();
    for (r, d) in recs.iter().zip(&dets) {
        let zf = zf_estimate(&r.y, &r.h_est, table.tac(r.tac_index)).unwrap();
        assert_eq!(d.s_hat, zf);
        let bits = crate::phy::demap_frame(r.tac_index, &zf, &table, &qam);
        assert_eq!(d.bits, bits);
    }
    assert!(net.detect_with_tacs(&pairs[..1], &[9], &table, &qam).is_err());
    // with the SOMP support the classical pipeline is the same composition
    let somp = classical_pipeline(&recs[0].y, &recs[0].h_est, &table, &qam, ClassicalMethod::Somp).unwrap();
    let d = net.detect_with_tacs(&pairs[..1], &[somp.tac_index], &table, &qam).unwrap();
    assert_eq!(d[0].bits, somp.bits);
}

#[test]
fn single_frame_overfit_aapd() {
    let table = TacTable::build(4, 1, TacStrategy::Lexicographic).unwrap();
    let qam = QamConstellation::new(4).unwrap();
    let rec = frames(1, &table, &qam, 1, 10.0, 9);
    // batch statistics need two rows, so the one frame is repeated
    let set = AapdSet::from_records(&[rec[0].clone(), rec[0].clone()], &table).unwrap();
    let mut rng = Rng::new(10);
    let m = build_aapd(1, 8, 4, Variant::Complex, SMALL, &mut rng).unwrap();
    let cfg = TrainConfig { gamma1: 1e-4, ..small_cfg(400) };
    let (m, report) = train_aapd(m, &set, &set, &table, &cfg, &mut |_| {}).unwrap();
    assert!(report.best_val_loss < 1e-3, "{report:?}");
    // the returned model is the reloaded checkpoint
    let (loss, acc) = evaluate_aapd(&m, &set, &table).unwrap();
    assert!((loss - report.best_val_loss).abs() < 1e-4);
    assert_eq!(acc, 1.0);
}

#[test]
fn single_frame_overfit_se() {
    let mut rng = Rng::new(11);
    let truth = rayleigh_channel(&mut rng, 1, 8);
    let noisy = truth.add(&rayleigh_channel(&mut rng, 1, 8).scale(0.3)).unwrap();
    let set = SeSet::new(&[noisy.clone(), noisy], &[&truth, &truth]).unwrap();
    let se = build_se(1, 8, Variant::Complex, SeWidths::default(), &mut rng).unwrap();
    let cfg = TrainConfig { gamma2: Some(1e-5), lr: 3e-3, ..small_cfg(2000) };
    let (_, report) = train_se(se, &set, &set, &cfg, &mut |_| {}).unwrap();
    assert!(report.best_val_loss < 1e-4, "{report:?}");
}

#[test]
fn empty_sets_rejected() {
    let table = TacTable::build(4, 1, TacStrategy::Lexicographic).unwrap();
    assert!(AapdSet::from_records(&[], &table).is_err());
    assert!(SeSet::new(&[], &[]).is_err());
    assert!(train_full(&[], &[], &table, &TrainConfig::default(), &mut |_| {}).is_err());
    let bad = TrainConfig { batch: 1, ..Default::default() };
    assert!(bad.validate().is_err());
}

#[test]
fn training_log_follows_stage_order() {
    let table = TacTable::build(4, 1, TacStrategy::Lexicographic).unwrap();
    let qam = QamConstellation::new(4).unwrap();
    let recs = frames(120, &table, &qam, 1, 15.0, 12);
    let mut events = Vec::new();
    let pair = train_full(&recs[..80], &recs[80..], &table, &small_cfg(3), &mut |e| events.push(e.clone())).unwrap();

    let kinds: Vec<(&str, Stage)> = events
        .iter()
        .filter_map(|e| match e {
            LogEvent::StageStart { stage, .. } => Some(("start", *stage)),
            LogEvent::StageEnd { stage, .. } => Some(("end", *stage)),
            LogEvent::Epoch { .. } => None,
        })
        .collect();
    assert_eq!(kinds, vec![("start", Stage::Aapd), ("end", Stage::Aapd), ("start", Stage::Se), ("end", Stage::Se)]);
    let times: Vec<f64> = events
        .iter()
        .map(|e| match e {
            LogEvent::StageStart { t_s, .. } | LogEvent::StageEnd { t_s, .. } | LogEvent::Epoch { t_s, .. } => *t_s,
        })
        .collect();
    assert!(times.windows(2).all(|w| w[0] <= w[1]));

    // the kept checkpoint has the lowest validation loss of its stage
    for (stage, report) in [(Stage::Aapd, &pair.aapd), (Stage::Se, &pair.se)] {
        for e in &events {
            if let LogEvent::Epoch { stage: s, val_loss, .. } = e {
                if *s == stage {
                    assert!(report.best_val_loss <= *val_loss);
                }
            }
        }
    }
    let n_epochs = events.iter().filter(|e| matches!(e, LogEvent::Epoch { stage: Stage::Aapd, .. })).count();
    assert_eq!(n_epochs, pair.aapd.epochs_run + 1);
}

#[test]
fn training_is_deterministic() {
    let table = TacTable::build(4, 1, TacStrategy::Lexicographic).unwrap();
    let qam = QamConstellation::new(4).unwrap();
    let recs = frames(60, &table, &qam, 1, 10.0, 13);
    let run = || train_full(&recs[..40], &recs[40..], &table, &small_cfg(2), &mut |_| {}).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.net, b.net);
    assert_eq!(a.aapd.best_val_loss.to_bits(), b.aapd.best_val_loss.to_bits());
    assert_eq!(a.se.best_val_loss.to_bits(), b.se.best_val_loss.to_bits());
}

#[test]
fn frames_tensor_layout() {
    let m = ComplexMatrix::from_rows(&[vec![num_complex::Complex64::new(1.0, 2.0), num_complex::Complex64::new(3.0, 4.0)]]);
    let t: Tensor = frames_tensor(&[&m], 1, 2).unwrap();
    assert_eq!(t.shape(), &[1, 2, 1, 2]);
    assert_eq!(t.data(), &[1.0, 3.0, 2.0, 4.0]);
    assert!(frames_tensor(&[&m], 2, 1).is_err());
}
