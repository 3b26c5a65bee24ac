//! Evaluation modes and the sweep.

mod common;

use liw::channel::ChannelConfig;
use liw::eval::{
    emit_sweep, evaluate, evaluate_predictions, hardware_loop_eval, practical_eval, sweep, EvalMode, SweepSpec,
};
use liw::attack::AttackConfig;
use liw::model::{train, Classifier, TrainConfig};
use liw::seed::{self, derive_seed};
use liw::waveform::{Dataset, IqFrame, ModulationScheme};
use num_complex::Complex64;
use rand::Rng;

#[test]
fn random_guessing_sits_at_chance() {
    let frames: Vec<IqFrame> = (0..4000)
        .map(|i| IqFrame::new(vec![Complex64::new(1.0, 0.0)], (i % 8) as u8, 0.0, 0))
        .collect();
    let mut rng = seed::rng(3);
    let preds: Vec<usize> = frames.iter().map(|_| rng.random_range(0..8)).collect();
    let r = evaluate_predictions(&ModulationScheme::ALL, &frames, &preds, EvalMode::Ideal).unwrap();
    assert!((r.overall_accuracy - 0.125).abs() <= 0.02, "{}", r.overall_accuracy);
    assert_eq!(r.confusion.trace() as f64 / r.confusion.total() as f64, r.overall_accuracy);
}

fn setup() -> (Classifier, Dataset) {
    let schemes = [ModulationScheme::Bpsk, ModulationScheme::Qpsk, ModulationScheme::Ook];
    let ds = common::small_dataset(&schemes, 40, &[0.0, 10.0, 30.0], 41);
    let cfg = TrainConfig {
        epochs: 4,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let ckpt = train(Classifier::new(common::small_arch(64, 3), 1).unwrap(), &ds, &cfg).unwrap();
    (ckpt.model, common::small_dataset(&schemes, 12, &[30.0], 42))
}

#[test]
fn transparent_channel_equals_ideal_evaluation() {
    let (model, test) = setup();
    let ideal = evaluate(&model, &test).unwrap();
    let ch = ChannelConfig::transparent();
    for r in [practical_eval(&model, &test, &ch).unwrap(), hardware_loop_eval(&model, &test, &ch).unwrap()] {
        assert_eq!(r.confusion, ideal.confusion);
        assert_eq!(r.per_snr, ideal.per_snr);
        assert!(r.warnings.is_empty());
    }
}

#[test]
fn loop_tracks_per_frame_channel() {
    let (model, test) = setup();
    for snr in [0.0, 10.0, 20.0] {
        let ch = ChannelConfig {
            snr_db: snr,
            noise_seed: 77,
            ..ChannelConfig::default()
        };
        let a = practical_eval(&model, &test, &ch).unwrap().overall_accuracy;
        let b = hardware_loop_eval(&model, &test, &ch).unwrap();
        assert_eq!(b.mode, EvalMode::Loop);
        assert!((a - b.overall_accuracy).abs() <= 0.05, "snr {snr}: {a} vs {}", b.overall_accuracy);
    }
}

#[test]
fn off_tag_sources_are_warned_about() {
    let (model, _) = setup();
    let noisy = common::small_dataset(&[ModulationScheme::Bpsk, ModulationScheme::Qpsk, ModulationScheme::Ook], 2, &[0.0], 5);
    let r = practical_eval(&model, &noisy, &ChannelConfig::default()).unwrap();
    assert_eq!(r.warnings.len(), 1);
}

#[test]
fn sweep_unperturbed_column_reproduces_clean_curve() {
    let (model, test) = setup();
    let spec = SweepSpec {
        channel_snr_grid: vec![0.0, 10.0, 30.0],
        psr_grid: vec![-25.0, -15.0],
        attack: AttackConfig {
            iterations: 5,
            epsilon_init: 0.05,
            ..AttackConfig::practical()
        },
        ..SweepSpec::default()
    };
    let table = sweep(&model, &test, &spec).unwrap();
    assert_eq!(table.cells.len(), 3 * 3);
    for (row, snr) in spec.channel_snr_grid.iter().enumerate() {
        let ch = ChannelConfig {
            snr_db: *snr,
            noise_seed: derive_seed(spec.channel.noise_seed, "sweep-row", row as u64),
            ..spec.channel.clone()
        };
        let clean = practical_eval(&model, &test, &ch).unwrap();
        let cells = &table.cells[row * 3..row * 3 + 3];
        assert_eq!(cells[0].psr_db, f64::NEG_INFINITY);
        assert_eq!(cells[0].accuracy, clean.overall_accuracy);
        for c in &cells[1..] {
            assert!(c.accuracy <= cells[0].accuracy, "LIW above clean at snr {snr}");
            if !c.flagged {
                assert!((c.psr_db - c.target_psr_db.unwrap()).abs() <= 0.5);
            }
        }
    }
    let dir = tempfile::tempdir().unwrap();
    emit_sweep(&table, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "channel_snr_db,psr_db,accuracy,n,flagged");
    assert_eq!(text.lines().count(), 10);
}

#[test]
fn sweep_flags_unreachable_psr() {
    let (model, test) = setup();
    let spec = SweepSpec {
        channel_snr_grid: vec![30.0],
        psr_grid: vec![25.0],
        include_unperturbed: false,
        attack: AttackConfig {
            iterations: 3,
            ..AttackConfig::practical()
        },
        ..SweepSpec::default()
    };
    let table = sweep(&model, &test, &spec).unwrap();
    assert!(table.cells[0].flagged);
    assert!(!table.warnings.is_empty());
}

#[test]
fn invalid_sweeps_are_rejected() {
    let (model, test) = setup();
    let both = SweepSpec {
        beta_grid: vec![1.0],
        ..SweepSpec::default()
    };
    assert!(sweep(&model, &test, &both).is_err());
    let empty = SweepSpec {
        channel_snr_grid: vec![],
        ..SweepSpec::default()
    };
    assert!(sweep(&model, &test, &empty).is_err());
}
