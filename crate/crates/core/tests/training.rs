//! Training behaviour on small problems.

mod common;

use liw::eval::evaluate;
use liw::model::{train, Checkpoint, Classifier, TrainConfig};
use liw::seed;
use liw::waveform::{Dataset, IqFrame, ModulationScheme};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

/// Two classes separated by the sign of a fixed template.
fn separable(n: usize, seed: u64) -> Dataset {
    let base = common::small_dataset(&[ModulationScheme::Bpsk, ModulationScheme::Qpsk], 1, &[30.0], 0);
    let mut rng = seed::rng(seed);
    let template: Vec<Complex64> = (0..64).map(|k| Complex64::from_polar(0.8, 0.3 * k as f64)).collect();
    let frames = (0..n)
        .map(|i| {
            let label = (i % 2) as u8;
            let sign = if label == 0 { 1.0 } else { -1.0 };
            let s = template
                .iter()
                .map(|t| {
                    let ni: f64 = StandardNormal.sample(&mut rng);
                    let nq: f64 = StandardNormal.sample(&mut rng);
                    t * sign + Complex64::new(ni, nq) * 0.3
                })
                .collect();
            IqFrame::new(s, label, 30.0, i as u64)
        })
        .collect();
    base.with_frames(frames)
}

/// The toy classes differ by a rotation of pi, so phase augmentation would
/// erase the label.
fn quick(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 16,
        phase_augment: false,
        ..TrainConfig::default()
    }
}

#[test]
fn separable_toy_problem_is_learned_within_ten_epochs() {
    let ds = separable(400, 1);
    let model = Classifier::new(common::small_arch(64, 2), 3).unwrap();
    let ckpt = train(model, &ds, &quick(10)).unwrap();
    let acc = evaluate(&ckpt.model, &separable(400, 2)).unwrap().overall_accuracy;
    assert!(acc >= 0.99, "held-out accuracy {acc}");
    assert_eq!(ckpt.metrics.len(), 10);
}

#[test]
fn same_seed_gives_identical_checkpoints() {
    let ds = common::small_dataset(&[ModulationScheme::Bpsk, ModulationScheme::Ook], 10, &[0.0, 20.0], 5);
    let run = || {
        let model = Classifier::new(common::small_arch(64, 2), 9).unwrap();
        train(model, &ds, &quick(2)).unwrap().encode().unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn phase_augmentation_is_seeded_and_changes_the_trajectory() {
    let ds = common::small_dataset(&[ModulationScheme::Qpsk, ModulationScheme::Ook], 8, &[20.0], 7);
    let run = |augment: bool| {
        let cfg = TrainConfig {
            phase_augment: augment,
            ..quick(2)
        };
        let model = Classifier::new(common::small_arch(64, 2), 2).unwrap();
        train(model, &ds, &cfg).unwrap().model.params().to_vec()
    };
    assert_eq!(run(true), run(true));
    assert_ne!(run(true), run(false));
}

#[test]
fn checkpoint_round_trip_preserves_forward_bits() {
    let ds = common::small_dataset(&[ModulationScheme::Bpsk, ModulationScheme::Ook], 6, &[10.0], 6);
    let ckpt = train(Classifier::new(common::small_arch(64, 2), 1).unwrap(), &ds, &quick(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.liwm");
    ckpt.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    for f in &ds.frames {
        let x = ckpt.model.unit_input(f).values;
        let a = ckpt.model.forward(&x).unwrap();
        let b = back.model.forward(&x).unwrap();
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
    let bytes = std::fs::read(&path).unwrap();
    assert!(Checkpoint::decode(&bytes[..bytes.len() - 3]).is_err());
}

#[test]
fn mixed_snr_training_beats_single_snr_on_mixed_validation() {
    let schemes = [ModulationScheme::Bpsk, ModulationScheme::Qpsk, ModulationScheme::Ask4];
    let grid = [-5.0, 0.0, 10.0, 30.0];
    let mixed = common::small_dataset(&schemes, 40, &grid, 10);
    let single = common::small_dataset(&schemes, 160, &[30.0], 11);
    assert_eq!(mixed.len(), single.len());
    let val = common::small_dataset(&schemes, 40, &grid, 12);
    let fit = |ds: &Dataset| {
        let model = Classifier::new(common::small_arch(64, 3), 2).unwrap();
        let ckpt = train(model, ds, &quick(6)).unwrap();
        evaluate(&ckpt.model, &val).unwrap().overall_accuracy
    };
    let (m, s) = (fit(&mixed), fit(&single));
    assert!(m >= s, "mixed {m} single {s}");
}

#[test]
fn trained_model_has_nonzero_gradient_on_correct_frames() {
    let ds = separable(200, 4);
    let ckpt = train(Classifier::new(common::small_arch(64, 2), 3).unwrap(), &ds, &quick(3)).unwrap();
    let mut seen = 0;
    for f in &ds.frames {
        let x = ckpt.model.unit_input(f).values;
        if ckpt.model.predict(&x).unwrap() == f.label as usize {
            let g = ckpt.model.input_gradient(&x, f.label as usize).unwrap().grad;
            assert!(g.iter().map(|v| v * v).sum::<f64>() > 0.0);
            seen += 1;
        }
    }
    assert!(seen > 0);
}

#[test]
fn mismatched_dataset_is_rejected_or_flagged() {
    let ds = common::small_dataset(&[ModulationScheme::Bpsk, ModulationScheme::Ook], 4, &[10.0], 6);
    let ckpt = train(Classifier::new(common::small_arch(64, 2), 1).unwrap(), &ds, &quick(1)).unwrap();
    let other = common::small_dataset(&[ModulationScheme::Bpsk, ModulationScheme::Ook], 4, &[10.0], 7);
    assert!(ckpt.check_dataset(&ds).unwrap().is_none());
    assert!(ckpt.check_dataset(&other).unwrap().is_some());
    let three = common::small_dataset(&ModulationScheme::DESK[..3], 2, &[10.0], 6);
    assert!(ckpt.check_dataset(&three).is_err());
}
