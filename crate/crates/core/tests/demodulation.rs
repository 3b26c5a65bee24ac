//! Synthesized frames against an independent matched-filter receiver.

use std::f64::consts::PI;

use liw::seed::derive_seed;
use liw::waveform::{modulate_detailed, rrc_taps, Dataset, DatasetSpec, ModulationScheme};
use num_complex::Complex64;

/// Closed-form root-raised-cosine impulse response, unit energy.
fn rrc_reference(beta: f64, sps: usize, span: usize) -> Vec<f64> {
    let half = (span * sps / 2) as i64;
    let mut h: Vec<f64> = (-half..=half)
        .map(|n| {
            let t = n as f64 / sps as f64;
            if t == 0.0 {
                1.0 - beta + 4.0 * beta / PI
            } else if (t.abs() - 1.0 / (4.0 * beta)).abs() < 1e-9 {
                beta / 2f64.sqrt()
                    * ((1.0 + 2.0 / PI) * (PI / (4.0 * beta)).sin() + (1.0 - 2.0 / PI) * (PI / (4.0 * beta)).cos())
            } else {
                ((PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos())
                    / (PI * t * (1.0 - (4.0 * beta * t).powi(2)))
            }
        })
        .collect();
    let e = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    h.iter_mut().for_each(|v| *v /= e);
    h
}

#[test]
fn pulse_matches_closed_form() {
    for (beta, sps, span) in [(0.35, 8, 8), (0.25, 4, 6), (0.5, 8, 10)] {
        let ours = rrc_taps(beta, sps, span);
        let reference = rrc_reference(beta, sps, span);
        assert_eq!(ours.len(), reference.len());
        for (a, b) in ours.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12, "beta {beta}: {a} vs {b}");
        }
    }
}

fn nearest(points: &[Complex64], z: Complex64) -> Complex64 {
    *points
        .iter()
        .min_by(|a, b| (**a - z).norm().total_cmp(&(**b - z).norm()))
        .unwrap()
}

#[test]
fn matched_filter_recovers_symbols_at_high_snr() {
    let spec = DatasetSpec {
        schemes: ModulationScheme::ALL.to_vec(),
        ..DatasetSpec::default()
    };
    let h = rrc_reference(spec.rolloff, spec.sps, spec.filter_span);
    let c = h.len() / 2;
    // skip symbols whose matched-filter window leaves the frame
    let guard = spec.filter_span / 2;
    for scheme in ModulationScheme::ALL {
        let points = scheme.constellation();
        let (mut right, mut total) = (0usize, 0usize);
        for i in 0..40u64 {
            let m = modulate_detailed(scheme, derive_seed(7, scheme.name(), i), &spec).unwrap();
            let rx = m.frame.add_awgn(30.0, derive_seed(8, scheme.name(), i)).unwrap();
            let derotate = Complex64::from_polar(1.0 / m.gain, -m.phase);
            for (j, sym) in m.symbols.iter().enumerate().skip(guard).take(m.symbols.len() - 2 * guard) {
                let n = j * spec.sps;
                let y: Complex64 = (0..h.len()).map(|t| rx.samples[n + t - c] * h[t]).sum();
                total += 1;
                right += (nearest(&points, y * derotate) == *sym) as usize;
            }
        }
        let acc = right as f64 / total as f64;
        assert!(acc >= 0.99, "{scheme}: symbol accuracy {acc}");
    }
}

#[test]
fn synthesized_frames_have_unit_rms_and_rare_clamping() {
    let spec = DatasetSpec {
        schemes: ModulationScheme::ALL.to_vec(),
        frames_per_scheme_per_snr: 20,
        ..DatasetSpec::default()
    };
    let ds = Dataset::synthesize(&spec).unwrap();
    assert_eq!(ds.len(), 8 * 6 * 20);
    let (mut clamped, mut total) = (0, 0);
    for f in &ds.frames {
        assert!((f.rms() - 1.0).abs() < 1e-6);
        let (_, stats) = f.to_unit_interval(4.0);
        clamped += stats.clamped;
        total += stats.total;
    }
    assert!((clamped as f64 / total as f64) < 1e-3);
}
