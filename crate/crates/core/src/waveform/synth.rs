use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use super::dataset::DatasetSpec;
use super::frame::IqFrame;
use super::pulse::rrc_taps;
use super::scheme::ModulationScheme;
use crate::seed;
use crate::{Error, Result};

/// A noiseless synthesized frame together with the ground truth needed to
/// demodulate it.
#[derive(Debug, Clone)]
pub struct Modulated {
    pub frame: IqFrame,
    /// Symbols whose pulse peaks fall inside the frame; symbol `j` peaks at
    /// sample `j * sps`.
    pub symbols: Vec<Complex64>,
    /// Carrier phase offset in radians.
    pub phase: f64,
    /// Amplitude applied by power normalization.
    pub gain: f64,
}

/// Synthesizes one unit-RMS, noiseless frame of `scheme`.
///
/// Random bits are Gray-mapped to symbols, shaped by a root-raised-cosine
/// filter and rotated by a uniformly random carrier phase. Extra symbols are
/// generated on both sides so that the `frame_len` window sees no filter
/// start-up transient.
pub fn modulate(scheme: ModulationScheme, seed: u64, spec: &DatasetSpec) -> Result<IqFrame> {
    modulate_detailed(scheme, seed, spec).map(|m| m.frame)
}

pub fn modulate_detailed(scheme: ModulationScheme, seed: u64, spec: &DatasetSpec) -> Result<Modulated> {
    let label = spec
        .schemes
        .iter()
        .position(|&s| s == scheme)
        .ok_or_else(|| Error::Config(format!("scheme {scheme} is not part of the dataset spec")))?;
    let (sps, span, len) = (spec.sps, spec.filter_span, spec.frame_len);
    if sps == 0 || len % sps != 0 {
        return Err(Error::Config(format!(
            "frame_len {len} is not a multiple of samples per symbol {sps}"
        )));
    }

    let mut rng = seed::rng(seed);
    let k = scheme.bits_per_symbol() as usize;
    let n_sym = len / sps + span;
    let bits: Vec<u8> = (0..n_sym * k).map(|_| rng.random_range(0..2u8)).collect();
    let symbols = scheme.map_bits(&bits);
    let phase = rng.random::<f64>() * 2.0 * PI;

    let taps = rrc_taps(spec.rolloff, sps, span);
    let center = span * sps / 2;
    // Output sample n of the window is filtered sample `start + n`; symbol m
    // peaks at filtered index m * sps + center.
    let lead = span / 2;
    let start = lead * sps + center;
    let rotation = Complex64::from_polar(1.0, phase);
    let mut samples = vec![Complex64::default(); len];
    for (n, out) in samples.iter_mut().enumerate() {
        let idx = start + n;
        let mut acc = Complex64::default();
        // only every sps-th upsampled entry is nonzero
        for (m, sym) in symbols.iter().enumerate() {
            let pos = m * sps;
            if pos > idx {
                break;
            }
            let t = idx - pos;
            if t < taps.len() {
                acc += sym * taps[t];
            }
        }
        *out = acc * rotation;
    }

    let mut frame = IqFrame::new(samples, label as u8, f64::INFINITY, seed);
    let gain = frame.rms().recip();
    frame.normalize_power()?;
    let visible = symbols[lead..lead + len / sps].to_vec();
    Ok(Modulated {
        frame,
        symbols: visible,
        phase,
        gain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> DatasetSpec {
        DatasetSpec {
            schemes: ModulationScheme::ALL.to_vec(),
            ..DatasetSpec::default()
        }
    }

    #[test]
    fn frames_are_deterministic_and_unit_rms() {
        let spec = spec();
        for scheme in ModulationScheme::ALL {
            let a = modulate(scheme, 42, &spec).unwrap();
            let b = modulate(scheme, 42, &spec).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.len(), spec.frame_len);
            assert!((a.rms() - 1.0).abs() < 1e-6);
            assert_ne!(a, modulate(scheme, 43, &spec).unwrap());
        }
    }

    #[test]
    fn rejects_bad_geometry_and_foreign_scheme() {
        let mut s = spec();
        s.frame_len = 250;
        assert!(matches!(modulate(ModulationScheme::Bpsk, 1, &s), Err(Error::Config(_))));
        let s = DatasetSpec {
            schemes: vec![ModulationScheme::Bpsk],
            ..DatasetSpec::default()
        };
        assert!(matches!(modulate(ModulationScheme::Qam64, 1, &s), Err(Error::Config(_))));
    }

    #[test]
    fn label_is_position_in_spec() {
        let s = DatasetSpec {
            schemes: vec![ModulationScheme::Qpsk, ModulationScheme::Ook],
            ..DatasetSpec::default()
        };
        assert_eq!(modulate(ModulationScheme::Ook, 1, &s).unwrap().label, 1);
    }
}
