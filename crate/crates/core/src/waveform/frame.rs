use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::seed;
use crate::{Error, Result};

/// Half-range of the affine map between unit-RMS IQ samples and [0, 1].
pub const DEFAULT_CLIP_AMP: f64 = 4.0;

/// One complex-baseband frame with its class label and SNR tag.
///
/// `label` is the index of the frame's scheme in the owning dataset's scheme
/// list, which is also the classifier's output index.
#[derive(Debug, Clone, PartialEq)]
pub struct IqFrame {
    pub samples: Vec<Complex64>,
    pub label: u8,
    pub snr_tag: f64,
    pub seed: u64,
}

impl IqFrame {
    pub fn new(samples: Vec<Complex64>, label: u8, snr_tag: f64, seed: u64) -> Self {
        IqFrame {
            samples,
            label,
            snr_tag,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean squared magnitude.
    pub fn power(&self) -> f64 {
        mean_power(&self.samples)
    }

    pub fn rms(&self) -> f64 {
        self.power().sqrt()
    }

    /// Same metadata, different samples.
    pub fn with_samples(&self, samples: Vec<Complex64>) -> IqFrame {
        IqFrame {
            samples,
            label: self.label,
            snr_tag: self.snr_tag,
            seed: self.seed,
        }
    }

    /// Scales the frame to unit RMS amplitude.
    pub fn normalize_power(&mut self) -> Result<()> {
        let rms = self.rms();
        if !(rms > 0.0) || !rms.is_finite() {
            return Err(Error::Degenerate(format!("cannot normalize frame with RMS {rms}")));
        }
        let scale = rms.recip();
        self.samples.iter_mut().for_each(|s| *s *= scale);
        Ok(())
    }

    /// Adds complex white Gaussian noise with per-sample variance
    /// `P_x / 10^(snr_db / 10)` where `P_x` is the frame's measured power,
    /// and retags the frame with `snr_db`.
    pub fn add_awgn(&self, snr_db: f64, noise_seed: u64) -> Result<IqFrame> {
        let p = self.power();
        if !(p > 0.0) {
            return Err(Error::Degenerate("AWGN needs a frame with nonzero power".into()));
        }
        let mut out = self.with_samples(self.samples.clone());
        add_noise(&mut out.samples, p * 10f64.powf(-snr_db / 10.0), noise_seed);
        out.snr_tag = snr_db;
        Ok(out)
    }

    /// Maps the frame into the [0, 1] attack domain.
    pub fn to_unit_interval(&self, clip_amp: f64) -> (UnitFrame, ClampStats) {
        UnitFrame::from_iq(self, clip_amp)
    }

    /// Inverse of [`IqFrame::to_unit_interval`], keeping `self`'s metadata.
    pub fn from_unit_interval(&self, unit: &UnitFrame) -> IqFrame {
        self.with_samples(unit.to_samples())
    }
}

pub(crate) fn mean_power(samples: &[Complex64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64
}

/// Adds complex Gaussian noise of total per-sample variance `noise_power`
/// (each of I and Q gets half).
pub(crate) fn add_noise(samples: &mut [Complex64], noise_power: f64, noise_seed: u64) {
    let mut rng = seed::rng(noise_seed);
    add_noise_from(samples, noise_power, &mut rng);
}

pub(crate) fn add_noise_from<R: rand::Rng>(samples: &mut [Complex64], noise_power: f64, rng: &mut R) {
    let sigma = (noise_power / 2.0).sqrt();
    for s in samples {
        let i: f64 = StandardNormal.sample(rng);
        let q: f64 = StandardNormal.sample(rng);
        *s += Complex64::new(sigma * i, sigma * q);
    }
}

/// Perturbation-to-signal ratio `10 log10(P_delta / P_x)` in dB, measured
/// in the physical IQ domain.
///
/// An unperturbed frame yields `f64::NEG_INFINITY`.
pub fn psr_db(original: &IqFrame, perturbed: &IqFrame) -> Result<f64> {
    if original.len() != perturbed.len() {
        return Err(Error::Shape {
            what: "PSR frames",
            expected: original.len(),
            actual: perturbed.len(),
        });
    }
    let p_x = original.power();
    if !(p_x > 0.0) {
        return Err(Error::Degenerate("PSR of a zero-power frame".into()));
    }
    let p_delta = original
        .samples
        .iter()
        .zip(&perturbed.samples)
        .map(|(a, b)| (b - a).norm_sqr())
        .sum::<f64>()
        / original.len() as f64;
    if p_delta == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(10.0 * (p_delta / p_x).log10())
}

/// A frame in the clipped [0, 1] domain the classifier and the attack work
/// in: interleaved `I0, Q0, I1, Q1, ...` mapped by `u = (s + A) / (2A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitFrame {
    pub values: Vec<f64>,
    pub clip_amp: f64,
}

/// How many reals were clamped to `±clip_amp` by the unit map.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClampStats {
    pub clamped: usize,
    pub total: usize,
}

impl ClampStats {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.clamped as f64 / self.total as f64
        }
    }
}

impl UnitFrame {
    pub fn from_iq(frame: &IqFrame, clip_amp: f64) -> (UnitFrame, ClampStats) {
        assert!(clip_amp > 0.0, "clip_amp must be positive");
        let mut values = Vec::with_capacity(2 * frame.len());
        let mut clamped = 0;
        let mut push = |x: f64| {
            if x.abs() > clip_amp {
                clamped += 1;
            }
            values.push((x.clamp(-clip_amp, clip_amp) + clip_amp) / (2.0 * clip_amp));
        };
        for s in &frame.samples {
            push(s.re);
            push(s.im);
        }
        let total = values.len();
        (UnitFrame { values, clip_amp }, ClampStats { clamped, total })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_samples(&self) -> Vec<Complex64> {
        let a = self.clip_amp;
        self.values
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0] * 2.0 * a - a, p[1] * 2.0 * a - a))
            .collect()
    }
}
