//! Simulated transmission path: gain, additive white Gaussian noise,
//! uniform quantization, and the splice / transmit / split loop used to
//! push a whole dataset through one continuous "over the air" stream.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::waveform::frame::{add_noise_from, mean_power};
use crate::waveform::{IqFrame, DEFAULT_CLIP_AMP};
use crate::{Error, Result};

/// Quantizer depths a channel accepts; 0 disables quantization.
pub const SUPPORTED_QUANT_BITS: [u32; 5] = [0, 4, 8, 12, 16];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// Channel SNR in dB, referenced to the measured power of what is sent.
    /// `inf` disables noise.
    pub snr_db: f64,
    pub quant_bits: u32,
    pub gain: f64,
    pub noise_seed: u64,
    /// Full-scale amplitude of the quantizer.
    pub clip_amp: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            snr_db: 20.0,
            quant_bits: 8,
            gain: 1.0,
            noise_seed: 0,
            clip_amp: DEFAULT_CLIP_AMP,
        }
    }
}

impl ChannelConfig {
    /// No noise, no quantization, unit gain.
    pub fn transparent() -> Self {
        ChannelConfig {
            snr_db: f64::INFINITY,
            quant_bits: 0,
            ..ChannelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !SUPPORTED_QUANT_BITS.contains(&self.quant_bits) {
            return Err(Error::Config(format!(
                "quant_bits {} not in {:?}",
                self.quant_bits, SUPPORTED_QUANT_BITS
            )));
        }
        if !(self.gain > 0.0) || !self.gain.is_finite() {
            return Err(Error::Config("channel gain must be positive".into()));
        }
        if !(self.clip_amp > 0.0) {
            return Err(Error::Config("channel clip_amp must be positive".into()));
        }
        if self.snr_db.is_nan() {
            return Err(Error::Config("channel snr_db is NaN".into()));
        }
        Ok(())
    }
}

/// Distance between adjacent levels of a `bits`-bit quantizer over
/// `[-clip_amp, clip_amp]`.
pub fn quant_step(bits: u32, clip_amp: f64) -> f64 {
    2.0 * clip_amp / ((1u64 << bits) - 1) as f64
}

/// Rounds one real to the nearest of `2^bits` uniformly spaced levels
/// spanning `[-clip_amp, clip_amp]`. Because the level count is even the
/// levels sit at odd multiples of half a step; exact midpoints round away
/// from zero.
pub fn quantize_value(x: f64, bits: u32, clip_amp: f64) -> f64 {
    let step = quant_step(bits, clip_amp);
    let top = ((1u64 << (bits - 1)) - 1) as f64;
    let v = x.clamp(-clip_amp, clip_amp);
    let k = (v.abs() / step).floor().min(top);
    (k + 0.5) * step * if v < 0.0 { -1.0 } else { 1.0 }
}

/// Quantizes both components of every sample.
pub fn quantize(frame: &IqFrame, bits: u32, clip_amp: f64) -> IqFrame {
    assert!(bits >= 2, "quantizer needs at least 2 bits");
    frame.with_samples(
        frame
            .samples
            .iter()
            .map(|s| Complex64::new(quantize_value(s.re, bits, clip_amp), quantize_value(s.im, bits, clip_amp)))
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMeta {
    pub label: u8,
    pub snr_tag: f64,
    pub seed: u64,
}

/// Frames concatenated into one continuous sample stream. Frame boundaries
/// and per-frame metadata ride along so the receiver can split without
/// timing recovery.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalStream {
    pub samples: Vec<Complex64>,
    pub frame_len: usize,
    pub frame_count: usize,
    pub boundary_index: Vec<usize>,
    pub frame_meta: Vec<FrameMeta>,
}

pub fn splice(frames: &[IqFrame]) -> Result<SignalStream> {
    let frame_len = frames.first().map_or(0, |f| f.len());
    let mut samples = Vec::with_capacity(frame_len * frames.len());
    let mut boundary_index = Vec::with_capacity(frames.len());
    let mut frame_meta = Vec::with_capacity(frames.len());
    for f in frames {
        if f.len() != frame_len {
            return Err(Error::Shape {
                what: "spliced frame",
                expected: frame_len,
                actual: f.len(),
            });
        }
        boundary_index.push(samples.len());
        samples.extend_from_slice(&f.samples);
        frame_meta.push(FrameMeta {
            label: f.label,
            snr_tag: f.snr_tag,
            seed: f.seed,
        });
    }
    Ok(SignalStream {
        samples,
        frame_len,
        frame_count: frames.len(),
        boundary_index,
        frame_meta,
    })
}

/// Gain, then AWGN referenced to the stream's measured power, then receiver
/// quantization.
pub fn transmit(stream: &SignalStream, ch: &ChannelConfig) -> SignalStream {
    let mut out = stream.clone();
    out.samples.iter_mut().for_each(|s| *s *= ch.gain);
    let mut rng = seed::rng(ch.noise_seed);
    let p = mean_power(&out.samples);
    if ch.snr_db.is_finite() && p > 0.0 {
        add_noise_from(&mut out.samples, p * 10f64.powf(-ch.snr_db / 10.0), &mut rng);
    }
    if ch.quant_bits > 0 {
        out.samples.iter_mut().for_each(|s| {
            *s = Complex64::new(
                quantize_value(s.re, ch.quant_bits, ch.clip_amp),
                quantize_value(s.im, ch.quant_bits, ch.clip_amp),
            )
        });
    }
    out
}

pub fn split(stream: &SignalStream, frame_len: usize) -> Result<Vec<IqFrame>> {
    if frame_len == 0 || !stream.samples.len().is_multiple_of(frame_len) {
        return Err(Error::Shape {
            what: "stream length (multiple of frame_len)",
            expected: frame_len,
            actual: stream.samples.len(),
        });
    }
    let n = stream.samples.len() / frame_len;
    if n != stream.frame_meta.len() {
        return Err(Error::Shape {
            what: "stream frame count",
            expected: stream.frame_meta.len(),
            actual: n,
        });
    }
    Ok(stream
        .samples
        .chunks_exact(frame_len)
        .zip(&stream.frame_meta)
        .map(|(chunk, m)| IqFrame::new(chunk.to_vec(), m.label, m.snr_tag, m.seed))
        .collect())
}

/// Splice, transmit and split: the received frames, in order.
pub fn hardware_loop(frames: &[IqFrame], ch: &ChannelConfig) -> Result<Vec<IqFrame>> {
    ch.validate()?;
    if frames.is_empty() {
        return Ok(Vec::new());
    }
    let tx = splice(frames)?;
    let rx = transmit(&tx, ch);
    split(&rx, tx.frame_len)
}

/// Frame-by-frame channel: noise power is referenced to each frame's own
/// power. The noise draws are the same sequence [`transmit`] would use for
/// the spliced stream, so both paths see paired noise.
pub fn apply_per_frame(frames: &[IqFrame], ch: &ChannelConfig) -> Result<Vec<IqFrame>> {
    ch.validate()?;
    let mut rng = seed::rng(ch.noise_seed);
    Ok(frames
        .iter()
        .map(|f| {
            let mut samples: Vec<Complex64> = f.samples.iter().map(|s| s * ch.gain).collect();
            let p = mean_power(&samples);
            if ch.snr_db.is_finite() && p > 0.0 {
                add_noise_from(&mut samples, p * 10f64.powf(-ch.snr_db / 10.0), &mut rng);
            }
            let out = f.with_samples(samples);
            if ch.quant_bits > 0 {
                quantize(&out, ch.quant_bits, ch.clip_amp)
            } else {
                out
            }
        })
        .collect())
}
