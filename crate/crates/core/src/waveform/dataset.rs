use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::frame::IqFrame;
use super::scheme::ModulationScheme;
use super::synth::modulate;
use crate::seed::derive_seed;
use crate::{Error, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"LIW1";

/// Parameters of a synthetic modulation dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub schemes: Vec<ModulationScheme>,
    pub frames_per_scheme_per_snr: usize,
    pub snr_grid: Vec<f64>,
    pub frame_len: usize,
    /// Samples per symbol.
    pub sps: usize,
    pub rolloff: f64,
    /// Pulse-shaping filter span in symbols.
    pub filter_span: usize,
    pub master_seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            schemes: ModulationScheme::DESK.to_vec(),
            frames_per_scheme_per_snr: 1000,
            snr_grid: vec![-10.0, -5.0, 0.0, 10.0, 20.0, 30.0],
            frame_len: 256,
            sps: 8,
            rolloff: 0.35,
            filter_span: 8,
            master_seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.schemes.is_empty() {
            return fail("dataset needs at least one modulation scheme".into());
        }
        if self.schemes.len() > u8::MAX as usize {
            return fail("too many schemes for the u8 label field".into());
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(s) {
                return fail(format!("scheme {s} listed twice"));
            }
        }
        if self.snr_grid.is_empty() {
            return fail("snr_grid must not be empty".into());
        }
        if self.snr_grid.iter().any(|s| !s.is_finite()) {
            return fail("snr_grid values must be finite".into());
        }
        if self.frames_per_scheme_per_snr == 0 {
            return fail("frames_per_scheme_per_snr must be at least 1".into());
        }
        if self.frame_len == 0 || !self.frame_len.is_multiple_of(2) {
            return fail(format!("frame_len {} must be even and positive", self.frame_len));
        }
        if self.sps == 0 || !self.frame_len.is_multiple_of(self.sps) {
            return fail(format!(
                "frame_len {} is not a multiple of sps {}",
                self.frame_len, self.sps
            ));
        }
        if !(0.0..=1.0).contains(&self.rolloff) {
            return fail(format!("rolloff {} outside [0, 1]", self.rolloff));
        }
        if self.filter_span == 0 || !self.filter_span.is_multiple_of(2) {
            return fail("filter_span must be even and positive".into());
        }
        Ok(())
    }

    /// Total number of frames, or an error if it does not fit the u32
    /// frame-count field.
    pub fn frame_count(&self) -> Result<u32> {
        self.schemes
            .len()
            .checked_mul(self.snr_grid.len())
            .and_then(|n| n.checked_mul(self.frames_per_scheme_per_snr))
            .and_then(|n| u32::try_from(n).ok())
            .ok_or_else(|| Error::Config("frame count overflows the u32 header field".into()))
    }
}

/// The structured-text metadata stored next to every dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub spec: DatasetSpec,
    /// Free-form provenance, e.g. the attack that produced a LIW dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived_from: Option<String>,
}

/// An in-memory dataset: frames plus the spec that labels them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: Sidecar,
    pub frames: Vec<IqFrame>,
}

fn round_f32(s: Complex64) -> Complex64 {
    Complex64::new(s.re as f32 as f64, s.im as f32 as f64)
}

impl Dataset {
    /// Synthesizes every `scheme x snr x repetition` frame of `spec`.
    ///
    /// Frame `i` (scheme-major, then SNR, then repetition) is modulated with
    /// `derive_seed(master_seed, "modulate", i)` and noised with
    /// `derive_seed(master_seed, "awgn", i)`, then renormalized to unit RMS.
    /// Samples are rounded to f32, the precision of the file format, so a
    /// saved and reloaded dataset compares equal to the original.
    pub fn synthesize(spec: &DatasetSpec) -> Result<Dataset> {
        spec.validate()?;
        let count = spec.frame_count()? as usize;
        let per_scheme = spec.snr_grid.len() * spec.frames_per_scheme_per_snr;
        let frames = (0..count)
            .into_par_iter()
            .map(|i| {
                let scheme = spec.schemes[i / per_scheme];
                let snr = spec.snr_grid[(i % per_scheme) / spec.frames_per_scheme_per_snr];
                let clean = modulate(scheme, frame_seed(spec.master_seed, i), spec)?;
                let mut noisy = clean.add_awgn(snr, derive_seed(spec.master_seed, "awgn", i as u64))?;
                noisy.normalize_power()?;
                noisy.samples.iter_mut().for_each(|s| *s = round_f32(*s));
                Ok(noisy)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            meta: Sidecar {
                spec: spec.clone(),
                derived_from: None,
            },
            frames,
        })
    }

    pub fn schemes(&self) -> &[ModulationScheme] {
        &self.meta.spec.schemes
    }

    pub fn num_classes(&self) -> usize {
        self.meta.spec.schemes.len()
    }

    pub fn frame_len(&self) -> usize {
        self.meta.spec.frame_len
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// A dataset with the same metadata and a different frame list.
    pub fn with_frames(&self, frames: Vec<IqFrame>) -> Dataset {
        Dataset {
            meta: self.meta.clone(),
            frames,
        }
    }

    /// Frames whose SNR tag equals `snr_db`.
    pub fn filter_snr(&self, snr_db: f64) -> Dataset {
        self.with_frames(self.frames.iter().filter(|f| f.snr_tag == snr_db).cloned().collect())
    }

    /// Little-endian binary encoding (see the crate README for the layout).
    pub fn encode(&self) -> Result<Vec<u8>> {
        let len = self.frame_len();
        let count = u32::try_from(self.frames.len())
            .map_err(|_| Error::Config("frame count overflows the u32 header field".into()))?;
        let mut out = Vec::with_capacity(13 + self.frames.len() * (5 + 8 * len));
        out.extend_from_slice(DATASET_MAGIC);
        out.extend_from_slice(&count.to_le_bytes());
        out.extend_from_slice(&(len as u32).to_le_bytes());
        out.push(self.num_classes() as u8);
        for f in &self.frames {
            if f.len() != len {
                return Err(Error::Shape {
                    what: "dataset frame",
                    expected: len,
                    actual: f.len(),
                });
            }
            out.push(f.label);
            out.extend_from_slice(&(f.snr_tag as f32).to_le_bytes());
            for s in &f.samples {
                out.extend_from_slice(&(s.re as f32).to_le_bytes());
                out.extend_from_slice(&(s.im as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Decodes a binary dataset; `meta` supplies the scheme list.
    pub fn decode(bytes: &[u8], meta: Sidecar) -> Result<Dataset> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != DATASET_MAGIC {
            return Err(Error::format("dataset", "bad magic"));
        }
        let count = r.u32()? as usize;
        let len = r.u32()? as usize;
        let classes = r.u8()? as usize;
        if len != meta.spec.frame_len {
            return Err(Error::format(
                "dataset",
                format!("frame_len {len} disagrees with sidecar {}", meta.spec.frame_len),
            ));
        }
        if classes != meta.spec.schemes.len() {
            return Err(Error::format(
                "dataset",
                format!("{classes} classes but sidecar lists {}", meta.spec.schemes.len()),
            ));
        }
        let frame_bytes = 5 + 8 * len;
        if r.remaining() != count * frame_bytes {
            return Err(Error::format(
                "dataset",
                format!("expected {} payload bytes, found {}", count * frame_bytes, r.remaining()),
            ));
        }
        let mut frames = Vec::with_capacity(count);
        for i in 0..count {
            let label = r.u8()?;
            if label as usize >= classes {
                return Err(Error::format("dataset", format!("frame {i} has label {label}")));
            }
            let snr_tag = r.f32()? as f64;
            let mut samples = Vec::with_capacity(len);
            for _ in 0..len {
                let re = r.f32()? as f64;
                let im = r.f32()? as f64;
                samples.push(Complex64::new(re, im));
            }
            frames.push(IqFrame::new(samples, label, snr_tag, frame_seed(meta.spec.master_seed, i)));
        }
        Ok(Dataset { meta, frames })
    }

    /// SHA-256 of the binary encoding, hex encoded.
    pub fn fingerprint(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.encode()?)))
    }

    pub fn sidecar_path(path: &Path) -> PathBuf {
        path.with_extension("toml")
    }

    /// Writes the binary file and its `.toml` sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.encode()?;
        let mut w = BufWriter::new(fs::File::create(path)?);
        w.write_all(&bytes)?;
        w.flush()?;
        let text = toml::to_string(&self.meta)
            .map_err(|e| Error::format("dataset sidecar", e.to_string()))?;
        fs::write(Self::sidecar_path(path), text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        let text = fs::read_to_string(Self::sidecar_path(path))?;
        let meta: Sidecar =
            toml::from_str(&text).map_err(|e| Error::format("dataset sidecar", e.to_string()))?;
        let bytes = fs::read(path)?;
        Dataset::decode(&bytes, meta)
    }
}

fn frame_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, "modulate", index as u64)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::format("dataset", "truncated file"));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
