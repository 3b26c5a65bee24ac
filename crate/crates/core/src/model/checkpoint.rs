use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arch::ArchSpec;
use super::net::Classifier;
use super::train::EpochMetrics;
use crate::waveform::{Dataset, ModulationScheme};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LIWM";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained model plus what it was trained on.
///
/// Parameters are held at f32 precision (the on-disk precision), so a saved
/// and reloaded checkpoint produces bit-identical forward passes.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Classifier,
    pub schemes: Vec<ModulationScheme>,
    /// Hex SHA-256 of the training dataset encoding.
    pub dataset_fingerprint: String,
    pub metrics: Vec<EpochMetrics>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Descriptor {
    arch: ArchSpec,
    schemes: Vec<ModulationScheme>,
}

impl Checkpoint {
    pub fn new(mut model: Classifier, dataset: &Dataset, metrics: Vec<EpochMetrics>) -> Result<Checkpoint> {
        model
            .params_mut()
            .iter_mut()
            .for_each(|p| *p = *p as f32 as f64);
        Ok(Checkpoint {
            model,
            schemes: dataset.schemes().to_vec(),
            dataset_fingerprint: dataset.fingerprint()?,
            metrics,
        })
    }

    /// Errors if `dataset` cannot be fed to this model; returns a warning
    /// when it is a different dataset from the one trained on.
    pub fn check_dataset(&self, dataset: &Dataset) -> Result<Option<String>> {
        if dataset.schemes() != self.schemes.as_slice() || dataset.frame_len() != self.model.arch().frame_len {
            return Err(Error::Incompatible(format!(
                "checkpoint expects schemes {:?} at frame_len {}, dataset has {:?} at {}",
                self.schemes.iter().map(|s| s.name()).collect::<Vec<_>>(),
                self.model.arch().frame_len,
                dataset.schemes().iter().map(|s| s.name()).collect::<Vec<_>>(),
                dataset.frame_len()
            )));
        }
        let fp = dataset.fingerprint()?;
        if fp != self.dataset_fingerprint {
            let msg = format!(
                "evaluating on dataset {} but the checkpoint was trained on {}",
                &fp[..12],
                &self.dataset_fingerprint[..12.min(self.dataset_fingerprint.len())]
            );
            log::warn!("{msg}");
            return Ok(Some(msg));
        }
        Ok(None)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let desc = serde_json::to_vec(&Descriptor {
            arch: self.model.arch().clone(),
            schemes: self.schemes.clone(),
        })
        .map_err(|e| Error::format("checkpoint", e.to_string()))?;
        let metrics = serde_json::to_vec(&self.metrics).map_err(|e| Error::format("checkpoint", e.to_string()))?;
        let fp = hex::decode(&self.dataset_fingerprint)
            .ok()
            .filter(|b| b.len() == 32)
            .ok_or_else(|| Error::format("checkpoint", "fingerprint is not a SHA-256 hex digest"))?;
        let params = self.model.params();

        let mut out = Vec::with_capacity(64 + desc.len() + metrics.len() + 4 * params.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(desc.len() as u32).to_le_bytes());
        out.extend_from_slice(&desc);
        out.extend_from_slice(&(params.len() as u64).to_le_bytes());
        for p in params {
            out.extend_from_slice(&(*p as f32).to_le_bytes());
        }
        out.extend_from_slice(&fp);
        out.extend_from_slice(&(metrics.len() as u32).to_le_bytes());
        out.extend_from_slice(&metrics);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let end = pos
                .checked_add(n)
                .filter(|&e| e <= bytes.len())
                .ok_or_else(|| Error::format("checkpoint", "truncated file"))?;
            let s = &bytes[pos..end];
            pos = end;
            Ok(s)
        };
        if take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::format("checkpoint", "bad magic"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                what: "checkpoint",
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let desc_len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let desc: Descriptor =
            serde_json::from_slice(take(desc_len)?).map_err(|e| Error::format("checkpoint", e.to_string()))?;
        let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let blob = take(n.checked_mul(4).ok_or_else(|| Error::format("checkpoint", "bad count"))?)?;
        let params: Vec<f64> = blob
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        let fp = hex::encode(take(32)?);
        let m_len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let metrics: Vec<EpochMetrics> =
            serde_json::from_slice(take(m_len)?).map_err(|e| Error::format("checkpoint", e.to_string()))?;
        if pos != bytes.len() {
            return Err(Error::format("checkpoint", "trailing bytes"));
        }
        if desc.schemes.len() != desc.arch.num_classes {
            return Err(Error::format("checkpoint", "scheme list does not match class count"));
        }
        Ok(Checkpoint {
            model: Classifier::from_params(desc.arch, params)?,
            schemes: desc.schemes,
            dataset_fingerprint: fp,
            metrics,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        Checkpoint::decode(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::DatasetSpec;

    fn fixture() -> (Checkpoint, Dataset) {
        let spec = DatasetSpec {
            frames_per_scheme_per_snr: 1,
            snr_grid: vec![30.0],
            frame_len: 32,
            ..DatasetSpec::default()
        };
        let ds = Dataset::synthesize(&spec).unwrap();
        let model = Classifier::with_random_head(ArchSpec::desk(32, ds.num_classes()), 3).unwrap();
        let metrics = vec![EpochMetrics {
            epoch: 0,
            train_loss: 1.5,
            train_accuracy: 0.25,
            validation_accuracy: None,
        }];
        (Checkpoint::new(model, &ds, metrics).unwrap(), ds)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (ck, ds) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.liwm");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        let x = ck.model.unit_input(&ds.frames[0]).values;
        let a = ck.model.forward(&x).unwrap();
        let b = back.model.forward(&x).unwrap();
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn truncated_and_versioned_files_fail_cleanly() {
        let (ck, _) = fixture();
        let bytes = ck.encode().unwrap();
        for cut in [0, 3, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(Checkpoint::decode(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(Checkpoint::decode(&v2), Err(Error::Version { found: 2, .. })));
    }

    #[test]
    fn fingerprint_mismatch_warns() {
        let (ck, ds) = fixture();
        assert!(ck.check_dataset(&ds).unwrap().is_none());
        let other = Dataset::synthesize(&DatasetSpec {
            master_seed: 99,
            ..ds.meta.spec.clone()
        })
        .unwrap();
        assert!(ck.check_dataset(&other).unwrap().is_some());
        let foreign = Dataset::synthesize(&DatasetSpec {
            frame_len: 64,
            ..ds.meta.spec.clone()
        })
        .unwrap();
        assert!(ck.check_dataset(&foreign).is_err());
    }
}
