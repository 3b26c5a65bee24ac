//! The run configuration: one TOML file, `--section.key=value` overrides on
//! top, and a single master seed from which every section seed is derived.

use std::path::{Path, PathBuf};

use liw::attack::AttackConfig;
use liw::channel::ChannelConfig;
use liw::eval::SweepSpec;
use liw::model::{ArchSpec, ConvSpec, TrainConfig};
use liw::seed::derive_seed;
use liw::waveform::DatasetSpec;
use liw::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Settings that glue the stages together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Held-out frames per scheme per SNR synthesized next to the training set.
    pub test_frames_per_scheme_per_snr: usize,
    /// SNR tag of the originals the attack, channel and sweep stages use.
    pub source_snr_db: f64,
    /// Caps the number of attacked originals (0 = all).
    pub max_attack_frames: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            test_frames_per_scheme_per_snr: 100,
            source_snr_db: 30.0,
            max_attack_frames: 0,
        }
    }
}

/// Classifier layout; frame length and class count come from the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub clip_amp: f64,
    pub conv: Vec<ConvSpec>,
    pub hidden: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let a = ArchSpec::desk(256, 2);
        ModelConfig {
            clip_amp: a.clip_amp,
            conv: a.conv,
            hidden: a.hidden,
        }
    }
}

impl ModelConfig {
    pub fn arch(&self, frame_len: usize, num_classes: usize) -> ArchSpec {
        ArchSpec {
            frame_len,
            num_classes,
            clip_amp: self.clip_amp,
            conv: self.conv.clone(),
            hidden: self.hidden.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root of every derived seed. Section seeds act as sub-indices.
    pub master_seed: u64,
    pub pipeline: PipelineConfig,
    pub dataset: DatasetSpec,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub attack: AttackConfig,
    pub channel: ChannelConfig,
    pub sweep: SweepSpec,
}

impl RunConfig {
    /// Reads `path` (if any), applies overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for (key, value) in overrides {
            set_path(&mut table, key, parse_value(value))?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.model
            .arch(self.dataset.frame_len, self.dataset.schemes.len().max(2))
            .validate()?;
        self.train.validate()?;
        self.attack.validate()?;
        self.channel.validate()?;
        self.sweep.validate()?;
        if self.pipeline.test_frames_per_scheme_per_snr == 0 {
            return Err(Error::Config("pipeline.test_frames_per_scheme_per_snr must be positive".into()));
        }
        if !self.dataset.snr_grid.contains(&self.pipeline.source_snr_db) {
            return Err(Error::Config(format!(
                "pipeline.source_snr_db {} is not on the dataset SNR grid",
                self.pipeline.source_snr_db
            )));
        }
        Ok(())
    }

    /// Canonical TOML of the resolved configuration.
    pub fn canonical(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of [`canonical`](Self::canonical).
    pub fn fingerprint(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.canonical()?.as_bytes())))
    }

    pub fn train_spec(&self) -> DatasetSpec {
        DatasetSpec {
            master_seed: derive_seed(self.master_seed, "dataset-train", self.dataset.master_seed),
            ..self.dataset.clone()
        }
    }

    pub fn test_spec(&self) -> DatasetSpec {
        DatasetSpec {
            master_seed: derive_seed(self.master_seed, "dataset-test", self.dataset.master_seed),
            frames_per_scheme_per_snr: self.pipeline.test_frames_per_scheme_per_snr,
            ..self.dataset.clone()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: derive_seed(self.master_seed, "train", self.train.seed),
            ..self.train.clone()
        }
    }

    pub fn init_seed(&self) -> u64 {
        derive_seed(self.master_seed, "init", self.train.seed)
    }

    pub fn channel_config(&self) -> ChannelConfig {
        ChannelConfig {
            noise_seed: derive_seed(self.master_seed, "channel", self.channel.noise_seed),
            ..self.channel.clone()
        }
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        let mut s = self.sweep.clone();
        s.channel.noise_seed = derive_seed(self.master_seed, "sweep", s.channel.noise_seed);
        s
    }
}

/// TOML literal if it parses as one, otherwise a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty());
    let Some(last) = last else {
        return Err(Error::Config(format!("bad override key `{key}`")));
    };
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{p}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Splits `--section.key=value` overrides out of the argument list.
pub fn extract_overrides(args: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    for a in args {
        let parsed = a.strip_prefix("--").and_then(|s| s.split_once('=')).filter(|(k, _)| k.contains('.'));
        match parsed {
            Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
            None => rest.push(a),
        }
    }
    (rest, overrides)
}

/// Standard artifact locations under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }
    pub fn train_data(&self) -> PathBuf {
        self.root.join("data/train.liwd")
    }
    pub fn test_data(&self) -> PathBuf {
        self.root.join("data/test.liwd")
    }
    pub fn checkpoint(&self) -> PathBuf {
        self.root.join("model/model.liwm")
    }
    pub fn source_data(&self) -> PathBuf {
        self.root.join("attack/source.liwd")
    }
    pub fn liw_data(&self) -> PathBuf {
        self.root.join("attack/liw.liwd")
    }
    pub fn attack_log(&self) -> PathBuf {
        self.root.join("attack/attack_log.jsonl")
    }
    pub fn eval_dir(&self, name: &str) -> PathBuf {
        self.root.join("eval").join(name)
    }
    pub fn hwloop_dir(&self, name: &str) -> PathBuf {
        self.root.join("hwloop").join(name)
    }
    pub fn sweep_dir(&self) -> PathBuf {
        self.root.join("sweep")
    }
    pub fn manifest(&self, command: &str) -> PathBuf {
        self.root.join("manifests").join(format!("{command}.json"))
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report.md")
    }
}
