use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::AttackConfig;
use super::ddn::{generate_liw, AttackResult};
use crate::model::Checkpoint;
use crate::waveform::{Dataset, IqFrame};
use crate::{Error, Result};

/// One line of the per-frame attack log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub frame_index: usize,
    pub label: u8,
    pub snr_tag: f64,
    pub predicted_before: usize,
    pub predicted_after: usize,
    /// `None` when the perturbation is exactly zero.
    pub psr_db: Option<f64>,
    pub epsilon_final: f64,
    pub iterations: usize,
    pub clamp_fraction: f64,
    pub success: bool,
}

impl AttackRecord {
    pub fn from_result(frame_index: usize, frame: &IqFrame, r: &AttackResult) -> Self {
        AttackRecord {
            frame_index,
            label: frame.label,
            snr_tag: frame.snr_tag,
            predicted_before: r.predicted_before,
            predicted_after: r.predicted_after,
            psr_db: r.psr_db.is_finite().then_some(r.psr_db),
            epsilon_final: r.epsilon_final,
            iterations: r.iterations_used,
            clamp_fraction: r.clamp_fraction,
            success: r.success,
        }
    }
}

/// Attacks every frame of `dataset`. `jobs = 0` uses the global rayon pool.
/// Output order and content do not depend on `jobs`.
///
/// Returns the LIW dataset (same sidecar spec, `derived_from` set), the
/// per-frame records and any compatibility warnings.
pub fn batch_generate(
    checkpoint: &Checkpoint,
    dataset: &Dataset,
    cfg: &AttackConfig,
    jobs: usize,
) -> Result<(Dataset, Vec<AttackRecord>, Vec<String>)> {
    cfg.validate()?;
    let warnings: Vec<String> = checkpoint.check_dataset(dataset)?.into_iter().collect();
    let model = &checkpoint.model;
    let run = || -> Result<Vec<AttackResult>> {
        dataset
            .frames
            .par_iter()
            .map(|f| generate_liw(model, f, cfg))
            .collect()
    };
    let results = if jobs == 0 {
        run()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run)?
    };
    let records = dataset
        .frames
        .iter()
        .zip(&results)
        .enumerate()
        .map(|(i, (f, r))| AttackRecord::from_result(i, f, r))
        .collect();
    let mut out = dataset.with_frames(results.into_iter().map(|r| r.liw).collect());
    out.meta.derived_from = Some(format!(
        "liw iterations={} beta={} select_best={} tx_quant_bits={} source={}",
        cfg.iterations,
        cfg.beta,
        cfg.select_best,
        cfg.tx_quant_bits,
        dataset.fingerprint()?
    ));
    Ok((out, records, warnings))
}

/// Writes records as JSON lines.
pub fn write_result_log(path: &Path, records: &[AttackRecord]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::format("attack log", e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
