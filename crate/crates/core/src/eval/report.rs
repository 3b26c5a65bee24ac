use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sweep::SweepTable;
use crate::channel::{apply_per_frame, hardware_loop, ChannelConfig};
use crate::model::Classifier;
use crate::waveform::{psr_db, Dataset, IqFrame, ModulationScheme};
use crate::{Error, Result};

/// Originals for practical and loop evaluation are expected at this tag.
pub const NOISE_FREE_SNR_TAG: f64 = 30.0;

/// Rows are true labels, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrBin {
    pub snr_db: f64,
    pub correct: u64,
    pub n: u64,
    pub accuracy: f64,
}

/// PSR over the finite (non-zero perturbation) frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsrStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
    /// Frames whose perturbation was exactly zero.
    pub unperturbed: usize,
}

impl PsrStats {
    /// Frame-by-frame PSR of `perturbed` against `original`.
    pub fn between(original: &[IqFrame], perturbed: &[IqFrame]) -> Result<Option<PsrStats>> {
        if original.len() != perturbed.len() {
            return Err(Error::Shape {
                what: "PSR frame count",
                expected: original.len(),
                actual: perturbed.len(),
            });
        }
        let values = original
            .iter()
            .zip(perturbed)
            .map(|(o, p)| psr_db(o, p))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self::from_values(&values))
    }

    pub fn from_values(values: &[f64]) -> Option<PsrStats> {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        if finite.is_empty() {
            return None;
        }
        Some(PsrStats {
            mean: finite.iter().sum::<f64>() / finite.len() as f64,
            min: finite.iter().copied().fold(f64::INFINITY, f64::min),
            max: finite.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            n: finite.len(),
            unperturbed: values.len() - finite.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Ideal,
    Practical,
    Loop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub schemes: Vec<ModulationScheme>,
    pub overall_accuracy: f64,
    pub correct: u64,
    pub total: u64,
    /// Ascending by SNR tag.
    pub per_snr: Vec<SnrBin>,
    pub confusion: ConfusionMatrix,
    pub psr_stats: Option<PsrStats>,
    pub channel: Option<ChannelConfig>,
    pub fingerprints: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn accuracy_at(&self, snr_db: f64) -> Option<f64> {
        self.per_snr.iter().find(|b| b.snr_db == snr_db).map(|b| b.accuracy)
    }

    /// Accuracy over bins with tag `>= snr_db`.
    pub fn accuracy_at_least(&self, snr_db: f64) -> Option<f64> {
        let (c, n) = self
            .per_snr
            .iter()
            .filter(|b| b.snr_db >= snr_db)
            .fold((0, 0), |(c, n), b| (c + b.correct, n + b.n));
        (n > 0).then(|| c as f64 / n as f64)
    }
}

/// Builds a report from labels, SNR tags and predictions.
pub fn evaluate_predictions(
    schemes: &[ModulationScheme],
    frames: &[IqFrame],
    predictions: &[usize],
    mode: EvalMode,
) -> Result<EvalReport> {
    if frames.is_empty() {
        return Err(Error::Degenerate("cannot evaluate an empty dataset".into()));
    }
    if frames.len() != predictions.len() {
        return Err(Error::Shape {
            what: "prediction count",
            expected: frames.len(),
            actual: predictions.len(),
        });
    }
    let classes = schemes.len();
    let mut confusion = ConfusionMatrix::new(classes);
    let mut bins: Vec<(f64, u64, u64)> = Vec::new();
    for (f, &p) in frames.iter().zip(predictions) {
        let t = f.label as usize;
        if t >= classes || p >= classes {
            return Err(Error::Config(format!(
                "label {t} or prediction {p} outside {classes} classes"
            )));
        }
        confusion.record(t, p);
        let hit = (t == p) as u64;
        match bins.iter_mut().find(|b| b.0 == f.snr_tag) {
            Some(b) => {
                b.1 += hit;
                b.2 += 1;
            }
            None => bins.push((f.snr_tag, hit, 1)),
        }
    }
    bins.sort_by(|a, b| a.0.total_cmp(&b.0));
    let correct = confusion.trace();
    let total = confusion.total();
    Ok(EvalReport {
        mode,
        schemes: schemes.to_vec(),
        overall_accuracy: correct as f64 / total as f64,
        correct,
        total,
        per_snr: bins
            .into_iter()
            .map(|(snr_db, correct, n)| SnrBin {
                snr_db,
                correct,
                n,
                accuracy: correct as f64 / n as f64,
            })
            .collect(),
        confusion,
        psr_stats: None,
        channel: None,
        fingerprints: BTreeMap::new(),
        warnings: Vec::new(),
    })
}

fn check_shapes(model: &Classifier, dataset: &Dataset) -> Result<()> {
    if model.num_classes() != dataset.num_classes() {
        return Err(Error::Incompatible(format!(
            "model has {} classes, dataset has {}",
            model.num_classes(),
            dataset.num_classes()
        )));
    }
    if model.arch().frame_len != dataset.frame_len() {
        return Err(Error::Incompatible(format!(
            "model expects frames of {} samples, dataset has {}",
            model.arch().frame_len,
            dataset.frame_len()
        )));
    }
    Ok(())
}

/// Predicts every frame (in parallel, order preserved) and aggregates.
pub fn evaluate_frames(
    model: &Classifier,
    schemes: &[ModulationScheme],
    frames: &[IqFrame],
    mode: EvalMode,
) -> Result<EvalReport> {
    let predictions = frames
        .par_iter()
        .map(|f| model.predict(&model.unit_input(f).values))
        .collect::<Result<Vec<_>>>()?;
    evaluate_predictions(schemes, frames, &predictions, mode)
}

/// Ideal-condition accuracy: the frames as stored.
pub fn evaluate(model: &Classifier, dataset: &Dataset) -> Result<EvalReport> {
    check_shapes(model, dataset)?;
    let mut r = evaluate_frames(model, dataset.schemes(), &dataset.frames, EvalMode::Ideal)?;
    r.fingerprints.insert("dataset".into(), dataset.fingerprint()?);
    Ok(r)
}

fn tag_warning(dataset: &Dataset) -> Option<String> {
    let off = dataset.frames.iter().filter(|f| f.snr_tag != NOISE_FREE_SNR_TAG).count();
    (off > 0).then(|| {
        format!(
            "{off} of {} frames are not tagged {NOISE_FREE_SNR_TAG} dB; channel noise stacks on existing noise",
            dataset.len()
        )
    })
}

fn channel_eval(
    model: &Classifier,
    dataset: &Dataset,
    ch: &ChannelConfig,
    mode: EvalMode,
    received: Vec<IqFrame>,
) -> Result<EvalReport> {
    let mut r = evaluate_frames(model, dataset.schemes(), &received, mode)?;
    r.channel = Some(ch.clone());
    r.fingerprints.insert("dataset".into(), dataset.fingerprint()?);
    r.warnings.extend(tag_warning(dataset));
    Ok(r)
}

/// Gain, channel AWGN and receiver quantization applied frame by frame, then
/// evaluated. Bins keep the frames' original SNR tags.
pub fn practical_eval(model: &Classifier, dataset: &Dataset, ch: &ChannelConfig) -> Result<EvalReport> {
    check_shapes(model, dataset)?;
    let received = apply_per_frame(&dataset.frames, ch)?;
    channel_eval(model, dataset, ch, EvalMode::Practical, received)
}

/// The splice, transmit, split loop, then evaluation.
pub fn hardware_loop_eval(model: &Classifier, dataset: &Dataset, ch: &ChannelConfig) -> Result<EvalReport> {
    check_shapes(model, dataset)?;
    let received = hardware_loop(&dataset.frames, ch)?;
    channel_eval(model, dataset, ch, EvalMode::Loop, received)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::format("csv", format!("{other:?}")),
    }
}

fn write_csv(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `per_snr.csv`, `confusion.csv` and `summary.json` into `dir`.
/// Output depends only on the report.
pub fn emit_report(report: &EvalReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut rows = vec![vec!["snr_db".to_string(), "accuracy".into(), "n".into()]];
    rows.extend(
        report
            .per_snr
            .iter()
            .map(|b| vec![b.snr_db.to_string(), b.accuracy.to_string(), b.n.to_string()]),
    );
    write_csv(&dir.join("per_snr.csv"), &rows)?;

    let mut header = vec!["true\\predicted".to_string()];
    header.extend(report.schemes.iter().map(|s| s.name().to_string()));
    let mut rows = vec![header];
    for (s, counts) in report.schemes.iter().zip(&report.confusion.counts) {
        let mut row = vec![s.name().to_string()];
        row.extend(counts.iter().map(|c| c.to_string()));
        rows.push(row);
    }
    write_csv(&dir.join("confusion.csv"), &rows)?;

    let mut json = serde_json::to_string_pretty(report).map_err(|e| Error::format("report", e.to_string()))?;
    json.push('\n');
    fs::write(dir.join("summary.json"), json)?;
    Ok(())
}

/// Writes `sweep.csv` into `dir`.
pub fn emit_sweep(table: &SweepTable, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut rows = vec![vec![
        "channel_snr_db".to_string(),
        "psr_db".into(),
        "accuracy".into(),
        "n".into(),
        "flagged".into(),
    ]];
    rows.extend(table.cells.iter().map(|c| {
        vec![
            c.channel_snr_db.to_string(),
            c.psr_db.to_string(),
            c.accuracy.to_string(),
            c.n.to_string(),
            c.flagged.to_string(),
        ]
    }));
    write_csv(&dir.join("sweep.csv"), &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn frames(labels: &[u8], snr: &[f64]) -> Vec<IqFrame> {
        labels
            .iter()
            .zip(snr)
            .map(|(&l, &s)| IqFrame::new(vec![Complex64::new(1.0, 0.0); 4], l, s, 0))
            .collect()
    }

    #[test]
    fn oracle_predictions_give_diagonal_matrix() {
        let schemes = &ModulationScheme::DESK[..3];
        let f = frames(&[0, 1, 2, 2, 1], &[0.0, 10.0, 0.0, 10.0, 10.0]);
        let truth: Vec<usize> = f.iter().map(|f| f.label as usize).collect();
        let r = evaluate_predictions(schemes, &f, &truth, EvalMode::Ideal).unwrap();
        assert_eq!(r.overall_accuracy, 1.0);
        for (i, row) in r.confusion.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if i != j {
                    assert_eq!(c, 0);
                }
            }
        }
        assert_eq!(r.confusion.row_sums(), vec![1, 2, 2]);
    }

    #[test]
    fn bins_reconstruct_overall() {
        let schemes = &ModulationScheme::DESK[..2];
        let f = frames(&[0, 1, 0, 1, 0, 1], &[30.0, 30.0, -5.0, -5.0, 0.0, 0.0]);
        let r = evaluate_predictions(schemes, &f, &[0, 0, 0, 1, 1, 1], EvalMode::Ideal).unwrap();
        let snrs: Vec<f64> = r.per_snr.iter().map(|b| b.snr_db).collect();
        assert_eq!(snrs, vec![-5.0, 0.0, 30.0]);
        assert_eq!(r.per_snr.iter().map(|b| b.correct).sum::<u64>(), r.correct);
        assert_eq!(r.per_snr.iter().map(|b| b.n).sum::<u64>(), r.total);
        assert_eq!(r.confusion.trace(), 4);
        assert_eq!(r.overall_accuracy, 4.0 / 6.0);
        assert_eq!(r.accuracy_at_least(0.0), Some(0.5));
    }

    #[test]
    fn empty_and_out_of_range_inputs_fail() {
        let schemes = &ModulationScheme::DESK[..2];
        assert!(evaluate_predictions(schemes, &[], &[], EvalMode::Ideal).is_err());
        let f = frames(&[0], &[0.0]);
        assert!(evaluate_predictions(schemes, &f, &[2], EvalMode::Ideal).is_err());
        assert!(evaluate_predictions(schemes, &f, &[0, 1], EvalMode::Ideal).is_err());
    }

    #[test]
    fn psr_stats_skip_unperturbed() {
        let s = PsrStats::from_values(&[-20.0, f64::NEG_INFINITY, -10.0]).unwrap();
        assert_eq!((s.mean, s.min, s.max, s.n, s.unperturbed), (-15.0, -20.0, -10.0, 2, 1));
        assert!(PsrStats::from_values(&[f64::NEG_INFINITY]).is_none());
    }

    #[test]
    fn emitted_files_are_stable() {
        let schemes = &ModulationScheme::DESK[..3];
        let f = frames(&[0, 1, 2], &[0.0, 0.0, 10.0]);
        let r = evaluate_predictions(schemes, &f, &[0, 2, 2], EvalMode::Ideal).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_report(&r, dir.path()).unwrap();
        let first: Vec<Vec<u8>> = ["per_snr.csv", "confusion.csv", "summary.json"]
            .iter()
            .map(|n| fs::read(dir.path().join(n)).unwrap())
            .collect();
        emit_report(&r, dir.path()).unwrap();
        for (n, bytes) in ["per_snr.csv", "confusion.csv", "summary.json"].iter().zip(&first) {
            assert_eq!(&fs::read(dir.path().join(n)).unwrap(), bytes);
        }
        let confusion = String::from_utf8(first[1].clone()).unwrap();
        assert_eq!(confusion.lines().count(), 4);
        assert_eq!(confusion.lines().nth(2).unwrap(), "4ASK,0,0,1");
    }
}
