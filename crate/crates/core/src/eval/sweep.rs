use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{practical_eval, PsrStats};
use crate::attack::{run_attack, AttackConfig, AttackTrace};
use crate::channel::ChannelConfig;
use crate::model::Classifier;
use crate::seed::derive_seed;
use crate::waveform::{psr_db, Dataset, IqFrame};
use crate::{Error, Result};

/// A column whose mean PSR misses its target by more than this is flagged.
pub const PSR_TOLERANCE_DB: f64 = 0.5;

const BETA_REFINE_STEPS: usize = 8;
const BETA_MAX: f64 = 1e6;

/// Channel SNR x perturbation grid. Exactly one of `psr_grid` and
/// `beta_grid` is non-empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub channel_snr_grid: Vec<f64>,
    /// Target mean PSR per column, dB.
    pub psr_grid: Vec<f64>,
    /// Fixed beta per column.
    pub beta_grid: Vec<f64>,
    /// Adds a column of unperturbed frames (PSR = -inf).
    pub include_unperturbed: bool,
    /// The attack run once per frame; its `beta` is ignored.
    pub attack: AttackConfig,
    /// Template channel; `snr_db` is replaced per row.
    pub channel: ChannelConfig,
    /// Inputs for the command-line driver.
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            channel_snr_grid: vec![-10.0, -5.0, 0.0, 10.0, 20.0, 30.0],
            psr_grid: vec![-30.0, -25.0, -20.0, -15.0, -10.0, -5.0],
            beta_grid: Vec::new(),
            include_unperturbed: true,
            attack: AttackConfig::practical(),
            channel: ChannelConfig::default(),
            dataset: None,
            checkpoint: None,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.channel_snr_grid.is_empty() {
            return Err(Error::Config("sweep channel_snr_grid is empty".into()));
        }
        if self.psr_grid.is_empty() == self.beta_grid.is_empty() {
            return Err(Error::Config("set exactly one of sweep psr_grid and beta_grid".into()));
        }
        if self.psr_grid.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("sweep psr targets must be finite".into()));
        }
        if self.beta_grid.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(Error::Config("sweep betas must be positive".into()));
        }
        self.attack.validate()?;
        self.channel.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub channel_snr_db: f64,
    /// Measured mean PSR of the column (`-inf` for the unperturbed one).
    pub psr_db: f64,
    pub target_psr_db: Option<f64>,
    pub beta: Option<f64>,
    pub accuracy: f64,
    pub n: u64,
    /// The column could not reach its PSR (clipping saturation).
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    /// Row-major: channel SNR, then column.
    pub cells: Vec<SweepCell>,
    pub warnings: Vec<String>,
}

struct Column {
    frames: Vec<IqFrame>,
    psr_db: f64,
    target_psr_db: Option<f64>,
    beta: Option<f64>,
    flagged: bool,
}

/// Per-frame beta that brings the frame's PSR to `target`. Returns the
/// waveform and whether the target was reached.
fn rescale_to(trace: &AttackTrace, frame: &IqFrame, target: f64, cfg: &AttackConfig) -> Result<(IqFrame, bool)> {
    let (base, _) = trace.amplify(frame, 1.0, cfg);
    let base_psr = psr_db(frame, &base)?;
    if !base_psr.is_finite() {
        return Ok((base, false));
    }
    let mut beta = 10f64.powf((target - base_psr) / 20.0);
    let mut out = base;
    for _ in 0..BETA_REFINE_STEPS {
        let (liw, _) = trace.amplify(frame, beta.min(BETA_MAX), cfg);
        let got = psr_db(frame, &liw)?;
        out = liw;
        if (got - target).abs() < 0.01 || beta >= BETA_MAX {
            break;
        }
        beta *= 10f64.powf((target - got) / 20.0);
    }
    let got = psr_db(frame, &out)?;
    Ok((out, (got - target).abs() <= PSR_TOLERANCE_DB))
}

fn mean_psr(original: &[IqFrame], perturbed: &[IqFrame]) -> Result<f64> {
    Ok(PsrStats::between(original, perturbed)?.map_or(f64::NEG_INFINITY, |s| s.mean))
}

/// Runs the attack once per frame, derives every column by rescaling the
/// perturbation, and evaluates each (channel SNR, column) cell through
/// [`practical_eval`]. All cells in a row share one noise seed, so columns
/// are compared on identical channel draws.
pub fn sweep(model: &Classifier, dataset: &Dataset, spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    let cfg = &spec.attack;
    let traces = dataset
        .frames
        .par_iter()
        .map(|f| run_attack(model, f, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut columns = Vec::new();
    if spec.include_unperturbed {
        columns.push(Column {
            frames: dataset.frames.clone(),
            psr_db: f64::NEG_INFINITY,
            target_psr_db: None,
            beta: None,
            flagged: false,
        });
    }
    for &beta in &spec.beta_grid {
        let frames: Vec<IqFrame> = traces
            .par_iter()
            .zip(&dataset.frames)
            .map(|(t, f)| t.amplify(f, beta, cfg).0)
            .collect();
        let base: Vec<IqFrame> = traces
            .par_iter()
            .zip(&dataset.frames)
            .map(|(t, f)| t.amplify(f, 1.0, cfg).0)
            .collect();
        let psr = mean_psr(&dataset.frames, &frames)?;
        let expected = mean_psr(&dataset.frames, &base)? + 20.0 * beta.log10();
        columns.push(Column {
            frames,
            psr_db: psr,
            target_psr_db: None,
            beta: Some(beta),
            flagged: psr < expected - PSR_TOLERANCE_DB,
        });
    }
    for &target in &spec.psr_grid {
        let rescaled = traces
            .par_iter()
            .zip(&dataset.frames)
            .map(|(t, f)| rescale_to(t, f, target, cfg))
            .collect::<Result<Vec<_>>>()?;
        let frames: Vec<IqFrame> = rescaled.into_iter().map(|(f, _)| f).collect();
        let psr = mean_psr(&dataset.frames, &frames)?;
        columns.push(Column {
            frames,
            psr_db: psr,
            target_psr_db: Some(target),
            beta: None,
            flagged: !psr.is_finite() || (psr - target).abs() > PSR_TOLERANCE_DB,
        });
    }

    let ncol = columns.len();
    let cells = (0..spec.channel_snr_grid.len() * ncol)
        .into_par_iter()
        .map(|i| {
            let (row, col) = (i / ncol, i % ncol);
            let ch = ChannelConfig {
                snr_db: spec.channel_snr_grid[row],
                noise_seed: derive_seed(spec.channel.noise_seed, "sweep-row", row as u64),
                ..spec.channel.clone()
            };
            let c = &columns[col];
            let r = practical_eval(model, &dataset.with_frames(c.frames.clone()), &ch)?;
            Ok(SweepCell {
                channel_snr_db: ch.snr_db,
                psr_db: c.psr_db,
                target_psr_db: c.target_psr_db,
                beta: c.beta,
                accuracy: r.overall_accuracy,
                n: r.total,
                flagged: c.flagged,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut warnings = Vec::new();
    let flagged = columns.iter().filter(|c| c.flagged).count();
    if flagged > 0 {
        warnings.push(format!("{flagged} column(s) missed their PSR by more than {PSR_TOLERANCE_DB} dB"));
    }
    Ok(SweepTable { cells, warnings })
}
