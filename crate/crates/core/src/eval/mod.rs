//! Accuracy metrics, confusion matrices, channel evaluations and the
//! channel-SNR x PSR sweep.

mod report;
mod sweep;

pub use report::{
    emit_report, emit_sweep, evaluate, evaluate_frames, evaluate_predictions, hardware_loop_eval,
    practical_eval, ConfusionMatrix, EvalMode, EvalReport, PsrStats, SnrBin, NOISE_FREE_SNR_TAG,
};
pub use sweep::{sweep, SweepCell, SweepSpec, SweepTable, PSR_TOLERANCE_DB};
