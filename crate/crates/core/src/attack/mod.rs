//! Low-interception waveform generation by decoupled direction and norm.
//!
//! Each iteration accumulates the normalized loss gradient into a search
//! direction `delta`, multiplies the perturbation budget `epsilon` by
//! `1 - gamma` or `1 + gamma` depending on whether the previous candidate
//! already fooled the classifier, and places the next candidate on the
//! `epsilon`-sphere around the clean frame along `delta`, clipped to
//! [0, 1]. After the last iteration the perturbation is scaled by `beta`.

mod batch;
mod config;
mod ddn;

pub use batch::{batch_generate, write_result_log, AttackRecord};
pub use config::{adjust_epsilon, cosine_alpha, AttackConfig};
pub use ddn::{
    attack_gradient, generate_liw, liw_iteration, run_attack, AttackResult, AttackState, AttackTrace,
    BestIterate, IterationInfo, ZERO_GRADIENT_NORM,
};
