use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channel::SUPPORTED_QUANT_BITS;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    /// Number of iterations K.
    pub iterations: usize,
    pub alpha_max: f64,
    pub alpha_min: f64,
    /// Norm modify factor.
    pub gamma: f64,
    /// Perturbation scaling multiplier applied after the last iteration.
    pub beta: f64,
    /// `Some(class)` switches to the targeted attack (gradient sign -1).
    pub target: Option<usize>,
    /// Initial L2 budget in the unit domain.
    pub epsilon_init: f64,
    /// Return the smallest-norm adversarial iterate instead of the last one.
    pub select_best: bool,
    /// Transmitter quantization applied to the final waveform before the
    /// success check (0 disables).
    pub tx_quant_bits: u32,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            iterations: 100,
            alpha_max: 1.0,
            alpha_min: 0.01,
            gamma: 0.05,
            beta: 1.0,
            target: None,
            epsilon_init: 1.0,
            select_best: false,
            tx_quant_bits: 0,
        }
    }
}

impl AttackConfig {
    /// K = 100, beta = 1: the ideal-condition setting.
    pub fn ideal() -> Self {
        AttackConfig::default()
    }

    /// K = 10, beta = 10: fewer iterations and a tenfold perturbation to
    /// survive channel noise. The initial budget is 1/20 of the default,
    /// about -32 dB PSR on a unit-RMS frame of 256 samples, so that the
    /// amplified waveform lands near -10 dB.
    pub fn practical() -> Self {
        AttackConfig {
            iterations: 10,
            beta: 10.0,
            epsilon_init: 0.05,
            ..AttackConfig::default()
        }
    }

    /// +1 for the untargeted attack, -1 for the targeted one.
    pub fn gradient_sign(&self) -> f64 {
        if self.target.is_some() {
            -1.0
        } else {
            1.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.iterations == 0 {
            return fail("attack iterations must be at least 1");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail("gamma must lie in (0, 1)");
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return fail("beta must be positive");
        }
        if !(self.alpha_min > 0.0 && self.alpha_max >= self.alpha_min) {
            return fail("need alpha_max >= alpha_min > 0");
        }
        if !(self.epsilon_init > 0.0) || !self.epsilon_init.is_finite() {
            return fail("epsilon_init must be positive");
        }
        if !SUPPORTED_QUANT_BITS.contains(&self.tx_quant_bits) {
            return fail("tx_quant_bits must be one of 0, 4, 8, 12, 16");
        }
        Ok(())
    }
}

/// Step size at iteration `k` (1-based): half-cosine annealing from
/// `alpha_max` at k = 1 to `alpha_min` at k = K.
pub fn cosine_alpha(k: usize, cfg: &AttackConfig) -> f64 {
    let big_k = cfg.iterations;
    if big_k <= 1 {
        return cfg.alpha_max;
    }
    let phase = PI * (k - 1) as f64 / (big_k - 1) as f64;
    cfg.alpha_min + 0.5 * (cfg.alpha_max - cfg.alpha_min) * (1.0 + phase.cos())
}

/// Shrinks the budget after an adversarial candidate, grows it otherwise.
pub fn adjust_epsilon(epsilon: f64, was_adversarial: bool, gamma: f64) -> f64 {
    if was_adversarial {
        epsilon * (1.0 - gamma)
    } else {
        epsilon * (1.0 + gamma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_schedule_endpoints() {
        let cfg = AttackConfig::ideal();
        assert!((cosine_alpha(1, &cfg) - 1.0).abs() < 1e-15);
        assert!((cosine_alpha(100, &cfg) - 0.01).abs() < 1e-15);
        let odd = AttackConfig {
            iterations: 11,
            ..AttackConfig::ideal()
        };
        assert!((cosine_alpha(6, &odd) - 0.505).abs() < 1e-15);
        let single = AttackConfig {
            iterations: 1,
            ..AttackConfig::ideal()
        };
        assert_eq!(cosine_alpha(1, &single), 1.0);
    }

    #[test]
    fn alpha_is_monotone() {
        let cfg = AttackConfig::ideal();
        for k in 1..100 {
            assert!(cosine_alpha(k + 1, &cfg) <= cosine_alpha(k, &cfg));
        }
    }

    #[test]
    fn epsilon_update() {
        assert!((adjust_epsilon(1.0, true, 0.05) - 0.95).abs() < 1e-15);
        assert!((adjust_epsilon(1.0, false, 0.05) - 1.05).abs() < 1e-15);
        assert_eq!(adjust_epsilon(0.5, true, 0.0), 0.5);
    }

    #[test]
    fn validation() {
        assert!(AttackConfig::ideal().validate().is_ok());
        assert!(AttackConfig::practical().validate().is_ok());
        assert!(AttackConfig { iterations: 0, ..Default::default() }.validate().is_err());
        assert!(AttackConfig { gamma: 1.0, ..Default::default() }.validate().is_err());
        assert!(AttackConfig { beta: 0.0, ..Default::default() }.validate().is_err());
        assert!(AttackConfig { alpha_min: 2.0, ..Default::default() }.validate().is_err());
    }
}
