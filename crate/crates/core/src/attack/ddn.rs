use rand_distr::{Distribution, StandardNormal};

use super::config::{adjust_epsilon, cosine_alpha, AttackConfig};
use crate::channel::quantize;
use crate::model::Classifier;
use crate::seed::{self, derive_seed};
use crate::waveform::{psr_db, IqFrame, UnitFrame};
use crate::{Error, Result};

/// Gradients with a smaller L2 norm are replaced by a pseudorandom unit
/// direction.
pub const ZERO_GRADIENT_NORM: f64 = 1e-12;

/// The smallest-norm adversarial candidate seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct BestIterate {
    pub values: Vec<f64>,
    /// `||candidate - x||_2` in the unit domain.
    pub norm: f64,
    /// Iteration that produced the candidate (0 = the clean frame).
    pub k: usize,
}

/// Loop state of one frame's attack, all in the unit domain.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackState {
    /// The clean frame.
    pub x: Vec<f64>,
    /// Accumulated (unnormalized) search direction.
    pub delta: Vec<f64>,
    pub epsilon: f64,
    /// Current candidate.
    pub x_tilde: Vec<f64>,
    /// Number of completed iterations.
    pub k: usize,
    pub best_adversarial: Option<BestIterate>,
    seed: u64,
}

impl AttackState {
    pub fn new(x: Vec<f64>, epsilon_init: f64, seed: u64) -> AttackState {
        AttackState {
            delta: vec![0.0; x.len()],
            x_tilde: x.clone(),
            x,
            epsilon: epsilon_init,
            k: 0,
            best_adversarial: None,
            seed,
        }
    }

    fn consider_best(&mut self, k: usize) {
        let norm = l2_dist(&self.x_tilde, &self.x);
        if self.best_adversarial.as_ref().is_none_or(|b| norm < b.norm) {
            self.best_adversarial = Some(BestIterate {
                values: self.x_tilde.clone(),
                norm,
                k,
            });
        }
    }
}

/// What one iteration observed and did.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationInfo {
    pub k: usize,
    pub alpha: f64,
    /// Whether the previous candidate was adversarial (drives the budget).
    pub was_adversarial: bool,
    pub prediction: usize,
    pub gradient_norm: f64,
    pub epsilon_prev: f64,
    pub epsilon: f64,
    /// `||x + epsilon * delta / ||delta|| - x||_2` before clipping.
    pub preclip_distance: f64,
    pub used_fallback_direction: bool,
}

/// `m * grad L(x, y)` with `y` the target label in targeted mode and the
/// true label otherwise; also returns the class probabilities at `input`.
pub fn attack_gradient(
    model: &Classifier,
    input: &[f64],
    true_label: usize,
    cfg: &AttackConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let label = cfg.target.unwrap_or(true_label);
    let ig = model.input_gradient(input, label)?;
    let sign = cfg.gradient_sign();
    let g = ig.grad.into_iter().map(|v| sign * v).collect();
    Ok((g, ig.probs))
}

fn is_adversarial(prediction: usize, true_label: usize, cfg: &AttackConfig) -> bool {
    match cfg.target {
        Some(t) => prediction == t,
        None => prediction != true_label,
    }
}

/// One pass of the loop body: gradient at the previous candidate, direction
/// update, budget update, projection onto the budget sphere, clip.
pub fn liw_iteration(
    state: &mut AttackState,
    model: &Classifier,
    true_label: usize,
    cfg: &AttackConfig,
) -> Result<IterationInfo> {
    let k = state.k + 1;
    let (g, probs) = attack_gradient(model, &state.x_tilde, true_label, cfg)?;
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteGradient { iteration: k });
    }
    let prediction = crate::model::net_argmax(&probs);
    let was_adversarial = is_adversarial(prediction, true_label, cfg);
    if was_adversarial {
        state.consider_best(k - 1);
    }

    let gradient_norm = l2_norm(&g);
    let used_fallback_direction = gradient_norm < ZERO_GRADIENT_NORM;
    let direction = if used_fallback_direction {
        random_unit(g.len(), derive_seed(state.seed, "zero-gradient", k as u64))
    } else {
        g.iter().map(|v| v / gradient_norm).collect()
    };
    let alpha = cosine_alpha(k, cfg);
    for (d, u) in state.delta.iter_mut().zip(&direction) {
        *d += alpha * u;
    }

    let epsilon_prev = state.epsilon;
    state.epsilon = adjust_epsilon(state.epsilon, was_adversarial, cfg.gamma);

    let mut delta_norm = l2_norm(&state.delta);
    if delta_norm == 0.0 {
        // Exact cancellation of accumulated steps; restart from this step.
        state.delta.copy_from_slice(&direction);
        delta_norm = 1.0;
    }
    let scale = state.epsilon / delta_norm;
    let mut preclip_sq = 0.0;
    for ((xt, &x0), &d) in state.x_tilde.iter_mut().zip(&state.x).zip(&state.delta) {
        let candidate = x0 + scale * d;
        preclip_sq += (candidate - x0) * (candidate - x0);
        *xt = candidate.clamp(0.0, 1.0);
    }
    state.k = k;

    Ok(IterationInfo {
        k,
        alpha,
        was_adversarial,
        prediction,
        gradient_norm,
        epsilon_prev,
        epsilon: state.epsilon,
        preclip_distance: preclip_sq.sqrt(),
        used_fallback_direction,
    })
}

/// Unit-domain outcome of the iterations, before amplification.
#[derive(Debug, Clone)]
pub struct AttackTrace {
    pub x: UnitFrame,
    /// The candidate handed to amplification: the last iterate, or the best
    /// adversarial one when `select_best` is set.
    pub x_k: Vec<f64>,
    pub state: AttackState,
    pub predicted_before: usize,
}

/// Runs all `K` iterations for one frame.
pub fn run_attack(model: &Classifier, frame: &IqFrame, cfg: &AttackConfig) -> Result<AttackTrace> {
    cfg.validate()?;
    let label = frame.label as usize;
    if label >= model.num_classes() {
        return Err(Error::Config(format!("frame label {label} outside the model's classes")));
    }
    if let Some(t) = cfg.target {
        if t >= model.num_classes() {
            return Err(Error::Config(format!("target class {t} outside the model's classes")));
        }
    }
    let x = model.unit_input(frame);
    let predicted_before = model.predict(&x.values)?;
    let mut state = AttackState::new(x.values.clone(), cfg.epsilon_init, frame.seed);
    for _ in 0..cfg.iterations {
        liw_iteration(&mut state, model, label, cfg)?;
    }
    let x_k = if cfg.select_best {
        if is_adversarial(model.predict(&state.x_tilde)?, label, cfg) {
            state.consider_best(state.k);
        }
        state
            .best_adversarial
            .as_ref()
            .map_or_else(|| state.x_tilde.clone(), |b| b.values.clone())
    } else {
        state.x_tilde.clone()
    };
    Ok(AttackTrace {
        x,
        x_k,
        state,
        predicted_before,
    })
}

#[derive(Debug, Clone)]
pub struct AttackResult {
    /// Final waveform in the physical IQ domain.
    pub liw: IqFrame,
    /// Whether the transmitted waveform is misclassified (or hits the
    /// target in targeted mode).
    pub success: bool,
    pub psr_db: f64,
    pub iterations_used: usize,
    /// Fraction of unit-domain values clipped after amplification.
    pub clamp_fraction: f64,
    pub epsilon_final: f64,
    pub predicted_before: usize,
    pub predicted_after: usize,
}

impl AttackTrace {
    /// Amplifies the perturbation by `beta`, re-clips to [0, 1], maps back to
    /// IQ and applies transmitter quantization. Returns the waveform and the
    /// fraction of unit-domain values the re-clip touched.
    pub fn amplify(&self, frame: &IqFrame, beta: f64, cfg: &AttackConfig) -> (IqFrame, f64) {
        let mut clipped = 0usize;
        let values: Vec<f64> = if beta == 1.0 {
            self.x_k.clone()
        } else {
            self.x
                .values
                .iter()
                .zip(&self.x_k)
                .map(|(&x0, &xk)| {
                    let v = x0 + beta * (xk - x0);
                    if !(0.0..=1.0).contains(&v) {
                        clipped += 1;
                    }
                    v.clamp(0.0, 1.0)
                })
                .collect()
        };
        let unit = UnitFrame {
            values,
            clip_amp: self.x.clip_amp,
        };
        let mut liw = frame.from_unit_interval(&unit);
        if cfg.tx_quant_bits > 0 {
            liw = quantize(&liw, cfg.tx_quant_bits, self.x.clip_amp);
        }
        (liw, clipped as f64 / self.x.len().max(1) as f64)
    }

    /// [`amplify`](Self::amplify), then scores the transmitted waveform.
    pub fn finish(&self, model: &Classifier, frame: &IqFrame, beta: f64, cfg: &AttackConfig) -> Result<AttackResult> {
        let (liw, clamp_fraction) = self.amplify(frame, beta, cfg);
        let predicted_after = model.predict(&model.unit_input(&liw).values)?;
        Ok(AttackResult {
            success: is_adversarial(predicted_after, frame.label as usize, cfg),
            psr_db: psr_db(frame, &liw)?,
            iterations_used: self.state.k,
            clamp_fraction,
            epsilon_final: self.state.epsilon,
            predicted_before: self.predicted_before,
            predicted_after,
            liw,
        })
    }
}

/// Runs the attack on one frame and returns the amplified waveform.
pub fn generate_liw(model: &Classifier, frame: &IqFrame, cfg: &AttackConfig) -> Result<AttackResult> {
    run_attack(model, frame, cfg)?.finish(model, frame, cfg.beta, cfg)
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn l2_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn random_unit(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed);
    let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = l2_norm(&v);
    v.into_iter().map(|x| x / norm).collect()
}
