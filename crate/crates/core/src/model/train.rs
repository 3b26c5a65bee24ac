use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::net::Classifier;
use crate::seed::{self, derive_seed};
use crate::waveform::{Dataset, IqFrame};
use crate::{Error, Result};

/// Samples per parallel work item. Fixed so that the order of floating-point
/// accumulation, and hence the result, does not depend on the thread count.
const CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Multiplier applied to the learning rate after every epoch.
    pub lr_decay: f64,
    pub seed: u64,
    /// Fraction of the dataset held out for per-epoch validation.
    pub validation_split: f64,
    /// Rotate every training frame by a fresh random carrier phase each
    /// epoch. Synthesized frames already carry a uniform random phase, so
    /// this only adds label-preserving variety.
    pub phase_augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 14,
            batch_size: 64,
            learning_rate: 0.02,
            momentum: 0.9,
            lr_decay: 0.9,
            seed: 0,
            validation_split: 0.1,
            phase_augment: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.validation_split > 0.0 && self.validation_split < 1.0) {
            return Err(Error::Config("validation_split must lie in (0, 1)".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.lr_decay > 0.0) {
            return Err(Error::Config("lr_decay must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
}

/// Minibatch SGD with momentum on the cross-entropy loss.
///
/// Deterministic for a fixed `cfg.seed` regardless of the rayon pool size.
pub fn train(mut model: Classifier, dataset: &Dataset, cfg: &TrainConfig) -> Result<Checkpoint> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Degenerate("cannot train on an empty dataset".into()));
    }
    if dataset.frame_len() != model.arch().frame_len || dataset.num_classes() != model.num_classes() {
        return Err(Error::Incompatible(format!(
            "model expects {} classes x {} samples, dataset has {} x {}",
            model.num_classes(),
            model.arch().frame_len,
            dataset.num_classes(),
            dataset.frame_len()
        )));
    }

    let inputs: Vec<Vec<f64>> = dataset
        .frames
        .par_iter()
        .map(|f| model.unit_input(f).values)
        .collect();
    let labels: Vec<usize> = dataset.frames.iter().map(|f| f.label as usize).collect();

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut seed::rng(derive_seed(cfg.seed, "split", 0)));
    let n_val = (cfg.validation_split * dataset.len() as f64).floor() as usize;
    let (val_idx, train_idx) = order.split_at(n_val);
    if train_idx.is_empty() {
        return Err(Error::Degenerate("validation split leaves no training frames".into()));
    }
    let mut train_idx = train_idx.to_vec();

    let n_params = model.num_params();
    let mut velocity = vec![0.0; n_params];
    let mut lr = cfg.learning_rate;
    let mut metrics = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        train_idx.shuffle(&mut seed::rng(derive_seed(cfg.seed, "epoch", epoch as u64)));
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (bi, batch) in train_idx.chunks(cfg.batch_size).enumerate() {
            let parts = batch
                .par_chunks(CHUNK)
                .map(|chunk| {
                    let mut grads = vec![0.0; n_params];
                    let mut loss = 0.0;
                    let mut hits = 0;
                    for &i in chunk {
                        let rotated;
                        let input = if cfg.phase_augment {
                            let key = (epoch * dataset.len() + i) as u64;
                            let theta = seed::rng(derive_seed(cfg.seed, "augment", key)).random::<f64>() * TAU;
                            rotated = model.unit_input(&rotate(&dataset.frames[i], theta)).values;
                            &rotated
                        } else {
                            &inputs[i]
                        };
                        let (l, pred) = model.accumulate_gradients(input, labels[i], &mut grads)?;
                        loss += l;
                        hits += (pred == labels[i]) as usize;
                    }
                    Ok((grads, loss, hits))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut grads = vec![0.0; n_params];
            let mut batch_loss = 0.0;
            for (g, l, h) in parts {
                grads.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                batch_loss += l;
                correct += h;
            }
            if !batch_loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: bi,
                    loss: batch_loss,
                });
            }
            loss_sum += batch_loss;
            let inv = 1.0 / batch.len() as f64;
            for ((p, v), g) in model.params_mut().iter_mut().zip(&mut velocity).zip(&grads) {
                *v = cfg.momentum * *v + g * inv;
                *p -= lr * *v;
            }
            if model.params().iter().any(|p| !p.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    batch: bi,
                    loss: f64::NAN,
                });
            }
        }
        lr *= cfg.lr_decay;

        let validation_accuracy = if val_idx.is_empty() {
            None
        } else {
            let hits = val_idx
                .par_iter()
                .map(|&i| model.predict(&inputs[i]).map(|p| (p == labels[i]) as usize))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .sum::<usize>();
            Some(hits as f64 / val_idx.len() as f64)
        };
        let m = EpochMetrics {
            epoch,
            train_loss: loss_sum / train_idx.len() as f64,
            train_accuracy: correct as f64 / train_idx.len() as f64,
            validation_accuracy,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} train acc {:.3} val acc {}",
            m.train_loss,
            m.train_accuracy,
            m.validation_accuracy.map_or("-".into(), |a| format!("{a:.3}"))
        );
        metrics.push(m);
    }

    Checkpoint::new(model, dataset, metrics)
}

fn rotate(frame: &IqFrame, theta: f64) -> IqFrame {
    let r = Complex64::from_polar(1.0, theta);
    frame.with_samples(frame.samples.iter().map(|s| s * r).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { validation_split: 0.0, ..Default::default() },
            TrainConfig { validation_split: 1.0, ..Default::default() },
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
