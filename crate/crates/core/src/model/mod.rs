//! A small from-scratch 1-D convolutional modulation classifier.
//!
//! The network consumes [`UnitFrame`](crate::waveform::UnitFrame) values,
//! i.e. the same [0, 1] domain the attack clips to, and exposes both
//! parameter gradients (for training) and exact input gradients (for the
//! attack).

mod arch;
mod checkpoint;
mod net;
mod train;

pub use arch::{ArchSpec, ConvSpec};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use net::{softmax, Classifier, InputGradient, PROB_FLOOR};
pub(crate) use net::argmax as net_argmax;
pub use train::{train, EpochMetrics, TrainConfig};
