//! Low-interception waveform (LIW) generation and evaluation.
//!
//! The crate covers the whole desk-scale pipeline:
//!
//! * [`waveform`] synthesizes labeled IQ frames and measures SNR / PSR,
//! * [`model`] is a small convolutional modulation classifier with exact
//!   input gradients,
//! * [`attack`] runs the decoupled direction-and-norm iteration that turns a
//!   clean frame into a low-interception waveform,
//! * [`channel`] simulates additive noise, quantization and the
//!   splice / transmit / split loop of a transceiver,
//! * [`eval`] turns all of the above into accuracy reports and sweeps.
//!
//! The guide under `book/` walks through each stage; its code listings are
//! compiled and run as doc-tests of this crate.

pub mod attack;
pub mod channel;
pub mod error;
pub mod eval;
pub mod model;
pub mod seed;
pub mod waveform;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/waveforms.md")]
    mod waveforms {}
    #[doc = include_str!("../../../book/src/classifier.md")]
    mod classifier {}
    #[doc = include_str!("../../../book/src/attack.md")]
    mod attack {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
