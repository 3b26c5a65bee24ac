//! IQ frame synthesis, normalization, the [0, 1] attack domain and power
//! metrics.

mod dataset;
pub(crate) mod frame;
mod pulse;
mod scheme;
mod synth;

pub use dataset::{Dataset, DatasetSpec, Sidecar, DATASET_MAGIC};
pub use frame::{psr_db, ClampStats, IqFrame, UnitFrame, DEFAULT_CLIP_AMP};
pub use pulse::rrc_taps;
pub use scheme::ModulationScheme;
pub use synth::{modulate, modulate_detailed, Modulated};
