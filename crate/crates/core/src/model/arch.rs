use serde::{Deserialize, Serialize};

use crate::waveform::DEFAULT_CLIP_AMP;
use crate::{Error, Result};

/// Conv1D + ReLU, optionally followed by non-overlapping max pooling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvSpec {
    pub filters: usize,
    /// Odd kernel width; inputs are zero padded by `kernel / 2`.
    pub kernel: usize,
    #[serde(default = "one")]
    pub stride: usize,
    /// Max-pool window (1 disables pooling).
    #[serde(default = "one")]
    pub pool: usize,
}

fn one() -> usize {
    1
}

/// Architecture descriptor: conv stack, then ReLU dense layers, then a
/// linear head of `num_classes` logits followed by softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchSpec {
    pub frame_len: usize,
    pub num_classes: usize,
    /// Half-range of the unit-interval map the inputs were produced with;
    /// the first layer sees `(u - 0.5) * 2 * clip_amp`, i.e. IQ amplitude.
    pub clip_amp: f64,
    pub conv: Vec<ConvSpec>,
    pub hidden: Vec<usize>,
}

impl ArchSpec {
    /// Two conv blocks (16 filters, kernel 7, max-pool 2), one dense layer of
    /// 64 units, and the class head.
    pub fn desk(frame_len: usize, num_classes: usize) -> ArchSpec {
        let block = ConvSpec {
            filters: 16,
            kernel: 7,
            stride: 1,
            pool: 2,
        };
        ArchSpec {
            frame_len,
            num_classes,
            clip_amp: DEFAULT_CLIP_AMP,
            conv: vec![block.clone(), block],
            hidden: vec![64],
        }
    }

    pub fn input_len(&self) -> usize {
        2 * self.frame_len
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.frame_len == 0 {
            return fail("frame_len must be positive".into());
        }
        if self.num_classes < 2 {
            return fail("a classifier needs at least two classes".into());
        }
        if !(self.clip_amp > 0.0) {
            return fail("clip_amp must be positive".into());
        }
        let mut len = self.frame_len;
        for (i, c) in self.conv.iter().enumerate() {
            if c.filters == 0 || c.kernel == 0 || c.kernel % 2 == 0 || c.stride == 0 || c.pool == 0 {
                return fail(format!("conv layer {i}: filters, stride, pool > 0 and odd kernel required"));
            }
            len = (len - 1) / c.stride + 1;
            len /= c.pool;
            if len == 0 {
                return fail(format!("conv layer {i} reduces the sequence to nothing"));
            }
        }
        if self.hidden.contains(&0) {
            return fail("dense layers must have at least one unit".into());
        }
        Ok(())
    }
}
