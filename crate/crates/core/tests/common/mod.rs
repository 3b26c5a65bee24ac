#![allow(dead_code)]

use liw::model::{ArchSpec, Classifier, ConvSpec};
use liw::waveform::{Dataset, DatasetSpec, ModulationScheme};

pub fn small_spec(schemes: &[ModulationScheme], per: usize, snrs: &[f64], seed: u64) -> DatasetSpec {
    DatasetSpec {
        schemes: schemes.to_vec(),
        frames_per_scheme_per_snr: per,
        snr_grid: snrs.to_vec(),
        frame_len: 64,
        master_seed: seed,
        ..DatasetSpec::default()
    }
}

pub fn small_dataset(schemes: &[ModulationScheme], per: usize, snrs: &[f64], seed: u64) -> Dataset {
    Dataset::synthesize(&small_spec(schemes, per, snrs, seed)).unwrap()
}

pub fn small_arch(frame_len: usize, classes: usize) -> ArchSpec {
    ArchSpec {
        frame_len,
        num_classes: classes,
        clip_amp: 4.0,
        conv: vec![ConvSpec {
            filters: 6,
            kernel: 5,
            stride: 1,
            pool: 2,
        }],
        hidden: vec![12],
    }
}

pub fn random_model(arch: ArchSpec, seed: u64) -> Classifier {
    Classifier::with_random_head(arch, seed).unwrap()
}
