//! Shared fixtures for the benchmarks.

use cogmimo_core::channel::{sample_rayleigh, NoiseCovariance};
use cogmimo_core::effcap::transition_probs;
use cogmimo_core::{ActivityModel, ChannelSample, SensingModel, SpectralEnsemble, TransitionModel};

pub fn samples(m: usize, n: usize, count: usize) -> Vec<ChannelSample> {
    sample_rayleigh(m, n, count, 42).expect("valid fixture dimensions")
}

pub fn ensemble(m: usize, n: usize, count: usize) -> SpectralEnsemble {
    let kz = NoiseCovariance::isotropic(n, 1.0, 1.0).expect("valid noise");
    SpectralEnsemble::new(&samples(m, n, count), &kz).expect("valid ensemble")
}

pub fn default_model() -> TransitionModel {
    transition_probs(&ActivityModel::default(), &SensingModel::default())
}
