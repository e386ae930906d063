//! Shared fixtures for the benchmark targets.

use ndarray::Array2;

use ftlab_core::data::make_blobs;
use ftlab_core::nn::Activation;
use ftlab_core::trainer::{init_network, NetSpec};
use ftlab_core::{Network, NoisyDataset};

pub const INPUT_DIM: usize = 20;
pub const CLASSES: usize = 10;

pub fn fixture_network(hidden: usize, seed: u64) -> Network {
    let spec = NetSpec {
        input_dim: INPUT_DIM,
        hidden_widths: vec![hidden],
        hidden_activation: Activation::ReLU,
        num_classes: CLASSES,
    };
    init_network(&spec, seed).expect("valid spec")
}

pub fn fixture_dataset(n: usize, seed: u64) -> NoisyDataset {
    let (features, labels) = make_blobs(n, INPUT_DIM, CLASSES, 3.0, seed).expect("valid params");
    NoisyDataset::clean(features, labels, CLASSES).expect("valid dataset")
}

pub fn fixture_features(ds: &NoisyDataset) -> &Array2<f64> {
    ds.features()
}
