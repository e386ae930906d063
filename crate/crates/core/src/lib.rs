//! Desk-scale fine-tuning laboratory for small dense networks.
//!
//! The crate implements distance-constrained fine-tuning with projected SGD,
//! two label-noise models, confidence-based self-labeling (label correction
//! plus loss reweighting), and the measurement instruments that go with them:
//! layer distances, Gaussian-perturbed loss, and a numeric PAC-Bayes bound.
//!
//! Everything is deterministic given a seed: RNG streams are derived from a
//! single base seed via labeled hashing ([`seed::derive_seed`]), so changing
//! one stage's behavior never disturbs another stage's randomness.

pub mod constraint;
pub mod data;
pub mod diagnostics;
mod error;
pub mod nn;
pub mod noise;
pub mod seed;
pub mod selflabel;
pub mod snapshot;
pub mod trainer;

pub use constraint::DistanceSchedule;
pub use error::{Error, Result};
pub use nn::{Activation, Layer, Network, Prediction};
pub use noise::NoisyDataset;
pub use selflabel::SelfLabelConfig;
pub use trainer::{EpochMetrics, NetSpec, TrainConfig};
