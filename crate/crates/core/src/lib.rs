//! Two-layer ReLU classifiers `f = V s(W^T x - b)` trained by full-batch gradient
//! descent on the multiclass hinge loss, with tools for the geometric condition
//! on owner-neuron directions, phase detection, and synthetic subspace data.

pub mod datagen;
pub mod error;
pub mod geometry;
pub mod io;
pub mod landscape;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod phases;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use loss::{LabeledDataset, LabeledSample};
pub use model::{BiasMode, NetworkParams, OutputMap, WeightMatrix};
pub use rng::Rng;
pub use trainer::{train, TrainConfig, Trajectory};
