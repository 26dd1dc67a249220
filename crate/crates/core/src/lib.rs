//! Higher-order Integrated Gradients.
//!
//! Attribution tensors of order 1 to 4 for differentiable models, checks of
//! their completeness, marginalization and symmetry, and export of the
//! results as interaction graphs in DOT and JSON.

pub mod data;
pub mod engine;
pub mod experiments;
pub mod models;
pub mod multiset;
pub mod quadrature;
pub mod synthetic;
pub mod tensor;
pub mod topology;

use thiserror::Error;

pub use data::{load_csv, load_csv_excluding, CsvMode, Dataset};
pub use engine::{EngineConfig, EngineError, ExplanationRequest};
pub use models::{ModelError, ModelSpec, PredictiveModel};
pub use quadrature::{QuadratureConfig, Rule};
pub use tensor::{AttributionTensor, Method};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] data::DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Tensor(#[from] tensor::TensorError),
    #[error(transparent)]
    Topology(#[from] topology::TopologyError),
    #[error("{0}")]
    InvalidArgument(String),
}
