//! Multi-interest sequential recommendation with global item context.
//!
//! Pipeline: [`ingest`] builds per-user sequences, [`gce`] turns k-hop
//! co-occurrences into a normalized item graph, [`recent`] encodes time
//! intervals inside the recent window, [`aggregate`] mixes local and global
//! signals with attention, [`interests`] extracts K interest vectors, and
//! [`train`] / [`serve_eval`] fit and score the model.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`).

pub mod aggregate;
pub mod config;
pub mod error;
pub mod gce;
pub mod ingest;
pub mod interests;
pub mod recent;
pub mod scalar;
pub mod serve_eval;
pub mod sparse;
pub mod synth;
pub mod tensor;
pub mod train;

pub use config::{load_config, HyperParams, NegativeSampling, Preset};
pub use error::{Error, Result};
pub use gce::{AblationVariant, NormalizedAdjacency};
pub use ingest::{Dataset, UserSequence};
pub use scalar::Scalar;
pub use serve_eval::MetricsReport;
pub use sparse::CsrMatrix;
pub use tensor::Mat;
pub use train::{ModelConfig, ModelDims, ModelParams};

pub type MatF32 = Mat<f32>;
pub type MatF64 = Mat<f64>;
pub type CsrF32 = CsrMatrix<f32>;
pub type CsrF64 = CsrMatrix<f64>;
pub type ModelParamsF32 = ModelParams<f32>;
pub type ModelParamsF64 = ModelParams<f64>;
pub type AdjacencyF32 = NormalizedAdjacency<f32>;
pub type AdjacencyF64 = NormalizedAdjacency<f64>;
