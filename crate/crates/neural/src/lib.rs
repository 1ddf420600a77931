//! EPA-conditioned response generation: a small reverse-mode autodiff
//! engine, GRU encoder/decoder models (attention seq2seq and a conditional
//! VAE), training, checkpoints, decoding, and a template fallback.

pub mod checkpoint;
pub mod config;
pub mod decode;
pub mod gaussian;
pub mod graph;
pub mod layers;
pub mod model;
pub mod params;
pub mod template;
pub mod tensor;
pub mod train;
pub mod vocab;

pub use checkpoint::{checksum, load_checkpoint, save_checkpoint, Manifest};
pub use config::{AnnealSchedule, DecodeConfig, DecodeMode, ModelConfig, Variant};
pub use decode::generate_response;
pub use gaussian::{kl_diag_gaussians, GaussianParams};
pub use graph::{Gradients, Graph, Reduction, Var};
pub use model::{Example, LossParts, Network};
pub use params::{ParamId, ParamStore};
pub use template::TemplateGenerator;
pub use tensor::Tensor;
pub use train::{
    train_model, train_network, LogRow, OptimizerSettings, TrainSettings, TrainingLog,
};
pub use vocab::{TokenSeq, Vocab};

/// Models are trained in single precision.
pub type Net = Network<f32>;
pub type Net64 = Network<f64>;

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("shape error in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite loss at step {step}")]
    NonFinite { step: u64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
