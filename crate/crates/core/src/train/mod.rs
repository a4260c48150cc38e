//! Parameters, loss and gradients, sampling, Adam, checkpoints and the
//! training loop.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
mod params;
mod pipeline;
pub mod sampling;
mod trainer;

pub use adam::{adam_update, AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use params::{EncoderParams, ModelDims, ModelParams};
pub use pipeline::{
    backward, encode, forward_loss, gradients, loss, Encoding, GatheredRows, GlobalRows, GradAccumulator, LossTrace,
    ModelConfig, TrainingExample,
};
pub use sampling::ExampleSampler;
pub use trainer::{
    batch_gradients, dropout_seed, train, DropoutPlan, EvalRecord, TrainOptions, TrainOutput, CHECKPOINT_FILE,
    CONFIG_FILE, GRAD_CHUNK, LOG_FILE, SELECTION_CUTOFF,
};
