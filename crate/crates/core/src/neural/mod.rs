//! Differentiable building blocks and the assembled classifier, written
//! directly over `f64` buffers.

pub mod adam;
pub mod attention;
pub mod checkpoint;
pub mod classifier;
pub mod conv;
pub mod lstm;
pub mod model;
pub mod tensor;

pub use adam::{optimizer_step, AdamConfig, AdamState};
pub use attention::Attention;
pub use checkpoint::Checkpoint;
pub use classifier::{Classifier, N_CLASSES};
pub use conv::{ConvConfig, ConvEncoder};
pub use lstm::{Lstm, LSTM_HIDDEN_DIM};
pub use model::{AduInput, AduStore, EncoderConfig, Example, Model, ModelConfig, Pipeline};
pub use tensor::Tensor;
