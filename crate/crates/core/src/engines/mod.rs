//! Learners used by Analyze steps, written from scratch on plain `f64`
//! buffers: the compression autoencoder, least-squares regression and an
//! LSTM forecaster, plus reconstruction-error reporting and a versioned
//! model file format.

mod autoencoder;
mod dense;
mod error_dist;
mod linear;
mod lstm;
mod matrix;
mod model_file;
mod optim;

use thiserror::Error;

pub use autoencoder::{ae_init, ae_train, Autoencoder, Gradients, ACTIVATIONS, BOTTLENECK_INDEX, PAPER_WIDTHS};
pub use dense::{sigmoid, Activation, DenseLayer};
pub use error_dist::{
    relative_error_distribution, relative_error_distribution_with, relative_errors, ErrorDistribution,
    Histogram, DEFAULT_EPSILON,
};
pub use linear::{lin_predict, linfit, LinearModel};
pub use lstm::{forecast_mse, make_windows, rnn_predict, rnn_train, RecurrentModel, RnnConfig};
pub use matrix::Matrix;
pub use model_file::{ModelFile, StoredModel, MODEL_FORMAT, MODEL_VERSION};
pub use optim::{Optimizer, OptimizerKind, TrainConfig};

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("input width {found}, expected {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model file: {0}")]
    ModelFile(String),
}
