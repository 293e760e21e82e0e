//! Learnable predictors: the shared multilayer perceptron and the two linear
//! classifiers, plus their JSON model files.

mod io;
mod linear;
mod mlp;

use thiserror::Error;

pub use io::{load_mlp, load_model, save_model, Model, FORMAT_VERSION};
pub use linear::{fit_linear, LinearKind, LinearModel};
pub use mlp::{greedy_action, greedy_index, Dense, Gradients, Mlp, Target, TrainBatch, MLP_ARCH};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("expected {expected} inputs, got {found}")]
    InputSize { expected: usize, found: usize },
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("loss became non-finite ({0})")]
    NonFiniteLoss(f64),
    #[error("empty training batch")]
    EmptyBatch,
    #[error("need at least two distinct classes, found {0}")]
    InsufficientClasses(usize),
    #[error("covariance matrix is singular even after shrinkage")]
    SingularCovariance,
    #[error("architecture mismatch: expected {expected}, found {found}")]
    ArchitectureMismatch { expected: String, found: String },
    #[error("unsupported model file format {0}")]
    UnsupportedFormat(u32),
    #[error("malformed model file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
