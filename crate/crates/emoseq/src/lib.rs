//! Emotion/sequence classification with a TF-IDF-gated, attention-augmented LSTM.
//!
//! Pipeline:
//!
//! ```text
//! text -> tokenize -> vocabulary ids + TF-IDF weights
//!      -> embedding -> TF-IDF sigmoid gate -> LSTM
//!      -> multi-head self-attention -> learned fusion blend
//!      -> masked mean pooling -> softmax classifier
//! ```
//!
//! Everything is dense 64-bit float math implemented in this crate; analytic
//! gradients for every layer are verified against central finite differences
//! (see `numerics::gradient_check` and the acceptance test suite).
//!
//! Module map:
//! - [`numerics`]: matrices, activations, losses, gradient checker
//! - [`textpipe`]: tokenization, vocabulary, TF-IDF, dataset ingestion/split
//! - [`model`]: parameters, forward pass, manual backward pass
//! - [`train`]: Adam, learning-rate schedule, mini-batch training loop
//! - [`eval`]: confusion matrices and the CA/SE/SP/FM/J/AUC metric suite
//! - [`config`] / [`artifact`] / [`commands`]: run configuration, lossless
//!   model persistence, and the `train`/`eval`/`predict`/`ablate` entry points

pub mod artifact;
pub mod commands;
pub mod config;
pub mod eval;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod textpipe;
pub mod train;

pub use config::RunConfig;
pub use model::{ModelConfig, ModelParams};
pub use textpipe::{Document, EncodedExample, TfidfModel, Vocabulary};

/// Crate-wide error type. Variants map onto the CLI exit codes:
/// config errors exit 2, data/file errors exit 3, numeric failures exit 4.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: ({a_rows}x{a_cols}) vs ({b_rows}x{b_cols})")]
    ShapeMismatch {
        op: &'static str,
        a_rows: usize,
        a_cols: usize,
        b_rows: usize,
        b_cols: usize,
    },

    #[error("index {index} out of range for {what} of size {size}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error at line {line}: {msg}")]
    Data { line: u64, msg: String },

    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    #[error("incompatible model artifact: {0}")]
    Incompatible(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for this error per the CLI contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data { .. } | Error::Parse { .. } | Error::Incompatible(_) | Error::Io(_) => 3,
            Error::ShapeMismatch { .. } | Error::IndexOutOfRange { .. } | Error::Numeric(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
