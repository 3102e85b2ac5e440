//! Small dense network engine: batched forward/backward passes, Adam, and
//! the squashed Gaussian policy head.

mod adam;
mod gaussian;
mod matrix;
mod mlp;

pub use adam::AdamState;
pub use gaussian::{GaussianHead, SquashedSample, SQUASH_EPS};
pub use matrix::Matrix;
pub use mlp::{MlpParams, Tape};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid layer sizes {0:?}")]
    BadArchitecture(Vec<usize>),
    #[error("non-finite value encountered")]
    NonFinite,
}
