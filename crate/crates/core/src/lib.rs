//! Multilabel and multiclass prediction with a randomized low-rank label
//! embedding followed by a random-Fourier-feature link function.

pub mod dataset;
pub mod embedding;
pub mod error;
pub mod inference;
pub mod kernel;
pub mod link;
pub mod metrics;
pub mod model_io;
pub mod pipeline;
pub mod rng;
pub mod tensor;

#[doc(hidden)]
pub mod cli;

pub use error::{Error, ErrorKind, Result};
pub use rng::Rng;
pub use tensor::{DenseMatrix, SparseMatrix};
