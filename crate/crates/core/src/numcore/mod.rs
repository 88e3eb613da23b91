//! Deterministic RNG, dense arrays and a small reverse-mode tape.

mod array;
pub mod gradcheck;
mod rng;
mod tape;

pub use array::{DenseArray, MAX_RANK};
pub use rng::Rng;
pub use tape::{logsumexp, sigmoid, CustomBackward, Gradients, Tape, Var};

use crate::error::Result;

/// Softmax over the last axis, outside any tape.
pub fn softmax_rows(a: &DenseArray) -> Result<DenseArray> {
    tape::softmax_along(a, a.rank() - 1, false)
}

/// Log-softmax over the last axis, outside any tape.
pub fn log_softmax_rows(a: &DenseArray) -> Result<DenseArray> {
    tape::softmax_along(a, a.rank() - 1, true)
}
