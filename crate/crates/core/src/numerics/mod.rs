//! Dense matrices, activations, losses, the Adam optimizer and seeded
//! weight initialization.
//!
//! Everything here is `f64` and deterministic: no reduction depends on thread
//! scheduling, and every random draw comes from an explicitly seeded stream.

mod activation;
mod adam;
mod init;
mod loss;
mod matrix;

pub use activation::{activate, relu, sigmoid, Activation};
pub use adam::{AdamConfig, AdamState};
pub use init::{derive_seed, glorot_uniform, rng_from_seed, SeededRng};
pub use loss::{loss, loss_gradient, LossKind, BCE_CLAMP};
pub use matrix::{matmul, Matrix};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("{op}: dimension mismatch between {}x{} and {}x{}", left.0, left.1, right.0, right.1)]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("buffer of length {len} cannot form a {rows}x{cols} matrix")]
    BadLength { rows: usize, cols: usize, len: usize },
    #[error("optimizer tracks {expected} parameter blocks, got {params} parameter and {grads} gradient blocks")]
    BlockCount {
        expected: usize,
        params: usize,
        grads: usize,
    },
    #[error("parameter block {block}: expected {expected} values, got {params} parameters and {grads} gradients")]
    BlockShape {
        block: usize,
        expected: usize,
        params: usize,
        grads: usize,
    },
    #[error("non-finite gradient in parameter block {block} at index {index}")]
    NonFiniteGradient { block: usize, index: usize },
}
