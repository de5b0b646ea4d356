//! Minimal tensor kernel: the layers the sentence encoder needs, with
//! hand-written backward passes, Adam, and a finite-difference checker.
//!
//! There is no graph or broadcasting machinery; each operation exposes a
//! forward function and a matching backward function, and the encoder wires
//! them together explicitly.

mod adam;
mod gradcheck;
mod layers;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use gradcheck::grad_check;
pub use layers::{
    conv1d_backward, conv1d_valid, dropout, dropout_backward, embedding_lookup,
    embedding_lookup_backward, max_over_time, max_over_time_backward, relu, relu_backward, softmax,
    softmax_cross_entropy, DropoutMask,
};
pub use tensor::{Parameter, Scalar, Tensor};
