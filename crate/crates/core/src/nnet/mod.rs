//! Neural network: tensors, a reverse-mode autodiff tape, the residual
//! fingerprint model and checkpoints.

pub mod checkpoint;
pub mod model;
pub mod tape;
pub mod tensor;

pub use checkpoint::{Checkpoint, TrainerState};
pub use model::{Mode, Model, ModelConfig, Variant};
pub use tape::{Tape, Var};
pub use tensor::{Scalar, Tensor};
