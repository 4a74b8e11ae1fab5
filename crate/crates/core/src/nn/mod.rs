//! Dense tensors, a small convolutional backbone with two independent binary
//! heads (left hand, right hand), exact backprop, Adam and checkpoints.

mod check;
mod checkpoint;
mod model;
mod optim;
mod tensor;

pub use check::{compare_gradients, grad_check, CheckLabels};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use model::{
    backward, batch_loss, bce_loss, forward, predict, sigmoid, total_loss, ForwardCache, ModelConfig, ModelParams,
    PROB_CLAMP,
};
pub use optim::{adam_step, AdamState, OptimizerConfig};
pub use tensor::Tensor;
