//! Minimal feed-forward network stack: tensors, layers, reverse-mode
//! gradients, SGD with momentum, step learning-rate decay and checkpoints.

mod checkpoint;
mod gradcheck;
mod layer;
mod model;
mod optim;
mod tensor;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use gradcheck::{central_difference, finite_diff_grad, max_relative_error, relative_error};
pub use layer::LayerSpec;
pub use model::{build_model, Model, ModelSpec, Param};
pub use optim::{lr_at_epoch, sgd_step, LrSchedule, OptimizerState};
pub use tensor::Tensor;
