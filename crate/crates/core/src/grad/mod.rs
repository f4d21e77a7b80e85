//! Loss, hand-derived spike-time gradients, Adam and the training step.

mod adam;
mod backward;
mod loss;
mod train;

pub use adam::{adam_step, AdamConfig, AdamSlot, AdamState};
pub use backward::{backward, backward_into, grad_dendrites, grad_inputs, grad_weights, GradientTape, Gradients};
pub use loss::loss_and_output_grad;
pub use train::{batch_gradients, train_batch, Sample};
