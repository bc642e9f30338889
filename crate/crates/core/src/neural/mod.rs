//! Dense extrapolation cell and its training machinery.
//!
//! The cell maps a window of `N` consecutive log-rates to the next one.
//! Layers `1..K-1` use ReLU, the scalar output layer is the identity. Longer
//! horizons are produced by feeding each prediction back into the window
//! (see [`rollout`]); training differentiates through that recursion.

mod cell;
mod checkpoint;
mod matrix;
mod rmsprop;
mod rollout;

pub use cell::{init_cell, CellSpec, DenseCell, Layer, Trace};
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use matrix::Matrix;
pub use rmsprop::{rmsprop_step, RmsPropConfig, RmsPropState};
pub use rollout::{
    backward, batch_loss_and_gradients, input_jacobian, loss, rollout, rollout_jacobian,
    BackwardMode, Gradients, Sequence, Workspace,
};
