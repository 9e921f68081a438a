//! Rectified recurrent networks with forward-Euler dynamics, MSE loss,
//! backpropagation through time and Adam.

pub mod adam;
pub mod checkpoint;
pub mod dynamics;
pub mod params;

pub use adam::{AdamState, LR_FIXED_RT, LR_FREE_RT};
pub use dynamics::{
    backward, backward_time_major, forward, forward_batch, forward_time_major, loss_mse, step, to_batch_major, to_time_major,
    Trajectory,
};
pub use params::{Gradients, InitScheme, Leak, LeakyRnnParams, NetShape, Readout};
