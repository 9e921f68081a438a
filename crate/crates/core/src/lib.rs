//! Multi-task evidence accumulation: trial generation, the analytic optimal
//! classifier, leaky recurrent networks trained by BPTT, and decoding
//! analyses of their hidden states.

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod net;
pub mod seed;
pub mod tasks;
pub mod theory;
pub mod train;

pub use error::{Error, Result};
