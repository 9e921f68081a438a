//! Latent ground truths, task banks, noisy evidence streams, the frozen
//! encoder and target signals.

pub mod accumulator;
pub mod bank;
pub mod batch;
pub mod encoder;
pub mod format;
pub mod latents;

pub use accumulator::{accumulator_targets, ACCUMULATOR_BOUND};
pub use bank::{
    classify, default_product_bank, make_linear_taskbank, multiplicative_targets, BankMode, LinearBank, ProductBank,
    TaskBank,
};
pub use batch::{build_batch, gen_observations, TrialBatch, TrialConfig, TrialMode};
pub use encoder::{build_encoder, EncoderParams};
pub use latents::sample_latents;
