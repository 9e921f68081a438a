//! Training loops, accuracy evaluation and trained-network bundles.

pub mod config;
pub mod run;

pub use config::{BankSpec, TrainConfig, TrainSetup};
pub use run::{
    evaluate_accuracy, evaluate_all, train, train_context_dependent, train_interleaved, TrainReport, TrainedNet,
};
