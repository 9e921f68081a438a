//! Config-driven experiments: the catalog, the sweep runner, summaries and
//! the training-free theory check.

pub mod catalog;
pub mod run;
pub mod summary;
pub mod svg;
pub mod verify;

pub use catalog::{Analyses, Cell, ExperimentId, ExperimentSpec, SweepAxes, Variant, IN_SCOPE_EXPERIMENTS};
pub use run::{
    analytic_curve, analyze, config_key, run_experiment, train_cached, AnalyticPoint, FixedPointSummary, Manifest,
    NetAnalysis, NetResult, RunOptions, Status, TrainSummary,
};
pub use summary::{summarize, CellSummary, Summary};
pub use verify::{verify_theory, verify_theory_with, Check, TheoryReport};
