//! Experiment configuration, multi-trial training runs, metrics and plots.

pub mod config;
pub mod metrics;
pub mod plot;
pub mod train;

pub use config::{AgentOverrides, ExperimentConfig, ExperimentFile};
pub use metrics::{read_csv, write_csv, MetricsRow, CSV_HEADER};
pub use plot::{emit_latent_scatter, emit_learning_curve, CurveMetric, CurveSeries};
pub use train::{evaluate, run_matrix, run_training, train_trial, EvalSummary, RunSummary, TrialOutcome};
