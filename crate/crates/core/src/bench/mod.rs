//! Experiment harness: reference optimum, metrics tables, performance model,
//! and the runner behind the command-line tool.

pub mod experiment;
pub mod metrics;
pub mod perfmodel;
pub mod rstar;

pub use experiment::{
    run_experiment, tune, write_outputs, ExperimentConfig, ExperimentOutcome, LoadedProblem, Manifest, OptimizerKind,
    ProblemSource, SyntheticSpec, TrainProblem, TuneSettings,
};
pub use metrics::{evaluate_metrics, MetricsRow, CSV_HEADER};
pub use perfmodel::{perf_model_threshold, predicts_speedup, PerfModelInput};
pub use rstar::{compute_rstar, Rstar, RstarCache, RstarOptions};
