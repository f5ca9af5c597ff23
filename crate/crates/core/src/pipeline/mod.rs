//! End-to-end orchestration: configuration, ingestion, training, scenario
//! generation, reconciler training, evaluation, and the activation sweep.

pub mod artifact;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod report;
pub mod scenario;
pub mod synth;
pub mod train;

pub use artifact::{ModelArtifact, ModelWeights, ReconcilerArtifact};
pub use commands::{
    cmd_evaluate, cmd_forecast, cmd_ingest, cmd_sweep_activations, cmd_train_base,
    cmd_train_reconciler, IngestSummary,
};
pub use config::{ModelKind, RunConfig, WeightMode};
pub use report::EvalReport;
pub use scenario::ScenarioFile;
pub use synth::SynthSpec;
