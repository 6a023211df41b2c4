//! Scenario engine: synthetic tasks, the train and inference procedures, and
//! the continual, incremental and online evaluation protocols.

mod config;
pub mod data;
mod record;
mod scenario;
mod sweep;

pub use config::{ExtractorSpec, Method, ScenarioConfig, ScenarioKind, SgdSettings};
pub use data::{Dataset, GaussianBlobs, Imbalance, SyntheticTaskSpec, TaskGenerator};
pub use record::{
    mean_record, write_csv, write_task_csv, EvalPoint, RunRecord, ScenarioReport, Tally,
};
pub use scenario::{
    run_inference_step, run_scenario, run_scenario_detailed, run_seed, run_training_phase,
    AdaptiveClassifier, PhaseData, Prediction, SeedRun,
};
pub use sweep::{sweep, sweep_serial, Metric, SweepGrid, SweepResult};
