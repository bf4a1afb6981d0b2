//! Experiment protocol for the workbench: configuration, pre-training,
//! fine-tuning at fixed shares of a specialist budget, evaluation, run
//! records, effect sizes and report tables.

pub mod config;
pub mod protocol;
pub mod record;
pub mod report;
pub mod stats;
pub mod tasks;
pub mod trainee;

pub use config::{AgentTag, BudgetTag, EnvKind, ExperimentConfig};
pub use protocol::{load_records, run_experiment, ExperimentOutcome};
pub use record::{Metric, RunRecord};
pub use report::{cles_matrices, write_report, ClesMatrix, ReportTable};
pub use stats::{aggregate, cles, cles_exact, summarize, Summary};
