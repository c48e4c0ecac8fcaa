//! Seeded sequential trial engine, parallel replications, convergence
//! reports and CSV/JSON export.

mod design;
mod engine;
mod export;
mod replicate;
mod report;

pub use design::{catalogue, CatalogueEntry, Design, DesignClass};
pub use engine::{martingale_residual, run_trial, StratumTableSnapshot, TrialConfig, Trajectory, DEFAULT_STRIDE};
pub use export::{summary_json, write_trajectory_csv, SCHEMA_VERSION};
pub use replicate::{run_replications, run_replications_detailed, ReplicationSummary};
pub use report::{convergence_report, ConvergenceReport, ErrorStats, MARTINGALE_BOUND};
