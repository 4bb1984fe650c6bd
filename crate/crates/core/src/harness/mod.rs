//! Replicated experiments, summaries and CSV/TOML plumbing.

pub mod config;
pub mod experiment;
pub mod io;
pub mod summary;

pub use config::{parse_methods, ExperimentConfig, LordConfig, MethodSpec, ModelConfig, Setting};
pub use experiment::{real_data_report, run_experiment, CellOutcome, RealDataRow};
pub use summary::{consistency_curve, ConsistencySeries, SummaryRow};
