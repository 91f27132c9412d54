//! Simulation experiments, utilities and the streaming monitor.

mod config;
mod experiment;
mod monitor;

pub use config::{Estimator, ExperimentConfig, Scenario, TestSpec};
pub use experiment::{delta_grid, replication_data, run_experiment, ExperimentResult, ReplicationData};
pub use monitor::{read_pre_file, run_monitor, Monitor, MonitorConfig, MonitorRow, StatisticSpec, CHECKPOINT_VERSION};
