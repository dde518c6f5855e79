//! Experiment orchestration: TOML configs, the preset catalog, k-sweeps,
//! log-log fits, and CSV/JSON reports.

pub mod config;
pub mod fit;
pub mod presets;
pub mod report;
pub mod runs;

pub use config::{DistanceOptions, ExperimentConfig, PresetSpec, ShelukhinSettings};
pub use fit::{levels_off, local_slopes, loglog_trend, Trend};
pub use presets::{build as build_preset, catalog, Preset};
pub use report::{Check, DistanceRow, Report, SweepRow, TraceRow};
pub use runs::{execute, run_defect, run_distance, run_prop53, run_theorem1, run_theorem2, run_toeplitz_dump};
