//! Experiment configuration, runners, statistics and CSV output.

mod config;
mod experiment;
mod metrics;

pub use config::{ExperimentConfig, KEYS};
pub use experiment::{
    arm_label, run_car, run_car_experiment, run_grid, run_grid_experiment, write_car_outputs,
    write_grid_outputs, Arms, CarRunResult, GridArmResult, CAR_GENERATION_HEADER,
    CAR_SUMMARY_HEADER, GRID_EPISODE_HEADER, GRID_SMOOTHED_HEADER, GRID_SUMMARY_HEADER, UNDEFINED,
};
pub use metrics::{early_late_ranges, phase_stats, sliding_window_avg, MetricsSeries, PhaseStats};
