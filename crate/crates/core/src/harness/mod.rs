//! Multirate scenario runner binding plant, camera, filter and controller.
//!
//! Everything advances on one simulated clock whose tick is the least common
//! multiple of the component rates. Per tick the order is: camera sample,
//! filter update, controller update, then one plant step to the next tick.

mod calib;
mod checks;
mod config;
mod metrics;
mod run;

pub use calib::{run_calib_study, CalibStudyConfig, CalibStudyOutcome};
pub use checks::{check_run, Check};
pub use config::{
    ControllerConfig, EkfConfig, FramesConfig, InitPolicy, OutputConfig, PlantConfig, Preset,
    ScenarioConfig, SensorSection,
};
pub use metrics::{compare_runs, rmse, CompareBounds, Comparison, MetricRatio, RunMetrics};
pub use run::{run_scenario, ControlRow, EstimateRow, RunOutput, Traces, TruthRow};
