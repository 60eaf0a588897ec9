//! Tracking an oscillating suspended block with a camera-fed estimator.
//!
//! The crate is split along the pipeline:
//!
//! - [`pendulum`]: 5-DoF suspended-block dynamics, pose output and Jacobians.
//! - [`frames`]: rigid transforms (unit quaternion + translation) and the
//!   camera/board/block/desired frame chains.
//! - [`ekf`]: extended Kalman filter with intermittent observations.
//! - [`camera`]: synthetic, rate-limited and lossy pose measurements.
//! - [`handeye`]: AX = XB eye-to-hand calibration on synthetic motions.
//! - [`control`]: task-space PD law on a Cartesian rigid-body plant.
//! - [`harness`]: multirate scenario runner, metrics and CSV traces.

pub mod camera;
pub mod control;
pub mod ekf;
mod error;
pub mod frames;
pub mod handeye;
pub mod harness;
pub mod pendulum;

pub use error::{Error, Result};
pub use frames::Pose;
