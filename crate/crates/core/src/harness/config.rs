//! Scenario configuration, read from TOML.
//!
//! Only `duration` and `seed` are required; every section and field has a
//! default. Example:
//!
//! ```toml
//! duration = 10.0
//! seed = 7
//!
//! [plant]
//! initial_q = [0.05, 0.15, 0.02, 0.03, 0.1]
//!
//! [sensor]
//! rate = 40.0
//! decimation = 4
//!
//! [ekf]
//! rate = 300.0
//! init = "first-measurement"
//!
//! [controller]
//! rate = 1000.0
//! kp = [400.0, 400.0, 400.0, 400.0, 400.0, 400.0]
//!
//! [frames]
//! block_des = [0.4, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]
//!
//! [output]
//! dir = "out/lower"
//! ```
//!
//! Poses are 7-number arrays `(tx, ty, tz, qw, qx, qy, qz)`.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix6, SMatrix, Vector3, Vector5, Vector6};
use serde::{Deserialize, Serialize};

use crate::camera::SensorConfig;
use crate::control::{ControllerGains, PlantParams};
use crate::ekf::{initial_covariance, NoiseConfig};
use crate::frames::{compose, Pose};
use crate::pendulum::{PendulumParams, PendulumState, NX, NY};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Simulated time, s.
    pub duration: f64,
    /// Seeds the camera loss schedule and measurement noise.
    pub seed: u64,
    #[serde(default)]
    pub plant: PlantConfig,
    #[serde(default)]
    pub sensor: SensorSection,
    #[serde(default)]
    pub ekf: EkfConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub frames: FramesConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    pub mass: f64,
    pub cable_length: f64,
    pub block_dims: [f64; 3],
    pub cog_offset: f64,
    pub gravity: f64,
    pub initial_q: [f64; 5],
    pub initial_qdot: [f64; 5],
}

impl Default for PlantConfig {
    fn default() -> Self {
        let p = PendulumParams::default();
        Self {
            mass: p.mass,
            cable_length: p.cable_length,
            block_dims: p.block_dims.into(),
            cog_offset: p.cog_offset,
            gravity: p.gravity,
            initial_q: [0.05, 0.15, 0.02, 0.03, 0.1],
            initial_qdot: [0.0; 5],
        }
    }
}

impl PlantConfig {
    pub fn params(&self) -> PendulumParams {
        PendulumParams::cuboid(
            self.mass,
            self.cable_length,
            Vector3::from(self.block_dims),
            self.cog_offset,
            self.gravity,
        )
    }

    pub fn initial_state(&self) -> PendulumState {
        PendulumState::new(
            Vector5::from(self.initial_q),
            Vector5::from(self.initial_qdot),
        )
    }
}

/// Camera settings; the seed comes from the scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSection {
    pub rate: f64,
    pub decimation: u32,
    pub drop_prob: f64,
    pub pos_noise_std: f64,
    pub rot_noise_std: f64,
}

impl Default for SensorSection {
    fn default() -> Self {
        let s = SensorConfig::default();
        Self {
            rate: s.rate,
            decimation: s.decimation,
            drop_prob: s.drop_prob,
            pos_noise_std: s.pos_noise_std,
            rot_noise_std: s.rot_noise_std,
        }
    }
}

impl SensorSection {
    pub fn sensor(&self, seed: u64) -> SensorConfig {
        SensorConfig {
            rate: self.rate,
            decimation: self.decimation,
            drop_prob: self.drop_prob,
            pos_noise_std: self.pos_noise_std,
            rot_noise_std: self.rot_noise_std,
            seed,
        }
    }
}

/// How the filter mean is seeded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitPolicy {
    /// Coordinates from the first delivered measurement, zero velocities.
    #[default]
    FirstMeasurement,
    /// The true initial state at `t = 0`.
    GroundTruth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EkfConfig {
    /// When false the controller is fed raw camera poses with a zero-order hold.
    pub enabled: bool,
    pub rate: f64,
    pub q_pos: f64,
    pub q_vel: f64,
    /// Overrides the sensor-derived measurement covariance diagonal.
    pub r_diag: Option<[f64; 7]>,
    pub init: InitPolicy,
    pub p0_pos: f64,
    pub p0_vel: f64,
}

impl Default for EkfConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            rate: 300.0,
            q_pos: 1e-6,
            q_vel: 1e-4,
            r_diag: None,
            init: InitPolicy::FirstMeasurement,
            p0_pos: 1e-2,
            p0_vel: 1e-1,
        }
    }
}

impl EkfConfig {
    pub fn noise(&self, sensor: &SensorConfig) -> NoiseConfig<NX, NY> {
        let mut process = SMatrix::<f64, NX, NX>::zeros();
        for i in 0..NX / 2 {
            process[(i, i)] = self.q_pos;
            process[(i + NX / 2, i + NX / 2)] = self.q_vel;
        }
        let measurement = match self.r_diag {
            Some(d) => SMatrix::<f64, NY, NY>::from_diagonal(&d.into()),
            None => sensor.measurement_noise(),
        };
        NoiseConfig {
            process,
            measurement,
        }
    }

    pub fn initial_covariance(&self) -> SMatrix<f64, NX, NX> {
        initial_covariance(self.p0_pos, self.p0_vel)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub rate: f64,
    /// Diagonal of `K_P`.
    pub kp: [f64; 6],
    /// Diagonal of `K_D`.
    pub kd: [f64; 6],
    pub mass: f64,
    pub inertia: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        let p = PlantParams::default();
        Self {
            rate: 1000.0,
            kp: [400.0; 6],
            kd: [40.0; 6],
            mass: p.mass,
            inertia: p.inertia,
        }
    }
}

impl ControllerConfig {
    pub fn gains(&self) -> ControllerGains {
        ControllerGains {
            kp: Matrix6::from_diagonal(&Vector6::from(self.kp)),
            kd: Matrix6::from_diagonal(&Vector6::from(self.kd)),
        }
    }

    pub fn plant(&self) -> PlantParams {
        PlantParams {
            mass: self.mass,
            inertia: self.inertia,
        }
    }
}

/// Static transforms of the scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FramesConfig {
    /// Camera in the robot base frame.
    pub base_camera: [f64; 7],
    /// Pendulum pivot in the camera frame.
    pub camera_pivot: [f64; 7],
    /// Block COG frame in the calibration-board frame.
    pub board_block: [f64; 7],
    /// Desired end-effector frame in the block frame.
    pub block_des: [f64; 7],
}

impl Default for FramesConfig {
    fn default() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            base_camera: [1.0, -2.0, 1.0, h, -h, 0.0, 0.0],
            camera_pivot: [0.0, -1.0, 2.0, h, h, 0.0, 0.0],
            board_block: [0.0, 0.3, 0.0, 1.0, 0.0, 0.0, 0.0],
            block_des: [0.4, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        }
    }
}

impl FramesConfig {
    pub fn base_camera(&self) -> Pose {
        Pose::from_array(self.base_camera)
    }

    pub fn camera_pivot(&self) -> Pose {
        Pose::from_array(self.camera_pivot)
    }

    pub fn board_block(&self) -> Pose {
        Pose::from_array(self.board_block)
    }

    pub fn block_des(&self) -> Pose {
        Pose::from_array(self.block_des)
    }

    /// Pendulum pivot in the base frame.
    pub fn base_pivot(&self) -> Pose {
        compose(&self.base_camera(), &self.camera_pivot())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for the CSV traces and metrics; nothing is written when unset.
    pub dir: Option<PathBuf>,
}

/// Built-in scenarios mirroring the two camera-rate experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Full 40 Hz camera stream.
    Fig7Upper,
    /// One of every four camera samples kept (10 Hz).
    Fig7Lower,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig7Upper => "fig7-upper",
            Preset::Fig7Lower => "fig7-lower",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "fig7-upper" => Ok(Preset::Fig7Upper),
            "fig7-lower" => Ok(Preset::Fig7Lower),
            other => Err(Error::Config(format!(
                "unknown preset '{other}' (expected fig7-upper or fig7-lower)"
            ))),
        }
    }

    pub fn config(self, seed: u64) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::new(10.0, seed);
        cfg.sensor.decimation = match self {
            Preset::Fig7Upper => 1,
            Preset::Fig7Lower => 4,
        };
        cfg
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn integer_rate(name: &str, rate: f64) -> Result<u64> {
    if rate >= 1.0 && rate.is_finite() && rate.fract() == 0.0 {
        Ok(rate as u64)
    } else {
        Err(Error::Config(format!(
            "{name} rate must be a positive whole number of Hz, got {rate}"
        )))
    }
}

impl ScenarioConfig {
    pub fn new(duration: f64, seed: u64) -> Self {
        Self {
            duration,
            seed,
            plant: PlantConfig::default(),
            sensor: SensorSection::default(),
            ekf: EkfConfig::default(),
            controller: ControllerConfig::default(),
            frames: FramesConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn sensor_config(&self) -> SensorConfig {
        self.sensor.sensor(self.seed)
    }

    /// Rates of the simulated clock, sensor, filter and controller, Hz.
    pub fn base_rate(&self) -> Result<u64> {
        let rates = [
            integer_rate("sensor", self.sensor.rate)?,
            integer_rate("ekf", self.ekf.rate)?,
            integer_rate("controller", self.controller.rate)?,
        ];
        Ok(rates.iter().fold(1, |acc, &r| acc / gcd(acc, r) * r))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config("duration must be positive".into()));
        }
        self.plant.params().validate()?;
        let init = self.plant.initial_state();
        if !init.is_finite() || !init.in_envelope() {
            return Err(Error::Config(
                "initial plant state outside the validity envelope".into(),
            ));
        }
        let sensor = self.sensor_config();
        sensor.validate()?;
        let noise = self.ekf.noise(&sensor);
        noise.validate()?;
        if !(self.ekf.p0_pos > 0.0 && self.ekf.p0_vel > 0.0) {
            return Err(Error::Config("initial covariance must be positive".into()));
        }
        self.controller.gains().validate()?;
        self.controller.plant().validate()?;
        self.base_rate()?;
        if !(self.controller.rate >= self.ekf.rate && self.ekf.rate >= sensor.effective_rate()) {
            return Err(Error::Config(
                "rates must satisfy controller >= ekf >= effective sensor rate".into(),
            ));
        }
        let frames = [
            self.frames.base_camera,
            self.frames.camera_pivot,
            self.frames.board_block,
            self.frames.block_des,
        ];
        for f in frames {
            let qn = f[3..].iter().map(|v| v * v).sum::<f64>();
            if f.iter().any(|v| !v.is_finite()) || qn < 1e-12 {
                return Err(Error::Config(
                    "frame poses need finite values and a non-zero quaternion".into(),
                ));
            }
        }
        Ok(())
    }
}
