//! Synthetic camera: rate-limited, decimated, lossy and noisy pose samples of
//! the simulated block.
//!
//! Sample `i` is taken at `i / rate`. It is delivered (`gamma = 1`) when
//! `i % decimation == 0` and an independent Bernoulli draw survives
//! `drop_prob`. One draw is consumed per sample, decimated or not, so changing
//! the decimation never reshuffles which packets are lost.

use std::io::Write;

use nalgebra::{SMatrix, Unit, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::ekf::PoseMeasurement;
use crate::frames::Pose;
use crate::pendulum::{self, PendulumParams, PendulumState};
use crate::{Error, Result};

/// RNG stream used for the loss schedule.
const SCHEDULE_STREAM: u64 = 0;
/// RNG stream used for measurement noise.
const NOISE_STREAM: u64 = 1;

/// Smallest variance placed on the measurement-noise diagonal, so a noiseless
/// sensor still yields an invertible innovation covariance.
pub const MIN_MEASUREMENT_VARIANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct SensorConfig {
    /// Nominal sample rate, Hz.
    pub rate: f64,
    /// Keep one of every `decimation` samples.
    pub decimation: u32,
    /// Independent per-sample loss probability.
    pub drop_prob: f64,
    /// Per-axis position noise, m.
    pub pos_noise_std: f64,
    /// Rotation-angle noise, rad.
    pub rot_noise_std: f64,
    pub seed: u64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            rate: 40.0,
            decimation: 1,
            drop_prob: 0.0,
            pos_noise_std: 0.005,
            rot_noise_std: 0.01,
            seed: 0,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return bad("sensor rate must be positive");
        }
        if self.decimation == 0 {
            return bad("decimation must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return bad("drop probability must lie in [0, 1]");
        }
        if !(self.pos_noise_std >= 0.0 && self.rot_noise_std >= 0.0) {
            return bad("noise standard deviations must be non-negative");
        }
        Ok(())
    }

    /// Mean delivered rate, Hz.
    pub fn effective_rate(&self) -> f64 {
        self.rate / f64::from(self.decimation) * (1.0 - self.drop_prob)
    }

    /// Measurement covariance consistent with this sensor's noise, in the
    /// `(tx, ty, tz, qw, qx, qy, qz)` layout.
    ///
    /// A tangent-space rotation of angle `theta ~ N(0, s^2)` about a uniform
    /// axis moves each quaternion component by about `theta / 2 / sqrt(3)`,
    /// giving variance `s^2 / 12`; the same value is used for all four
    /// components.
    pub fn measurement_noise(&self) -> SMatrix<f64, 7, 7> {
        let pos = (self.pos_noise_std * self.pos_noise_std).max(MIN_MEASUREMENT_VARIANCE);
        let rot = (self.rot_noise_std * self.rot_noise_std / 12.0).max(MIN_MEASUREMENT_VARIANCE);
        let mut r = SMatrix::<f64, 7, 7>::zeros();
        for i in 0..3 {
            r[(i, i)] = pos;
        }
        for i in 3..7 {
            r[(i, i)] = rot;
        }
        r
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduledSample {
    pub index: usize,
    pub timestamp: f64,
    pub gamma: bool,
}

/// Number of nominal samples strictly before `duration`.
pub fn sample_count(rate: f64, duration: f64) -> usize {
    (duration * rate - 1e-9).ceil().max(0.0) as usize
}

/// Availability of every nominal sample in `[0, duration)`.
pub fn sample_schedule(cfg: &SensorConfig, duration: f64) -> Result<Vec<ScheduledSample>> {
    cfg.validate()?;
    if !(duration > 0.0) {
        return Err(Error::InvalidParameter("duration must be positive".into()));
    }
    let mut rng = cfg.rng(SCHEDULE_STREAM);
    let n = sample_count(cfg.rate, duration);
    Ok((0..n)
        .map(|index| {
            let survived = rng.random::<f64>() >= cfg.drop_prob;
            ScheduledSample {
                index,
                timestamp: index as f64 / cfg.rate,
                gamma: survived && index % cfg.decimation as usize == 0,
            }
        })
        .collect())
}

/// Streaming form of [`sample_schedule`], for event loops that pull one
/// sample at a time. Produces the same gammas as the batch schedule.
#[derive(Clone, Debug)]
pub struct Scheduler {
    rng: ChaCha8Rng,
    decimation: usize,
    drop_prob: f64,
    next_index: usize,
}

impl Scheduler {
    pub fn new(cfg: &SensorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            rng: cfg.rng(SCHEDULE_STREAM),
            decimation: cfg.decimation as usize,
            drop_prob: cfg.drop_prob,
            next_index: 0,
        })
    }

    /// Gamma of the next nominal sample.
    pub fn next_gamma(&mut self) -> bool {
        let index = self.next_index;
        self.next_index += 1;
        let survived = self.rng.random::<f64>() >= self.drop_prob;
        survived && index % self.decimation == 0
    }
}

/// Noise source for [`corrupt`], seeded from the sensor config.
pub fn noise_rng(cfg: &SensorConfig) -> ChaCha8Rng {
    cfg.rng(NOISE_STREAM)
}

/// Add Gaussian position noise and a right-composed random rotation.
pub fn corrupt<R: Rng + ?Sized>(true_pose: &Pose, cfg: &SensorConfig, rng: &mut R) -> Pose {
    let mut translation = *true_pose.translation();
    if cfg.pos_noise_std > 0.0 {
        let normal = Normal::new(0.0, cfg.pos_noise_std).expect("finite std");
        for v in translation.iter_mut() {
            *v += normal.sample(rng);
        }
    }
    let mut rotation = *true_pose.rotation();
    if cfg.rot_noise_std > 0.0 {
        let axis = random_axis(rng);
        let angle: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.rot_noise_std;
        rotation *= UnitQuaternion::from_axis_angle(&axis, angle);
        rotation.renormalize();
    }
    Pose::from_parts(translation, rotation)
}

/// Uniformly distributed unit vector.
pub fn random_axis<R: Rng + ?Sized>(rng: &mut R) -> Unit<Vector3<f64>> {
    loop {
        let v = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        if let Some(axis) = Unit::try_new(v, 1e-9) {
            return axis;
        }
    }
}

/// Ground truth integrated at a fine step; at each scheduled sample either a
/// corrupted COG pose or a missing entry.
pub fn simulate_stream(
    params: &PendulumParams,
    initial: &PendulumState,
    cfg: &SensorConfig,
    duration: f64,
) -> Result<Vec<PoseMeasurement>> {
    params.validate()?;
    let schedule = sample_schedule(cfg, duration)?;
    let period = 1.0 / cfg.rate;
    let substeps = (period / 1e-3).ceil().max(1.0) as usize;
    let dt = period / substeps as f64;
    let mut rng = noise_rng(cfg);
    let mut state = *initial;
    let mut out = Vec::with_capacity(schedule.len());
    for (i, sample) in schedule.iter().enumerate() {
        if i > 0 {
            for _ in 0..substeps {
                state = pendulum::step(params, &state, dt)?;
            }
        }
        out.push(if sample.gamma {
            let truth = pendulum::observe_pose(params, &state)?;
            PoseMeasurement::available(sample.timestamp, corrupt(&truth, cfg, &mut rng))
        } else {
            PoseMeasurement::missing(sample.timestamp)
        });
    }
    Ok(out)
}

pub const MEASUREMENT_CSV_HEADER: &str = "timestamp,gamma,tx,ty,tz,qw,qx,qy,qz";

/// One CSV row; pose columns are empty when the sample was lost.
pub fn measurement_csv_row(m: &PoseMeasurement) -> String {
    match &m.value {
        Some(pose) => {
            let cols: Vec<String> = pose.to_array().iter().map(|v| format!("{v:.9}")).collect();
            format!("{:.9},1,{}", m.timestamp, cols.join(","))
        }
        None => format!("{:.9},0,,,,,,,", m.timestamp),
    }
}

pub fn write_measurements_csv<W: Write>(mut w: W, stream: &[PoseMeasurement]) -> Result<()> {
    writeln!(w, "{MEASUREMENT_CSV_HEADER}")?;
    for m in stream {
        writeln!(w, "{}", measurement_csv_row(m))?;
    }
    Ok(())
}
