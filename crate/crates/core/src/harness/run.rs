//! The discrete event loop and its CSV traces.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use nalgebra::{SMatrix, Vector6};

use super::config::{InitPolicy, ScenarioConfig};
use super::metrics::RunMetrics;
use crate::camera::{self, noise_rng, Scheduler};
use crate::control::{control_wrench, plant_step, EffectorState};
use crate::ekf::{self, belief_from_pose, Belief, BlockModel, PoseMeasurement};
use crate::frames::{compose, desired_pose_in_base, Pose};
use crate::pendulum::{self, PendulumState, StateVector, NX};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TruthRow {
    pub t: f64,
    pub state: PendulumState,
    pub pose: Pose,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateRow {
    pub t: f64,
    pub mean: StateVector,
    pub pose: Pose,
    pub cov_trace: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlRow {
    pub t: f64,
    pub desired: Pose,
    pub current: Pose,
    pub wrench: Vector6<f64>,
}

/// Everything recorded during a run, one entry per event of each stream.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Traces {
    /// Every clock tick.
    pub truth: Vec<TruthRow>,
    /// Every nominal camera sample.
    pub measurements: Vec<PoseMeasurement>,
    /// Every filter tick once the filter is initialized.
    pub estimate: Vec<EstimateRow>,
    /// Every controller tick.
    pub control: Vec<ControlRow>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub traces: Traces,
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(|v| format!("{v:.9}"))
        .collect::<Vec<_>>()
        .join(",")
}

const POSE_COLS: [&str; 7] = ["tx", "ty", "tz", "qw", "qx", "qy", "qz"];

fn prefixed(prefix: &str, names: &[&str]) -> String {
    names
        .iter()
        .map(|n| format!("{prefix}{n}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn state_header(prefix: &str) -> String {
    let q: Vec<String> = (1..=5).map(|i| format!("{prefix}q{i}")).collect();
    let qd: Vec<String> = (1..=5).map(|i| format!("{prefix}qd{i}")).collect();
    format!("{},{}", q.join(","), qd.join(","))
}

impl Traces {
    pub fn write_truth<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,{},{}", state_header(""), POSE_COLS.join(","))?;
        for r in &self.truth {
            let x = r.state.to_vector();
            writeln!(
                w,
                "{:.9},{},{}",
                r.t,
                join(x.iter().copied()),
                join(r.pose.to_array())
            )?;
        }
        Ok(())
    }

    pub fn write_measurements<W: Write>(&self, w: W) -> Result<()> {
        camera::write_measurements_csv(w, &self.measurements)
    }

    pub fn write_estimate<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "t,{},{},p_trace",
            state_header("est_"),
            POSE_COLS.join(",")
        )?;
        for r in &self.estimate {
            writeln!(
                w,
                "{:.9},{},{},{:.9e}",
                r.t,
                join(r.mean.iter().copied()),
                join(r.pose.to_array()),
                r.cov_trace
            )?;
        }
        Ok(())
    }

    pub fn write_control<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "t,{},{},fx,fy,fz,mx,my,mz",
            prefixed("des_", &POSE_COLS),
            prefixed("cur_", &POSE_COLS)
        )?;
        for r in &self.control {
            writeln!(
                w,
                "{:.9},{},{},{}",
                r.t,
                join(r.desired.to_array()),
                join(r.current.to_array()),
                join(r.wrench.iter().copied())
            )?;
        }
        Ok(())
    }

    /// `truth.csv`, `measurements.csv`, `estimate.csv` and `control.csv`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let open = |name: &str| -> Result<BufWriter<File>> {
            Ok(BufWriter::new(File::create(dir.join(name))?))
        };
        self.write_truth(open("truth.csv")?)?;
        self.write_measurements(open("measurements.csv")?)?;
        self.write_estimate(open("estimate.csv")?)?;
        self.write_control(open("control.csv")?)?;
        Ok(())
    }
}

struct Filter {
    model: BlockModel,
    /// `Q` per filter period; scaled by the fraction of a period predicted.
    process: SMatrix<f64, NX, NX>,
    measurement: SMatrix<f64, 7, 7>,
    p0: SMatrix<f64, NX, NX>,
    rate: f64,
    belief: Option<(Belief<NX>, f64)>,
}

impl Filter {
    fn predict_to(&mut self, t: f64) -> Result<()> {
        if let Some((belief, tb)) = &mut self.belief {
            let dt = t - *tb;
            if dt > 0.0 {
                let q = self.process * (dt * self.rate);
                *belief = ekf::predict(belief, &self.model, &q, dt)?;
                *tb = t;
            }
        }
        Ok(())
    }

    fn correct(&mut self, m: &PoseMeasurement) -> Result<()> {
        if self.belief.is_none() {
            if let Some(pose) = &m.value {
                self.belief = Some((
                    belief_from_pose(&self.model.params, pose, self.p0),
                    m.timestamp,
                ));
            }
        }
        self.predict_to(m.timestamp)?;
        if let Some((belief, _)) = &mut self.belief {
            *belief = ekf::correct(belief, m, &self.model, &self.measurement)?;
        }
        Ok(())
    }
}

/// Simulate the scenario; traces are written when `cfg.output.dir` is set.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let started = Instant::now();
    cfg.validate()?;
    let params = cfg.plant.params();
    let sensor = cfg.sensor_config();
    let gains = cfg.controller.gains();
    let plant = cfg.controller.plant();
    let base_pivot = cfg.frames.base_pivot();
    let block_des = cfg.frames.block_des();
    let desired_from = |cog: &Pose| desired_pose_in_base(&compose(&base_pivot, cog), &block_des);

    let base = cfg.base_rate()?;
    let every = |rate: f64| base / rate as u64;
    let (cam_every, ekf_every, ctrl_every) = (
        every(sensor.rate),
        every(cfg.ekf.rate),
        every(cfg.controller.rate),
    );
    let n_ticks = camera::sample_count(base as f64, cfg.duration) as u64;
    let dt_base = 1.0 / base as f64;
    let dt_ctrl = 1.0 / cfg.controller.rate;

    let mut scheduler = Scheduler::new(&sensor)?;
    let mut noise = noise_rng(&sensor);
    let noise_cfg = cfg.ekf.noise(&sensor);
    let mut filter = Filter {
        model: BlockModel::new(params.clone()),
        process: noise_cfg.process,
        measurement: noise_cfg.measurement,
        p0: cfg.ekf.initial_covariance(),
        rate: cfg.ekf.rate,
        belief: None,
    };
    let mut truth = cfg.plant.initial_state();
    if cfg.ekf.enabled && cfg.ekf.init == InitPolicy::GroundTruth {
        filter.belief = Some((Belief::new(truth.to_vector(), filter.p0), 0.0));
    }

    let initial_desired = desired_from(&pendulum::observe_pose(&params, &truth)?);
    let mut effector = EffectorState::at_rest(initial_desired);
    let mut reference = initial_desired;
    let mut pending: Vec<PoseMeasurement> = Vec::new();
    let mut traces = Traces::default();

    let (mut gamma_count, mut ekf_ticks, mut corrections) = (0usize, 0usize, 0usize);
    let (mut cam_sq, mut est_sq_pos, mut est_sq_q, mut track_sq) = (0.0, 0.0, 0.0, 0.0);
    let mut est_samples = 0usize;
    // Latest raw camera pose, standing in for the estimate when the filter is off.
    let mut held: Option<Pose> = None;

    for k in 0..n_ticks {
        let t = k as f64 * dt_base;
        let truth_pose = pendulum::observe_pose(&params, &truth).map_err(|e| e.at("plant", t))?;
        traces.truth.push(TruthRow {
            t,
            state: truth,
            pose: truth_pose,
        });

        if k % cam_every == 0 {
            let m = if scheduler.next_gamma() {
                let measured = camera::corrupt(&truth_pose, &sensor, &mut noise);
                gamma_count += 1;
                cam_sq += (measured.translation() - truth_pose.translation()).norm_squared();
                if !cfg.ekf.enabled {
                    reference = desired_from(&measured);
                    held = Some(measured);
                }
                PoseMeasurement::available(t, measured)
            } else {
                PoseMeasurement::missing(t)
            };
            if cfg.ekf.enabled && m.value.is_some() {
                pending.push(m.clone());
            }
            traces.measurements.push(m);
        }

        if cfg.ekf.enabled && k % ekf_every == 0 {
            ekf_ticks += 1;
            for m in pending.drain(..) {
                filter.correct(&m).map_err(|e| e.at("ekf", m.timestamp))?;
                corrections += 1;
            }
            filter.predict_to(t).map_err(|e| e.at("ekf", t))?;
            if let Some((belief, _)) = &filter.belief {
                let est_state = PendulumState::from_vector(&belief.mean);
                let est_pose =
                    pendulum::observe_pose(&params, &est_state).map_err(|e| e.at("ekf", t))?;
                est_sq_pos += (est_pose.translation() - truth_pose.translation()).norm_squared();
                est_sq_q += est_pose.angle_to(&truth_pose).powi(2);
                est_samples += 1;
                reference = desired_from(&est_pose);
                traces.estimate.push(EstimateRow {
                    t,
                    mean: belief.mean,
                    pose: est_pose,
                    cov_trace: belief.cov.trace(),
                });
            }
        } else if k % ekf_every == 0 {
            if let Some(pose) = &held {
                est_sq_pos += (pose.translation() - truth_pose.translation()).norm_squared();
                est_sq_q += pose.angle_to(&truth_pose).powi(2);
                est_samples += 1;
            }
        }

        if k % ctrl_every == 0 {
            let true_desired = desired_from(&truth_pose);
            track_sq += (effector.pose.translation() - true_desired.translation()).norm_squared();
            let wrench = control_wrench(&gains, &reference, &effector);
            traces.control.push(ControlRow {
                t,
                desired: reference,
                current: effector.pose,
                wrench,
            });
            effector = plant_step(&effector, &wrench, &plant, dt_ctrl)
                .map_err(|e| e.at("controller", t))?;
        }

        truth = pendulum::step(&params, &truth, dt_base).map_err(|e| e.at("plant", t))?;
    }

    let mean_sqrt = |sum: f64, n: usize| if n == 0 { 0.0 } else { (sum / n as f64).sqrt() };
    let metrics = RunMetrics {
        est_rmse_pos: mean_sqrt(est_sq_pos, est_samples),
        est_rmse_q: mean_sqrt(est_sq_q, est_samples),
        track_rmse_pos: mean_sqrt(track_sq, traces.control.len()),
        gamma_count,
        scheduled_samples: traces.measurements.len(),
        ekf_ticks,
        corrections,
        camera_rmse_pos: mean_sqrt(cam_sq, gamma_count),
        wall_time: started.elapsed().as_secs_f64(),
    };
    if let Some(dir) = &cfg.output.dir {
        traces.write_all(dir)?;
        fs::write(dir.join("metrics.json"), metrics.to_json())?;
    }
    if [
        metrics.est_rmse_pos,
        metrics.est_rmse_q,
        metrics.track_rmse_pos,
    ]
    .iter()
    .any(|v| !v.is_finite())
    {
        return Err(Error::DivergedFilter("non-finite run metrics".into()));
    }
    Ok(RunOutput { metrics, traces })
}
