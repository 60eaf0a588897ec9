//! Calibration convergence study over repeated noisy trials.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::frames::{pose_error, Pose};
use crate::handeye::{convergence_study, ConvergenceRow, StudyConfig};
use crate::{Error, Result};

/// TOML description of a study; only `seed` is required.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibStudyConfig {
    pub seed: u64,
    #[serde(default = "default_max_n")]
    pub max_n: usize,
    #[serde(default = "default_rot_noise")]
    pub rot_noise: f64,
    #[serde(default = "default_trans_noise")]
    pub trans_noise: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// True camera-to-base transform `(tx, ty, tz, qw, qx, qy, qz)`.
    #[serde(default = "default_x_true")]
    pub x_true: [f64; 7],
    /// Directory for `calib_study.csv` (first trial).
    #[serde(default)]
    pub out_dir: Option<std::path::PathBuf>,
}

fn default_max_n() -> usize {
    20
}
fn default_rot_noise() -> f64 {
    0.005
}
fn default_trans_noise() -> f64 {
    0.002
}
fn default_trials() -> usize {
    1
}
fn default_x_true() -> [f64; 7] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [1.0, -2.0, 1.0, h, -h, 0.0, 0.0]
}

impl CalibStudyConfig {
    pub fn new(seed: u64) -> Self {
        toml::from_str(&format!("seed = {seed}")).expect("defaults parse")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.trials == 0 || cfg.max_n < 3 {
            return Err(Error::Config("need trials >= 1 and max_n >= 3".into()));
        }
        if !(cfg.rot_noise >= 0.0 && cfg.trans_noise >= 0.0) {
            return Err(Error::Config("noise levels must be non-negative".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn study(&self, trial: usize) -> StudyConfig {
        StudyConfig {
            x_true: Pose::from_array(self.x_true),
            max_n: self.max_n,
            rot_noise: self.rot_noise,
            trans_noise: self.trans_noise,
            seed: self.seed.wrapping_add(trial as u64),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibStudyOutcome {
    /// Transform the trials were generated from.
    pub x_true: Pose,
    /// Convergence series, one per trial.
    pub trials: Vec<Vec<ConvergenceRow>>,
}

impl CalibStudyOutcome {
    fn fraction(&self, improved: impl Fn(&ConvergenceRow, &ConvergenceRow) -> bool) -> f64 {
        let count = self
            .trials
            .iter()
            .filter(|rows| {
                let at3 = rows.iter().find(|r| r.n == 3).expect("series covers n = 3");
                let last = rows.last().expect("non-empty series");
                improved(at3, last)
            })
            .count();
        count as f64 / self.trials.len() as f64
    }

    /// Fraction of trials whose pose error at `max_n` does not exceed the one
    /// at `n = 3`. The pose error is the norm of the 6-vector
    /// [`pose_error`](crate::frames::pose_error) between estimate and truth.
    pub fn improved_fraction(&self) -> f64 {
        let err = |r: &ConvergenceRow| pose_error(&self.x_true, &r.estimate).norm();
        self.fraction(|at3, last| err(last) <= err(at3))
    }

    /// Same test applied to the rotation angle and translation distance
    /// separately.
    pub fn component_fractions(&self) -> (f64, f64) {
        (
            self.fraction(|at3, last| last.rot_err <= at3.rot_err),
            self.fraction(|at3, last| last.trans_err <= at3.trans_err),
        )
    }
}

pub fn run_calib_study(cfg: &CalibStudyConfig) -> Result<CalibStudyOutcome> {
    let trials = (0..cfg.trials)
        .map(|i| convergence_study(&cfg.study(i)))
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
        let file = std::fs::File::create(dir.join("calib_study.csv"))?;
        crate::handeye::write_study_csv(std::io::BufWriter::new(file), &trials[0])?;
    }
    Ok(CalibStudyOutcome {
        x_true: Pose::from_array(cfg.x_true),
        trials,
    })
}
