//! Run metrics, RMSE and run-to-run comparison.

use std::fmt;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Summary of one scenario run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMetrics {
    /// Estimated vs. true COG position, m.
    pub est_rmse_pos: f64,
    /// Estimated vs. true COG orientation angle, rad.
    pub est_rmse_q: f64,
    /// End-effector vs. true desired position, m.
    pub track_rmse_pos: f64,
    /// Delivered camera samples.
    pub gamma_count: usize,
    /// Nominal camera samples, delivered or not.
    pub scheduled_samples: usize,
    /// Filter ticks over the run.
    pub ekf_ticks: usize,
    /// Filter corrections applied.
    pub corrections: usize,
    /// Raw camera vs. true COG position over delivered samples, m.
    pub camera_rmse_pos: f64,
    pub wall_time: f64,
}

impl RunMetrics {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("metrics: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

/// Root of the mean squared Euclidean distance between matching samples.
pub fn rmse<V: AsRef<[f64]>>(a: &[V], b: &[V]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "series lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Shape("series are empty".into()));
    }
    let mut sum = 0.0;
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let (x, y) = (x.as_ref(), y.as_ref());
        if x.len() != y.len() {
            return Err(Error::Shape(format!(
                "sample {i} dimensions differ: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        let d = DVector::from_column_slice(x) - DVector::from_column_slice(y);
        sum += d.norm_squared();
    }
    Ok((sum / a.len() as f64).sqrt())
}

/// Bounds checked by [`compare_runs`], on the ratio `b / a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompareBounds {
    pub max_est_rmse_pos_ratio: f64,
}

impl Default for CompareBounds {
    fn default() -> Self {
        Self {
            max_est_rmse_pos_ratio: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRatio {
    pub name: &'static str,
    pub a: f64,
    pub b: f64,
    pub ratio: f64,
    /// Upper bound on the ratio, if any.
    pub bound: Option<f64>,
}

impl MetricRatio {
    pub fn passed(&self) -> bool {
        self.bound.is_none_or(|b| self.ratio <= b)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub rows: Vec<MetricRatio>,
}

impl Comparison {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(MetricRatio::passed)
    }

    pub fn ratio(&self, name: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.name == name).map(|r| r.ratio)
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<16} {:>14} {:>14} {:>10}  check",
            "metric", "a", "b", "b/a"
        )?;
        for r in &self.rows {
            let check = match r.bound {
                Some(b) if r.passed() => format!("PASS (<= {b})"),
                Some(b) => format!("FAIL (> {b})"),
                None => "-".to_string(),
            };
            writeln!(
                f,
                "{:<16} {:>14.6e} {:>14.6e} {:>10.4}  {check}",
                r.name, r.a, r.b, r.ratio
            )?;
        }
        write!(
            f,
            "overall: {}",
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        b / a
    }
}

/// Ratios `b / a` of every metric, with the configured bounds applied.
pub fn compare_runs(a: &RunMetrics, b: &RunMetrics, bounds: &CompareBounds) -> Comparison {
    let row = |name, x: f64, y: f64, bound| MetricRatio {
        name,
        a: x,
        b: y,
        ratio: ratio(x, y),
        bound,
    };
    Comparison {
        rows: vec![
            row(
                "est_rmse_pos",
                a.est_rmse_pos,
                b.est_rmse_pos,
                Some(bounds.max_est_rmse_pos_ratio),
            ),
            row("est_rmse_q", a.est_rmse_q, b.est_rmse_q, None),
            row("track_rmse_pos", a.track_rmse_pos, b.track_rmse_pos, None),
            row(
                "camera_rmse_pos",
                a.camera_rmse_pos,
                b.camera_rmse_pos,
                None,
            ),
            row(
                "gamma_count",
                a.gamma_count as f64,
                b.gamma_count as f64,
                None,
            ),
            row("wall_time", a.wall_time, b.wall_time, None),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_examples() {
        let a = vec![[0.0, 1.0], [2.0, 3.0]];
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        let b = vec![[1.0, 1.0], [3.0, 3.0]];
        assert_eq!(rmse(&a, &b).unwrap(), 1.0);
        assert!(matches!(rmse(&a, &b[..1]), Err(Error::Shape(_))));
        let c: Vec<Vec<f64>> = vec![vec![0.0], vec![0.0, 1.0]];
        let d: Vec<Vec<f64>> = vec![vec![0.0], vec![0.0]];
        assert!(matches!(rmse(&c, &d), Err(Error::Shape(_))));
    }
}
