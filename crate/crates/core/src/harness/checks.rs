//! Pass/fail checks applied to a finished run.

use std::fmt;

use super::config::ScenarioConfig;
use super::metrics::RunMetrics;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {}", self.name, self.detail)
    }
}

/// Structural bookkeeping, plus the estimate-below-camera-noise bound when the
/// filter runs on a noisy camera.
pub fn check_run(cfg: &ScenarioConfig, m: &RunMetrics) -> Vec<Check> {
    let mut checks = Vec::new();
    let values = [
        m.est_rmse_pos,
        m.est_rmse_q,
        m.track_rmse_pos,
        m.camera_rmse_pos,
    ];
    checks.push(Check {
        name: "finite-metrics",
        passed: values.iter().all(|v| v.is_finite() && *v >= 0.0),
        detail: format!("{values:?}"),
    });
    checks.push(Check {
        name: "gamma-count",
        passed: m.gamma_count <= m.scheduled_samples,
        detail: format!(
            "{} delivered of {} scheduled",
            m.gamma_count, m.scheduled_samples
        ),
    });
    if cfg.ekf.enabled {
        let expected = cfg.duration * cfg.ekf.rate;
        checks.push(Check {
            name: "ekf-ticks",
            passed: (m.ekf_ticks as f64 - expected).abs() <= 1.0,
            detail: format!("{} ticks, expected {expected}", m.ekf_ticks),
        });
        checks.push(Check {
            name: "corrections",
            passed: m.corrections == m.gamma_count,
            detail: format!("{} corrections, {} delivered", m.corrections, m.gamma_count),
        });
        if m.camera_rmse_pos > 0.0 {
            checks.push(Check {
                name: "below-noise-floor",
                passed: m.est_rmse_pos < m.camera_rmse_pos,
                detail: format!(
                    "estimate {:.6e} m vs camera {:.6e} m",
                    m.est_rmse_pos, m.camera_rmse_pos
                ),
            });
        }
    }
    checks
}
