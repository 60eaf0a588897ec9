//! Task-space PD law and a Cartesian rigid-body plant standing in for a
//! gravity-compensated arm.
//!
//! The plant is a free rigid body with a scalar mass and an isotropic inertia.
//! Velocities are expressed in the base frame: linear first, then angular.

use nalgebra::{Matrix6, UnitQuaternion, Vector3, Vector6};

use crate::frames::{pose_error, Pose};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerGains {
    pub kp: Matrix6<f64>,
    pub kd: Matrix6<f64>,
}

impl Default for ControllerGains {
    /// Critically damped for a unit-mass plant, `omega_n = 20 rad/s`.
    fn default() -> Self {
        Self::isotropic(400.0, 40.0)
    }
}

impl ControllerGains {
    pub fn isotropic(kp: f64, kd: f64) -> Self {
        Self {
            kp: Matrix6::identity() * kp,
            kd: Matrix6::identity() * kd,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, m) in [("kp", &self.kp), ("kd", &self.kd)] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
            if (m - m.transpose()).abs().max() > 1e-12 {
                return Err(Error::InvalidParameter(format!("{name} must be symmetric")));
            }
            if m.cholesky().is_none() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive definite"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EffectorState {
    pub pose: Pose,
    pub velocity: Vector6<f64>,
}

impl EffectorState {
    pub fn at_rest(pose: Pose) -> Self {
        Self {
            pose,
            velocity: Vector6::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.pose.is_finite() && self.velocity.iter().all(|v| v.is_finite())
    }
}

/// `K_P (x_d - x_e) - K_D v`.
pub fn control_wrench(
    gains: &ControllerGains,
    desired: &Pose,
    state: &EffectorState,
) -> Vector6<f64> {
    gains.kp * pose_error(desired, &state.pose) - gains.kd * state.velocity
}

/// Mass and isotropic rotational inertia of the Cartesian plant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlantParams {
    pub mass: f64,
    pub inertia: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            inertia: 1.0,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0
            && self.mass.is_finite()
            && self.inertia > 0.0
            && self.inertia.is_finite())
        {
            return Err(Error::InvalidParameter(
                "plant mass and inertia must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One semi-implicit Euler step: velocities first, then the pose with the new
/// velocities. Orientation advances by the exponential of `omega * dt`.
pub fn plant_step(
    state: &EffectorState,
    wrench: &Vector6<f64>,
    plant: &PlantParams,
    dt: f64,
) -> Result<EffectorState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "time step {dt} must be positive"
        )));
    }
    plant.validate()?;
    let force = wrench.fixed_rows::<3>(0);
    let torque = wrench.fixed_rows::<3>(3);
    let v = state.velocity.fixed_rows::<3>(0) + force * (dt / plant.mass);
    let w = state.velocity.fixed_rows::<3>(3) + torque * (dt / plant.inertia);
    if v.iter().chain(w.iter()).any(|x| !x.is_finite()) {
        return Err(Error::DivergedPlant);
    }
    let translation = state.pose.translation() + v * dt;
    let mut rotation =
        UnitQuaternion::from_scaled_axis(Vector3::from(w * dt)) * state.pose.rotation();
    rotation.renormalize();
    let next = EffectorState {
        pose: Pose::from_parts(translation, rotation),
        velocity: Vector6::new(v.x, v.y, v.z, w.x, w.y, w.z),
    };
    if !next.is_finite() {
        return Err(Error::DivergedPlant);
    }
    Ok(next)
}
