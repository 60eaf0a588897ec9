//! Rigid transforms and the frame chains used to turn a block observation into
//! an end-effector reference.
//!
//! A [`Pose`] `T^a_b` maps coordinates expressed in frame `b` into frame `a`.
//! Composition follows homogeneous-matrix order: `compose(T^a_b, T^b_c) = T^a_c`.
//! Quaternions are stored `(w, x, y, z)` with the canonical sign `w >= 0`.

use std::fmt;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3, Vector6};

/// Rigid transform: unit quaternion rotation plus translation in metres.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [tx, ty, tz, qw, qx, qy, qz] = self.to_array();
        write!(
            f,
            "Pose(t: [{tx:.4}, {ty:.4}, {tz:.4}], q: [{qw:.4}, {qx:.4}, {qy:.4}, {qz:.4}])"
        )
    }
}

/// Flip a quaternion onto the `w >= 0` hemisphere.
pub fn canonical(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    if q.w < 0.0 {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Build from a translation and a (not necessarily normalized) quaternion.
    pub fn new(translation: Vector3<f64>, rotation: Quaternion<f64>) -> Self {
        Self {
            rotation: canonical(UnitQuaternion::from_quaternion(rotation)),
            translation,
        }
    }

    pub fn from_parts(translation: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        Self {
            rotation: canonical(rotation),
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::from_parts(translation, UnitQuaternion::identity())
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Self::from_parts(Vector3::zeros(), rotation)
    }

    /// Parse the 7-number layout `(tx, ty, tz, qw, qx, qy, qz)`.
    pub fn from_array(v: [f64; 7]) -> Self {
        Self::new(
            Vector3::new(v[0], v[1], v[2]),
            Quaternion::new(v[3], v[4], v[5], v[6]),
        )
    }

    /// Serialize as `(tx, ty, tz, qw, qx, qy, qz)`.
    pub fn to_array(&self) -> [f64; 7] {
        let t = &self.translation;
        let q = self.rotation.quaternion();
        [t.x, t.y, t.z, q.w, q.i, q.j, q.k]
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Angle of the relative rotation between two poses, in `[0, pi]`.
    pub fn angle_to(&self, other: &Pose) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// `a` followed by `b`: the homogeneous product `a * b`.
pub fn compose(a: &Pose, b: &Pose) -> Pose {
    Pose::from_parts(
        a.translation + a.rotation * b.translation,
        a.rotation * b.rotation,
    )
}

pub fn invert(t: &Pose) -> Pose {
    let r_inv = t.rotation.inverse();
    Pose::from_parts(-(r_inv * t.translation), r_inv)
}

/// `T^base_block = T^base_camera * T^camera_board * T^board_block`.
pub fn block_pose_in_base(
    t_base_camera: &Pose,
    t_camera_board: &Pose,
    t_board_block: &Pose,
) -> Pose {
    compose(&compose(t_base_camera, t_camera_board), t_board_block)
}

/// `T^base_des = T^base_block * T^block_des`.
pub fn desired_pose_in_base(t_base_block: &Pose, t_block_des: &Pose) -> Pose {
    compose(t_base_block, t_block_des)
}

/// Task-space error `x_d - x_e` as `(dp, do)`.
///
/// The orientation part is `2 * vec(q_d * q_e^-1)` on the `w >= 0` hemisphere,
/// i.e. the world-frame rotation vector from current to desired for small angles.
pub fn pose_error(desired: &Pose, current: &Pose) -> Vector6<f64> {
    let dp = desired.translation - current.translation;
    // q_d * conj(q_e), expanded so that equal inputs give an exact zero
    let (wd, vd) = (desired.rotation.w, desired.rotation.imag());
    let (we, ve) = (current.rotation.w, current.rotation.imag());
    let scalar = wd * we + vd.dot(&ve);
    let mut v = vd * we - ve * wd - vd.cross(&ve);
    if scalar < 0.0 {
        v = -v;
    }
    let v = v * 2.0;
    Vector6::new(dp.x, dp.y, dp.z, v.x, v.y, v.z)
}
