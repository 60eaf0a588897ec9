//! Eye-to-hand calibration: solve `A_i X = X B_i` for the fixed transform `X`.
//!
//! Rotation first, from the quaternion-linear form
//! `(L(q_A) - R(q_B)) q_X = 0` stacked over all pairs and solved by SVD;
//! then translation by least squares on
//! `(R_A - I) t_X = R_X t_B - t_A`.

use std::io::Write;

use nalgebra::{DMatrix, DVector, Matrix4, Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::camera::random_axis;
use crate::frames::{compose, invert, Pose};
use crate::{Error, Result};

/// Relative singular value below which the motions do not pin down `X`.
pub const DEGENERATE_TOLERANCE: f64 = 1e-8;

/// Range of rotation angles of generated robot motions, rad.
pub const MOTION_ANGLE_RANGE: (f64, f64) = (0.2, 1.5);

/// One relative motion observed on both sides of the unknown transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionPair {
    /// Camera-side motion.
    pub a: Pose,
    /// Robot-side motion.
    pub b: Pose,
}

impl MotionPair {
    /// Rotation angle of `A X (X B)^-1`, zero for a perfectly consistent pair.
    pub fn residual_angle(&self, x: &Pose) -> f64 {
        let lhs = compose(&self.a, x);
        let rhs = compose(x, &self.b);
        lhs.angle_to(&rhs)
    }
}

fn perturb<R: Rng>(pose: &Pose, rot_noise: f64, trans_noise: f64, rng: &mut R) -> Pose {
    let mut noise = Pose::identity();
    if rot_noise > 0.0 || trans_noise > 0.0 {
        let axis = random_axis(rng);
        let angle = if rot_noise > 0.0 {
            Normal::new(0.0, rot_noise).expect("finite std").sample(rng)
        } else {
            0.0
        };
        let t = if trans_noise > 0.0 {
            let n = Normal::new(0.0, trans_noise).expect("finite std");
            Vector3::from_fn(|_, _| n.sample(rng))
        } else {
            Vector3::zeros()
        };
        noise = Pose::from_parts(t, UnitQuaternion::from_axis_angle(&axis, angle));
    }
    compose(pose, &noise)
}

/// Random robot motions `B_i` and the matching camera motions `A_i = X B_i X^-1`,
/// each side then perturbed by an independent random rotation and translation.
pub fn generate_motions(
    x_true: &Pose,
    n: usize,
    rot_noise: f64,
    trans_noise: f64,
    seed: u64,
) -> Vec<MotionPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_inv = invert(x_true);
    (0..n)
        .map(|_| {
            let axis = random_axis(&mut rng);
            let angle = rng.random_range(MOTION_ANGLE_RANGE.0..MOTION_ANGLE_RANGE.1);
            let t = Vector3::from_fn(|_, _| rng.random_range(-0.5..0.5));
            let b = Pose::from_parts(t, UnitQuaternion::from_axis_angle(&axis, angle));
            let a = compose(&compose(x_true, &b), &x_inv);
            MotionPair {
                a: perturb(&a, rot_noise, trans_noise, &mut rng),
                b: perturb(&b, rot_noise, trans_noise, &mut rng),
            }
        })
        .collect()
}

fn left_matrix(q: &Quaternion<f64>) -> Matrix4<f64> {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    Matrix4::new(
        w, -x, -y, -z, //
        x, w, -z, y, //
        y, z, w, -x, //
        z, -y, x, w,
    )
}

fn right_matrix(q: &Quaternion<f64>) -> Matrix4<f64> {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    Matrix4::new(
        w, -x, -y, -z, //
        x, w, z, -y, //
        y, -z, w, x, //
        z, y, -x, w,
    )
}

fn solve_rotation(pairs: &[MotionPair]) -> Result<UnitQuaternion<f64>> {
    let mut m = DMatrix::<f64>::zeros(4 * pairs.len(), 4);
    for (i, p) in pairs.iter().enumerate() {
        let qa = p.a.rotation().quaternion();
        let mut qb = *p.b.rotation().quaternion();
        // A and B share their rotation angle, so their scalar parts agree in sign
        if qa.w * qb.w < 0.0 {
            qb = -qb;
        }
        let block = left_matrix(qa) - right_matrix(&qb);
        m.view_mut((4 * i, 0), (4, 4)).copy_from(&block);
    }
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let largest = svd.singular_values[order[3]];
    let second = svd.singular_values[order[1]];
    if !(largest > 0.0) || second / largest < DEGENERATE_TOLERANCE {
        return Err(Error::DegenerateMotion(format!(
            "rotation axes do not constrain X (singular value ratio {:.3e})",
            second / largest
        )));
    }
    let v = v_t.row(order[0]);
    Ok(UnitQuaternion::from_quaternion(Quaternion::new(
        v[0], v[1], v[2], v[3],
    )))
}

fn solve_translation(pairs: &[MotionPair], rotation: &UnitQuaternion<f64>) -> Result<Vector3<f64>> {
    let n = pairs.len();
    let mut lhs = DMatrix::<f64>::zeros(3 * n, 3);
    let mut rhs = DVector::<f64>::zeros(3 * n);
    for (i, p) in pairs.iter().enumerate() {
        let ra = p.a.rotation_matrix() - nalgebra::Matrix3::identity();
        lhs.view_mut((3 * i, 0), (3, 3)).copy_from(&ra);
        let r = rotation * p.b.translation() - p.a.translation();
        rhs.rows_mut(3 * i, 3).copy_from(&r);
    }
    let svd = lhs.svd(true, true);
    let smallest = svd.singular_values.min();
    let largest = svd.singular_values.max();
    if !(largest > 0.0) || smallest / largest < DEGENERATE_TOLERANCE {
        return Err(Error::DegenerateMotion(format!(
            "translation system is singular (singular value ratio {:.3e})",
            smallest / largest
        )));
    }
    let t = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::DegenerateMotion(e.to_string()))?;
    Ok(Vector3::new(t[0], t[1], t[2]))
}

/// Best-fit `X` for a set of motion pairs.
pub fn solve_ax_xb(pairs: &[MotionPair]) -> Result<Pose> {
    if pairs.len() < 2 {
        return Err(Error::Underdetermined(format!(
            "need at least 2 motion pairs, got {}",
            pairs.len()
        )));
    }
    let rotation = solve_rotation(pairs)?;
    let translation = solve_translation(pairs, &rotation)?;
    Ok(Pose::from_parts(translation, rotation))
}

/// Rotation angle and translation distance between two transforms.
pub fn pose_distance(estimate: &Pose, truth: &Pose) -> (f64, f64) {
    (
        estimate.angle_to(truth),
        (estimate.translation() - truth.translation()).norm(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub estimate: Pose,
    pub rot_err: f64,
    pub trans_err: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub x_true: Pose,
    pub max_n: usize,
    pub rot_noise: f64,
    pub trans_noise: f64,
    pub seed: u64,
}

/// Solve on the first `n` pairs for `n = 2..=max_n` of one generated set.
pub fn convergence_study(cfg: &StudyConfig) -> Result<Vec<ConvergenceRow>> {
    if cfg.max_n < 3 {
        return Err(Error::InvalidParameter(format!(
            "convergence study needs max_n >= 3, got {}",
            cfg.max_n
        )));
    }
    let pairs = generate_motions(
        &cfg.x_true,
        cfg.max_n,
        cfg.rot_noise,
        cfg.trans_noise,
        cfg.seed,
    );
    (2..=cfg.max_n)
        .map(|n| {
            let estimate = solve_ax_xb(&pairs[..n])?;
            let (rot_err, trans_err) = pose_distance(&estimate, &cfg.x_true);
            Ok(ConvergenceRow {
                n,
                estimate,
                rot_err,
                trans_err,
            })
        })
        .collect()
}

pub const STUDY_CSV_HEADER: &str =
    "n,est_tx,est_ty,est_tz,est_qw,est_qx,est_qy,est_qz,rot_err_rad,trans_err_m";

pub fn write_study_csv<W: Write>(mut w: W, rows: &[ConvergenceRow]) -> Result<()> {
    writeln!(w, "{STUDY_CSV_HEADER}")?;
    for r in rows {
        let est: Vec<String> = r
            .estimate
            .to_array()
            .iter()
            .map(|v| format!("{v:.12}"))
            .collect();
        writeln!(
            w,
            "{},{},{:.12e},{:.12e}",
            r.n,
            est.join(","),
            r.rot_err,
            r.trans_err
        )?;
    }
    Ok(())
}
