//! Suspended-block dynamics.
//!
//! The block hangs from a rigid, massless cable of length `L` attached at the
//! pivot origin (z up). Generalized coordinates:
//!
//! - `q[0]`, `q[1]`: cable angles, a rotation about the pivot x-axis followed by
//!   a rotation about the rotated y-axis. The attachment point sits at
//!   `Rx(q0) Ry(q1) (0, 0, -L)`.
//! - `q[2]`, `q[3]`, `q[4]`: block orientation relative to the cable frame,
//!   `Rx(q2) Ry(q3) Rz(q4)`. `q[4]` spins the block about its own vertical axis.
//!
//! The COG lies a distance `d` below the attachment along the block's vertical
//! axis. The equations of motion `B(q) q'' + C(q, q') q' + g(q) = 0` come from
//! the Lagrangian of this chain; `C` is built from Christoffel symbols of `B`.
//!
//! Everything model-related is written once over a generic dual-number scalar
//! so that the discrete transition and output Jacobians are exact.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Matrix5, SMatrix, SVector, SymmetricEigen, Vector3, Vector5};
use num_dual::{jacobian, Dual, DualNum, DualSVec64};

use crate::frames::Pose;
use crate::{Error, Result};

pub const NQ: usize = 5;
pub const NX: usize = 10;
pub const NY: usize = 7;

/// Condition number above which the inertia matrix counts as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Largest step accepted by [`step`].
pub const MAX_STEP: f64 = 0.1;

pub type StateVector = SVector<f64, NX>;
pub type OutputVector = SVector<f64, NY>;
pub type StateJacobian = SMatrix<f64, NX, NX>;
pub type OutputJacobian = SMatrix<f64, NY, NX>;

/// Scalar usable by the model: `f64` or any (nested) dual number over `f64`.
pub trait Real: DualNum<Primitive = f64> + Copy {}
impl<T: DualNum<Primitive = f64> + Copy> Real for T {}

#[derive(Clone, Debug, PartialEq)]
pub struct PendulumParams {
    pub mass: f64,
    pub cable_length: f64,
    /// Block extents along its x, y and z (vertical) axes.
    pub block_dims: Vector3<f64>,
    /// Distance from the attachment point down to the COG.
    pub cog_offset: f64,
    /// Inertia tensor about the COG, block frame.
    pub inertia: Matrix3<f64>,
    pub gravity: f64,
}

impl Default for PendulumParams {
    /// The 22 kg, 0.8 x 0.6 x 0.2 m block on a 1.215 m cable.
    fn default() -> Self {
        Self::cuboid(22.0, 1.215, Vector3::new(0.8, 0.6, 0.2), 0.1, 9.81)
    }
}

impl PendulumParams {
    /// Uniform-density cuboid.
    pub fn cuboid(
        mass: f64,
        cable_length: f64,
        block_dims: Vector3<f64>,
        cog_offset: f64,
        gravity: f64,
    ) -> Self {
        Self {
            mass,
            cable_length,
            block_dims,
            cog_offset,
            inertia: cuboid_inertia(mass, &block_dims),
            gravity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return bad("mass must be positive");
        }
        if !(self.cable_length > 0.0 && self.cable_length.is_finite()) {
            return bad("cable length must be positive");
        }
        if !(self.gravity > 0.0 && self.gravity.is_finite()) {
            return bad("gravity must be positive");
        }
        if !(self.cog_offset >= 0.0 && self.cog_offset.is_finite()) {
            return bad("COG offset must be non-negative");
        }
        if self.block_dims.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("block dimensions must be positive");
        }
        let asym = (self.inertia - self.inertia.transpose()).abs().max();
        if !(asym <= 1e-12 * self.inertia.abs().max()) {
            return bad("inertia tensor must be symmetric");
        }
        if self.inertia.cholesky().is_none() {
            return bad("inertia tensor must be positive definite");
        }
        Ok(())
    }

    /// Distance from the pivot to the COG at rest.
    pub fn rest_depth(&self) -> f64 {
        self.cable_length + self.cog_offset
    }
}

pub fn cuboid_inertia(mass: f64, dims: &Vector3<f64>) -> Matrix3<f64> {
    let (a2, b2, c2) = (dims.x * dims.x, dims.y * dims.y, dims.z * dims.z);
    Matrix3::from_diagonal(&Vector3::new(b2 + c2, a2 + c2, a2 + b2)) * (mass / 12.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PendulumState {
    /// Generalized coordinates, rad.
    pub q: Vector5<f64>,
    /// Generalized velocities, rad/s.
    pub qdot: Vector5<f64>,
}

impl Default for PendulumState {
    fn default() -> Self {
        Self::at_rest(Vector5::zeros())
    }
}

impl PendulumState {
    pub fn new(q: Vector5<f64>, qdot: Vector5<f64>) -> Self {
        Self { q, qdot }
    }

    pub fn at_rest(q: Vector5<f64>) -> Self {
        Self::new(q, Vector5::zeros())
    }

    pub fn from_vector(x: &StateVector) -> Self {
        Self {
            q: x.fixed_rows::<NQ>(0).into_owned(),
            qdot: x.fixed_rows::<NQ>(NQ).into_owned(),
        }
    }

    pub fn to_vector(&self) -> StateVector {
        let mut x = StateVector::zeros();
        x.fixed_rows_mut::<NQ>(0).copy_from(&self.q);
        x.fixed_rows_mut::<NQ>(NQ).copy_from(&self.qdot);
        x
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).all(|v| v.is_finite())
    }

    /// Both cable angles strictly inside `(-pi/2, pi/2)`.
    pub fn in_envelope(&self) -> bool {
        self.q[0].abs() < FRAC_PI_2 && self.q[1].abs() < FRAC_PI_2
    }

    fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidState(format!(
                "non-finite entries in {:?}",
                self.to_vector().as_slice()
            )))
        }
    }
}

/// `B`, `C` and `g` of the equations of motion at one state.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsTerms {
    pub inertia: Matrix5<f64>,
    pub coriolis: Matrix5<f64>,
    pub gravity: Vector5<f64>,
}

type V3<S> = [S; 3];
type M3<S> = [[S; 3]; 3];
type M5<S> = [[S; NQ]; NQ];

fn c<S: Real>(v: f64) -> S {
    S::from(v)
}

fn rx<S: Real>(a: S) -> M3<S> {
    let (s, co) = a.sin_cos();
    let (o, l) = (c::<S>(0.0), c::<S>(1.0));
    [[l, o, o], [o, co, -s], [o, s, co]]
}

fn ry<S: Real>(a: S) -> M3<S> {
    let (s, co) = a.sin_cos();
    let (o, l) = (c::<S>(0.0), c::<S>(1.0));
    [[co, o, s], [o, l, o], [-s, o, co]]
}

fn rz<S: Real>(a: S) -> M3<S> {
    let (s, co) = a.sin_cos();
    let (o, l) = (c::<S>(0.0), c::<S>(1.0));
    [[co, -s, o], [s, co, o], [o, o, l]]
}

fn mat_mul<S: Real>(a: &M3<S>, b: &M3<S>) -> M3<S> {
    let mut out = [[c::<S>(0.0); 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

fn column<S: Real>(m: &M3<S>, j: usize) -> V3<S> {
    [m[0][j], m[1][j], m[2][j]]
}

fn cross<S: Real>(a: &V3<S>, b: &V3<S>) -> V3<S> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot<S: Real>(a: &V3<S>, b: &V3<S>) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub<S: Real>(a: &V3<S>, b: &V3<S>) -> V3<S> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Forward kinematics of the chain plus the joint axes in the pivot frame.
struct Chain<S> {
    block_rotation: M3<S>,
    axes: [V3<S>; NQ],
    attachment: V3<S>,
    cog: V3<S>,
}

impl<S: Real> Chain<S> {
    fn new(p: &PendulumParams, q: &[S; NQ]) -> Self {
        let r1 = rx(q[0]);
        let r2 = mat_mul(&r1, &ry(q[1]));
        let r3 = mat_mul(&r2, &rx(q[2]));
        let r4 = mat_mul(&r3, &ry(q[3]));
        let rb = mat_mul(&r4, &rz(q[4]));
        let axes = [
            column(&r1, 0),
            column(&r1, 1),
            column(&r2, 0),
            column(&r3, 1),
            column(&r4, 2),
        ];
        let cable_dir = column(&r2, 2);
        let attachment = cable_dir.map(|v| v * (-p.cable_length));
        let down = column(&rb, 2);
        let cog = [0, 1, 2].map(|i| attachment[i] - down[i] * p.cog_offset);
        Self {
            block_rotation: rb,
            axes,
            attachment,
            cog,
        }
    }

    /// Columns of the COG linear-velocity Jacobian.
    fn linear_jacobian(&self) -> [V3<S>; NQ] {
        let zero = [c::<S>(0.0); 3];
        std::array::from_fn(|i| {
            let origin = if i < 2 { &zero } else { &self.attachment };
            cross(&self.axes[i], &sub(&self.cog, origin))
        })
    }
}

fn world_inertia<S: Real>(p: &PendulumParams, r: &M3<S>) -> M3<S> {
    let mut ri = [[c::<S>(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            ri[i][j] = r[i][0] * p.inertia[(0, j)]
                + r[i][1] * p.inertia[(1, j)]
                + r[i][2] * p.inertia[(2, j)];
        }
    }
    let mut out = [[c::<S>(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = ri[i][0] * r[j][0] + ri[i][1] * r[j][1] + ri[i][2] * r[j][2];
        }
    }
    out
}

fn inertia_matrix<S: Real>(p: &PendulumParams, q: &[S; NQ]) -> M5<S> {
    let chain = Chain::new(p, q);
    let jv = chain.linear_jacobian();
    let iw = world_inertia(p, &chain.block_rotation);
    let iw_axes: [V3<S>; NQ] = std::array::from_fn(|j| {
        let a = &chain.axes[j];
        [dot(&iw[0], a), dot(&iw[1], a), dot(&iw[2], a)]
    });
    let mut b = [[c::<S>(0.0); NQ]; NQ];
    for i in 0..NQ {
        for j in i..NQ {
            let v = dot(&jv[i], &jv[j]) * p.mass + dot(&chain.axes[i], &iw_axes[j]);
            b[i][j] = v;
            b[j][i] = v;
        }
    }
    b
}

fn gravity_vector<S: Real>(p: &PendulumParams, q: &[S; NQ]) -> [S; NQ] {
    let chain = Chain::new(p, q);
    let jv = chain.linear_jacobian();
    jv.map(|col| col[2] * (p.mass * p.gravity))
}

/// `dB/dq_k` for every `k`, indexed `[k][i][j]`.
fn inertia_partials<S: Real>(p: &PendulumParams, q: &[S; NQ]) -> [M5<S>; NQ] {
    std::array::from_fn(|k| {
        let qd: [Dual<S>; NQ] =
            std::array::from_fn(|j| Dual::new(q[j], c::<S>(if j == k { 1.0 } else { 0.0 })));
        inertia_matrix(p, &qd).map(|row| row.map(|v| v.eps))
    })
}

/// `C(q, q')` from Christoffel symbols of the first kind.
fn coriolis_matrix<S: Real>(partials: &[M5<S>; NQ], qdot: &[S; NQ]) -> M5<S> {
    let mut cm = [[c::<S>(0.0); NQ]; NQ];
    for i in 0..NQ {
        for j in 0..NQ {
            let mut acc = c::<S>(0.0);
            for k in 0..NQ {
                let gamma = (partials[k][i][j] + partials[j][i][k] - partials[i][j][k]) * 0.5;
                acc += gamma * qdot[k];
            }
            cm[i][j] = acc;
        }
    }
    cm
}

fn condition_number(b: &Matrix5<f64>) -> f64 {
    let eig = SymmetricEigen::new(*b).eigenvalues;
    let max = eig.max();
    let min = eig.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn check_condition<S: Real>(b: &M5<S>) -> Result<()> {
    let re = Matrix5::from_fn(|i, j| b[i][j].re());
    let condition = condition_number(&re);
    if condition.is_finite() && condition <= SINGULAR_CONDITION {
        Ok(())
    } else {
        Err(Error::SingularConfiguration { condition })
    }
}

/// Solve `B x = rhs` for symmetric positive definite `B`.
fn solve_spd<S: Real>(mut b: M5<S>, mut rhs: [S; NQ]) -> [S; NQ] {
    for col in 0..NQ {
        let pivot = b[col][col];
        for row in col + 1..NQ {
            let f = b[row][col] / pivot;
            for k in col..NQ {
                let v = b[col][k];
                b[row][k] -= f * v;
            }
            let v = rhs[col];
            rhs[row] -= f * v;
        }
    }
    let mut x = [c::<S>(0.0); NQ];
    for row in (0..NQ).rev() {
        let mut acc = rhs[row];
        for k in row + 1..NQ {
            acc -= b[row][k] * x[k];
        }
        x[row] = acc / b[row][row];
    }
    x
}

fn accelerations<S: Real>(p: &PendulumParams, q: &[S; NQ], qdot: &[S; NQ]) -> Result<[S; NQ]> {
    let b = inertia_matrix(p, q);
    check_condition(&b)?;
    let partials = inertia_partials(p, q);
    let cm = coriolis_matrix(&partials, qdot);
    let grav = gravity_vector(p, q);
    let rhs: [S; NQ] = std::array::from_fn(|i| {
        let mut acc = grav[i];
        for j in 0..NQ {
            acc += cm[i][j] * qdot[j];
        }
        -acc
    });
    Ok(solve_spd(b, rhs))
}

fn derivative<S: Real>(p: &PendulumParams, x: &[S; NX]) -> Result<[S; NX]> {
    let q: [S; NQ] = std::array::from_fn(|i| x[i]);
    let qdot: [S; NQ] = std::array::from_fn(|i| x[NQ + i]);
    let acc = accelerations(p, &q, &qdot)?;
    Ok(std::array::from_fn(|i| {
        if i < NQ {
            qdot[i]
        } else {
            acc[i - NQ]
        }
    }))
}

fn rk4<S: Real>(p: &PendulumParams, x: &[S; NX], dt: f64) -> Result<[S; NX]> {
    let shifted = |k: &[S; NX], h: f64| -> [S; NX] { std::array::from_fn(|i| x[i] + k[i] * h) };
    let k1 = derivative(p, x)?;
    let k2 = derivative(p, &shifted(&k1, 0.5 * dt))?;
    let k3 = derivative(p, &shifted(&k2, 0.5 * dt))?;
    let k4 = derivative(p, &shifted(&k3, dt))?;
    Ok(std::array::from_fn(|i| {
        x[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0)
    }))
}

fn quat_mul<S: Real>(a: &[S; 4], b: &[S; 4]) -> [S; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

fn axis_quat<S: Real>(axis: usize, angle: S) -> [S; 4] {
    let (s, co) = (angle * 0.5).sin_cos();
    let mut out = [co, c(0.0), c(0.0), c(0.0)];
    out[axis + 1] = s;
    out
}

/// `(tx, ty, tz, qw, qx, qy, qz)` of the COG frame, canonical `qw >= 0`.
fn output<S: Real>(p: &PendulumParams, q: &[S; NQ]) -> [S; NY] {
    let chain = Chain::new(p, q);
    let mut rot = axis_quat(0, q[0]);
    for (axis, angle) in [(1, q[1]), (0, q[2]), (1, q[3]), (2, q[4])] {
        rot = quat_mul(&rot, &axis_quat(axis, angle));
    }
    if rot[0].re() < 0.0 {
        rot = rot.map(|v| -v);
    }
    [
        chain.cog[0],
        chain.cog[1],
        chain.cog[2],
        rot[0],
        rot[1],
        rot[2],
        rot[3],
    ]
}

fn q_array(state: &PendulumState) -> [f64; NQ] {
    std::array::from_fn(|i| state.q[i])
}

fn x_array(state: &PendulumState) -> [f64; NX] {
    std::array::from_fn(|i| state.to_vector()[i])
}

/// Inertia, Coriolis and gravity terms at `state`.
pub fn dynamics_terms(params: &PendulumParams, state: &PendulumState) -> Result<DynamicsTerms> {
    state.check_finite()?;
    let q = q_array(state);
    let b = inertia_matrix(params, &q);
    check_condition(&b)?;
    let qdot: [f64; NQ] = std::array::from_fn(|i| state.qdot[i]);
    let cm = coriolis_matrix(&inertia_partials(params, &q), &qdot);
    Ok(DynamicsTerms {
        inertia: Matrix5::from_fn(|i, j| b[i][j]),
        coriolis: Matrix5::from_fn(|i, j| cm[i][j]),
        gravity: Vector5::from(gravity_vector(params, &q)),
    })
}

/// `x' = [q'; -B^-1 (C q' + g)]`.
pub fn continuous_dynamics(params: &PendulumParams, state: &PendulumState) -> Result<StateVector> {
    state.check_finite()?;
    Ok(StateVector::from(derivative(params, &x_array(state))?))
}

/// One fixed-step RK4 step of length `dt`.
pub fn step(params: &PendulumParams, state: &PendulumState, dt: f64) -> Result<PendulumState> {
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(Error::InvalidParameter(format!(
            "step size {dt} outside (0, {MAX_STEP}]"
        )));
    }
    state.check_finite()?;
    let next = PendulumState::from_vector(&StateVector::from(rk4(params, &x_array(state), dt)?));
    next.check_finite()?;
    if !next.in_envelope() {
        return Err(Error::EnvelopeExceeded { state: next });
    }
    Ok(next)
}

/// Exact Jacobian of [`step`] with respect to the state (dual-number forward mode).
pub fn state_jacobian(
    params: &PendulumParams,
    state: &PendulumState,
    dt: f64,
) -> Result<StateJacobian> {
    state.check_finite()?;
    let (_, jac) = jacobian(
        |x: SVector<DualSVec64<NX>, NX>| -> Result<SVector<DualSVec64<NX>, NX>> {
            let arr: [DualSVec64<NX>; NX] = std::array::from_fn(|i| x[i]);
            Ok(SVector::from(rk4(params, &arr, dt)?))
        },
        &state.to_vector(),
    )?;
    Ok(jac)
}

/// Pose of the COG frame in the pivot frame.
pub fn observe_pose(params: &PendulumParams, state: &PendulumState) -> Result<Pose> {
    Ok(Pose::from_array(observe_vector(params, state)?.into()))
}

/// Raw output vector `(tx, ty, tz, qw, qx, qy, qz)`.
pub fn observe_vector(params: &PendulumParams, state: &PendulumState) -> Result<OutputVector> {
    state.check_finite()?;
    Ok(OutputVector::from(output(params, &q_array(state))))
}

/// Jacobian of the output vector; the velocity columns are zero.
pub fn output_jacobian(params: &PendulumParams, state: &PendulumState) -> Result<OutputJacobian> {
    state.check_finite()?;
    let (_, jq) = jacobian(
        |q: SVector<DualSVec64<NQ>, NQ>| -> SVector<DualSVec64<NQ>, NY> {
            let arr: [DualSVec64<NQ>; NQ] = std::array::from_fn(|i| q[i]);
            SVector::from(output(params, &arr))
        },
        &state.q,
    );
    let mut out = OutputJacobian::zeros();
    out.fixed_columns_mut::<NQ>(0).copy_from(&jq);
    Ok(out)
}

/// Kinetic plus gravitational potential energy, zero at the hanging rest state.
pub fn total_energy(params: &PendulumParams, state: &PendulumState) -> Result<f64> {
    state.check_finite()?;
    let q = q_array(state);
    let b = Matrix5::from_fn(|i, j| inertia_matrix(params, &q)[i][j]);
    let kinetic = 0.5 * state.qdot.dot(&(b * state.qdot));
    let cog = Chain::new(params, &q).cog;
    let potential = params.mass * params.gravity * (cog[2] + params.rest_depth());
    Ok(kinetic + potential)
}

/// Invert the output map: coordinates whose COG pose best matches `pose`, at rest.
///
/// The attachment point is recovered from the COG and the block's vertical
/// axis; the cable direction is renormalized so noisy poses still map to a
/// valid configuration.
pub fn state_from_pose(params: &PendulumParams, pose: &Pose) -> PendulumState {
    let r_block = pose.rotation_matrix();
    let attachment = pose.translation() + r_block.column(2) * params.cog_offset;
    let u = attachment.normalize();
    // u = Rx(q0) Ry(q1) (0, 0, -1) = (-sin q1, sin q0 cos q1, -cos q0 cos q1)
    let q1 = (-u.x).clamp(-1.0, 1.0).asin();
    let q0 = u.y.atan2(-u.z);
    let r_cable = rx(q0);
    let r_cable = mat_mul(&r_cable, &ry(q1));
    let r_cable = Matrix3::from_fn(|i, j| r_cable[i][j]);
    let rel = r_cable.transpose() * r_block;
    // rel = Rx(a) Ry(b) Rz(c)
    let b = rel[(0, 2)].clamp(-1.0, 1.0).asin();
    let a = (-rel[(1, 2)]).atan2(rel[(2, 2)]);
    let cc = (-rel[(0, 1)]).atan2(rel[(0, 0)]);
    PendulumState::at_rest(Vector5::new(q0, q1, a, b, cc))
}
