//! Dynamics checks against independent oracles: a symbolic Lagrangian
//! (frozen in `fixtures/lagrangian_oracle.json`, produced by
//! `oracles/lagrangian_oracle.py`), explicit homogeneous-transform forward
//! kinematics, central finite differences and the energy functional.

use std::f64::consts::PI;

use blocktrack::pendulum::{
    continuous_dynamics, dynamics_terms, observe_pose, observe_vector, output_jacobian,
    state_jacobian, step, total_energy, PendulumParams, PendulumState, StateJacobian, NQ, NX,
};
use nalgebra::{Matrix3, Matrix4, Matrix5, SymmetricEigen, Vector3, Vector4, Vector5};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn fixture() -> Value {
    serde_json::from_str(include_str!("fixtures/lagrangian_oracle.json")).unwrap()
}

fn matrix5(v: &Value) -> Matrix5<f64> {
    Matrix5::from_fn(|i, j| v[i][j].as_f64().unwrap())
}

fn vector5(v: &Value) -> Vector5<f64> {
    Vector5::from_fn(|i, _| v[i].as_f64().unwrap())
}

fn random_state(rng: &mut impl Rng) -> PendulumState {
    PendulumState::new(
        Vector5::new(
            rng.random_range(-0.6..0.6),
            rng.random_range(-0.6..0.6),
            rng.random_range(-PI..PI),
            rng.random_range(-1.2..1.2),
            rng.random_range(-PI..PI),
        ),
        Vector5::from_fn(|_, _| rng.random_range(-1.5..1.5)),
    )
}

fn homogeneous(rot: Matrix3<f64>, t: Vector3<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
    m
}

fn axis_rotation(axis: Vector3<f64>, angle: f64) -> Matrix4<f64> {
    let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
    homogeneous(r.into_inner(), Vector3::zeros())
}

/// COG position by multiplying the 4x4 transforms of the chain one by one.
fn chain_cog(p: &PendulumParams, q: &Vector5<f64>) -> Vector3<f64> {
    let t = axis_rotation(Vector3::x(), q[0])
        * axis_rotation(Vector3::y(), q[1])
        * homogeneous(Matrix3::identity(), Vector3::new(0.0, 0.0, -p.cable_length))
        * axis_rotation(Vector3::x(), q[2])
        * axis_rotation(Vector3::y(), q[3])
        * axis_rotation(Vector3::z(), q[4])
        * homogeneous(Matrix3::identity(), Vector3::new(0.0, 0.0, -p.cog_offset));
    (t * Vector4::new(0.0, 0.0, 0.0, 1.0)).xyz()
}

#[test]
fn inertia_matches_symbolic_lagrangian_at_rest() {
    let fx = fixture();
    let b = dynamics_terms(&PendulumParams::default(), &PendulumState::default())
        .unwrap()
        .inertia;
    let expected = matrix5(&fx["mass_matrix_at_zero"]);
    assert!((b - expected).abs().max() < 1e-12, "{b} vs {expected}");
}

#[test]
fn dynamics_match_symbolic_lagrangian_at_probe() {
    let fx = fixture();
    let p = PendulumParams::default();
    let s = PendulumState::new(vector5(&fx["q_probe"]), vector5(&fx["qd_probe"]));
    let terms = dynamics_terms(&p, &s).unwrap();
    assert!(
        (terms.inertia - matrix5(&fx["mass_matrix_at_probe"]))
            .abs()
            .max()
            < 1e-12
    );
    assert!(
        (terms.gravity - vector5(&fx["gravity_at_probe"]))
            .abs()
            .max()
            < 1e-11
    );
    let f = continuous_dynamics(&p, &s).unwrap();
    let acc = f.fixed_rows::<NQ>(NQ).into_owned();
    let expected = vector5(&fx["acceleration_at_probe"]);
    assert!((acc - expected).abs().max() < 1e-11, "{acc} vs {expected}");
    let e = total_energy(&p, &s).unwrap();
    assert!((e - fx["energy_at_probe"].as_f64().unwrap()).abs() < 1e-11);
}

#[test]
fn potential_matches_hand_and_symbolic_values() {
    let p = PendulumParams::default();
    let s = PendulumState::at_rest(Vector5::new(0.2, 0.0, 0.0, 0.0, 0.0));
    let e = total_energy(&p, &s).unwrap();
    let hand = 22.0 * 9.81 * 1.315 * (1.0 - 0.2f64.cos());
    assert!((e - hand).abs() < 1e-12);
    assert!((e - fixture()["potential_q1_0p2"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn inertia_positive_definite_on_envelope() {
    let p = PendulumParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = f64::INFINITY;
    for _ in 0..100_000 {
        let s = random_state(&mut rng);
        let b = dynamics_terms(&p, &s).unwrap().inertia;
        worst = worst.min(SymmetricEigen::new(b).eigenvalues.min());
    }
    assert!(worst > 0.0, "min eigenvalue {worst}");
}

#[test]
fn passivity_identity_along_trajectories() {
    let p = PendulumParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    // Fourth-order central difference of B along q' for the time derivative.
    let h = 1e-4;
    for _ in 0..20 {
        let mut s = random_state(&mut rng);
        for _ in 0..50 {
            let b_at = |k: f64| {
                dynamics_terms(&p, &PendulumState::at_rest(s.q + s.qdot * (k * h)))
                    .unwrap()
                    .inertia
            };
            let b_dot = (b_at(-2.0) - b_at(-1.0) * 8.0 + b_at(1.0) * 8.0 - b_at(2.0)) / (12.0 * h);
            let c = dynamics_terms(&p, &s).unwrap().coriolis;
            let n = b_dot - c * 2.0;
            for _ in 0..5 {
                let x = Vector5::from_fn(|_, _| rng.random_range(-1.0..1.0));
                let v = x.dot(&(n * x));
                assert!(v.abs() < 1e-8, "x^T (B' - 2C) x = {v}");
            }
            s = step(&p, &s, 1e-2).unwrap();
        }
    }
}

#[test]
fn cog_position_matches_transform_chain() {
    let p = PendulumParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..1000 {
        let s = random_state(&mut rng);
        let pose = observe_pose(&p, &s).unwrap();
        let expected = chain_cog(&p, &s.q);
        assert!((pose.translation() - expected).norm() < 1e-12);
        let chain_rot = nalgebra::Rotation3::from_axis_angle(&Vector3::x_axis(), s.q[0])
            * nalgebra::Rotation3::from_axis_angle(&Vector3::y_axis(), s.q[1])
            * nalgebra::Rotation3::from_axis_angle(&Vector3::x_axis(), s.q[2])
            * nalgebra::Rotation3::from_axis_angle(&Vector3::y_axis(), s.q[3])
            * nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), s.q[4]);
        assert!(
            (pose.rotation_matrix() - chain_rot.into_inner())
                .abs()
                .max()
                < 1e-12
        );
        let y = observe_vector(&p, &s).unwrap();
        let qn = y.fixed_rows::<4>(3).norm();
        assert!((qn - 1.0).abs() < 1e-12);
        assert!(y[3] >= 0.0);
    }
}

fn fd_state_jacobian(p: &PendulumParams, s: &PendulumState, dt: f64, h: f64) -> StateJacobian {
    let x = s.to_vector();
    let mut jac = StateJacobian::zeros();
    for j in 0..NX {
        let mut xp = x;
        let mut xm = x;
        xp[j] += h;
        xm[j] -= h;
        let fp = step(p, &PendulumState::from_vector(&xp), dt)
            .unwrap()
            .to_vector();
        let fm = step(p, &PendulumState::from_vector(&xm), dt)
            .unwrap()
            .to_vector();
        jac.set_column(j, &((fp - fm) / (2.0 * h)));
    }
    jac
}

#[test]
fn jacobians_match_central_differences() {
    let p = PendulumParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let h = 1e-6;
    let mut worst_a: f64 = 0.0;
    let mut worst_c: f64 = 0.0;
    for _ in 0..200 {
        let s = random_state(&mut rng);
        let a = state_jacobian(&p, &s, 1e-3).unwrap();
        let fd = fd_state_jacobian(&p, &s, 1e-3, h);
        worst_a = worst_a.max((a - fd).abs().max() / a.norm());

        let c = output_jacobian(&p, &s).unwrap();
        let mut fd_c = c * 0.0;
        for j in 0..NQ {
            let mut sp = s;
            let mut sm = s;
            sp.q[j] += h;
            sm.q[j] -= h;
            let d =
                (observe_vector(&p, &sp).unwrap() - observe_vector(&p, &sm).unwrap()) / (2.0 * h);
            fd_c.set_column(j, &d);
        }
        worst_c = worst_c.max((c - fd_c).abs().max() / c.norm());
    }
    assert!(worst_a < 1e-4, "state Jacobian rel err {worst_a}");
    assert!(worst_c < 1e-4, "output Jacobian rel err {worst_c}");
}

#[test]
fn rk4_self_convergence_is_fourth_order() {
    let p = PendulumParams::default();
    let start = PendulumState::new(
        Vector5::new(0.2, 0.1, 0.05, -0.05, 0.1),
        Vector5::new(0.0, 0.3, 0.0, 0.2, 0.5),
    );
    let integrate = |dt: f64, steps: usize| {
        let mut s = start;
        for _ in 0..steps {
            s = step(&p, &s, dt).unwrap();
        }
        s.to_vector()
    };
    let reference = integrate(1e-5, 200_000);
    let coarse = (integrate(1e-3, 2_000) - reference).norm();
    let fine = (integrate(5e-4, 4_000) - reference).norm();
    let ratio = coarse / fine;
    assert!(
        (13.0..19.0).contains(&ratio),
        "error ratio {ratio} ({coarse:e} / {fine:e})"
    );
}

#[test]
fn step_is_bit_deterministic() {
    let p = PendulumParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..100 {
        let s = random_state(&mut rng);
        let a = step(&p, &s, 2e-3).unwrap();
        let b = step(&p, &s, 2e-3).unwrap();
        assert_eq!(a.to_vector().as_slice(), b.to_vector().as_slice());
        assert_eq!(
            state_jacobian(&p, &s, 2e-3).unwrap(),
            state_jacobian(&p, &s, 2e-3).unwrap()
        );
    }
}
