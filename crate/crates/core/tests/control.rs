//! PD law on the Cartesian plant: open-loop kinematics, closed-loop decay,
//! spectrum of the linearized loop, linearity and periodic tracking.

use blocktrack::control::{
    control_wrench, plant_step, ControllerGains, EffectorState, PlantParams,
};
use blocktrack::frames::{pose_error, Pose};
use nalgebra::{DMatrix, Matrix6, UnitQuaternion, Vector3, Vector6};

const DT: f64 = 1e-3;

fn closed_loop_step(gains: &ControllerGains, desired: &Pose, s: &EffectorState) -> EffectorState {
    let w = control_wrench(gains, desired, s);
    plant_step(s, &w, &PlantParams::default(), DT).unwrap()
}

#[test]
fn constant_force_double_integrator() {
    let mut s = EffectorState::default();
    let force = Vector6::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..1000 {
        s = plant_step(&s, &force, &PlantParams::default(), DT).unwrap();
    }
    assert!((s.velocity - force).norm() < 1e-12);
    let x = s.pose.translation().x;
    assert!((x / 0.5 - 1.0).abs() < 2e-3, "x = {x}");
    assert_eq!(s.pose.translation().y, 0.0);
}

#[test]
fn constant_torque_spins_about_its_axis() {
    let mut s = EffectorState::default();
    let torque = Vector6::new(0.0, 0.0, 0.0, 0.0, 0.0, 2.0);
    let plant = PlantParams {
        mass: 1.0,
        inertia: 2.0,
    };
    for _ in 0..1000 {
        s = plant_step(&s, &torque, &plant, DT).unwrap();
    }
    let expected = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.5005);
    assert!(s.pose.rotation().angle_to(&expected) < 1e-9);
}

#[test]
fn setpoint_regulation_decays_monotonically() {
    let gains = ControllerGains::default();
    let desired = Pose::from_parts(
        Vector3::new(0.1, -0.05, 0.2),
        UnitQuaternion::from_euler_angles(0.2, -0.1, 0.3),
    );
    let mut s = EffectorState::default();
    let mut errors = Vec::new();
    for _ in 0..3000 {
        errors.push((desired.translation() - s.pose.translation()).norm());
        s = closed_loop_step(&gains, &desired, &s);
    }
    // Critically damped: no overshoot, so the decay is monotone from the start.
    assert!(errors.windows(2).all(|w| w[1] <= w[0]));
    assert!(
        *errors.last().unwrap() < 1e-4,
        "final error {}",
        errors.last().unwrap()
    );
    assert!(s.pose.angle_to(&desired) < 1e-4);
}

#[test]
fn linearized_loop_is_stable() {
    let gains = ControllerGains::default();
    let desired = Pose::from_array([0.3, 0.1, 0.5, 0.9, 0.1, -0.2, 0.3]);
    // Error coordinates: (position, rotation vector, linear and angular velocity).
    let perturbed = |d: &Vector6<f64>, v: &Vector6<f64>| EffectorState {
        pose: Pose::from_parts(
            desired.translation() + Vector3::new(d[0], d[1], d[2]),
            UnitQuaternion::from_scaled_axis(Vector3::new(d[3], d[4], d[5])) * desired.rotation(),
        ),
        velocity: *v,
    };
    let coords = |s: &EffectorState| {
        let e = -pose_error(&desired, &s.pose);
        let mut x = DMatrix::zeros(12, 1);
        x.view_mut((0, 0), (6, 1)).copy_from(&e);
        x.view_mut((6, 0), (6, 1)).copy_from(&s.velocity);
        x
    };
    let h = 1e-7;
    let mut jac = DMatrix::<f64>::zeros(12, 12);
    for j in 0..12 {
        let mut d = Vector6::zeros();
        let mut v = Vector6::zeros();
        let mut dm = Vector6::zeros();
        let mut vm = Vector6::zeros();
        if j < 6 {
            d[j] = h;
            dm[j] = -h;
        } else {
            v[j - 6] = h;
            vm[j - 6] = -h;
        }
        let plus = coords(&closed_loop_step(&gains, &desired, &perturbed(&d, &v)));
        let minus = coords(&closed_loop_step(&gains, &desired, &perturbed(&dm, &vm)));
        jac.set_column(j, &((plus - minus) / (2.0 * h)).column(0));
    }
    for z in jac.complex_eigenvalues().iter() {
        assert!(z.norm() < 1.0, "discrete eigenvalue {z}");
        // Equivalent continuous-time eigenvalue ln(z) / dt.
        assert!(z.norm().ln() / DT < 0.0);
    }

    // Continuous loop with the same gains, per axis [[0, 1], [-kp, -kd]].
    let mut a = DMatrix::<f64>::zeros(12, 12);
    a.view_mut((0, 6), (6, 6)).copy_from(&Matrix6::identity());
    a.view_mut((6, 0), (6, 6)).copy_from(&(-gains.kp));
    a.view_mut((6, 6), (6, 6)).copy_from(&(-gains.kd));
    assert!(a.complex_eigenvalues().iter().all(|z| z.re < 0.0));
}

#[test]
fn wrench_scales_linearly() {
    let gains = ControllerGains {
        kp: Matrix6::from_fn(|i, j| if i == j { 300.0 + i as f64 } else { 0.0 }),
        kd: Matrix6::from_fn(|i, j| {
            if i == j {
                30.0
            } else if i + j == 5 {
                1.0
            } else {
                0.0
            }
        }),
    };
    let dp = Vector3::new(0.013, -0.027, 0.041);
    let v = Vector6::new(0.1, -0.2, 0.3, -0.05, 0.07, 0.02);
    let wrench_at = |alpha: f64| {
        let state = EffectorState {
            pose: Pose::identity(),
            velocity: v * alpha,
        };
        control_wrench(&gains, &Pose::from_translation(dp * alpha), &state)
    };
    let base = wrench_at(1.0);
    for alpha in [2.0, 0.5, 4.0, -1.0, 0.25] {
        assert_eq!(wrench_at(alpha), base * alpha);
    }
}

#[test]
fn sinusoidal_reference_settles_to_periodic_error() {
    let gains = ControllerGains::default();
    let period_steps = 1000;
    let omega = 2.0 * std::f64::consts::PI / (period_steps as f64 * DT);
    let reference = |k: usize| {
        let t = k as f64 * DT;
        Pose::from_parts(
            Vector3::new(0.2 * (omega * t).sin(), 0.1 * (omega * t).cos(), 0.0),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.1 * (omega * t).sin()),
        )
    };
    let mut s = EffectorState::at_rest(reference(0));
    let mut errors = Vec::new();
    for k in 0..8 * period_steps {
        let d = reference(k);
        errors.push(pose_error(&d, &s.pose));
        s = closed_loop_step(&gains, &d, &s);
    }
    let n = errors.len();
    let scale = errors[n - period_steps..]
        .iter()
        .map(|e| e.norm())
        .fold(0.0, f64::max);
    // Damping acts on absolute velocity, so at 1 Hz the error is about 0.58 of
    // the reference amplitude, |s^2 + kd s| / |s^2 + kd s + kp|.
    assert!(
        scale > 0.0 && scale < 0.2,
        "tracking error amplitude {scale}"
    );
    let drift = (n - period_steps..n)
        .map(|k| (errors[k] - errors[k - period_steps]).norm())
        .fold(0.0, f64::max);
    assert!(
        drift / scale < 1e-6,
        "period-to-period change {:e}",
        drift / scale
    );
}
