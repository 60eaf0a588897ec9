//! Extended Kalman filter with intermittent observations.
//!
//! Each step predicts through the plant, then corrects only when the
//! measurement is available (`gamma = 1`):
//!
//! ```text
//! x+ = x + gamma K (y - h(x))
//! P+ = P - gamma K C P,      K = P C^T (C P C^T + R)^-1
//! ```
//!
//! The filter is generic over the plant and output callbacks so the same code
//! runs the suspended block and the linear reference problems used in tests.

use nalgebra::{DMatrix, SMatrix, SVector, SymmetricEigen};

use crate::frames::Pose;
use crate::pendulum::{self, PendulumParams, PendulumState, NX, NY};
use crate::{Error, Result};

/// Condition number above which the innovation covariance counts as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// State estimate and its error covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct Belief<const N: usize> {
    pub mean: SVector<f64, N>,
    pub cov: SMatrix<f64, N, N>,
}

impl<const N: usize> Belief<N> {
    pub fn new(mean: SVector<f64, N>, cov: SMatrix<f64, N, N>) -> Self {
        Self { mean, cov }
    }

    fn check_finite(&self) -> Result<()> {
        if self
            .mean
            .iter()
            .chain(self.cov.iter())
            .all(|v| v.is_finite())
        {
            Ok(())
        } else {
            Err(Error::DivergedFilter(
                "non-finite mean or covariance".into(),
            ))
        }
    }
}

/// Process (`Q`) and measurement (`R`) noise covariances.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseConfig<const N: usize, const M: usize> {
    pub process: SMatrix<f64, N, N>,
    pub measurement: SMatrix<f64, M, M>,
}

impl<const N: usize, const M: usize> NoiseConfig<N, M> {
    pub fn validate(&self) -> Result<()> {
        let asym_q = (self.process - self.process.transpose()).abs().max();
        let asym_r = (self.measurement - self.measurement.transpose())
            .abs()
            .max();
        if asym_q > 1e-12 * self.process.abs().max()
            || asym_r > 1e-12 * self.measurement.abs().max()
        {
            return Err(Error::InvalidParameter(
                "noise covariances must be symmetric".into(),
            ));
        }
        if eigen_range(&self.process).0 < -1e-12 {
            return Err(Error::InvalidParameter("process noise must be PSD".into()));
        }
        if self.measurement.cholesky().is_none() {
            return Err(Error::InvalidParameter(
                "measurement noise must be positive definite".into(),
            ));
        }
        Ok(())
    }
}

/// A timestamped observation that may be missing.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement<T> {
    pub timestamp: f64,
    pub value: Option<T>,
}

impl<T> Measurement<T> {
    pub fn available(timestamp: f64, value: T) -> Self {
        Self {
            timestamp,
            value: Some(value),
        }
    }

    pub fn missing(timestamp: f64) -> Self {
        Self {
            timestamp,
            value: None,
        }
    }

    /// Availability flag: 1 when a value arrived, 0 otherwise.
    pub fn gamma(&self) -> u8 {
        u8::from(self.value.is_some())
    }
}

pub type PoseMeasurement = Measurement<Pose>;

/// Discrete plant `x+ = f(x)` and its Jacobian.
pub trait ProcessModel<const N: usize> {
    fn propagate(&self, x: &SVector<f64, N>, dt: f64) -> Result<SVector<f64, N>>;
    fn transition_jacobian(&self, x: &SVector<f64, N>, dt: f64) -> Result<SMatrix<f64, N, N>>;
}

/// Output map `y = h(x)` and its Jacobian.
pub trait ObservationModel<const N: usize, const M: usize> {
    type Observation;

    fn predict(&self, x: &SVector<f64, N>) -> Result<SVector<f64, M>>;
    fn output_jacobian(&self, x: &SVector<f64, N>) -> Result<SMatrix<f64, M, N>>;
    /// `y - h(x)` for an observation and a predicted output.
    fn residual(
        &self,
        observed: &Self::Observation,
        predicted: &SVector<f64, M>,
    ) -> SVector<f64, M>;
}

/// How the posterior covariance is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CovarianceUpdate {
    /// `P - K C P`, then symmetrized.
    #[default]
    Simple,
    /// `(I - K C) P (I - K C)^T + K R K^T`.
    Joseph,
}

/// Smallest and largest eigenvalue of a symmetric matrix.
fn eigen_range<const N: usize>(m: &SMatrix<f64, N, N>) -> (f64, f64) {
    let eig = SymmetricEigen::new(DMatrix::from_column_slice(N, N, m.as_slice())).eigenvalues;
    (eig.min(), eig.max())
}

fn symmetrize<const N: usize>(m: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (m + m.transpose()) * 0.5
}

/// Time update: `x = f(x)`, `P = A P A^T + Q`.
pub fn predict<const N: usize, P: ProcessModel<N>>(
    belief: &Belief<N>,
    model: &P,
    process_noise: &SMatrix<f64, N, N>,
    dt: f64,
) -> Result<Belief<N>> {
    let a = model.transition_jacobian(&belief.mean, dt)?;
    let mean = model.propagate(&belief.mean, dt)?;
    let cov = symmetrize(&(a * belief.cov * a.transpose() + process_noise));
    let out = Belief::new(mean, cov);
    out.check_finite()?;
    Ok(out)
}

/// Measurement residual `y - h(x)`; fails when nothing was observed.
pub fn innovation<const N: usize, const M: usize, O: ObservationModel<N, M>>(
    belief: &Belief<N>,
    meas: &Measurement<O::Observation>,
    model: &O,
) -> Result<SVector<f64, M>> {
    let observed = meas.value.as_ref().ok_or(Error::UnavailableMeasurement)?;
    Ok(model.residual(observed, &model.predict(&belief.mean)?))
}

/// Measurement update with the `P - K C P` covariance update.
pub fn correct<const N: usize, const M: usize, O: ObservationModel<N, M>>(
    belief: &Belief<N>,
    meas: &Measurement<O::Observation>,
    model: &O,
    measurement_noise: &SMatrix<f64, M, M>,
) -> Result<Belief<N>> {
    correct_with(
        belief,
        meas,
        model,
        measurement_noise,
        CovarianceUpdate::Simple,
    )
}

pub fn correct_with<const N: usize, const M: usize, O: ObservationModel<N, M>>(
    belief: &Belief<N>,
    meas: &Measurement<O::Observation>,
    model: &O,
    measurement_noise: &SMatrix<f64, M, M>,
    update: CovarianceUpdate,
) -> Result<Belief<N>> {
    let Some(observed) = meas.value.as_ref() else {
        return Ok(belief.clone());
    };
    let predicted = model.predict(&belief.mean)?;
    let residual = model.residual(observed, &predicted);
    let c = model.output_jacobian(&belief.mean)?;
    let pct = belief.cov * c.transpose();
    let s = symmetrize(&(c * pct + measurement_noise));

    let (min, max) = eigen_range(&s);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !condition.is_finite() || condition > SINGULAR_CONDITION {
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::DivergedFilter(
                "non-finite innovation covariance".into(),
            ));
        }
        return Err(Error::SingularInnovation { condition });
    }
    let chol = s
        .cholesky()
        .ok_or(Error::SingularInnovation { condition })?;
    // K = P C^T S^-1  <=>  S K^T = C P
    let gain = chol.solve(&pct.transpose()).transpose();

    let mean = belief.mean + gain * residual;
    let cov = match update {
        CovarianceUpdate::Simple => belief.cov - gain * c * belief.cov,
        CovarianceUpdate::Joseph => {
            let i_kc = SMatrix::<f64, N, N>::identity() - gain * c;
            i_kc * belief.cov * i_kc.transpose() + gain * measurement_noise * gain.transpose()
        }
    };
    let out = Belief::new(mean, symmetrize(&cov));
    out.check_finite()?;
    Ok(out)
}

/// The suspended block as a filter model: RK4 plant and COG pose output.
#[derive(Clone, Debug)]
pub struct BlockModel {
    pub params: PendulumParams,
}

impl BlockModel {
    pub fn new(params: PendulumParams) -> Self {
        Self { params }
    }
}

impl ProcessModel<NX> for BlockModel {
    fn propagate(&self, x: &SVector<f64, NX>, dt: f64) -> Result<SVector<f64, NX>> {
        Ok(pendulum::step(&self.params, &PendulumState::from_vector(x), dt)?.to_vector())
    }

    fn transition_jacobian(&self, x: &SVector<f64, NX>, dt: f64) -> Result<SMatrix<f64, NX, NX>> {
        pendulum::state_jacobian(&self.params, &PendulumState::from_vector(x), dt)
    }
}

impl ObservationModel<NX, NY> for BlockModel {
    type Observation = Pose;

    fn predict(&self, x: &SVector<f64, NX>) -> Result<SVector<f64, NY>> {
        pendulum::observe_vector(&self.params, &PendulumState::from_vector(x))
    }

    fn output_jacobian(&self, x: &SVector<f64, NX>) -> Result<SMatrix<f64, NY, NX>> {
        pendulum::output_jacobian(&self.params, &PendulumState::from_vector(x))
    }

    fn residual(&self, observed: &Pose, predicted: &SVector<f64, NY>) -> SVector<f64, NY> {
        pose_residual(observed, predicted)
    }
}

/// Component-wise `y - h(x)` with the measured quaternion sign chosen closest
/// to the predicted one.
pub fn pose_residual(observed: &Pose, predicted: &SVector<f64, NY>) -> SVector<f64, NY> {
    let mut y = SVector::<f64, NY>::from(observed.to_array());
    let q_obs = y.fixed_rows::<4>(3);
    let q_pred = predicted.fixed_rows::<4>(3);
    if q_obs.dot(&q_pred) < 0.0 {
        let flipped = -q_obs.into_owned();
        y.fixed_rows_mut::<4>(3).copy_from(&flipped);
    }
    y - predicted
}

/// Default `P0`: `pos_var` on the coordinates, `vel_var` on the velocities.
pub fn initial_covariance(pos_var: f64, vel_var: f64) -> SMatrix<f64, NX, NX> {
    let mut p = SMatrix::<f64, NX, NX>::zeros();
    for i in 0..NX / 2 {
        p[(i, i)] = pos_var;
        p[(i + NX / 2, i + NX / 2)] = vel_var;
    }
    p
}

/// Belief seeded from a pose measurement: coordinates from the inverse output
/// map, zero velocities.
pub fn belief_from_pose(
    params: &PendulumParams,
    pose: &Pose,
    cov: SMatrix<f64, NX, NX>,
) -> Belief<NX> {
    Belief::new(pendulum::state_from_pose(params, pose).to_vector(), cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix1, Vector1};

    /// Scalar random walk `x+ = x`, observed directly.
    struct Scalar;

    impl ProcessModel<1> for Scalar {
        fn propagate(&self, x: &Vector1<f64>, _dt: f64) -> Result<Vector1<f64>> {
            Ok(*x)
        }
        fn transition_jacobian(&self, _x: &Vector1<f64>, _dt: f64) -> Result<Matrix1<f64>> {
            Ok(Matrix1::identity())
        }
    }

    impl ObservationModel<1, 1> for Scalar {
        type Observation = f64;
        fn predict(&self, x: &Vector1<f64>) -> Result<Vector1<f64>> {
            Ok(*x)
        }
        fn output_jacobian(&self, _x: &Vector1<f64>) -> Result<Matrix1<f64>> {
            Ok(Matrix1::identity())
        }
        fn residual(&self, observed: &f64, predicted: &Vector1<f64>) -> Vector1<f64> {
            Vector1::new(observed - predicted[0])
        }
    }

    fn scalar_belief(mean: f64, var: f64) -> Belief<1> {
        Belief::new(Vector1::new(mean), Matrix1::new(var))
    }

    #[test]
    fn identity_prediction_without_noise() {
        let b = scalar_belief(0.3, 1.0);
        let out = predict(&b, &Scalar, &Matrix1::zeros(), 0.1).unwrap();
        assert_eq!(out, b);
    }

    #[test]
    fn prediction_adds_process_noise() {
        let b = scalar_belief(0.3, 1.0);
        let out = predict(&b, &Scalar, &Matrix1::new(0.25), 0.1).unwrap();
        assert_eq!(out.cov[(0, 0)], 1.25);
    }

    #[test]
    fn scalar_gain_is_one_half() {
        let b = scalar_belief(0.0, 1.0);
        let m = Measurement::available(0.0, 2.0);
        let out = correct(&b, &m, &Scalar, &Matrix1::new(1.0)).unwrap();
        assert!((out.mean[0] - 1.0).abs() < 1e-15);
        assert!((out.cov[(0, 0)] - 0.5).abs() < 1e-15);
        let joseph = correct_with(
            &b,
            &m,
            &Scalar,
            &Matrix1::new(1.0),
            CovarianceUpdate::Joseph,
        )
        .unwrap();
        assert!((joseph.cov[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn perfect_measurement_limit() {
        let b = scalar_belief(0.0, 1.0);
        let m = Measurement::available(0.0, 2.0);
        let out = correct(&b, &m, &Scalar, &Matrix1::new(1e-12)).unwrap();
        assert!((out.mean[0] - 2.0).abs() < 1e-11);
        assert!(out.cov[(0, 0)] < 1e-11);
    }

    #[test]
    fn missing_measurement_is_a_no_op() {
        let b = scalar_belief(0.7, 0.4);
        let m: Measurement<f64> = Measurement::missing(1.0);
        assert_eq!(m.gamma(), 0);
        assert_eq!(correct(&b, &m, &Scalar, &Matrix1::new(1.0)).unwrap(), b);
        assert!(matches!(
            innovation(&b, &m, &Scalar),
            Err(Error::UnavailableMeasurement)
        ));
    }

    #[test]
    fn non_finite_propagation_is_divergence() {
        let b = scalar_belief(f64::NAN, 1.0);
        assert!(matches!(
            predict(&b, &Scalar, &Matrix1::zeros(), 0.1),
            Err(Error::DivergedFilter(_))
        ));
    }

    #[test]
    fn singular_innovation_is_reported() {
        let b = scalar_belief(0.0, 0.0);
        let m = Measurement::available(0.0, 1.0);
        assert!(matches!(
            correct(&b, &m, &Scalar, &Matrix1::new(0.0)),
            Err(Error::SingularInnovation { .. })
        ));
    }

    #[test]
    fn noise_validation() {
        let ok = NoiseConfig::<1, 1> {
            process: Matrix1::new(0.0),
            measurement: Matrix1::new(1.0),
        };
        ok.validate().unwrap();
        let bad = NoiseConfig::<1, 1> {
            process: Matrix1::new(0.0),
            measurement: Matrix1::new(0.0),
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn pose_residual_resolves_double_cover() {
        let params = PendulumParams::default();
        let s = PendulumState::at_rest(nalgebra::Vector5::new(0.1, -0.2, 0.3, 0.2, 2.5));
        let predicted = pendulum::observe_vector(&params, &s).unwrap();
        let observed = Pose::from_array(predicted.into());
        assert_eq!(
            pose_residual(&observed, &predicted),
            SVector::<f64, NY>::zeros()
        );

        let mut negated = predicted;
        for i in 3..7 {
            negated[i] = -negated[i];
        }
        // the observation is canonical, the prediction deliberately is not
        let r = pose_residual(&observed, &negated);
        assert!(r.norm() < 1e-15);
    }
}
