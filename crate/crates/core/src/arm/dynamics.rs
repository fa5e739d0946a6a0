//! Closed-form equations of motion of the planar 2-link chain,
//!
//! ```text
//! M(q) q'' + C(q, q') q' + B q' + g(q) = u
//! ```
//!
//! and a fixed-step RK4 integrator for the forward problem.

use nalgebra::{Matrix2, Vector2};

use super::model::{ActuationSignal, ArmModel, JointState, Trajectory};
use super::series::TimeSeries;
use crate::error::{check_dim, Error, Result};

/// Constant groupings of the 2-link parameters.
#[derive(Clone, Copy, Debug)]
struct TwoLink {
    /// I1 + I2 + m1 c1^2 + m2 (l1^2 + c2^2)
    alpha: f64,
    /// m2 l1 c2
    beta: f64,
    /// I2 + m2 c2^2
    delta: f64,
    damping: Vector2<f64>,
    /// (m1 c1 + m2 l1) g
    grav1: f64,
    /// m2 c2 g
    grav2: f64,
}

impl TwoLink {
    fn from_model(model: &ArmModel) -> Result<Self> {
        if model.n_links() != 2 {
            return Err(Error::UnsupportedLinkCount(model.n_links()));
        }
        let p = model.params();
        let (l1, m1, m2) = (p.link_lengths[0], p.link_masses[0], p.link_masses[1]);
        let (c1, c2) = (p.link_com_offsets[0], p.link_com_offsets[1]);
        let (i1, i2) = (p.link_inertias[0], p.link_inertias[1]);
        Ok(Self {
            alpha: i1 + i2 + m1 * c1 * c1 + m2 * (l1 * l1 + c2 * c2),
            beta: m2 * l1 * c2,
            delta: i2 + m2 * c2 * c2,
            damping: Vector2::new(p.joint_damping[0], p.joint_damping[1]),
            grav1: (m1 * c1 + m2 * l1) * p.gravity,
            grav2: m2 * c2 * p.gravity,
        })
    }

    fn mass(&self, q: &Vector2<f64>) -> Matrix2<f64> {
        let c = q[1].cos();
        let m11 = self.alpha + 2.0 * self.beta * c;
        let m12 = self.delta + self.beta * c;
        Matrix2::new(m11, m12, m12, self.delta)
    }

    /// Coriolis/centrifugal, damping and gravity torques.
    fn bias(&self, q: &Vector2<f64>, qd: &Vector2<f64>) -> Vector2<f64> {
        let h = self.beta * q[1].sin();
        let coriolis = Vector2::new(-h * (2.0 * qd[0] * qd[1] + qd[1] * qd[1]), h * qd[0] * qd[0]);
        let c1 = q[0].cos();
        let c12 = (q[0] + q[1]).cos();
        let gravity = Vector2::new(self.grav1 * c1 + self.grav2 * c12, self.grav2 * c12);
        coriolis + self.damping.component_mul(qd) + gravity
    }

    fn acceleration(&self, q: &Vector2<f64>, qd: &Vector2<f64>, u: &Vector2<f64>) -> Vector2<f64> {
        let m = self.mass(q);
        let rhs = u - self.bias(q, qd);
        // M is SPD for every valid model; a failed factorization is a bug.
        m.cholesky()
            .expect("mass matrix of a valid arm model is positive definite")
            .solve(&rhs)
    }
}

fn vec2(s: &[f64]) -> Vector2<f64> {
    Vector2::new(s[0], s[1])
}

/// Joint-space inertia matrix `M(q)`.
pub fn mass_matrix(model: &ArmModel, q: &[f64]) -> Result<Matrix2<f64>> {
    check_dim("mass matrix posture", 2, q.len())?;
    Ok(TwoLink::from_model(model)?.mass(&vec2(q)))
}

/// Kinetic energy `q'^T M(q) q' / 2`.
pub fn kinetic_energy(model: &ArmModel, state: &JointState) -> Result<f64> {
    let m = mass_matrix(model, &state.q)?;
    check_dim("kinetic energy velocity", 2, state.qdot.len())?;
    let qd = vec2(&state.qdot);
    Ok(0.5 * qd.dot(&(m * qd)))
}

/// Torques that realize `traj` exactly at its sample instants (the operator `D`).
pub fn inverse_dynamics(model: &ArmModel, traj: &Trajectory) -> Result<ActuationSignal> {
    let arm = TwoLink::from_model(model)?;
    check_dim("trajectory joints", model.n_links(), traj.dim())?;
    let (q, qd, qdd) = (traj.positions(), traj.velocities(), traj.accelerations());
    let mut out = Vec::with_capacity(q.len() * 2);
    for k in 0..q.len() {
        let qk = vec2(q.sample(k));
        let u = arm.mass(&qk) * vec2(qdd.sample(k)) + arm.bias(&qk, &vec2(qd.sample(k)));
        out.extend_from_slice(u.as_slice());
    }
    Ok(ActuationSignal::new(q.with_data(out)))
}

/// Torque halfway between samples `k` and `k + 1`, from the cubic through the
/// four nearest samples (linear when fewer than four exist).
fn midpoint_torque(u: &ActuationSignal, k: usize) -> Vector2<f64> {
    let n = u.len();
    let s = |i: usize| vec2(u.sample(i));
    if n < 4 {
        return (s(k) + s(k + 1)) * 0.5;
    }
    if k == 0 {
        (s(0) * 5.0 + s(1) * 15.0 - s(2) * 5.0 + s(3)) / 16.0
    } else if k + 2 == n {
        (s(n - 1) * 5.0 + s(n - 2) * 15.0 - s(n - 3) * 5.0 + s(n - 4)) / 16.0
    } else {
        ((s(k) + s(k + 1)) * 9.0 - s(k - 1) - s(k + 2)) / 16.0
    }
}

/// Integrates the arm under `u` from `init` with classical RK4 on the sample
/// grid of `u`. Half-step torques are cubically interpolated.
pub fn forward_dynamics(
    model: &ArmModel,
    u: &ActuationSignal,
    init: &JointState,
) -> Result<Trajectory> {
    let arm = TwoLink::from_model(model)?;
    check_dim("actuation joints", model.n_links(), u.dim())?;
    check_dim("initial state joints", model.n_links(), init.dim())?;
    if !u.series().is_finite() {
        return Err(Error::InvalidConfig("actuation contains non-finite samples".into()));
    }
    let h = u.dt();
    let n = u.len();
    let mut q = vec2(&init.q);
    let mut qd = vec2(&init.qdot);
    let mut out = Vec::with_capacity(2 * n);
    out.extend_from_slice(q.as_slice());

    for k in 0..n - 1 {
        let u0 = vec2(u.sample(k));
        let u1 = vec2(u.sample(k + 1));
        let um = midpoint_torque(u, k);

        let a1 = arm.acceleration(&q, &qd, &u0);
        let (q2, qd2) = (q + qd * (0.5 * h), qd + a1 * (0.5 * h));
        let a2 = arm.acceleration(&q2, &qd2, &um);
        let (q3, qd3) = (q + qd2 * (0.5 * h), qd + a2 * (0.5 * h));
        let a3 = arm.acceleration(&q3, &qd3, &um);
        let (q4, qd4) = (q + qd3 * h, qd + a3 * h);
        let a4 = arm.acceleration(&q4, &qd4, &u1);

        q += (qd + qd2 * 2.0 + qd3 * 2.0 + qd4) * (h / 6.0);
        qd += (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);

        if !(q.iter().chain(qd.iter()).all(|v| v.is_finite())) {
            return Err(Error::Divergence {
                step: k + 1,
                time: (k + 1) as f64 * h,
            });
        }
        out.extend_from_slice(q.as_slice());
    }
    Ok(Trajectory::new(TimeSeries::new(h, 2, out)?))
}
