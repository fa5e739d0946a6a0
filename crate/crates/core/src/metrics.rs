//! Solution quality measures: interpolation, projection and forward-dynamics
//! errors, plus the end-effector variant of the latter.
//!
//! Joint and end-effector errors mix position and velocity units on purpose;
//! no weighting is applied.

use serde::{Deserialize, Serialize};

use crate::arm::{
    end_effector_velocity, forward_kinematics, wrap_angle, ActuationSignal, ArmModel, Trajectory,
};
use crate::error::{check_dim, Result};
use crate::solver::ReachingTask;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    #[serde(rename = "err_I")]
    pub err_i: f64,
    #[serde(rename = "err_P")]
    pub err_p: f64,
    #[serde(rename = "err_F")]
    pub err_f: f64,
    #[serde(rename = "err_F_ee")]
    pub err_f_ee: f64,
}

impl ErrorReport {
    pub fn is_valid(&self) -> bool {
        [self.err_i, self.err_p, self.err_f, self.err_f_ee]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
    }

    /// Element-wise maximum.
    pub fn max(&self, other: &ErrorReport) -> ErrorReport {
        ErrorReport {
            err_i: self.err_i.max(other.err_i),
            err_p: self.err_p.max(other.err_p),
            err_f: self.err_f.max(other.err_f),
            err_f_ee: self.err_f_ee.max(other.err_f_ee),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorSpace {
    Joint,
    EndEffector,
}

fn sum_sq(it: impl Iterator<Item = f64>) -> f64 {
    it.map(|v| v * v).sum()
}

/// Distance of the interpolant's final state from the task's final state.
pub fn interpolation_error(task: &ReachingTask, interpolant: &Trajectory) -> Result<f64> {
    check_dim("interpolant joints", task.dim(), interpolant.dim())?;
    let end = interpolant.final_state();
    let pos = sum_sq(task.q_t.iter().zip(&end.q).map(|(a, b)| wrap_angle(a - b)));
    let vel = sum_sq(task.q_t_dot.iter().zip(&end.qdot).map(|(a, b)| a - b));
    Ok((pos + vel).sqrt())
}

/// L2 norm over `[0, T]` of `u_target - u_realized`, trapezoidal rule.
pub fn projection_error(u_target: &ActuationSignal, u_realized: &ActuationSignal) -> Result<f64> {
    u_target
        .series()
        .check_grid(u_realized.series(), "projection error signals")?;
    let n = u_target.len();
    let mut integral = 0.0;
    for k in 0..n {
        let sq = sum_sq(
            u_target
                .sample(k)
                .iter()
                .zip(u_realized.sample(k))
                .map(|(a, b)| a - b),
        );
        let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        integral += w * sq;
    }
    Ok((integral * u_target.dt()).sqrt())
}

/// Distance of a realized trajectory's final state from the task's final state,
/// in joint space or mapped to the end effector.
pub fn forward_dynamics_error(
    task: &ReachingTask,
    realized: &Trajectory,
    space: ErrorSpace,
    model: &ArmModel,
) -> Result<f64> {
    check_dim("realized trajectory joints", task.dim(), realized.dim())?;
    let end = realized.final_state();
    match space {
        ErrorSpace::Joint => {
            let pos = sum_sq(end.q.iter().zip(&task.q_t).map(|(a, b)| wrap_angle(a - b)));
            let vel = sum_sq(end.qdot.iter().zip(&task.q_t_dot).map(|(a, b)| a - b));
            Ok((pos + vel).sqrt())
        }
        ErrorSpace::EndEffector => {
            let p = forward_kinematics(model, &end.q)?;
            let v = end_effector_velocity(model, &end.q, &end.qdot)?;
            let p_t = forward_kinematics(model, &task.q_t)?;
            let v_t = end_effector_velocity(model, &task.q_t, &task.q_t_dot)?;
            Ok(((p - p_t).norm_squared() + (v - v_t).norm_squared()).sqrt())
        }
    }
}
