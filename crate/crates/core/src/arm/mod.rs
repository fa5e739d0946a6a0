//! Planar kinematic chain: equations of motion, integration and kinematics.

mod dynamics;
mod kinematics;
mod model;
mod series;

pub use dynamics::{forward_dynamics, inverse_dynamics, kinetic_energy, mass_matrix};
pub use kinematics::{
    end_effector_velocity, forward_kinematics, inverse_kinematics, jacobian, workspace_boundary,
    wrap_angle, Elbow,
};
pub use model::{ActuationSignal, ArmModel, ArmModelParams, JointState, Trajectory};
pub use series::{differentiate, TimeSeries};
