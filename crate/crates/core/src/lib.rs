//! Open-loop reaching controllers built from a small set of motor synergies.
//!
//! A controller is a linear combination of predefined torque patterns
//! (synergies). Reaching tasks are first solved kinematically by combining the
//! arm's recorded responses to those synergies, the matching torque is obtained
//! through inverse dynamics, and it is finally projected back onto the synergy
//! span. An exploration/reduction procedure distils a large set of exploratory
//! actuations into a handful of task-tailored synergies.

pub mod archive;
pub mod arm;
pub mod error;
pub mod exploration;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod reduction;
pub mod solver;

pub use error::{Error, Result};
