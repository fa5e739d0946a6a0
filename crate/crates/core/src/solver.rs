//! Reaching-task solver over a paired basis of synergies and dynamic responses.
//!
//! A task is solved in three steps:
//!
//! 1. **Kinematic interpolation.** Responses are used in deviation coordinates
//!    `q(t) = q0 + sum_i a_i (theta_i(t) - q0)`. Every response starts at the
//!    shared initial posture at rest, so the initial constraints hold for any
//!    `a`; the final-state constraints form a small linear system solved for the
//!    minimum-norm `a`.
//! 2. **Inverse dynamics.** The interpolant is mapped to the torque `u~` that
//!    realizes it.
//! 3. **Projection.** `b = Phi^+ u~`, the least-squares synergy combination.
//!
//! The composition of the last two steps with the interpolation is the
//! nonlinear map from kinematic combinators `a` to synergy combinators `b`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::arm::{
    forward_dynamics, inverse_dynamics, wrap_angle, ActuationSignal, ArmModel, JointState,
    Trajectory,
};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{PseudoInverse, RCOND};
use crate::metrics::{
    forward_dynamics_error, interpolation_error, projection_error, ErrorReport, ErrorSpace,
};

/// Tolerance on matching the task's start posture and duration to the basis.
const MATCH_TOL: f64 = 1e-9;

/// Relative singular-value cutoff for the end-constraint system. Responses
/// that all come to rest leave the velocity rows several orders below the
/// position rows, so this is tighter than [`RCOND`].
pub const CONSTRAINT_RCOND: f64 = 1e-12;

/// Point constraints of a reaching task over `[0, T]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachingTask {
    pub q0: Vec<f64>,
    #[serde(rename = "q0dot")]
    pub q0_dot: Vec<f64>,
    #[serde(rename = "qT")]
    pub q_t: Vec<f64>,
    #[serde(rename = "qTdot")]
    pub q_t_dot: Vec<f64>,
    #[serde(rename = "T")]
    pub duration: f64,
}

impl ReachingTask {
    pub fn rest_to_rest(q0: Vec<f64>, q_t: Vec<f64>, duration: f64) -> Result<Self> {
        let n = q0.len();
        let task = Self {
            q0_dot: vec![0.0; n],
            q_t_dot: vec![0.0; n],
            q0,
            q_t,
            duration,
        };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.q0.len();
        check_dim("task final posture", n, self.q_t.len())?;
        check_dim("task initial velocity", n, self.q0_dot.len())?;
        check_dim("task final velocity", n, self.q_t_dot.len())?;
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "task duration must be positive, got {}",
                self.duration
            )));
        }
        if self.q0.iter().chain(&self.q_t).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("task postures must be finite".into()));
        }
        if self.q0_dot.iter().chain(&self.q_t_dot).any(|v| *v != 0.0) {
            return Err(Error::NotRestToRest);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.q0.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinatorKind {
    KinematicA,
    SynergyB,
    ProbeLambda,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinatorVector {
    pub coefficients: Vec<f64>,
    pub kind: CombinatorKind,
}

impl CombinatorVector {
    pub fn new(coefficients: Vec<f64>, kind: CombinatorKind) -> Result<Self> {
        if coefficients.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("combinators must be finite".into()));
        }
        Ok(Self { coefficients, kind })
    }

    pub fn kinematic(coefficients: Vec<f64>) -> Self {
        Self {
            coefficients,
            kind: CombinatorKind::KinematicA,
        }
    }

    pub fn synergy(coefficients: Vec<f64>) -> Self {
        Self {
            coefficients,
            kind: CombinatorKind::SynergyB,
        }
    }

    pub fn unit(len: usize, i: usize, kind: CombinatorKind) -> Self {
        let mut coefficients = vec![0.0; len];
        coefficients[i] = 1.0;
        Self { coefficients, kind }
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.coefficients.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn expect_kind(&self, kind: CombinatorKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "expected {kind:?} combinators, got {:?}",
                self.kind
            )))
        }
    }
}

/// Where a basis came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Exploration,
    Reduced,
    Subset,
}

/// Paired synergies `Phi` and dynamic responses `Theta` on a shared time grid
/// and initial state, with the matrices the solver needs precomputed.
#[derive(Clone, Debug)]
pub struct BasisSet {
    kind: BasisKind,
    synergies: Vec<ActuationSignal>,
    responses: Vec<Trajectory>,
    initial: JointState,
    synergy_matrix: DMatrix<f64>,
    synergy_pinv: PseudoInverse,
    constraints: DMatrix<f64>,
    constraint_pinv: PseudoInverse,
}

impl BasisSet {
    pub fn new(
        kind: BasisKind,
        synergies: Vec<ActuationSignal>,
        responses: Vec<Trajectory>,
        initial: JointState,
    ) -> Result<Self> {
        check_dim("basis pairs", synergies.len(), responses.len())?;
        let Some(first) = responses.first() else {
            return Err(Error::InvalidConfig("a basis needs at least one pair".into()));
        };
        let dim = initial.dim();
        let (n, dt) = (first.len(), first.dt());
        for (phi, theta) in synergies.iter().zip(&responses) {
            check_dim("response joints", dim, theta.dim())?;
            theta.positions().check_grid(first.positions(), "basis responses")?;
            theta.positions().check_grid(phi.series(), "basis synergy grid")?;
            let start = theta.positions().first();
            let dev = start
                .iter()
                .zip(&initial.q)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if dev > MATCH_TOL {
                return Err(Error::InitialStateMismatch(dev));
            }
        }

        let rows = n * dim;
        let mut synergy_matrix = DMatrix::zeros(rows, synergies.len());
        for (j, phi) in synergies.iter().enumerate() {
            synergy_matrix.column_mut(j).copy_from_slice(phi.as_slice());
        }
        let synergy_pinv = PseudoInverse::new(&synergy_matrix, RCOND);

        let mut constraints = DMatrix::zeros(2 * dim, responses.len());
        for (j, theta) in responses.iter().enumerate() {
            let end = theta.final_state();
            for d in 0..dim {
                constraints[(d, j)] = end.q[d] - initial.q[d];
                constraints[(dim + d, j)] = end.qdot[d];
            }
        }
        let constraint_pinv = PseudoInverse::new(&constraints, CONSTRAINT_RCOND);
        debug_assert!(dt > 0.0);

        Ok(Self {
            kind,
            synergies,
            responses,
            initial,
            synergy_matrix,
            synergy_pinv,
            constraints,
            constraint_pinv,
        })
    }

    /// Basis whose synergies are the inverse dynamics of the given responses,
    /// so the pairing holds exactly on the discrete grid.
    pub fn from_responses(
        model: &ArmModel,
        kind: BasisKind,
        responses: Vec<Trajectory>,
        initial: JointState,
    ) -> Result<Self> {
        let synergies = responses
            .iter()
            .map(|r| inverse_dynamics(model, r))
            .collect::<Result<Vec<_>>>()?;
        Self::new(kind, synergies, responses, initial)
    }

    /// Basis restricted to the listed pairs, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let pick = |i: usize| {
            if i < self.len() {
                Ok(i)
            } else {
                Err(Error::InvalidConfig(format!("basis index {i} out of range")))
            }
        };
        let idx = indices.iter().map(|&i| pick(i)).collect::<Result<Vec<_>>>()?;
        Self::new(
            BasisKind::Subset,
            idx.iter().map(|&i| self.synergies[i].clone()).collect(),
            idx.iter().map(|&i| self.responses[i].clone()).collect(),
            self.initial.clone(),
        )
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.synergies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synergies.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.initial.dim()
    }

    pub fn n_samples(&self) -> usize {
        self.responses[0].len()
    }

    pub fn dt(&self) -> f64 {
        self.responses[0].dt()
    }

    pub fn duration(&self) -> f64 {
        self.responses[0].duration()
    }

    pub fn synergies(&self) -> &[ActuationSignal] {
        &self.synergies
    }

    pub fn responses(&self) -> &[Trajectory] {
        &self.responses
    }

    pub fn initial_state(&self) -> &JointState {
        &self.initial
    }

    /// Numerical rank of the stacked synergy matrix.
    pub fn synergy_rank(&self) -> usize {
        self.synergy_pinv.rank()
    }

    /// `Theta a` in deviation coordinates. Derivatives are the same
    /// combination of the responses' derivatives.
    pub fn combine_responses(&self, a: &CombinatorVector) -> Result<Trajectory> {
        check_dim("kinematic combinators", self.len(), a.len())?;
        let q0 = &self.initial.q;
        let dim = self.dim();
        let first = self.responses[0].positions();
        let total = first.as_slice().len();
        let mut pos = vec![0.0; total];
        let mut vel = vec![0.0; total];
        let mut acc = vec![0.0; total];
        for (theta, &ai) in self.responses.iter().zip(&a.coefficients) {
            let (p, v, w) = (
                theta.positions().as_slice(),
                theta.velocities().as_slice(),
                theta.accelerations().as_slice(),
            );
            for i in 0..total {
                pos[i] += ai * (p[i] - q0[i % dim]);
                vel[i] += ai * v[i];
                acc[i] += ai * w[i];
            }
        }
        for (i, x) in pos.iter_mut().enumerate() {
            *x += q0[i % dim];
        }
        Trajectory::from_parts(first.with_data(pos), first.with_data(vel), first.with_data(acc))
    }

    /// `Phi b`.
    pub fn combine_synergies(&self, b: &CombinatorVector) -> Result<ActuationSignal> {
        check_dim("synergy combinators", self.len(), b.len())?;
        let v = &self.synergy_matrix * DVector::from_column_slice(&b.coefficients);
        Ok(ActuationSignal::new(
            self.synergies[0].series().with_data(v.as_slice().to_vec()),
        ))
    }

    fn check_task(&self, task: &ReachingTask) -> Result<()> {
        task.validate()?;
        check_dim("task joints", self.dim(), task.dim())?;
        let dev = task
            .q0
            .iter()
            .zip(&self.initial.q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if dev > MATCH_TOL {
            return Err(Error::InitialStateMismatch(dev));
        }
        if (task.duration - self.duration()).abs() > MATCH_TOL * task.duration.max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "task duration {} does not match basis duration {}",
                task.duration,
                self.duration()
            )));
        }
        Ok(())
    }
}

/// Kinematic solution together with the rank of its constraint system.
#[derive(Clone, Debug, PartialEq)]
pub struct KinematicSolution {
    pub a: CombinatorVector,
    pub rank: usize,
    /// Fewer independent constraint directions than constraints: the target
    /// can at best be approximated.
    pub under_determined: bool,
}

/// Minimum-norm combinators `a` meeting the task's final-state constraints.
pub fn solve_kinematic(basis: &BasisSet, task: &ReachingTask) -> Result<KinematicSolution> {
    basis.check_task(task)?;
    let dim = basis.dim();
    let mut rhs = DVector::zeros(2 * dim);
    for d in 0..dim {
        rhs[d] = wrap_angle(task.q_t[d] - task.q0[d]);
        rhs[dim + d] = task.q_t_dot[d];
    }
    let mut a = basis.constraint_pinv.apply(&rhs);
    // one step of iterative refinement; the correction stays in the row space
    let residual = &rhs - &basis.constraints * &a;
    a += basis.constraint_pinv.apply(&residual);
    let rank = basis.constraint_pinv.rank();
    Ok(KinematicSolution {
        a: CombinatorVector::kinematic(a.as_slice().to_vec()),
        rank,
        under_determined: rank < 2 * dim,
    })
}

/// `u~ = D(Theta a)`.
pub fn compute_task_actuation(
    model: &ArmModel,
    basis: &BasisSet,
    a: &CombinatorVector,
) -> Result<ActuationSignal> {
    a.expect_kind(CombinatorKind::KinematicA)?;
    inverse_dynamics(model, &basis.combine_responses(a)?)
}

/// `b = Phi^+ u`, the minimum-norm least-squares synergy combination.
pub fn project_onto_synergies(basis: &BasisSet, u: &ActuationSignal) -> Result<CombinatorVector> {
    u.series()
        .check_grid(basis.synergies[0].series(), "projected actuation")?;
    let u = DVector::from_column_slice(u.as_slice());
    let mut b = basis.synergy_pinv.apply(&u);
    // One refinement step; the correction stays in the kept row space.
    let r = &u - &basis.synergy_matrix * &b;
    b += basis.synergy_pinv.apply(&r);
    Ok(CombinatorVector::synergy(b.as_slice().to_vec()))
}

/// The map from kinematic to synergy combinators, `Phi^+ . D . Theta`.
pub fn map_m(model: &ArmModel, basis: &BasisSet, a: &CombinatorVector) -> Result<CombinatorVector> {
    let u = compute_task_actuation(model, basis, a)?;
    project_onto_synergies(basis, &u)
}

#[derive(Clone, Debug)]
pub struct TaskSolution {
    pub task: ReachingTask,
    pub a: CombinatorVector,
    pub b: CombinatorVector,
    pub rank: usize,
    pub under_determined: bool,
    pub interpolant: Trajectory,
    pub actuation_target: ActuationSignal,
    pub actuation_realized: ActuationSignal,
    /// Forward dynamics of `actuation_realized` from the basis initial state.
    pub realized: Trajectory,
    pub errors: ErrorReport,
}

/// Full pipeline: interpolate, invert the dynamics, project, then integrate
/// the projected actuation to score the result.
pub fn solve_task(model: &ArmModel, basis: &BasisSet, task: &ReachingTask) -> Result<TaskSolution> {
    let kin = solve_kinematic(basis, task)?;
    let interpolant = basis.combine_responses(&kin.a)?;
    let actuation_target = inverse_dynamics(model, &interpolant)?;
    let b = project_onto_synergies(basis, &actuation_target)?;
    let actuation_realized = basis.combine_synergies(&b)?;
    let realized = forward_dynamics(model, &actuation_realized, basis.initial_state())?;
    let errors = ErrorReport {
        err_i: interpolation_error(task, &interpolant)?,
        err_p: projection_error(&actuation_target, &actuation_realized)?,
        err_f: forward_dynamics_error(task, &realized, ErrorSpace::Joint, model)?,
        err_f_ee: forward_dynamics_error(task, &realized, ErrorSpace::EndEffector, model)?,
    };
    Ok(TaskSolution {
        task: task.clone(),
        a: kin.a,
        b,
        rank: kin.rank,
        under_determined: kin.under_determined,
        interpolant,
        actuation_target,
        actuation_realized,
        realized,
        errors,
    })
}
