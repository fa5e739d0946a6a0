use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::series::{differentiate, TimeSeries};
use crate::error::{check_dim, Error, Result};

/// Physical parameters of a planar serial chain with revolute joints.
///
/// Joint angles are relative: joint `i` measures link `i` against link `i - 1`
/// (link 0 against the fixed x axis). Gravity, when non-zero, acts along `-y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArmModelParams", into = "ArmModelParams")]
pub struct ArmModel {
    params: ArmModelParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmModelParams {
    pub link_lengths: Vec<f64>,
    pub link_masses: Vec<f64>,
    pub link_com_offsets: Vec<f64>,
    pub link_inertias: Vec<f64>,
    pub joint_damping: Vec<f64>,
    #[serde(default)]
    pub gravity: f64,
}

impl Default for ArmModelParams {
    fn default() -> Self {
        Self {
            link_lengths: vec![0.30, 0.33],
            link_masses: vec![2.10, 1.65],
            link_com_offsets: vec![0.15, 0.18],
            link_inertias: vec![0.0159, 0.0257],
            joint_damping: vec![0.1, 0.1],
            gravity: 0.0,
        }
    }
}

impl Default for ArmModel {
    fn default() -> Self {
        Self::new(ArmModelParams::default()).expect("default parameters are valid")
    }
}

impl TryFrom<ArmModelParams> for ArmModel {
    type Error = Error;

    fn try_from(params: ArmModelParams) -> Result<Self> {
        Self::new(params)
    }
}

impl From<ArmModel> for ArmModelParams {
    fn from(model: ArmModel) -> Self {
        model.params
    }
}

impl ArmModel {
    pub fn new(params: ArmModelParams) -> Result<Self> {
        let n = params.link_lengths.len();
        if n == 0 {
            return Err(Error::InvalidModel("at least one link is required".into()));
        }
        let fields = [
            ("link_masses", params.link_masses.len()),
            ("link_com_offsets", params.link_com_offsets.len()),
            ("link_inertias", params.link_inertias.len()),
            ("joint_damping", params.joint_damping.len()),
        ];
        for (name, len) in fields {
            if len != n {
                return Err(Error::InvalidModel(format!(
                    "{name} has {len} entries, expected {n}"
                )));
            }
        }
        let positive = |name: &str, v: &[f64]| -> Result<()> {
            match v.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
                Some(i) => Err(Error::InvalidModel(format!(
                    "{name}[{i}] = {} must be strictly positive",
                    v[i]
                ))),
                None => Ok(()),
            }
        };
        positive("link_lengths", &params.link_lengths)?;
        positive("link_masses", &params.link_masses)?;
        positive("link_inertias", &params.link_inertias)?;
        for i in 0..n {
            let c = params.link_com_offsets[i];
            if !(c.is_finite() && (0.0..=params.link_lengths[i]).contains(&c)) {
                return Err(Error::InvalidModel(format!(
                    "link_com_offsets[{i}] = {c} outside [0, {}]",
                    params.link_lengths[i]
                )));
            }
            let b = params.joint_damping[i];
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::InvalidModel(format!("joint_damping[{i}] = {b} must be >= 0")));
            }
        }
        if !params.gravity.is_finite() {
            return Err(Error::InvalidModel("gravity must be finite".into()));
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &ArmModelParams {
        &self.params
    }

    pub fn n_links(&self) -> usize {
        self.params.link_lengths.len()
    }

    pub fn link_lengths(&self) -> &[f64] {
        &self.params.link_lengths
    }

    pub fn with_gravity(mut self, gravity: f64) -> Self {
        self.params.gravity = gravity;
        self
    }

    pub fn with_damping(mut self, damping: Vec<f64>) -> Result<Self> {
        self.params.joint_damping = damping;
        Self::new(self.params)
    }

    /// Stable hex digest of the parameters, embedded in every output file.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        let p = &self.params;
        for v in [
            &p.link_lengths,
            &p.link_masses,
            &p.link_com_offsets,
            &p.link_inertias,
            &p.joint_damping,
        ] {
            hasher.update((v.len() as u64).to_le_bytes());
            for x in v {
                hasher.update(x.to_bits().to_le_bytes());
            }
        }
        hasher.update(p.gravity.to_bits().to_le_bytes());
        hex::encode(&hasher.finalize()[..8])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
}

impl JointState {
    pub fn new(q: Vec<f64>, qdot: Vec<f64>) -> Result<Self> {
        check_dim("joint state velocity", q.len(), qdot.len())?;
        if !q.iter().chain(&qdot).all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("joint state must be finite".into()));
        }
        Ok(Self { q, qdot })
    }

    pub fn at_rest(q: Vec<f64>) -> Self {
        let qdot = vec![0.0; q.len()];
        Self { q, qdot }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn is_at_rest(&self) -> bool {
        self.qdot.iter().all(|v| *v == 0.0)
    }
}

/// Sampled joint-space path with finite-difference velocities and accelerations.
///
/// The derivative sequences are always recomputed from the angle samples, so a
/// trajectory is fully described by its angles.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    positions: TimeSeries,
    velocities: TimeSeries,
    accelerations: TimeSeries,
}

impl Trajectory {
    pub fn new(positions: TimeSeries) -> Self {
        let (velocities, accelerations) = differentiate(&positions);
        Self {
            positions,
            velocities,
            accelerations,
        }
    }

    pub fn from_samples(dt: f64, samples: &[Vec<f64>]) -> Result<Self> {
        Ok(Self::new(TimeSeries::from_samples(dt, samples)?))
    }

    /// Assembles a trajectory from precomputed derivatives, e.g. a linear
    /// combination of trajectories and of their derivatives.
    pub(crate) fn from_parts(
        positions: TimeSeries,
        velocities: TimeSeries,
        accelerations: TimeSeries,
    ) -> Result<Self> {
        positions.check_grid(&velocities, "trajectory velocities")?;
        positions.check_grid(&accelerations, "trajectory accelerations")?;
        Ok(Self {
            positions,
            velocities,
            accelerations,
        })
    }

    pub fn positions(&self) -> &TimeSeries {
        &self.positions
    }

    pub fn velocities(&self) -> &TimeSeries {
        &self.velocities
    }

    pub fn accelerations(&self) -> &TimeSeries {
        &self.accelerations
    }

    pub fn dt(&self) -> f64 {
        self.positions.dt()
    }

    pub fn dim(&self) -> usize {
        self.positions.dim()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.positions.duration()
    }

    pub fn state(&self, k: usize) -> JointState {
        JointState {
            q: self.positions.sample(k).to_vec(),
            qdot: self.velocities.sample(k).to_vec(),
        }
    }

    pub fn initial_state(&self) -> JointState {
        self.state(0)
    }

    pub fn final_state(&self) -> JointState {
        self.state(self.len() - 1)
    }
}

/// Sampled joint torques `u(t_k)`; synergies are actuation signals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActuationSignal(pub TimeSeries);

impl ActuationSignal {
    pub fn new(series: TimeSeries) -> Self {
        Self(series)
    }

    pub fn zeros(dt: f64, dim: usize, len: usize) -> Result<Self> {
        Ok(Self(TimeSeries::zeros(dt, dim, len)?))
    }

    pub fn series(&self) -> &TimeSeries {
        &self.0
    }

    pub fn dt(&self) -> f64 {
        self.0.dt()
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.0.duration()
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        self.0.sample(k)
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.map_data(|v| v * factor))
    }

    /// Sup norm of the difference to `other` over all samples and joints.
    pub fn max_abs_diff(&self, other: &ActuationSignal) -> f64 {
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
