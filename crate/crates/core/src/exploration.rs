//! Exploration phase: an extensive set of actuations `Phi_0` and the arm's
//! responses `Theta_0` to each of them.
//!
//! Two signal classes are supported. *Minimum-jerk* signals are the torques
//! that drive the end effector along straight strokes with a minimum-jerk time
//! profile towards random targets. *Low-pass random* signals are uniform noise,
//! zero-phase filtered and windowed so that they vanish at both ends.

use std::f64::consts::PI;

use log::{info, warn};
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arm::{
    forward_dynamics, forward_kinematics, inverse_dynamics, inverse_kinematics,
    workspace_boundary, ActuationSignal, ArmModel, Elbow, JointState, TimeSeries, Trajectory,
};
use crate::error::{Error, Result};
use crate::solver::{BasisKind, BasisSet};

/// Attempts per minimum-jerk target before giving up.
const TARGET_RETRIES: usize = 10_000;
/// Regeneration rounds for divergent random signals.
const DIVERGENCE_RETRIES: usize = 16;
/// Final end-effector tolerance of a minimum-jerk actuation under forward dynamics [m].
pub const MIN_JERK_LANDING_TOL: f64 = 1e-4;

/// Minimum-jerk position profile `10 t^3 - 15 t^4 + 6 t^5` on `[0, 1]`.
pub fn min_jerk(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

pub fn min_jerk_velocity(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    30.0 * t * t * (1.0 - t) * (1.0 - t)
}

pub fn min_jerk_acceleration(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
}

/// Endpoint window `4 s (1 - s)` built on the minimum-jerk profile.
pub fn endpoint_window(tau: f64) -> f64 {
    let s = min_jerk(tau);
    4.0 * s * (1.0 - s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalClass {
    MinJerk,
    LowpassRandom,
}

/// Distribution of minimum-jerk stroke targets: uniform (by area) over the
/// workspace annulus, restricted to a disc around the start point, and with
/// every point of the stroke kept away from the annulus boundaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSampler {
    /// Disc radius as a fraction of the outer workspace radius.
    pub disc_radius_fraction: f64,
    /// Fraction of the annulus width kept free at both boundaries.
    pub boundary_margin: f64,
    /// Minimum distance of every stroke point from the shoulder, as a fraction
    /// of the outer workspace radius.
    #[serde(default = "default_shoulder_clearance")]
    pub shoulder_clearance: f64,
}

fn default_shoulder_clearance() -> f64 {
    0.35
}

impl Default for TargetSampler {
    fn default() -> Self {
        Self {
            disc_radius_fraction: 0.9,
            boundary_margin: 0.05,
            shoulder_clearance: default_shoulder_clearance(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplorationConfig {
    pub signal_class: SignalClass,
    pub count: usize,
    /// Signal duration T [s].
    pub duration: f64,
    pub dt: f64,
    pub initial_state: JointState,
    /// Torque scale of the random class [N m].
    pub amplitude: f64,
    /// Low-pass cutoff of the random class [Hz].
    pub cutoff: f64,
    #[serde(default)]
    pub target_sampler: TargetSampler,
    pub rng_seed: u64,
}

/// Default resting posture of the arm.
pub fn default_initial_posture() -> Vec<f64> {
    vec![PI / 3.0, -2.0 * PI / 3.0]
}

impl ExplorationConfig {
    pub fn min_jerk_default() -> Self {
        Self {
            signal_class: SignalClass::MinJerk,
            count: 100,
            duration: 3.0,
            dt: 5e-3,
            initial_state: JointState::at_rest(default_initial_posture()),
            amplitude: 0.25,
            cutoff: 0.5,
            target_sampler: TargetSampler::default(),
            rng_seed: 1,
        }
    }

    pub fn lowpass_random_default() -> Self {
        Self {
            signal_class: SignalClass::LowpassRandom,
            count: 90,
            rng_seed: 2,
            ..Self::min_jerk_default()
        }
    }

    /// Number of samples `N = T / dt + 1`.
    pub fn n_samples(&self) -> usize {
        (self.duration / self.dt).round() as usize + 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.count < 1 {
            return bad("exploration count must be at least 1".into());
        }
        if !(self.dt > 0.0 && self.duration > 0.0) {
            return bad("exploration duration and dt must be positive".into());
        }
        let steps = self.duration / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) || steps.round() < 1.0 {
            return bad(format!(
                "duration {} is not a whole number of steps of {}",
                self.duration, self.dt
            ));
        }
        let nyquist = 0.5 / self.dt;
        if !(self.cutoff > 0.0 && self.cutoff < nyquist) {
            return bad(format!("cutoff {} must lie in (0, {nyquist})", self.cutoff));
        }
        // Zero amplitude is accepted as a degenerate all-zero class.
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return bad(format!("amplitude {} must be non-negative", self.amplitude));
        }
        if !self.initial_state.is_at_rest() {
            return bad("exploration must start at rest".into());
        }
        let s = &self.target_sampler;
        if !(s.disc_radius_fraction > 0.0 && (0.0..0.5).contains(&s.boundary_margin)) {
            return bad("invalid target sampler".into());
        }
        Ok(())
    }

    fn time_grid(&self) -> (usize, f64) {
        let n = self.n_samples();
        (n, self.duration / (n - 1) as f64)
    }
}

fn branch_of(q: &[f64]) -> Elbow {
    if q[1] >= 0.0 {
        Elbow::Up
    } else {
        Elbow::Down
    }
}

/// Distance from the origin to the segment `[a, b]`.
fn segment_distance_to_origin(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    let d = b - a;
    let len2 = d.norm_squared();
    if len2 == 0.0 {
        return a.norm();
    }
    let t = (-a.dot(&d) / len2).clamp(0.0, 1.0);
    (a + d * t).norm()
}

/// Joint-space path that moves the end effector from the initial posture to
/// `target` along a straight line with a minimum-jerk time profile.
pub fn min_jerk_joint_path(
    model: &ArmModel,
    q0: &[f64],
    target: Vector2<f64>,
    n: usize,
    dt: f64,
) -> Result<Trajectory> {
    let branch = branch_of(q0);
    let p0 = forward_kinematics(model, q0)?;
    let mut samples = Vec::with_capacity(n);
    samples.push(q0.to_vec());
    let mut prev = q0.to_vec();
    for k in 1..n {
        let tau = k as f64 / (n - 1) as f64;
        let p = p0 + (target - p0) * min_jerk(tau);
        let mut q = inverse_kinematics(model, p, branch)?;
        // keep the shoulder continuous with the previous sample
        let turns = ((prev[0] - q[0]) / (2.0 * PI)).round();
        q[0] += turns * 2.0 * PI;
        prev.clone_from(&q);
        samples.push(q);
    }
    Trajectory::from_samples(dt, &samples)
}

fn sample_target(
    rng: &mut impl Rng,
    model: &ArmModel,
    p0: Vector2<f64>,
    sampler: &TargetSampler,
) -> Result<Vector2<f64>> {
    let (r_min, r_max) = workspace_boundary(model)?;
    let margin = sampler.boundary_margin * (r_max - r_min);
    let (lo, hi) = (
        (r_min + margin).max(sampler.shoulder_clearance * r_max),
        r_max - margin,
    );
    let disc = sampler.disc_radius_fraction * r_max;
    for _ in 0..TARGET_RETRIES {
        let r = rng.gen_range(r_min * r_min..=r_max * r_max).sqrt();
        let phi = rng.gen_range(-PI..PI);
        let p = Vector2::new(r * phi.cos(), r * phi.sin());
        if (p - p0).norm() > disc {
            continue;
        }
        // the norm is convex, so the farthest stroke point is an endpoint
        if p.norm().max(p0.norm()) > hi || segment_distance_to_origin(p0, p) < lo {
            continue;
        }
        return Ok(p);
    }
    Err(Error::SamplingExhausted(TARGET_RETRIES))
}

/// Actuations producing minimum-jerk end-effector strokes, with the sampled
/// targets. Each returned actuation lands the end effector within
/// [`MIN_JERK_LANDING_TOL`] of its target under forward dynamics; targets that
/// fail this check are resampled.
pub fn generate_min_jerk_actuations_with_targets(
    model: &ArmModel,
    cfg: &ExplorationConfig,
) -> Result<Vec<(ActuationSignal, Vector2<f64>)>> {
    cfg.validate()?;
    if cfg.signal_class != SignalClass::MinJerk {
        return Err(Error::InvalidConfig("expected the min_jerk signal class".into()));
    }
    let (n, dt) = cfg.time_grid();
    let q0 = &cfg.initial_state.q;
    let p0 = forward_kinematics(model, q0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut out = Vec::with_capacity(cfg.count);
    let mut rejected = 0usize;
    while out.len() < cfg.count {
        let target = sample_target(&mut rng, model, p0, &cfg.target_sampler)?;
        let path = min_jerk_joint_path(model, q0, target, n, dt)?;
        let u = inverse_dynamics(model, &path)?;
        let landed = forward_dynamics(model, &u, &cfg.initial_state)
            .and_then(|r| forward_kinematics(model, r.positions().last()))
            .map(|p| (p - target).norm() <= MIN_JERK_LANDING_TOL)
            .unwrap_or(false);
        if landed {
            out.push((u, target));
        } else {
            rejected += 1;
            if rejected > TARGET_RETRIES {
                return Err(Error::SamplingExhausted(TARGET_RETRIES));
            }
        }
    }
    if rejected > 0 {
        warn!("min-jerk exploration: {rejected} targets resampled after the landing check");
    }
    Ok(out)
}

pub fn generate_min_jerk_actuations(
    model: &ArmModel,
    cfg: &ExplorationConfig,
) -> Result<Vec<ActuationSignal>> {
    Ok(generate_min_jerk_actuations_with_targets(model, cfg)?
        .into_iter()
        .map(|(u, _)| u)
        .collect())
}

/// Zero-phase single-pole low-pass: one causal pass forward, one backward.
pub fn lowpass_zero_phase(x: &[f64], cutoff: f64, dt: f64) -> Vec<f64> {
    let rc = 1.0 / (2.0 * PI * cutoff);
    let alpha = dt / (rc + dt);
    let pass = |input: &mut dyn Iterator<Item = f64>| {
        let mut out = Vec::with_capacity(x.len());
        let mut y: Option<f64> = None;
        for v in input {
            let next = match y {
                None => v,
                Some(prev) => prev + alpha * (v - prev),
            };
            y = Some(next);
            out.push(next);
        }
        out
    };
    let fwd = pass(&mut x.iter().copied());
    let mut back = pass(&mut fwd.iter().rev().copied());
    back.reverse();
    back
}

fn draw_lowpass_signal(rng: &mut impl Rng, cfg: &ExplorationConfig, dim: usize) -> Result<ActuationSignal> {
    let (n, dt) = cfg.time_grid();
    let mut data = vec![0.0; n * dim];
    for j in 0..dim {
        let raw: Vec<f64> = (0..n)
            .map(|_| {
                if cfg.amplitude > 0.0 {
                    rng.gen_range(-cfg.amplitude..=cfg.amplitude)
                } else {
                    0.0
                }
            })
            .collect();
        let filtered = lowpass_zero_phase(&raw, cfg.cutoff, dt);
        for (k, v) in filtered.into_iter().enumerate() {
            let tau = k as f64 / (n - 1) as f64;
            data[k * dim + j] = v * endpoint_window(tau);
        }
    }
    Ok(ActuationSignal::new(TimeSeries::new(dt, dim, data)?))
}

/// Low-pass filtered uniform noise, windowed to zero at both ends.
/// Deterministic in `cfg.rng_seed`.
pub fn generate_lowpass_random_actuations(cfg: &ExplorationConfig) -> Result<Vec<ActuationSignal>> {
    cfg.validate()?;
    if cfg.signal_class != SignalClass::LowpassRandom {
        return Err(Error::InvalidConfig("expected the lowpass_random signal class".into()));
    }
    let dim = cfg.initial_state.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    (0..cfg.count).map(|_| draw_lowpass_signal(&mut rng, cfg, dim)).collect()
}

/// Exploration signals `Phi_0` paired with their dynamic responses `Theta_0`.
#[derive(Clone, Debug)]
pub struct ExplorationArchive {
    pub config: ExplorationConfig,
    pub model_fingerprint: String,
    pub signals: Vec<ActuationSignal>,
    pub responses: Vec<Trajectory>,
}

impl ExplorationArchive {
    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    /// The archive as a solver basis with the recorded signals as synergies.
    pub fn basis(&self) -> Result<BasisSet> {
        BasisSet::new(
            BasisKind::Exploration,
            self.signals.clone(),
            self.responses.clone(),
            self.config.initial_state.clone(),
        )
    }

    /// Re-integrates the listed pairs and checks that the stored responses are
    /// reproduced bit for bit.
    pub fn verify_pairs(&self, model: &ArmModel, indices: &[usize]) -> Result<()> {
        if model.fingerprint() != self.model_fingerprint {
            return Err(Error::FingerprintMismatch {
                archive: self.model_fingerprint.clone(),
                config: model.fingerprint(),
            });
        }
        if self.signals.len() != self.responses.len() {
            return Err(Error::Archive("signal and response counts differ".into()));
        }
        indices.par_iter().try_for_each(|&i| {
            let (u, theta) = self
                .signals
                .get(i)
                .zip(self.responses.get(i))
                .ok_or_else(|| Error::Archive(format!("pair {i} out of range")))?;
            let again = forward_dynamics(model, u, &self.config.initial_state)?;
            if again.positions() != theta.positions() {
                return Err(Error::Archive(format!(
                    "stored response {i} is not the forward dynamics of its signal"
                )));
            }
            Ok(())
        })
    }

    pub fn verify(&self, model: &ArmModel) -> Result<()> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.verify_pairs(model, &all)
    }
}

/// Generates the signals of the configured class and integrates each of them
/// from the configured initial state.
pub fn run_exploration(model: &ArmModel, cfg: &ExplorationConfig) -> Result<ExplorationArchive> {
    cfg.validate()?;
    let init = &cfg.initial_state;
    let integrate = |signals: &[ActuationSignal]| -> Vec<Result<Trajectory>> {
        signals
            .par_iter()
            .map(|u| forward_dynamics(model, u, init))
            .collect()
    };

    let (signals, responses) = match cfg.signal_class {
        SignalClass::MinJerk => {
            let signals = generate_min_jerk_actuations(model, cfg)?;
            let responses = integrate(&signals).into_iter().collect::<Result<Vec<_>>>()?;
            (signals, responses)
        }
        SignalClass::LowpassRandom => {
            let dim = init.dim();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            let mut signals = (0..cfg.count)
                .map(|_| draw_lowpass_signal(&mut rng, cfg, dim))
                .collect::<Result<Vec<_>>>()?;
            let mut results = integrate(&signals);
            for round in 0.. {
                let failed: Vec<usize> = results
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| matches!(r, Err(Error::Divergence { .. })))
                    .map(|(i, _)| i)
                    .collect();
                if failed.is_empty() {
                    break;
                }
                if round >= DIVERGENCE_RETRIES {
                    return Err(Error::Archive(format!(
                        "{} random signals still diverge after {DIVERGENCE_RETRIES} redraws",
                        failed.len()
                    )));
                }
                // redraw in index order so the stream stays reproducible
                for &i in &failed {
                    warn!("random signal {i} diverged, drawing a replacement");
                    signals[i] = draw_lowpass_signal(&mut rng, cfg, dim)?;
                    results[i] = forward_dynamics(model, &signals[i], init);
                }
            }
            let responses = results.into_iter().collect::<Result<Vec<_>>>()?;
            (signals, responses)
        }
    };
    info!(
        "exploration ({:?}): {} signal/response pairs",
        cfg.signal_class,
        signals.len()
    );
    Ok(ExplorationArchive {
        config: cfg.clone(),
        model_fingerprint: model.fingerprint(),
        signals,
        responses,
    })
}
