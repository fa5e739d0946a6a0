//! Reduction phase: proto-tasks are solved against the full exploration basis
//! and their interpolants become the responses of a small paired basis.
//! New proto-tasks are placed where the current basis projects worst.

use std::f64::consts::PI;
use std::fmt::Write as _;

use log::{info, warn};
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arm::{forward_kinematics, inverse_kinematics, workspace_boundary, ArmModel, Elbow};
use crate::error::{Error, Result};
use crate::metrics::interpolation_error;
use crate::solver::{solve_kinematic, solve_task, BasisKind, BasisSet, ReachingTask};

/// Largest interpolation error at which a proto-task solution is accepted.
pub const PROTO_TASK_ACCEPT_TOL: f64 = 1e-6;

/// Default exclusion radius around existing proto-tasks [m].
pub const DEFAULT_D_MIN: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    RandomSeed,
    ErrorDriven,
}

/// A point-to-point reaching task whose solution seeds the reduced basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtoTask {
    /// End-effector target [m].
    pub target: [f64; 2],
    pub provenance: Provenance,
}

impl ProtoTask {
    /// Fails unless `target` lies strictly inside the workspace annulus.
    pub fn new(model: &ArmModel, target: [f64; 2], provenance: Provenance) -> Result<Self> {
        let (r_min, r_max) = workspace_boundary(model)?;
        let r = Vector2::from(target).norm();
        if !(r > r_min && r < r_max) {
            let deficit = if r >= r_max { r - r_max } else { r_min - r };
            return Err(Error::Unreachable {
                x: target[0],
                y: target[1],
                deficit,
            });
        }
        Ok(Self { target, provenance })
    }

    /// Rest-to-rest task from the basis initial posture to the target, on the
    /// elbow branch of that posture.
    pub fn to_task(&self, model: &ArmModel, q0: &[f64], duration: f64) -> Result<ReachingTask> {
        reaching_task(model, q0, self.target, duration)
    }
}

pub(crate) fn reaching_task(
    model: &ArmModel,
    q0: &[f64],
    target: [f64; 2],
    duration: f64,
) -> Result<ReachingTask> {
    let branch = if q0.get(1).copied().unwrap_or(0.0) >= 0.0 {
        Elbow::Up
    } else {
        Elbow::Down
    };
    let q_t = inverse_kinematics(model, Vector2::from(target), branch)?;
    ReachingTask::rest_to_rest(q0.to_vec(), q_t, duration)
}

/// Polar evaluation grid over the workspace annulus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_angles: usize,
    pub n_radii: usize,
    /// Fraction of the annulus width left out at each boundary.
    pub shrink: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_angles: 24,
            n_radii: 12,
            shrink: 0.05,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_angles == 0 || self.n_radii == 0 {
            return Err(Error::InvalidConfig("grid needs at least one angle and one radius".into()));
        }
        if !(self.shrink > 0.0 && self.shrink < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "grid shrink must lie in (0, 0.5), got {}",
                self.shrink
            )));
        }
        Ok(())
    }

    /// Grid points, radius-major: all angles of the innermost ring first.
    pub fn points(&self, model: &ArmModel) -> Result<Vec<[f64; 2]>> {
        self.validate()?;
        let (r_min, r_max) = workspace_boundary(model)?;
        let (lo, hi) = self.radial_range(r_min, r_max);
        let mut out = Vec::with_capacity(self.n_angles * self.n_radii);
        for i in 0..self.n_radii {
            let r = if self.n_radii == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * i as f64 / (self.n_radii - 1) as f64
            };
            for j in 0..self.n_angles {
                let phi = 2.0 * PI * j as f64 / self.n_angles as f64;
                out.push([r * phi.cos(), r * phi.sin()]);
            }
        }
        Ok(out)
    }

    fn radial_range(&self, r_min: f64, r_max: f64) -> (f64, f64) {
        let w = r_max - r_min;
        (r_min + self.shrink * w, r_max - self.shrink * w)
    }
}

/// Projection and end-effector errors over a set of targets. Targets whose
/// solve failed carry `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMap {
    pub grid: Vec<[f64; 2]>,
    #[serde(rename = "err_P")]
    pub err_p: Vec<Option<f64>>,
    #[serde(rename = "err_F_ee")]
    pub err_f_ee: Vec<Option<f64>>,
    pub basis_size: usize,
}

fn mean(values: &[Option<f64>]) -> Option<f64> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        None
    } else {
        Some(present.iter().sum::<f64>() / present.len() as f64)
    }
}

impl ErrorMap {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn missing(&self) -> usize {
        self.err_p.iter().filter(|v| v.is_none()).count()
    }

    /// Average projection error over the targets that were solved.
    pub fn mean_err_p(&self) -> Option<f64> {
        mean(&self.err_p)
    }

    pub fn mean_err_f_ee(&self) -> Option<f64> {
        mean(&self.err_f_ee)
    }

    /// CSV with columns `x,y,err_P,err_F_ee`; failed targets leave the error
    /// fields empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,err_P,err_F_ee\n");
        let field = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for (i, p) in self.grid.iter().enumerate() {
            let _ = writeln!(
                s,
                "{:e},{:e},{},{}",
                p[0],
                p[1],
                field(self.err_p[i]),
                field(self.err_f_ee[i])
            );
        }
        s
    }

    /// Self-contained SVG heatmap of one error column on a log color scale,
    /// with the workspace boundary and the given proto-task targets.
    pub fn to_svg(&self, model: &ArmModel, column: MapColumn, proto_tasks: &[ProtoTask]) -> Result<String> {
        let values = match column {
            MapColumn::ErrP => &self.err_p,
            MapColumn::ErrFEe => &self.err_f_ee,
        };
        let (r_min, r_max) = workspace_boundary(model)?;
        let size = 480.0;
        let scale = 0.9 * size / (2.0 * r_max);
        let c = size / 2.0;
        let px = |p: [f64; 2]| (c + p[0] * scale, c - p[1] * scale);

        let logs: Vec<f64> = values
            .iter()
            .flatten()
            .filter(|v| **v > 0.0)
            .map(|v| v.log10())
            .collect();
        let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cell = (2.0 * PI * r_max / 24.0 * scale * 0.45).clamp(3.0, 14.0);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{h}" viewBox="0 0 {size} {h}">"#,
            h = size + 40.0
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        for r in [r_min, r_max] {
            let _ = writeln!(
                s,
                r#"<circle cx="{c}" cy="{c}" r="{:.2}" fill="none" stroke="black" stroke-width="1"/>"#,
                r * scale
            );
        }
        for (p, v) in self.grid.iter().zip(values) {
            let (x, y) = px(*p);
            let fill = match v {
                Some(v) if *v > 0.0 && hi > lo => heat((v.log10() - lo) / (hi - lo)),
                Some(_) => heat(0.0),
                None => "#bbbbbb".to_string(),
            };
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{cell:.2}" height="{cell:.2}" fill="{fill}"/>"#,
                x - cell / 2.0,
                y - cell / 2.0
            );
        }
        for t in proto_tasks {
            let (x, y) = px(t.target);
            let _ = writeln!(
                s,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="5" fill="none" stroke="red" stroke-width="2"/>"#
            );
        }
        let label = match column {
            MapColumn::ErrP => "err_P",
            MapColumn::ErrFEe => "err_F_ee",
        };
        let range = if logs.is_empty() {
            "no data".to_string()
        } else {
            format!("log10 range [{lo:.2}, {hi:.2}]")
        };
        let _ = writeln!(
            s,
            r#"<text x="10" y="{:.0}" font-family="sans-serif" font-size="14">{label}, {} synergies, {range}</text>"#,
            size + 25.0,
            self.basis_size
        );
        s.push_str("</svg>\n");
        Ok(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapColumn {
    ErrP,
    ErrFEe,
}

/// Blue to yellow to red ramp for `t` in `[0, 1]`.
fn heat(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let stops = [(0.0, [49.0, 54.0, 149.0]), (0.5, [254.0, 224.0, 144.0]), (1.0, [165.0, 0.0, 38.0])];
    let (a, b) = if t <= 0.5 { (stops[0], stops[1]) } else { (stops[1], stops[2]) };
    let f = (t - a.0) / (b.0 - a.0);
    let ch = |i: usize| (a.1[i] + (b.1[i] - a.1[i]) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", ch(0), ch(1), ch(2))
}

/// Reduced basis: each proto-task's interpolant over `full` becomes a
/// response, and its inverse dynamics the paired synergy.
pub fn reduce(model: &ArmModel, full: &BasisSet, proto_tasks: &[ProtoTask]) -> Result<BasisSet> {
    if full.is_empty() {
        return Err(Error::InvalidConfig("the exploration basis is empty".into()));
    }
    if proto_tasks.is_empty() {
        return Err(Error::InvalidConfig("reduction needs at least one proto-task".into()));
    }
    let q0 = &full.initial_state().q;
    let responses = proto_tasks
        .iter()
        .map(|p| {
            let task = p.to_task(model, q0, full.duration())?;
            let kin = solve_kinematic(full, &task)?;
            let interpolant = full.combine_responses(&kin.a)?;
            let err_i = interpolation_error(&task, &interpolant)?;
            if err_i > PROTO_TASK_ACCEPT_TOL {
                return Err(Error::RejectedProtoTask {
                    err_i,
                    threshold: PROTO_TASK_ACCEPT_TOL,
                });
            }
            Ok(interpolant)
        })
        .collect::<Result<Vec<_>>>()?;
    BasisSet::from_responses(model, BasisKind::Reduced, responses, full.initial_state().clone())
}

/// Solves a rest-to-rest task to every target and records its errors.
/// Failures are logged and left as missing values.
pub fn evaluate_error_map(model: &ArmModel, basis: &BasisSet, targets: &[[f64; 2]]) -> ErrorMap {
    let q0 = &basis.initial_state().q;
    let results: Vec<Option<(f64, f64)>> = targets
        .par_iter()
        .map(|&t| {
            let solved = reaching_task(model, q0, t, basis.duration())
                .and_then(|task| solve_task(model, basis, &task));
            match solved {
                Ok(s) => Some((s.errors.err_p, s.errors.err_f_ee)),
                Err(e) => {
                    warn!("error map target ({:.4}, {:.4}) failed: {e}", t[0], t[1]);
                    None
                }
            }
        })
        .collect();
    ErrorMap {
        grid: targets.to_vec(),
        err_p: results.iter().map(|r| r.map(|v| v.0)).collect(),
        err_f_ee: results.iter().map(|r| r.map(|v| v.1)).collect(),
        basis_size: basis.len(),
    }
}

/// The grid target of largest projection error among those at least `d_min`
/// from every existing proto-task; ties go to the lowest grid index.
pub fn add_proto_task(
    model: &ArmModel,
    map: &ErrorMap,
    existing: &[ProtoTask],
    d_min: f64,
) -> Result<ProtoTask> {
    if map.is_empty() {
        return Err(Error::InvalidConfig("error map is empty".into()));
    }
    let far_enough = |p: &[f64; 2]| {
        existing
            .iter()
            .all(|e| (Vector2::from(*p) - Vector2::from(e.target)).norm() >= d_min)
    };
    let mut best: Option<(usize, f64)> = None;
    for (i, (p, v)) in map.grid.iter().zip(&map.err_p).enumerate() {
        let Some(v) = *v else { continue };
        if !far_enough(p) {
            continue;
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    let (i, _) = best.ok_or(Error::Saturated { d_min })?;
    ProtoTask::new(model, map.grid[i], Provenance::ErrorDriven)
}

/// Outcome of the incremental reduction.
#[derive(Clone, Debug)]
pub struct Growth {
    pub basis: BasisSet,
    pub proto_tasks: Vec<ProtoTask>,
    /// One map per basis size, in growth order.
    pub maps: Vec<ErrorMap>,
}

/// Uniform (by area) point of the shrunk annulus.
fn random_target(rng: &mut impl Rng, model: &ArmModel, grid: &GridSpec) -> Result<[f64; 2]> {
    let (r_min, r_max) = workspace_boundary(model)?;
    let (lo, hi) = grid.radial_range(r_min, r_max);
    let r = rng.gen_range(lo * lo..=hi * hi).sqrt();
    let phi = rng.gen_range(-PI..PI);
    Ok([r * phi.cos(), r * phi.sin()])
}

const SEED_DRAWS: usize = 1000;

/// Starts from two random proto-tasks and adds error-driven ones until
/// `n_target` are in place. Saturation stops the growth early.
pub fn grow_basis(
    model: &ArmModel,
    full: &BasisSet,
    n_target: usize,
    seed: u64,
    grid: &GridSpec,
    d_min: f64,
) -> Result<Growth> {
    if n_target < 2 {
        return Err(Error::InvalidConfig(format!(
            "basis growth needs at least 2 proto-tasks, got {n_target}"
        )));
    }
    let targets = grid.points(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut proto_tasks: Vec<ProtoTask> = Vec::with_capacity(n_target);
    let mut draws = 0;
    while proto_tasks.len() < 2 {
        if draws == SEED_DRAWS {
            return Err(Error::SamplingExhausted(SEED_DRAWS));
        }
        draws += 1;
        let t = random_target(&mut rng, model, grid)?;
        let clear = proto_tasks
            .iter()
            .all(|e| (Vector2::from(t) - Vector2::from(e.target)).norm() >= d_min);
        if clear {
            proto_tasks.push(ProtoTask::new(model, t, Provenance::RandomSeed)?);
        }
    }

    let mut maps = Vec::new();
    loop {
        let basis = reduce(model, full, &proto_tasks)?;
        let map = evaluate_error_map(model, &basis, &targets);
        info!(
            "reduced basis of {} synergies: mean err_P {:.3e}",
            basis.len(),
            map.mean_err_p().unwrap_or(f64::NAN)
        );
        if proto_tasks.len() >= n_target {
            maps.push(map);
            return Ok(Growth {
                basis,
                proto_tasks,
                maps,
            });
        }
        match add_proto_task(model, &map, &proto_tasks, d_min) {
            Ok(p) => {
                maps.push(map);
                proto_tasks.push(p);
            }
            Err(Error::Saturated { .. }) => {
                warn!("proto-task selection saturated at {} proto-tasks", proto_tasks.len());
                maps.push(map);
                return Ok(Growth {
                    basis,
                    proto_tasks,
                    maps,
                });
            }
            Err(e) => return Err(e),
        }
    }
}

/// End-effector position of the basis initial posture.
pub fn initial_end_effector(model: &ArmModel, basis: &BasisSet) -> Result<[f64; 2]> {
    let p = forward_kinematics(model, &basis.initial_state().q)?;
    Ok([p.x, p.y])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(values: &[Option<f64>]) -> ErrorMap {
        ErrorMap {
            grid: (0..values.len()).map(|i| [0.2 + 0.01 * i as f64, 0.1]).collect(),
            err_p: values.to_vec(),
            err_f_ee: values.to_vec(),
            basis_size: 2,
        }
    }

    #[test]
    fn grid_has_requested_shape_inside_annulus() {
        let model = ArmModel::default();
        let pts = GridSpec::default().points(&model).unwrap();
        assert_eq!(pts.len(), 24 * 12);
        let (r_min, r_max) = workspace_boundary(&model).unwrap();
        for p in &pts {
            let r = Vector2::from(*p).norm();
            assert!(r > r_min && r < r_max);
        }
        let first_ring = Vector2::from(pts[0]).norm();
        assert!((first_ring - (r_min + 0.05 * (r_max - r_min))).abs() < 1e-12);
    }

    #[test]
    fn argmax_picks_single_maximum() {
        let model = ArmModel::default();
        let m = map(&[Some(1e-3), Some(5e-3), Some(2e-3)]);
        let p = add_proto_task(&model, &m, &[], DEFAULT_D_MIN).unwrap();
        assert_eq!(p.target, m.grid[1]);
        assert_eq!(p.provenance, Provenance::ErrorDriven);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let model = ArmModel::default();
        let m = map(&[Some(1e-3), Some(4e-3), None, Some(4e-3)]);
        let p = add_proto_task(&model, &m, &[], DEFAULT_D_MIN).unwrap();
        assert_eq!(p.target, m.grid[1]);
    }

    #[test]
    fn exclusion_radius_and_saturation() {
        let model = ArmModel::default();
        let m = map(&[Some(1e-3), Some(4e-3), Some(2e-3)]);
        let near = ProtoTask::new(&model, m.grid[1], Provenance::RandomSeed).unwrap();
        // every grid point lies within 0.02 m of the existing proto-task
        assert!(matches!(
            add_proto_task(&model, &m, std::slice::from_ref(&near), 0.05),
            Err(Error::Saturated { .. })
        ));
        // the maximum itself is excluded, the runner-up is taken
        let p = add_proto_task(&model, &m, &[near], 0.005).unwrap();
        assert_eq!(p.target, m.grid[2]);
    }

    #[test]
    fn proto_task_must_be_strictly_inside() {
        let model = ArmModel::default();
        assert!(ProtoTask::new(&model, [0.63, 0.0], Provenance::RandomSeed).is_err());
        assert!(ProtoTask::new(&model, [0.01, 0.0], Provenance::RandomSeed).is_err());
        assert!(ProtoTask::new(&model, [0.4, 0.1], Provenance::RandomSeed).is_ok());
    }

    #[test]
    fn map_csv_leaves_missing_fields_empty() {
        let m = map(&[Some(1e-3), None]);
        let csv = m.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x,y,err_P,err_F_ee");
        assert!(lines[2].ends_with(",,"));
        assert_eq!(m.missing(), 1);
        assert!((m.mean_err_p().unwrap() - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let model = ArmModel::default();
        let m = map(&[Some(1e-3), Some(1e-2), None]);
        let svg = m.to_svg(&model, MapColumn::ErrP, &[]).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 1 + 3);
    }

    #[test]
    fn growth_needs_two_proto_tasks() {
        let model = ArmModel::default();
        let cfg = crate::exploration::ExplorationConfig {
            count: 4,
            ..crate::exploration::ExplorationConfig::lowpass_random_default()
        };
        let basis = crate::exploration::run_exploration(&model, &cfg).unwrap().basis().unwrap();
        assert!(grow_basis(&model, &basis, 1, 0, &GridSpec::default(), DEFAULT_D_MIN).is_err());
    }
}
