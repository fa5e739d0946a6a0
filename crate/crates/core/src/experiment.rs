//! End-to-end experiments: exploration, the 13-target evaluation, basis
//! reduction and the comparison against random synergy subsets.
//!
//! Every command is a pure function of the configuration (all randomness
//! comes from its named seeds) and writes self-describing outputs.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use nalgebra::Vector2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::archive::{read_archive, read_basis, read_maybe_gzip, write_archive, write_basis};
use crate::arm::{forward_kinematics, workspace_boundary, ArmModel};
use crate::error::{Error, Result};
use crate::exploration::{run_exploration, ExplorationArchive, ExplorationConfig, SignalClass};
use crate::metrics::ErrorReport;
use crate::reduction::{
    grow_basis, reaching_task, GridSpec, MapColumn, DEFAULT_D_MIN,
};
use crate::solver::{solve_task, BasisKind, BasisSet, ReachingTask, TaskSolution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplorationPair {
    pub min_jerk: ExplorationConfig,
    pub lowpass_random: ExplorationConfig,
}

impl Default for ExplorationPair {
    fn default() -> Self {
        Self {
            min_jerk: ExplorationConfig::min_jerk_default(),
            lowpass_random: ExplorationConfig::lowpass_random_default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionSettings {
    pub n_proto_tasks: usize,
    pub seed: u64,
    /// Exclusion radius around existing proto-tasks [m].
    pub d_min: f64,
}

impl Default for ReductionSettings {
    fn default() -> Self {
        Self {
            n_proto_tasks: 6,
            seed: 3,
            d_min: DEFAULT_D_MIN,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetTrial {
    pub n_subsets: usize,
    pub subset_size: usize,
    pub seed: u64,
}

impl Default for SubsetTrial {
    fn default() -> Self {
        Self {
            n_subsets: 100,
            subset_size: 6,
            seed: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ArmModel,
    pub exploration: ExplorationPair,
    /// End-effector targets [m]; derived from the initial posture when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation_targets: Option<Vec<[f64; 2]>>,
    pub grid_spec: GridSpec,
    pub reduction: ReductionSettings,
    pub subset_trial: SubsetTrial,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ArmModel::default(),
            exploration: ExplorationPair::default(),
            evaluation_targets: None,
            grid_spec: GridSpec::default(),
            reduction: ReductionSettings::default(),
            subset_trial: SubsetTrial::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Radius of the default target circle around the initial end-effector point [m].
pub const TARGET_CIRCLE_RADIUS: f64 = 0.25;

/// Twelve targets evenly spaced on a circle around the initial end-effector
/// point, pulled back inside the workspace when needed, plus one target near
/// the outer boundary.
pub fn default_evaluation_targets(model: &ArmModel, q0: &[f64]) -> Result<Vec<[f64; 2]>> {
    let p0 = forward_kinematics(model, q0)?;
    let (r_min, r_max) = workspace_boundary(model)?;
    let margin = 0.05 * (r_max - r_min);
    let (lo, hi) = (r_min + margin, r_max - margin);
    let clip = |mut t: Vector2<f64>| {
        let r = t.norm();
        if r > hi {
            t *= hi / r;
        } else if r < lo {
            t *= lo / r;
        }
        [t.x, t.y]
    };
    let mut out: Vec<[f64; 2]> = (0..12)
        .map(|i| {
            let a = i as f64 * PI / 6.0;
            clip(p0 + Vector2::new(a.cos(), a.sin()) * TARGET_CIRCLE_RADIUS)
        })
        .collect();
    let heading = p0.y.atan2(p0.x) + PI / 4.0;
    out.push(clip(Vector2::new(heading.cos(), heading.sin()) * 0.9 * r_max));
    Ok(out)
}

impl ExperimentConfig {
    /// Parses a TOML or JSON (by extension) configuration on top of the
    /// defaults, so partial files are allowed.
    pub fn from_path(path: &Path) -> Result<Self> {
        let bytes = read_maybe_gzip(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|e| Error::InvalidConfig(format!("config is not UTF-8: {e}")))?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        let overlay: Value = if is_json {
            serde_json::from_str(&text)?
        } else {
            let t: toml::Value = toml::from_str(&text)?;
            serde_json::to_value(t)?
        };
        Self::from_overlay(overlay)
    }

    pub fn from_overlay(overlay: Value) -> Result<Self> {
        let mut base = serde_json::to_value(Self::default())?;
        merge(&mut base, overlay);
        let cfg: Self = serde_json::from_value(base)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.exploration.min_jerk.validate()?;
        self.exploration.lowpass_random.validate()?;
        self.grid_spec.validate()?;
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.reduction.n_proto_tasks < 2 {
            return bad("reduction needs at least 2 proto-tasks");
        }
        if self.reduction.d_min.is_nan() || self.reduction.d_min < 0.0 {
            return bad("exclusion radius must be non-negative");
        }
        if self.subset_trial.n_subsets == 0 || self.subset_trial.subset_size == 0 {
            return bad("subset trial counts must be positive");
        }
        if let Some(t) = &self.evaluation_targets {
            if t.is_empty() {
                return bad("evaluation target list is empty");
            }
        }
        Ok(())
    }

    /// Replaces every seed by `seed + k`, in the order min-jerk exploration,
    /// random exploration, reduction, subset trial.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.exploration.min_jerk.rng_seed = seed;
        self.exploration.lowpass_random.rng_seed = seed.wrapping_add(1);
        self.reduction.seed = seed.wrapping_add(2);
        self.subset_trial.seed = seed.wrapping_add(3);
        self
    }

    pub fn targets_for(&self, q0: &[f64]) -> Result<Vec<[f64; 2]>> {
        match &self.evaluation_targets {
            Some(t) => Ok(t.clone()),
            None => default_evaluation_targets(&self.model, q0),
        }
    }

    /// Short hash of the canonical JSON form, output location excluded.
    pub fn fingerprint(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(m) = v.as_object_mut() {
            m.remove("output_dir");
        }
        let bytes = serde_json::to_vec(&v)?;
        Ok(hex::encode(&Sha256::digest(&bytes)[..8]))
    }
}

/// Provenance block embedded in JSON outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fingerprints {
    pub config: String,
    pub model: String,
}

fn fingerprints(cfg: &ExperimentConfig) -> Result<Fingerprints> {
    Ok(Fingerprints {
        config: cfg.fingerprint()?,
        model: cfg.model.fingerprint(),
    })
}

fn class_tag(class: SignalClass) -> &'static str {
    match class {
        SignalClass::MinJerk => "min_jerk",
        SignalClass::LowpassRandom => "lowpass_random",
    }
}

pub fn archive_path(out: &Path, class: SignalClass) -> PathBuf {
    out.join(format!("archive_{}.json", class_tag(class)))
}

pub fn reduced_basis_path(out: &Path) -> PathBuf {
    out.join("reduced_basis.json")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn write_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

fn prepare(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

/// Files written by a command plus a command-specific summary.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CommandReport {
    pub command: String,
    pub fingerprints: Fingerprints,
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

fn ee_trace_csv(
    model: &ArmModel,
    header: &str,
    rows: impl Iterator<Item = (String, crate::arm::Trajectory)>,
) -> Result<String> {
    let mut s = format!("{header},t,x,y\n");
    for (id, traj) in rows {
        let pos = traj.positions();
        for k in 0..pos.len() {
            let p = forward_kinematics(model, pos.sample(k))?;
            let _ = writeln!(s, "{id},{:e},{:e},{:e}", pos.time(k), p.x, p.y);
        }
    }
    Ok(s)
}

/// Runs both exploration classes, writing one archive and one end-effector
/// trace file per class.
pub fn cmd_explore(cfg: &ExperimentConfig, out: &Path) -> Result<CommandReport> {
    prepare(out)?;
    let mut files = Vec::new();
    let mut counts = serde_json::Map::new();
    for ecfg in [&cfg.exploration.min_jerk, &cfg.exploration.lowpass_random] {
        let archive = run_exploration(&cfg.model, ecfg)?;
        let tag = class_tag(ecfg.signal_class);
        let path = archive_path(out, ecfg.signal_class);
        write_archive(&path, &archive)?;
        files.push(path);
        let traces = out.join(format!("explore_{tag}_traces.csv"));
        let rows = archive
            .responses
            .iter()
            .enumerate()
            .map(|(i, r)| (i.to_string(), r.clone()));
        write_text(&traces, &ee_trace_csv(&cfg.model, "signal", rows)?)?;
        files.push(traces);
        counts.insert(tag.into(), archive.len().into());
    }
    Ok(CommandReport {
        command: "explore".into(),
        fingerprints: fingerprints(cfg)?,
        files,
        summary: Value::Object(counts),
    })
}

/// Coefficients and errors of one solved task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub task: ReachingTask,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub rank: usize,
    pub under_determined: bool,
    pub errors: ErrorReport,
}

impl From<&TaskSolution> for SolutionRecord {
    fn from(s: &TaskSolution) -> Self {
        Self {
            task: s.task.clone(),
            a: s.a.coefficients.clone(),
            b: s.b.coefficients.clone(),
            rank: s.rank,
            under_determined: s.under_determined,
            errors: s.errors,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TargetOutcome {
    pub task_id: usize,
    pub target: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<SolutionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Solves one rest-to-rest task per target against `basis`.
pub fn solve_targets(
    model: &ArmModel,
    basis: &BasisSet,
    targets: &[[f64; 2]],
) -> Vec<Result<TaskSolution>> {
    let q0 = &basis.initial_state().q;
    targets
        .par_iter()
        .map(|&t| {
            let task = reaching_task(model, q0, t, basis.duration())?;
            solve_task(model, basis, &task)
        })
        .collect()
}

/// Element-wise maximum over the solved tasks.
pub fn max_errors<'a>(reports: impl IntoIterator<Item = &'a ErrorReport>) -> ErrorReport {
    reports
        .into_iter()
        .fold(ErrorReport::default(), |m, r| m.max(r))
}

fn csv_field(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn summary_row(id: &str, r: Option<&ErrorReport>) -> String {
    format!(
        "{id},{},{},{},{}\n",
        csv_field(r.map(|r| r.err_i)),
        csv_field(r.map(|r| r.err_p)),
        csv_field(r.map(|r| r.err_f)),
        csv_field(r.map(|r| r.err_f_ee))
    )
}

/// Solves the evaluation targets with the whole archive as basis. Writes the
/// per-task summary (closed by a `max` row), solutions and realized traces.
pub fn cmd_solve13(cfg: &ExperimentConfig, archive: &Path, out: &Path) -> Result<CommandReport> {
    prepare(out)?;
    let archive = read_archive(archive, &cfg.model)?;
    solve13_archive(cfg, &archive, out)
}

pub fn solve13_archive(
    cfg: &ExperimentConfig,
    archive: &ExplorationArchive,
    out: &Path,
) -> Result<CommandReport> {
    let basis = archive.basis()?;
    let tag = class_tag(archive.config.signal_class);
    let targets = cfg.targets_for(&basis.initial_state().q)?;
    let results = solve_targets(&cfg.model, &basis, &targets);

    let mut summary = String::from("task_id,err_I,err_P,err_F,err_F_ee\n");
    let mut outcomes = Vec::with_capacity(targets.len());
    let mut solved = Vec::new();
    for (i, (t, r)) in targets.iter().zip(&results).enumerate() {
        match r {
            Ok(s) => {
                summary.push_str(&summary_row(&i.to_string(), Some(&s.errors)));
                outcomes.push(TargetOutcome {
                    task_id: i,
                    target: *t,
                    solution: Some(s.into()),
                    error: None,
                });
                solved.push((i, s));
            }
            Err(e) => {
                warn!("{tag} task {i} failed: {e}");
                summary.push_str(&summary_row(&i.to_string(), None));
                outcomes.push(TargetOutcome {
                    task_id: i,
                    target: *t,
                    solution: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let max = max_errors(solved.iter().map(|(_, s)| &s.errors));
    summary.push_str(&summary_row("max", Some(&max)));

    let summary_path = out.join(format!("solve13_{tag}_summary.csv"));
    write_text(&summary_path, &summary)?;
    let solutions_path = out.join(format!("solve13_{tag}_solutions.json"));
    write_pretty(
        &solutions_path,
        &serde_json::json!({
            "fingerprints": fingerprints(cfg)?,
            "signal_class": archive.config.signal_class,
            "tasks": outcomes,
            "max": max,
        }),
    )?;
    let traces_path = out.join(format!("solve13_{tag}_traces.csv"));
    let rows = solved.iter().map(|(i, s)| (i.to_string(), s.realized.clone()));
    write_text(&traces_path, &ee_trace_csv(&cfg.model, "task_id", rows)?)?;
    info!(
        "{tag}: max err_I {:.2e}, err_P {:.2e}, err_F {:.2e}",
        max.err_i, max.err_p, max.err_f
    );
    Ok(CommandReport {
        command: "solve13".into(),
        fingerprints: fingerprints(cfg)?,
        files: vec![summary_path, solutions_path, traces_path],
        summary: serde_json::json!({
            "signal_class": archive.config.signal_class,
            "solved": solved.len(),
            "failed": targets.len() - solved.len(),
            "max": max,
        }),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthStep {
    pub basis_size: usize,
    #[serde(rename = "mean_err_P")]
    pub mean_err_p: Option<f64>,
    #[serde(rename = "mean_err_F_ee")]
    pub mean_err_f_ee: Option<f64>,
    pub missing: usize,
    /// File name inside the output directory.
    pub csv: PathBuf,
}

/// Grows the reduced basis on the given archive and writes one map per basis
/// size (CSV and err_P heatmap), the final err_F_ee heatmap and the basis.
pub fn cmd_reduce(cfg: &ExperimentConfig, archive: &Path, out: &Path) -> Result<CommandReport> {
    prepare(out)?;
    let archive = read_archive(archive, &cfg.model)?;
    let full = archive.basis()?;
    let growth = grow_basis(
        &cfg.model,
        &full,
        cfg.reduction.n_proto_tasks,
        cfg.reduction.seed,
        &cfg.grid_spec,
        cfg.reduction.d_min,
    )?;

    let mut files = Vec::new();
    let mut steps = Vec::new();
    for map in &growth.maps {
        let k = map.basis_size;
        let csv = out.join(format!("reduce_map_{k}.csv"));
        write_text(&csv, &map.to_csv())?;
        let svg = out.join(format!("reduce_map_{k}_err_P.svg"));
        write_text(&svg, &map.to_svg(&cfg.model, MapColumn::ErrP, &growth.proto_tasks[..k])?)?;
        files.push(csv.clone());
        files.push(svg);
        steps.push(GrowthStep {
            basis_size: k,
            mean_err_p: map.mean_err_p(),
            mean_err_f_ee: map.mean_err_f_ee(),
            missing: map.missing(),
            csv: PathBuf::from(format!("reduce_map_{k}.csv")),
        });
    }
    if let Some(last) = growth.maps.last() {
        let svg = out.join(format!("reduce_map_{}_err_F_ee.svg", last.basis_size));
        write_text(&svg, &last.to_svg(&cfg.model, MapColumn::ErrFEe, &growth.proto_tasks)?)?;
        files.push(svg);
    }
    let basis_path = reduced_basis_path(out);
    write_basis(&basis_path, &growth.basis, &cfg.model, &growth.proto_tasks)?;
    files.push(basis_path);
    let proto_path = out.join("proto_tasks.json");
    write_pretty(&proto_path, &growth.proto_tasks)?;
    files.push(proto_path);

    let summary = serde_json::json!({
        "archive_pairs": archive.len(),
        "reduced_size": growth.basis.len(),
        "steps": steps,
    });
    let summary_path = out.join("reduce_summary.json");
    write_pretty(
        &summary_path,
        &serde_json::json!({ "fingerprints": fingerprints(cfg)?, "summary": &summary }),
    )?;
    files.push(summary_path);
    Ok(CommandReport {
        command: "reduce".into(),
        fingerprints: fingerprints(cfg)?,
        files,
        summary,
    })
}

/// Box-plot statistics: quartiles by linear interpolation, whiskers at the
/// most extreme samples within 1.5 IQR of the box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
    pub mean: f64,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl BoxStats {
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let (q1, median, q3) = (quantile(&s, 0.25), quantile(&s, 0.5), quantile(&s, 0.75));
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside: Vec<f64> = s.iter().copied().filter(|v| *v >= lo_fence && *v <= hi_fence).collect();
        Some(Self {
            n: s.len(),
            q1,
            median,
            q3,
            whisker_low: inside.first().copied().unwrap_or(q1),
            whisker_high: inside.last().copied().unwrap_or(q3),
            outliers: s.iter().copied().filter(|v| *v < lo_fence || *v > hi_fence).collect(),
            mean: s.iter().sum::<f64>() / s.len() as f64,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetComparison {
    pub task_id: usize,
    pub target: [f64; 2],
    #[serde(rename = "err_P")]
    pub err_p: Option<BoxStats>,
    #[serde(rename = "err_F_ee")]
    pub err_f_ee: Option<BoxStats>,
    #[serde(rename = "reduced_err_P")]
    pub reduced_err_p: Option<f64>,
    #[serde(rename = "reduced_err_F_ee")]
    pub reduced_err_f_ee: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub fingerprints: Fingerprints,
    pub n_subsets: usize,
    pub subset_size: usize,
    pub subsets: Vec<Vec<usize>>,
    pub per_target: Vec<TargetComparison>,
    /// Mean err_P over the targets, one entry per subset.
    #[serde(rename = "subset_mean_err_P")]
    pub subset_mean_err_p: Vec<f64>,
    #[serde(rename = "mean_of_subset_means_err_P")]
    pub mean_of_subset_means_err_p: f64,
    #[serde(rename = "best_subset_mean_err_P")]
    pub best_subset_mean_err_p: f64,
    #[serde(rename = "reduced_mean_err_P")]
    pub reduced_mean_err_p: f64,
    /// Mean of subset means divided by the reduced-basis mean.
    pub separation_ratio: f64,
    /// No reduced synergy coincides with an archive signal.
    pub reduced_disjoint_from_archive: bool,
    pub failed_solves: usize,
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Random subsets of the archive against the reduced basis on the evaluation
/// targets.
pub fn compare(
    cfg: &ExperimentConfig,
    archive: &ExplorationArchive,
    reduced: &BasisSet,
) -> Result<ComparisonReport> {
    let trial = &cfg.subset_trial;
    if reduced.len() != trial.subset_size {
        return Err(Error::InvalidConfig(format!(
            "reduced basis has {} synergies, subset size is {}",
            reduced.len(),
            trial.subset_size
        )));
    }
    if trial.subset_size > archive.len() {
        return Err(Error::InvalidConfig(format!(
            "subset size {} exceeds the archive size {}",
            trial.subset_size,
            archive.len()
        )));
    }
    let full = archive.basis()?;
    let targets = cfg.targets_for(&full.initial_state().q)?;

    let mut rng = ChaCha8Rng::seed_from_u64(trial.seed);
    let subsets: Vec<Vec<usize>> = (0..trial.n_subsets)
        .map(|_| {
            let mut idx = sample(&mut rng, archive.len(), trial.subset_size).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect();

    let errors_of = |basis: &BasisSet| -> Vec<Option<(f64, f64)>> {
        solve_targets(&cfg.model, basis, &targets)
            .into_iter()
            .map(|r| r.ok().map(|s| (s.errors.err_p, s.errors.err_f_ee)))
            .collect()
    };
    let subset_errors: Vec<Vec<Option<(f64, f64)>>> = subsets
        .par_iter()
        .map(|idx| full.subset(idx).map(|b| errors_of(&b)))
        .collect::<Result<_>>()?;
    let reduced_errors = errors_of(reduced);

    let failed_solves = subset_errors
        .iter()
        .chain(std::iter::once(&reduced_errors))
        .flatten()
        .filter(|e| e.is_none())
        .count();

    let per_target = targets
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let p: Vec<f64> = subset_errors.iter().filter_map(|s| s[i].map(|e| e.0)).collect();
            let f: Vec<f64> = subset_errors.iter().filter_map(|s| s[i].map(|e| e.1)).collect();
            TargetComparison {
                task_id: i,
                target: *t,
                err_p: BoxStats::from_samples(&p),
                err_f_ee: BoxStats::from_samples(&f),
                reduced_err_p: reduced_errors[i].map(|e| e.0),
                reduced_err_f_ee: reduced_errors[i].map(|e| e.1),
            }
        })
        .collect();

    let subset_mean_err_p: Vec<f64> = subset_errors
        .iter()
        .map(|s| mean_of(s.iter().flatten().map(|e| e.0)))
        .collect();
    let mean_of_subset_means = mean_of(subset_mean_err_p.iter().copied());
    let best = subset_mean_err_p.iter().copied().fold(f64::INFINITY, f64::min);
    let reduced_mean = mean_of(reduced_errors.iter().flatten().map(|e| e.0));

    let disjoint = !reduced
        .synergies()
        .iter()
        .any(|phi| archive.signals.iter().any(|s| s == phi));

    Ok(ComparisonReport {
        fingerprints: fingerprints(cfg)?,
        n_subsets: trial.n_subsets,
        subset_size: trial.subset_size,
        subsets,
        per_target,
        subset_mean_err_p,
        mean_of_subset_means_err_p: mean_of_subset_means,
        best_subset_mean_err_p: best,
        reduced_mean_err_p: reduced_mean,
        separation_ratio: mean_of_subset_means / reduced_mean,
        reduced_disjoint_from_archive: disjoint,
        failed_solves,
    })
}

/// Runs [`compare`] from files and writes the report plus box-plot-ready
/// long-format data.
pub fn cmd_compare(
    cfg: &ExperimentConfig,
    archive: &Path,
    basis: &Path,
    out: &Path,
) -> Result<CommandReport> {
    prepare(out)?;
    let archive = read_archive(archive, &cfg.model)?;
    let (reduced, _) = read_basis(basis, &cfg.model)?;
    let report = compare(cfg, &archive, &reduced)?;

    let report_path = out.join("compare_report.json");
    write_pretty(&report_path, &report)?;

    let full = archive.basis()?;
    let targets = cfg.targets_for(&full.initial_state().q)?;
    let mut csv = String::from("task_id,source,err_P,err_F_ee\n");
    let reduced_rows = solve_targets(&cfg.model, &reduced, &targets);
    for (si, idx) in report.subsets.iter().enumerate() {
        let rows = solve_targets(&cfg.model, &full.subset(idx)?, &targets);
        for (ti, r) in rows.iter().enumerate() {
            let e = r.as_ref().ok().map(|s| s.errors);
            let _ = writeln!(
                csv,
                "{ti},subset_{si},{},{}",
                csv_field(e.map(|e| e.err_p)),
                csv_field(e.map(|e| e.err_f_ee))
            );
        }
    }
    for (ti, r) in reduced_rows.iter().enumerate() {
        let e = r.as_ref().ok().map(|s| s.errors);
        let _ = writeln!(
            csv,
            "{ti},reduced,{},{}",
            csv_field(e.map(|e| e.err_p)),
            csv_field(e.map(|e| e.err_f_ee))
        );
    }
    let csv_path = out.join("compare_boxplot.csv");
    write_text(&csv_path, &csv)?;

    Ok(CommandReport {
        command: "compare".into(),
        fingerprints: report.fingerprints.clone(),
        files: vec![report_path, csv_path],
        summary: serde_json::json!({
            "mean_of_subset_means_err_P": report.mean_of_subset_means_err_p,
            "best_subset_mean_err_P": report.best_subset_mean_err_p,
            "reduced_mean_err_P": report.reduced_mean_err_p,
            "separation_ratio": report.separation_ratio,
            "reduced_disjoint_from_archive": report.reduced_disjoint_from_archive,
        }),
    })
}

/// A task given either in joint space or as an end-effector target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TaskSpec {
    Joint(ReachingTask),
    Target { target: [f64; 2] },
}

/// Source of the basis for a single solve.
#[derive(Clone, Debug)]
pub enum BasisSource {
    Archive(PathBuf),
    Basis(PathBuf),
}

/// Solves one task and writes its record and sampled trajectories.
pub fn cmd_solve(
    cfg: &ExperimentConfig,
    source: &BasisSource,
    task: &TaskSpec,
    out: &Path,
) -> Result<CommandReport> {
    prepare(out)?;
    let basis = match source {
        BasisSource::Archive(p) => read_archive(p, &cfg.model)?.basis()?,
        BasisSource::Basis(p) => read_basis(p, &cfg.model)?.0,
    };
    let task = match task {
        TaskSpec::Joint(t) => t.clone(),
        TaskSpec::Target { target } => {
            reaching_task(&cfg.model, &basis.initial_state().q, *target, basis.duration())?
        }
    };
    let s = solve_task(&cfg.model, &basis, &task)?;
    let record = SolutionRecord::from(&s);

    let json_path = out.join("solve_solution.json");
    write_pretty(
        &json_path,
        &serde_json::json!({ "fingerprints": fingerprints(cfg)?, "solution": &record }),
    )?;
    let mut csv = String::from(
        "t,q1_interp,q2_interp,u1_target,u2_target,u1_realized,u2_realized,q1_realized,q2_realized\n",
    );
    for k in 0..s.interpolant.len() {
        let qi = s.interpolant.positions().sample(k);
        let ut = s.actuation_target.sample(k);
        let ur = s.actuation_realized.sample(k);
        let qr = s.realized.positions().sample(k);
        let _ = writeln!(
            csv,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            s.interpolant.positions().time(k),
            qi[0],
            qi[1],
            ut[0],
            ut[1],
            ur[0],
            ur[1],
            qr[0],
            qr[1]
        );
    }
    let csv_path = out.join("solve_trajectories.csv");
    write_text(&csv_path, &csv)?;
    Ok(CommandReport {
        command: "solve".into(),
        fingerprints: fingerprints(cfg)?,
        files: vec![json_path, csv_path],
        summary: serde_json::to_value(&record)?,
    })
}

/// Kind marker of a stored basis file, for callers that accept either kind.
pub fn stored_kind(path: &Path) -> Result<BasisKind> {
    let v: Value = serde_json::from_slice(&read_maybe_gzip(path)?)?;
    let kind = v
        .get("kind")
        .cloned()
        .ok_or_else(|| Error::Archive("missing kind marker".into()))?;
    Ok(serde_json::from_value(kind)?)
}
