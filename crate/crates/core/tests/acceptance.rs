//! End-to-end acceptance run at the default configuration. Each criterion
//! prints one PASS/FAIL line; the run exits nonzero if any of them fails.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synergy::archive::{read_archive, read_basis};
use synergy::arm::{
    forward_dynamics, forward_kinematics, inverse_dynamics, inverse_kinematics, kinetic_energy,
    ActuationSignal, ArmModel, Elbow, JointState, TimeSeries, Trajectory,
};
use synergy::experiment::{
    archive_path, cmd_compare, cmd_explore, cmd_reduce, cmd_solve, cmd_solve13,
    reduced_basis_path, solve_targets, BasisSource, ExperimentConfig, GrowthStep, TaskSpec,
};
use synergy::exploration::SignalClass;
use synergy::metrics::{
    forward_dynamics_error, interpolation_error, projection_error, ErrorReport, ErrorSpace,
};
use synergy::solver::{
    map_m, BasisKind, BasisSet, CombinatorKind, CombinatorVector, ReachingTask,
};

const FULL_ARCHIVE_RUNTIME: Duration = Duration::from_secs(5 * 60);
const COMPARE_RUNTIME: Duration = Duration::from_secs(30 * 60);

#[derive(Default)]
struct Board {
    failed: Vec<String>,
}

impl Board {
    fn check(&mut self, id: &str, ok: bool, detail: String) {
        println!("{} {id}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed.push(id.to_owned());
        }
    }
}

fn info(id: &str, detail: String) {
    println!("INFO {id}: {detail}");
}

struct Run {
    full_archive: Duration,
    reduce_compare: Duration,
}

fn run_pipeline(cfg: &ExperimentConfig, out: &Path) -> Run {
    let t0 = Instant::now();
    cmd_explore(cfg, out).unwrap();
    for class in [SignalClass::MinJerk, SignalClass::LowpassRandom] {
        cmd_solve13(cfg, &archive_path(out, class), out).unwrap();
    }
    let full_archive = t0.elapsed();
    let t1 = Instant::now();
    let random = archive_path(out, SignalClass::LowpassRandom);
    cmd_reduce(cfg, &random, out).unwrap();
    cmd_compare(cfg, &random, &reduced_basis_path(out), out).unwrap();
    let reduce_compare = t1.elapsed();
    cmd_solve(
        cfg,
        &BasisSource::Basis(reduced_basis_path(out)),
        &TaskSpec::Target { target: [0.3, 0.2] },
        out,
    )
    .unwrap();
    Run {
        full_archive,
        reduce_compare,
    }
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn full_archive(board: &mut Board, out: &Path, run: &Run) {
    for (id, tag, bounds) in [
        ("1a full archive min_jerk", "min_jerk", [1e-12, 1e-4, 1e-3]),
        ("1b full archive lowpass_random", "lowpass_random", [1e-12, 1e-2, 1e-2]),
    ] {
        let doc = read_json(&out.join(format!("solve13_{tag}_solutions.json")));
        let tasks = doc["tasks"].as_array().unwrap();
        let solved = tasks.iter().filter(|t| t.get("solution").is_some()).count();
        let max: ErrorReport = serde_json::from_value(doc["max"].clone()).unwrap();
        let ok = solved == 13
            && max.err_i <= bounds[0]
            && max.err_p <= bounds[1]
            && max.err_f <= bounds[2];
        board.check(
            id,
            ok,
            format!(
                "{solved}/13 solved, max err_I {:.2e} (<= {:.0e}), err_P {:.2e} (<= {:.0e}), err_F {:.2e} (<= {:.0e}), err_F_ee {:.2e}",
                max.err_i, bounds[0], max.err_p, bounds[1], max.err_f, bounds[2], max.err_f_ee
            ),
        );
    }
    board.check(
        "1c full archive runtime",
        run.full_archive <= FULL_ARCHIVE_RUNTIME,
        format!("explore + solve13 took {:.1} s (<= 300 s)", run.full_archive.as_secs_f64()),
    );
}

fn growth(board: &mut Board, out: &Path) {
    let doc = read_json(&out.join("reduce_summary.json"));
    let steps: Vec<GrowthStep> = serde_json::from_value(doc["summary"]["steps"].clone()).unwrap();
    let sizes: Vec<usize> = steps.iter().map(|s| s.basis_size).collect();
    let means: Vec<f64> = steps.iter().map(|s| s.mean_err_p.unwrap_or(f64::NAN)).collect();
    let monotone = means.windows(2).all(|w| w[1] <= w[0]);
    let last = *means.last().unwrap();
    let listed: Vec<String> = means.iter().map(|m| format!("{m:.3e}")).collect();
    board.check(
        "2a growth trend",
        sizes == vec![2, 3, 4, 5, 6] && monotone && last <= 1e-2,
        format!(
            "mean err_P by size {sizes:?}: [{}], final {last:.3e} (<= 1e-2)",
            listed.join(", ")
        ),
    );
    let archive_pairs = doc["summary"]["archive_pairs"].as_u64().unwrap();
    let reduced = doc["summary"]["reduced_size"].as_u64().unwrap();
    board.check(
        "2b combinator dimension",
        reduced == 6 && archive_pairs == 90,
        format!("{reduced} vs {archive_pairs} ({}-fold)", archive_pairs / reduced),
    );
}

fn separation(board: &mut Board, out: &Path, run: &Run) {
    let doc = read_json(&out.join("compare_report.json"));
    let ratio = doc["separation_ratio"].as_f64().unwrap();
    board.check(
        "3a separation",
        ratio >= 10.0 && doc["failed_solves"] == 0,
        format!(
            "reduced mean err_P {:.3e}, mean of {} subset means {:.3e}, best subset {:.3e}, ratio {ratio:.2} (>= 10)",
            doc["reduced_mean_err_P"].as_f64().unwrap(),
            doc["n_subsets"],
            doc["mean_of_subset_means_err_P"].as_f64().unwrap(),
            doc["best_subset_mean_err_P"].as_f64().unwrap(),
        ),
    );
    board.check(
        "3b separation runtime",
        run.reduce_compare <= COMPARE_RUNTIME,
        format!(
            "reduce + compare took {:.1} s (<= 1800 s)",
            run.reduce_compare.as_secs_f64()
        ),
    );
}

fn smooth_path(seed: u64, dt: f64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q0 = [rng.gen_range(-PI..PI), rng.gen_range(-2.5..2.5)];
    let terms: Vec<[f64; 4]> = (0..3)
        .map(|_| {
            [
                rng.gen_range(-0.3..0.3),
                rng.gen_range(0.5..3.0),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(0.5..3.0),
            ]
        })
        .collect();
    let n = (1.0 / dt).round() as usize + 1;
    let samples: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let t = k as f64 * dt;
            let mut q = q0.to_vec();
            for c in &terms {
                q[0] += c[0] * (1.0 - (c[1] * t).cos());
                q[1] += c[2] * (1.0 - (c[3] * t).cos());
            }
            q
        })
        .collect();
    Trajectory::from_samples(dt, &samples).unwrap()
}

fn roundtrip(board: &mut Board, model: &ArmModel) {
    let end_error = |tau: &Trajectory| {
        let u = inverse_dynamics(model, tau).unwrap();
        let back = forward_dynamics(model, &u, &tau.initial_state()).unwrap();
        back.positions()
            .last()
            .iter()
            .zip(tau.positions().last())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let (mut worst, mut order) = (0.0f64, f64::INFINITY);
    for seed in 100..120 {
        worst = worst.max(end_error(&smooth_path(seed, 5e-3)));
        let coarse = end_error(&smooth_path(seed, 4e-2));
        let fine = end_error(&smooth_path(seed, 2e-2));
        order = order.min((coarse / fine).log2());
    }
    board.check(
        "4a dynamics roundtrip",
        worst <= 1e-6 && order >= 2.0,
        format!("20 paths, worst final error {worst:.2e} rad (<= 1e-6), lowest order {order:.2} (>= 2)"),
    );
}

fn energy(board: &mut Board) {
    let model = ArmModel::default().with_damping(vec![0.0, 0.0]).unwrap();
    let u = ActuationSignal::zeros(5e-3, 2, 201).unwrap();
    let init = JointState::new(vec![0.3, -1.0], vec![1.5, -2.0]).unwrap();
    let traj = forward_dynamics(&model, &u, &init).unwrap();
    let e0 = kinetic_energy(&model, &init).unwrap();
    let drift = (0..traj.len())
        .map(|k| ((kinetic_energy(&model, &traj.state(k)).unwrap() - e0) / e0).abs())
        .fold(0.0, f64::max);
    board.check(
        "4b energy conservation",
        drift <= 1e-6,
        format!("largest relative drift over 1 s {drift:.2e} (<= 1e-6)"),
    );
}

/// Largest deviation of `M(e_i)` from `e_i`, and of `Phi M(e_i)` from `phi_i`
/// relative to the largest synergy norm.
fn identity_defects(model: &ArmModel, basis: &BasisSet) -> (f64, f64) {
    let n = basis.len();
    let scale = basis
        .synergies()
        .iter()
        .map(|s| DVector::from_column_slice(s.as_slice()).norm())
        .fold(0.0, f64::max);
    let (mut coef, mut signal) = (0.0f64, 0.0f64);
    for i in 0..n {
        let b = map_m(model, basis, &CombinatorVector::unit(n, i, CombinatorKind::KinematicA)).unwrap();
        for (j, v) in b.coefficients.iter().enumerate() {
            coef = coef.max((v - if i == j { 1.0 } else { 0.0 }).abs());
        }
        let realized = basis.combine_synergies(&b).unwrap();
        signal = signal.max(realized.max_abs_diff(&basis.synergies()[i]) / scale);
    }
    (coef, signal)
}

fn identity(board: &mut Board, model: &ArmModel, out: &Path) {
    let random = read_archive(&archive_path(out, SignalClass::LowpassRandom), model).unwrap();
    let min_jerk = read_archive(&archive_path(out, SignalClass::MinJerk), model).unwrap();
    let repaired = |a: &synergy::exploration::ExplorationArchive| {
        BasisSet::from_responses(
            model,
            BasisKind::Exploration,
            a.responses.clone(),
            a.config.initial_state.clone(),
        )
        .unwrap()
    };
    let (reduced, _) = read_basis(&reduced_basis_path(out), model).unwrap();
    let random_paired = repaired(&random);
    let mj_paired = repaired(&min_jerk);

    let mut full_rank = vec![("reduced", reduced), ("random archive", random_paired.clone())];
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for k in 0..5 {
        let idx = rand::seq::index::sample(&mut rng, random.len(), 6).into_vec();
        full_rank.push((["subset 0", "subset 1", "subset 2", "subset 3", "subset 4"][k], random_paired.subset(&idx).unwrap()));
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, basis) in &full_rank {
        assert_eq!(basis.synergy_rank(), basis.len(), "{name}");
        let (coef, _) = identity_defects(model, basis);
        ok &= coef <= 1e-8;
        parts.push(format!("{name} {coef:.1e}"));
    }
    let (_, mj_signal) = identity_defects(model, &mj_paired);
    ok &= mj_signal <= 1e-8;
    board.check(
        "4c M(e_i) = e_i",
        ok,
        format!(
            "full-rank paired bases: {} (<= 1e-8); min-jerk archive (rank {}/{}): Phi M(e_i) = phi_i to {mj_signal:.1e}",
            parts.join(", "),
            mj_paired.synergy_rank(),
            mj_paired.len()
        ),
    );

    let (mj_coef, _) = identity_defects(model, &mj_paired);
    info(
        "4c min-jerk coefficients",
        format!("max |M(e_i) - e_i| {mj_coef:.2e}; e_i is not identifiable at rank {}", mj_paired.synergy_rank()),
    );
    for (name, a) in [("random", &random), ("min-jerk", &min_jerk)] {
        let (coef, signal) = identity_defects(model, &a.basis().unwrap());
        info(
            &format!("4c stored {name} archive"),
            format!("max |M(e_i) - e_i| {coef:.2e}, relative |Phi M(e_i) - phi_i| {signal:.2e}; pairs hold to integration tolerance only"),
        );
    }
}

fn orthogonality(board: &mut Board, cfg: &ExperimentConfig, out: &Path) {
    let mut worst = 0.0f64;
    for class in [SignalClass::MinJerk, SignalClass::LowpassRandom] {
        let basis = read_archive(&archive_path(out, class), &cfg.model).unwrap().basis().unwrap();
        let targets = cfg.targets_for(&basis.initial_state().q).unwrap();
        for s in solve_targets(&cfg.model, &basis, &targets) {
            let s = s.unwrap();
            let u = DVector::from_column_slice(s.actuation_target.as_slice());
            let r = &u - DVector::from_column_slice(s.actuation_realized.as_slice());
            for phi in basis.synergies() {
                let p = DVector::from_column_slice(phi.as_slice());
                worst = worst.max(r.dot(&p).abs() / (u.norm() * p.norm()));
            }
        }
    }
    board.check(
        "4d residual orthogonality",
        worst <= 1e-8,
        format!("largest |<r, phi>| / (|u| |phi|) over both archives and all targets {worst:.2e} (<= 1e-8)"),
    );
}

fn resting_at(q_end: [f64; 2]) -> Trajectory {
    let mut samples = vec![vec![0.1, -0.5]; 3];
    samples.extend(std::iter::repeat_n(q_end.to_vec(), 6));
    Trajectory::from_samples(0.25, &samples).unwrap()
}

fn metric_oracles(board: &mut Board, model: &ArmModel) {
    let task = ReachingTask::rest_to_rest(vec![0.1, -0.5], vec![0.4, 1.2], 2.0).unwrap();
    let off = resting_at([0.7, 0.8]);
    let e_i = interpolation_error(&task, &off).unwrap();
    let e_f = forward_dynamics_error(&task, &off, ErrorSpace::Joint, model).unwrap();

    let p_t = forward_kinematics(model, &task.q_t).unwrap();
    let q_ee = inverse_kinematics(model, p_t + Vector2::new(0.03, 0.04), Elbow::Down).unwrap();
    let e_ee = forward_dynamics_error(&task, &resting_at([q_ee[0], q_ee[1]]), ErrorSpace::EndEffector, model)
        .unwrap();

    let (c, duration, dt) = (0.7, 3.0, 5e-3);
    let n = (duration / dt) as usize + 1;
    let zero = ActuationSignal::zeros(dt, 2, n).unwrap();
    let shifted = ActuationSignal::new(TimeSeries::from_samples(dt, &vec![vec![0.6 * c, 0.8 * c]; n]).unwrap());
    let e_p = projection_error(&zero, &shifted).unwrap();
    let want = c * duration.sqrt();

    let ok = (e_i - 0.5).abs() <= 1e-12
        && (e_f - 0.5).abs() <= 1e-12
        && (e_ee - 0.05).abs() <= 1e-12
        && (e_p - want).abs() <= 1e-12 * want;
    board.check(
        "4e metric oracles",
        ok,
        format!(
            "3-4-5: err_I {e_i:.15}, err_F {e_f:.15}, err_F_ee {e_ee:.15} (0.05); constant 0.7 over 3 s: err_P {e_p:.15} vs {want:.15}"
        ),
    );
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

fn determinism(board: &mut Board, cfg: &ExperimentConfig, first: &Path, second: &Path) {
    run_pipeline(cfg, second);
    let names = listing(first);
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| fs::read(first.join(n)).ok() != fs::read(second.join(n)).ok())
        .collect();
    board.check(
        "4f determinism",
        names == listing(second) && differing.is_empty(),
        format!(
            "{} files from explore, solve13, reduce, compare and solve; differing: {differing:?}",
            names.len()
        ),
    );
}

fn main() -> ExitCode {
    let cfg = ExperimentConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let (first, second) = (dir.path().join("first"), dir.path().join("second"));
    let run = run_pipeline(&cfg, &first);

    let mut board = Board::default();
    full_archive(&mut board, &first, &run);
    growth(&mut board, &first);
    separation(&mut board, &first, &run);
    roundtrip(&mut board, &cfg.model);
    energy(&mut board);
    identity(&mut board, &cfg.model, &first);
    orthogonality(&mut board, &cfg, &first);
    metric_oracles(&mut board, &cfg.model);
    determinism(&mut board, &cfg, &first, &second);

    if board.failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {:?}", board.failed);
        ExitCode::FAILURE
    }
}
