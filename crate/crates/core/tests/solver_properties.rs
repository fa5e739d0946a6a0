use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synergy::arm::{
    forward_dynamics, inverse_dynamics, ActuationSignal, ArmModel, TimeSeries, Trajectory,
};
use synergy::exploration::{run_exploration, ExplorationArchive, ExplorationConfig};
use synergy::metrics::{forward_dynamics_error, projection_error, ErrorSpace};
use synergy::solver::{
    compute_task_actuation, map_m, project_onto_synergies, solve_task, BasisKind, BasisSet,
    CombinatorKind, CombinatorVector, ReachingTask,
};

fn archive() -> &'static ExplorationArchive {
    static ARCHIVE: OnceLock<ExplorationArchive> = OnceLock::new();
    ARCHIVE.get_or_init(|| {
        let cfg = ExplorationConfig {
            count: 12,
            duration: 1.0,
            amplitude: 1.0,
            cutoff: 2.0,
            ..ExplorationConfig::lowpass_random_default()
        };
        run_exploration(&ArmModel::default(), &cfg).unwrap()
    })
}

/// Exactly paired basis on the archive responses listed in `idx`.
fn paired(idx: &[usize]) -> BasisSet {
    let a = archive();
    let responses = idx.iter().map(|&i| a.responses[i].clone()).collect();
    BasisSet::from_responses(
        &ArmModel::default(),
        BasisKind::Subset,
        responses,
        a.config.initial_state.clone(),
    )
    .unwrap()
}

fn sine_signal(coef: &[[f64; 2]], dt: f64, duration: f64) -> ActuationSignal {
    let n = (duration / dt).round() as usize + 1;
    let mut data = Vec::with_capacity(2 * n);
    for k in 0..n {
        let t = k as f64 * dt;
        for j in 0..2 {
            data.push(
                coef.iter()
                    .enumerate()
                    .map(|(m, c)| c[j] * ((m + 1) as f64 * PI * t / duration).sin())
                    .sum(),
            );
        }
    }
    ActuationSignal::new(TimeSeries::new(dt, 2, data).unwrap())
}

fn coefficients() -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec(prop::array::uniform2(-2.0..2.0f64), 4)
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) })]

    #[test]
    fn projection_error_matches_refined_quadrature(a in coefficients(), b in coefficients()) {
        let (dt, t) = (5e-3, 1.0);
        let err = projection_error(&sine_signal(&a, dt, t), &sine_signal(&b, dt, t)).unwrap();
        let fine = projection_error(&sine_signal(&a, dt / 10.0, t), &sine_signal(&b, dt / 10.0, t))
            .unwrap();
        prop_assume!(fine > 1e-6);
        prop_assert!((err - fine).abs() <= 1e-6 * fine, "{} vs {}", err, fine);
    }

    #[test]
    fn projection_error_triangle_inequality(
        a in coefficients(), b in coefficients(), c in coefficients()
    ) {
        let (u, v, w) = (sine_signal(&a, 1e-2, 1.0), sine_signal(&b, 1e-2, 1.0), sine_signal(&c, 1e-2, 1.0));
        let uw = projection_error(&u, &w).unwrap();
        let uv = projection_error(&u, &v).unwrap();
        let vw = projection_error(&v, &w).unwrap();
        prop_assert!(uw <= uv + vw + 1e-12);
    }

    #[test]
    fn identity_on_basis_elements(seed in 0u64..1000, size in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx: Vec<usize> = rand::seq::index::sample(&mut rng, 12, size).into_vec();
        let basis = paired(&idx);
        let model = ArmModel::default();
        for i in 0..size {
            let e = CombinatorVector::unit(size, i, CombinatorKind::KinematicA);
            let b = map_m(&model, &basis, &e).unwrap();
            for (j, v) in b.coefficients.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((v - want).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn residual_is_orthogonal_to_synergies(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = archive().basis().unwrap();
        let q0 = basis.initial_state().q.clone();
        let q_t = vec![q0[0] + rng.gen_range(-0.05..0.05), q0[1] + rng.gen_range(-0.05..0.05)];
        let task = ReachingTask::rest_to_rest(q0, q_t, basis.duration()).unwrap();
        let s = solve_task(&ArmModel::default(), &basis, &task).unwrap();
        let u = DVector::from_column_slice(s.actuation_target.as_slice());
        let r = &u - DVector::from_column_slice(s.actuation_realized.as_slice());
        for phi in basis.synergies() {
            let p = DVector::from_column_slice(phi.as_slice());
            prop_assert!(r.dot(&p).abs() <= 1e-8 * u.norm() * p.norm());
        }
    }
}

#[test]
fn err_p_ignores_synergy_order() {
    let basis = archive().basis().unwrap();
    let perm = [4, 0, 7, 2, 11, 1, 3, 5, 10, 6, 9, 8];
    let shuffled = basis.subset(&perm).unwrap();
    let b: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
    let permuted: Vec<f64> = perm.iter().map(|&i| b[i]).collect();
    let target = archive().signals[3].scaled(0.5);
    let one = basis.combine_synergies(&CombinatorVector::synergy(b)).unwrap();
    let two = shuffled
        .combine_synergies(&CombinatorVector::synergy(permuted))
        .unwrap();
    let (e1, e2) = (projection_error(&target, &one).unwrap(), projection_error(&target, &two).unwrap());
    assert!((e1 - e2).abs() <= 1e-12 * e1);
}

#[test]
fn projection_beats_random_combinations() {
    let basis = archive().basis().unwrap().subset(&[0, 1]).unwrap();
    let u = archive().signals[5].clone();
    let b = project_onto_synergies(&basis, &u).unwrap();
    let best = projection_error(&u, &basis.combine_synergies(&b).unwrap()).unwrap();
    assert!(best > 1e-3, "target must lie outside the span");
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let c: Vec<f64> = b.coefficients.iter().map(|v| v + rng.gen_range(-1.0..1.0)).collect();
        let other = basis.combine_synergies(&CombinatorVector::synergy(c)).unwrap();
        assert!(best <= projection_error(&u, &other).unwrap());
    }
}

#[test]
fn task_actuation_is_inverse_dynamics_of_the_summed_path() {
    let model = ArmModel::default();
    let basis = archive().basis().unwrap().subset(&[2, 6, 9]).unwrap();
    let a = [0.8, -1.3, 0.45];
    let q0 = &basis.initial_state().q;
    let n = basis.n_samples();
    let samples: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            (0..2)
                .map(|d| {
                    q0[d]
                        + basis
                            .responses()
                            .iter()
                            .zip(a)
                            .map(|(r, c)| c * (r.positions().sample(k)[d] - q0[d]))
                            .sum::<f64>()
                })
                .collect()
        })
        .collect();
    let direct = inverse_dynamics(&model, &Trajectory::from_samples(basis.dt(), &samples).unwrap())
        .unwrap();
    let via = compute_task_actuation(&model, &basis, &CombinatorVector::kinematic(a.to_vec())).unwrap();
    let scale = direct.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(via.max_abs_diff(&direct) <= 1e-9 * scale);
}

#[test]
fn projection_error_bounds_the_forward_discrepancy() {
    let model = ArmModel::default();
    let basis = archive().basis().unwrap();
    let q0 = basis.initial_state().q.clone();
    let mut worst = 0.0f64;
    for k in 0..6 {
        let ang = k as f64 * PI / 3.0;
        let q_t = vec![q0[0] + 0.04 * ang.cos(), q0[1] + 0.04 * ang.sin()];
        let task = ReachingTask::rest_to_rest(q0.clone(), q_t, basis.duration()).unwrap();
        let s = solve_task(&model, &basis, &task).unwrap();
        let exact = forward_dynamics(&model, &s.actuation_target, basis.initial_state()).unwrap();
        let e_u = forward_dynamics_error(&task, &exact, ErrorSpace::Joint, &model).unwrap();
        let gap = s.errors.err_f - e_u;
        worst = worst.max(gap / s.errors.err_p);
        assert!(gap <= 10.0 * s.errors.err_p, "gap {gap:e}, err_P {:e}", s.errors.err_p);
    }
    println!("largest (err_F - err_F(u)) / err_P: {worst:.3}");
}
