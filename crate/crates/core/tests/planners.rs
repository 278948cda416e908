use grasp_core::numerics::{gauss_vec, max_eig_sym, vector, DenseMatrix, RngStream};
use grasp_core::objectives::{grasp_value, shooting_value, GoalWeights, PlanProblem};
use grasp_core::planners::{
    cem_refit, plan, plan_cem, plan_gd, plan_gd_noisy, plan_grasp, plan_lifted, plan_lifted_from, CemConfig, GdConfig,
    GraspConfig, LiftedConfig, PlannerConfig,
};
use grasp_core::worldmodel::{rollout, LinearModel, WorldModel};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn ident(n: usize) -> LinearModel<f64> {
    LinearModel::new(DenseMatrix::identity(n), DenseMatrix::identity(n)).unwrap()
}

fn scaled(n: usize, a: f64) -> LinearModel<f64> {
    LinearModel::new(DenseMatrix::identity(n).scaled(a), DenseMatrix::identity(n)).unwrap()
}

fn random_linear(rng: &mut RngStream, n: usize, k: usize) -> LinearModel<f64> {
    let a = DenseMatrix::new(n, n, gauss_vec(rng, n * n, 0.3).unwrap())
        .unwrap()
        .add(&DenseMatrix::identity(n).scaled(0.6))
        .unwrap();
    let b = DenseMatrix::new(n, k, gauss_vec(rng, n * k, 0.7).unwrap()).unwrap();
    LinearModel::new(a, b).unwrap()
}

/// `[A^{T−1}B, …, B]` and `A^T s0`, built by simulation of unit actions.
fn shooting_map(m: &LinearModel<f64>, s0: &[f64], horizon: usize) -> (DMatrix<f64>, DVector<f64>) {
    let (n, k) = (m.state_dim(), m.action_dim());
    let zero = vec![vec![0.0; k]; horizon];
    let free = rollout(m, s0, &zero).unwrap().terminal().to_vec();
    let mut c = DMatrix::zeros(n, k * horizon);
    for j in 0..k * horizon {
        let mut a = zero.clone();
        a[j / k][j % k] = 1.0;
        let zs = vec![0.0; n];
        let col = rollout(m, &zs, &a).unwrap().terminal().to_vec();
        for i in 0..n {
            c[(i, j)] = col[i];
        }
    }
    (c, DVector::from_vec(free))
}

/// Optimal shooting loss via the normal equations of `min ‖C a − (g − A^T s0)‖²`.
fn oracle_loss(m: &LinearModel<f64>, s0: &[f64], g: &[f64], horizon: usize) -> f64 {
    let (c, free) = shooting_map(m, s0, horizon);
    let rhs = DVector::from_column_slice(g) - free;
    let gram = &c * c.transpose();
    let y = gram.clone().lu().solve(&rhs).expect("controllable");
    (&c * (c.transpose() * y) - rhs).norm_squared()
}

fn lambda_shooting(m: &LinearModel<f64>, s0: &[f64], horizon: usize) -> f64 {
    let (c, _) = shooting_map(m, s0, horizon);
    let h = (c.transpose() * &c) * 2.0;
    h.symmetric_eigen().eigenvalues.max()
}

#[test]
fn gd_trivial_at_goal() {
    let m = ident(2);
    let s = [0.3, 0.4];
    let p = PlanProblem::new(&m, &s, &s, 5).unwrap();
    let r = plan_gd(&p, &GdConfig::default(), &mut RngStream::new(0, 0)).unwrap();
    assert_eq!(r.final_loss, 0.0);
    assert!(r.actions.iter().flatten().all(|&x| x == 0.0));
    assert_eq!(r.iterations_used, 0);
}

#[test]
fn gd_identity_reaches_goal() {
    let m = ident(2);
    let (s0, g) = ([0.0, 0.0], [1.0, -2.0]);
    let p = PlanProblem::new(&m, &s0, &g, 4).unwrap();
    let eta = 1.0 / lambda_shooting(&m, &s0, 4);
    let cfg = GdConfig { eta, ..GdConfig::default() };
    let r = plan_gd(&p, &cfg, &mut RngStream::new(1, 0)).unwrap();
    assert!(r.final_loss < 1e-8, "{}", r.final_loss);
    let total = r.actions.iter().fold(vec![0.0; 2], |acc, a| vector::add(&acc, a));
    for i in 0..2 {
        assert!((total[i] - (g[i] - s0[i])).abs() < 1e-4);
    }
}

#[test]
fn gd_diverges_on_unstable_system_above_critical_rate() {
    let m = scaled(2, 1.5);
    let (s0, g) = ([0.0, 0.0], [1.0, 1.0]);
    let p = PlanProblem::new(&m, &s0, &g, 30).unwrap();
    let lam = lambda_shooting(&m, &s0, 30);
    let stable = plan_gd(&p, &GdConfig { eta: 1.0 / lam, steps: 50, ..GdConfig::default() }, &mut RngStream::new(0, 0)).unwrap();
    assert!(!stable.diverged);
    let r = plan_gd(&p, &GdConfig { eta: 2.5 / lam, steps: 500, ..GdConfig::default() }, &mut RngStream::new(0, 0)).unwrap();
    assert!(r.diverged);
    assert!(r.final_loss.is_finite());
}

#[test]
fn convex_planners_match_oracle() {
    let mut rng = RngStream::new(7, 0);
    for case in 0..5 {
        let m = random_linear(&mut rng, 3, 2);
        let s0 = gauss_vec(&mut rng, 3, 1.0).unwrap();
        let g = gauss_vec(&mut rng, 3, 1.0).unwrap();
        let horizon = 4;
        let best = oracle_loss(&m, &s0, &g, horizon);
        assert!(best < 1e-12, "reachable goal expected");
        let p = PlanProblem::new(&m, &s0, &g, horizon).unwrap();
        let lam = lambda_shooting(&m, &s0, horizon);

        let gd = plan_gd(&p, &GdConfig { eta: 1.0 / lam, steps: 20_000, stop_loss: 1e-10, ..GdConfig::default() }, &mut rng.derive(1)).unwrap();
        let lifted = plan_lifted(
            &p,
            &LiftedConfig { eta_a: 0.05, eta_s: 0.05, steps: 50_000, stop_loss: 1e-14, ..LiftedConfig::default() },
            &mut rng.derive(2),
        )
        .unwrap();
        let grasp = plan_grasp(
            &p,
            &GraspConfig {
                sigma_state: 0.0,
                // goal shaping only on the last prediction, which the pinned
                // terminal state already demands, so the fixed point is feasible
                goal_weights: Some([vec![0.0; horizon - 1], vec![0.5]].concat()),
                k_sync: Some(1),
                j_sync: 1,
                eta_sync: 1.0 / lam,
                steps: 20_000,
                stop_loss: 1e-10,
                ..GraspConfig::default()
            },
            &mut rng.derive(3),
        )
        .unwrap();
        for (name, r) in [("gd", &gd), ("lifted", &lifted), ("grasp", &grasp)] {
            assert!(r.final_loss < 1e-6, "case {case} {name}: {}", r.final_loss);
            assert!((r.final_loss - best).abs() < 1e-6);
        }
    }
}

#[test]
fn lifted_feasible_init_is_stationary() {
    let m = random_linear(&mut RngStream::new(3, 0), 2, 2);
    let s0 = [0.5, -0.5];
    let actions = vec![vec![0.2, 0.1]; 6];
    let traj = rollout(&m, &s0, &actions).unwrap();
    let g = traj.terminal().to_vec();
    let p = PlanProblem::new(&m, &s0, &g, 6).unwrap();
    let cfg = LiftedConfig { steps: 200, record_trace: true, ..LiftedConfig::default() };
    let states = traj.states[1..6].to_vec();
    let r = plan_lifted_from(&p, &cfg, states, actions, &mut RngStream::new(0, 0)).unwrap();
    assert!(r.trace.unwrap().records.iter().all(|t| t.loss < 1e-9));
    assert!(r.final_loss < 1e-9, "{}", r.final_loss);
}

#[test]
fn planners_are_bit_reproducible() {
    let m = random_linear(&mut RngStream::new(11, 0), 3, 2);
    let (s0, g) = ([0.0, 0.0, 0.0], [1.0, 0.5, -0.5]);
    let p = PlanProblem::new(&m, &s0, &g, 8).unwrap();
    let configs = [
        PlannerConfig::Gd(GdConfig { steps: 100, sigma_action: 0.1, sigma_state: 0.05, ..GdConfig::default() }),
        PlannerConfig::Lifted(LiftedConfig { steps: 100, sigma_state: 0.05, ..LiftedConfig::default() }),
        PlannerConfig::Grasp(GraspConfig { steps: 100, k_sync: Some(20), eta_s: 0.1, eta_a: 0.02, ..GraspConfig::default() }),
        PlannerConfig::Cem(CemConfig { iterations: 10, population: 64, elites: 8, ..CemConfig::default() }),
    ];
    for cfg in &configs {
        let a = plan(&p, cfg, &mut RngStream::new(5, 0)).unwrap();
        let b = plan(&p, cfg, &mut RngStream::new(5, 0)).unwrap();
        assert_eq!(a.actions, b.actions, "{}", cfg.name());
        assert_eq!(a.final_loss.to_bits(), b.final_loss.to_bits());
        assert_eq!(a.iterations_used, b.iterations_used);
    }
}

#[test]
fn final_loss_is_reevaluated() {
    let m = random_linear(&mut RngStream::new(13, 0), 2, 2);
    let (s0, g) = ([0.0, 0.0], [2.0, 1.0]);
    let p = PlanProblem::new(&m, &s0, &g, 10).unwrap();
    let configs = [
        PlannerConfig::Gd(GdConfig { steps: 30, ..GdConfig::default() }),
        PlannerConfig::Gd(GdConfig { steps: 30, sigma_action: 0.2, ..GdConfig::default() }),
        PlannerConfig::Lifted(LiftedConfig { steps: 30, sigma_state: 0.1, ..LiftedConfig::default() }),
        PlannerConfig::Grasp(GraspConfig { steps: 30, k_sync: Some(7), ..GraspConfig::default() }),
        PlannerConfig::Cem(CemConfig { iterations: 5, ..CemConfig::default() }),
    ];
    for cfg in &configs {
        let r = plan(&p, cfg, &mut RngStream::new(2, 0)).unwrap();
        let v = shooting_value(&p, &r.actions).unwrap();
        assert!((r.final_loss - v).abs() <= 1e-12, "{}", cfg.name());
    }
}

#[test]
fn noiseless_gd_noisy_equals_gd() {
    let m = random_linear(&mut RngStream::new(17, 0), 3, 3);
    let (s0, g) = ([0.1, 0.2, 0.3], [1.0, -1.0, 0.0]);
    let p = PlanProblem::new(&m, &s0, &g, 6).unwrap();
    let cfg = GdConfig { steps: 200, record_trace: true, ..GdConfig::default() };
    let a = plan_gd(&p, &cfg, &mut RngStream::new(9, 0)).unwrap();
    let b = plan_gd_noisy(&p, &cfg, &mut RngStream::new(9, 0)).unwrap();
    assert_eq!(a.actions, b.actions);
    assert_eq!(a.final_loss.to_bits(), b.final_loss.to_bits());
    let la: Vec<u64> = a.trace.unwrap().records.iter().map(|r| r.loss.to_bits()).collect();
    let lb: Vec<u64> = b.trace.unwrap().records.iter().map(|r| r.loss.to_bits()).collect();
    assert_eq!(la, lb);
}

/// Action noise on a quadratic loss: the first noisy update, divided by `−η`,
/// is a sample of `∇L(a + σξ)`. For `L = ‖C a − b‖²` the smoothed loss is
/// `L(a) + σ² tr(CᵀC)`, whose gradient equals `∇L(a)`; finite differences of
/// a Monte-Carlo smoothed loss must agree with the sample mean.
#[test]
fn action_noise_gradient_is_smoothed_gradient() {
    let m = random_linear(&mut RngStream::new(19, 0), 2, 2);
    let (s0, g) = ([0.0, 0.0], [1.0, 2.0]);
    let horizon = 3;
    let p = PlanProblem::new(&m, &s0, &g, horizon).unwrap();
    let sigma = 0.3;
    let draws = 10_000;
    let eta = 1.0;
    let dim = horizon * 2;
    let mut samples = vec![Vec::with_capacity(draws); dim];
    for d in 0..draws {
        let cfg = GdConfig { steps: 1, eta, sigma_action: sigma, ..GdConfig::default() };
        let r = plan_gd_noisy(&p, &GdConfig { record_trace: true, ..cfg }, &mut RngStream::new(d as u64, 3)).unwrap();
        let tr = r.trace.unwrap();
        let after = vector::flatten(&tr.records[1].actions);
        for (i, x) in after.iter().enumerate() {
            samples[i].push(-x / eta);
        }
    }
    // Smoothed loss by common-random-number Monte Carlo, then central differences.
    let mut crn = RngStream::new(99, 0);
    let noise: Vec<Vec<f64>> = (0..draws).map(|_| gauss_vec(&mut crn, dim, sigma).unwrap()).collect();
    let smoothed = |a: &[f64]| -> f64 {
        let vals: Vec<f64> = noise
            .iter()
            .map(|z| shooting_value(&p, &vector::unflatten(&vector::add(a, z), 2)).unwrap())
            .collect();
        vector::pairwise_sum(&vals) / draws as f64
    };
    let a0 = vec![0.0; dim];
    let h = 1e-3;
    for i in 0..dim {
        let (mut ap, mut am) = (a0.clone(), a0.clone());
        ap[i] += h;
        am[i] -= h;
        let fd = (smoothed(&ap) - smoothed(&am)) / (2.0 * h);
        let xs = &samples[i];
        let mean = xs.iter().sum::<f64>() / draws as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        // The FD estimate carries its own Monte-Carlo error of the same size.
        assert!((mean - fd).abs() <= 3.0 * se * std::f64::consts::SQRT_2, "coord {i}: {mean} vs {fd} (se {se})");
    }
}

/// Rollout noise with `A = 1.5 I`: the covariance of noisy terminal states
/// follows `Σ_{t+1} = A Σ_t Aᵀ + σ² I`. The first noisy gradient is linear in
/// the terminal state (`∇ = 2 C_Tᵀ (s_T − g)` with the last block `2 Bᵀ(...)`),
/// so the sample variance of the last action-gradient block recovers Σ_T.
#[test]
fn rollout_noise_covariance_follows_linear_recursion() {
    let m = scaled(1, 1.5);
    let (s0, g) = ([0.0], [5.0]);
    let sigma = 0.1;
    for horizon in [2usize, 4, 8] {
        let p = PlanProblem::new(&m, &s0, &g, horizon).unwrap();
        let draws = 4000;
        let xs: Vec<f64> = (0..draws)
            .map(|d| {
                let cfg = GdConfig { steps: 1, eta: 1.0, sigma_state: sigma, record_trace: true, ..GdConfig::default() };
                let r = plan_gd_noisy(&p, &cfg, &mut RngStream::new(d as u64, 4)).unwrap();
                // last-step gradient = 2 (s_T − g), B = 1
                -r.trace.unwrap().records[1].actions[horizon - 1][0] / 2.0 + g[0]
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / draws as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let mut sig = 0.0;
        for _ in 0..horizon {
            sig = 1.5 * sig * 1.5 + sigma * sigma;
        }
        // var of a sample variance: 2σ⁴/(N−1)
        let se = sig * (2.0 / (draws - 1) as f64).sqrt();
        assert!((var - sig).abs() < 3.0 * se, "T={horizon}: {var} vs {sig}");
    }
}

#[test]
fn grasp_descends_without_noise_or_sync() {
    let mut rng = RngStream::new(23, 0);
    let m = random_linear(&mut rng, 2, 2);
    let (s0, g) = ([0.0, 0.0], [1.5, -1.0]);
    let horizon = 8;
    let p = PlanProblem::new(&m, &s0, &g, horizon).unwrap();
    let gamma = 0.5;
    // Block Hessian bound 2(1 + (1+γ)‖B‖²) + slack caps a safe step size.
    let b = m.b();
    let bn = max_eig_sym(&b.transpose().matmul(b).unwrap(), 1e-12).unwrap();
    let l = 2.0 * (2.0 + (1.0 + gamma) * bn);
    let eta = 0.5 / l;
    let cfg = GraspConfig {
        sigma_state: 0.0,
        k_sync: None,
        j_sync: 0,
        eta_a: eta,
        eta_s: eta,
        gamma,
        steps: 300,
        record_trace: true,
        ..GraspConfig::default()
    };
    let r = plan_grasp(&p, &cfg, &mut RngStream::new(1, 0)).unwrap();
    let recs = r.trace.unwrap().records;
    for w in recs.windows(2) {
        assert!(w[1].loss <= w[0].loss + 1e-12, "{} -> {}", w[0].loss, w[1].loss);
    }
    let states = recs.last().unwrap().states.clone().unwrap();
    let last = grasp_value(&p, &states, &recs.last().unwrap().actions, &GoalWeights::Constant(gamma)).unwrap();
    assert!(last <= recs[0].loss);
}

#[test]
fn grasp_no_sync_flag_disables_rollouts() {
    let m = ident(2);
    let (s0, g) = ([0.0, 0.0], [1.0, 1.0]);
    let p = PlanProblem::new(&m, &s0, &g, 5).unwrap();
    let cfg = GraspConfig { k_sync: None, steps: 20, record_trace: true, ..GraspConfig::default() };
    let r = plan_grasp(&p, &cfg, &mut RngStream::new(0, 0)).unwrap();
    assert!(r.trace.unwrap().records.iter().all(|t| t.shooting_loss.is_none()));
    let cfg = GraspConfig { k_sync: Some(5), steps: 20, record_trace: true, ..GraspConfig::default() };
    let r = plan_grasp(&p, &cfg, &mut RngStream::new(0, 0)).unwrap();
    let synced: Vec<usize> = r
        .trace
        .unwrap()
        .records
        .iter()
        .filter(|t| t.shooting_loss.is_some())
        .map(|t| t.iteration)
        .collect();
    assert_eq!(synced, vec![4, 9, 14, 19]);
}

#[test]
fn cem_refit_with_all_elites_is_sample_moments() {
    let samples = [vec![1.0, 0.0], vec![3.0, 0.0], vec![2.0, 0.0]];
    let refs: Vec<&[f64]> = samples.iter().map(|s| s.as_slice()).collect();
    let (mean, std) = cem_refit(&refs, 0.05);
    assert_eq!(mean, vec![2.0, 0.0]);
    assert!((std[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert_eq!(std[1], 0.05);

    let m = ident(1);
    let p = PlanProblem::new(&m, &[0.0], &[1.0], 2).unwrap();
    let cfg = CemConfig { population: 16, elites: 16, iterations: 3, ..CemConfig::default() };
    let r = plan_cem(&p, &cfg, &mut RngStream::new(0, 0)).unwrap();
    assert_eq!(r.iterations_used, 3);
}

#[test]
fn cem_solves_small_linear_problem() {
    let mut rng = RngStream::new(29, 0);
    let m = random_linear(&mut rng, 2, 2);
    let (s0, g) = ([0.0, 0.0], [1.0, -0.5]);
    let p = PlanProblem::new(&m, &s0, &g, 5).unwrap();
    let r = plan_cem(&p, &CemConfig::default(), &mut RngStream::new(4, 0)).unwrap();
    assert!(r.iterations_used <= 50);
    assert!(r.final_loss < 1e-2, "{}", r.final_loss);
    let again = plan_cem(&p, &CemConfig::default(), &mut RngStream::new(4, 0)).unwrap();
    assert_eq!(r.actions, again.actions);
    assert_eq!(r.final_loss.to_bits(), again.final_loss.to_bits());
}

#[test]
fn invalid_configs_are_rejected() {
    let m = ident(1);
    let p = PlanProblem::new(&m, &[0.0], &[1.0], 2).unwrap();
    let mut rng = RngStream::new(0, 0);
    assert!(plan_gd(&p, &GdConfig { steps: 0, ..GdConfig::default() }, &mut rng).is_err());
    assert!(plan_gd(&p, &GdConfig { eta: -1.0, ..GdConfig::default() }, &mut rng).is_err());
    assert!(plan_grasp(&p, &GraspConfig { k_sync: Some(0), ..GraspConfig::default() }, &mut rng).is_err());
    assert!(plan_grasp(&p, &GraspConfig { goal_weights: Some(vec![1.0]), ..GraspConfig::default() }, &mut rng).is_err());
    assert!(plan_cem(&p, &CemConfig { elites: 0, ..CemConfig::default() }, &mut rng).is_err());
    assert!(plan_cem(&p, &CemConfig { elites: 300, ..CemConfig::default() }, &mut rng).is_err());
    assert!(plan_lifted(&p, &LiftedConfig { sigma_state: -0.1, ..LiftedConfig::default() }, &mut rng).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn prop_final_loss_matches_rescore(seed in 0u64..1000, horizon in 1usize..8) {
        let m = random_linear(&mut RngStream::new(seed, 1), 2, 2);
        let s0 = [0.0, 0.0];
        let g = [1.0, 1.0];
        let p = PlanProblem::new(&m, &s0, &g, horizon).unwrap();
        let cfg = PlannerConfig::Grasp(GraspConfig { steps: 40, k_sync: Some(10), ..GraspConfig::default() });
        let r = plan(&p, &cfg, &mut RngStream::new(seed, 2)).unwrap();
        let v = shooting_value(&p, &r.actions).unwrap();
        prop_assert!((r.final_loss - v).abs() <= 1e-12);
    }

    #[test]
    fn prop_plans_are_deterministic(seed in 0u64..1000) {
        let m = random_linear(&mut RngStream::new(seed, 1), 2, 2);
        let s0 = [0.0, 0.0];
        let g = [0.5, -1.0];
        let p = PlanProblem::new(&m, &s0, &g, 6).unwrap();
        let cfg = PlannerConfig::Lifted(LiftedConfig { steps: 50, sigma_state: 0.1, ..LiftedConfig::default() });
        let a = plan(&p, &cfg, &mut RngStream::new(seed, 0)).unwrap();
        let b = plan(&p, &cfg, &mut RngStream::new(seed, 0)).unwrap();
        prop_assert_eq!(a.actions, b.actions);
    }
}

#[test]
fn lifted_stalls_less_with_state_noise_on_walls() {
    use grasp_core::harness::BenchConfig;
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/wall_benchmark.json");
    let cfg = BenchConfig::from_json(&std::fs::read_to_string(path).unwrap()).unwrap();
    let world = cfg.world.build().unwrap();
    let stalled = |sigma: f64| {
        (0..100)
            .filter(|&i| {
                let (seed, s0, g) = cfg.trial_task(i);
                let p = PlanProblem::new(&world, &s0, &g, 40).unwrap().with_action_bound(cfg.action_bound).unwrap();
                let c = LiftedConfig { steps: 800, sigma_state: sigma, noise_decay: 0.99, record_trace: true, ..Default::default() };
                let r = plan_lifted(&p, &c, &mut RngStream::new(seed, 0)).unwrap();
                r.trace.unwrap().records.last().unwrap().loss > 0.05
            })
            .count()
    };
    let (quiet, noisy) = (stalled(0.0), stalled(0.1));
    assert!(quiet > 0, "no stalls without noise");
    assert!(noisy < quiet, "{noisy} >= {quiet}");
}

#[test]
fn planners_respect_action_bound() {
    let m = ident(2);
    let (s0, g) = (vec![0.0, 0.0], vec![5.0, -3.0]);
    let p = PlanProblem::new(&m, &s0, &g, 6).unwrap().with_action_bound(Some(0.2)).unwrap();
    let cfgs = [
        PlannerConfig::Gd(GdConfig { steps: 50, ..Default::default() }),
        PlannerConfig::Gd(GdConfig { steps: 50, sigma_action: 0.5, ..Default::default() }),
        PlannerConfig::Lifted(LiftedConfig { steps: 50, ..Default::default() }),
        PlannerConfig::Grasp(GraspConfig { steps: 50, k_sync: Some(10), ..Default::default() }),
        PlannerConfig::Cem(CemConfig { population: 32, elites: 8, iterations: 5, ..Default::default() }),
    ];
    for cfg in &cfgs {
        let r = plan(&p, cfg, &mut RngStream::new(1, 0)).unwrap();
        assert!(r.actions.iter().flatten().all(|a| a.abs() <= 0.2), "{}", cfg.name());
        if !matches!(cfg, PlannerConfig::Cem(_)) {
            assert!(r.actions.iter().flatten().any(|a| a.abs() > 0.19), "{}", cfg.name());
        }
    }
    assert!(PlanProblem::new(&m, &s0, &g, 6).unwrap().with_action_bound(Some(0.0)).is_err());
}
