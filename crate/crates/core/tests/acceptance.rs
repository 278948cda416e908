//! End-to-end acceptance criteria. Run with
//! `cargo test -p grasp-core --test acceptance -- --nocapture`
//! to see one PASS/FAIL line per criterion.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use grasp_core::harness::{distance_profile, run_bench, trials_csv, BenchConfig, BenchReport};
use grasp_core::numerics::{gauss_vec, vector, DenseMatrix, RngStream};
use grasp_core::objectives::{
    grasp_value_grad, lifted_value, lifted_value_grad, shooting_value, shooting_value_grad, PlanProblem,
};
use grasp_core::planners::{plan_gd, plan_grasp, plan_lifted, GdConfig, GraspConfig, LiftedConfig};
use grasp_core::theory::{
    contraction_checks, lifted_smoothness_checks, ou_tube_checks, shooting_growth_checks, smoothing_checks,
    CheckResult,
};
use grasp_core::worldmodel::{rollout, LinearModel, MlpModel, Trajectory, Wall, WallWorld, WorldModel};
use nalgebra::{DMatrix, DVector};

type Verdict = Result<String, String>;

fn load(name: &str) -> BenchConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    BenchConfig::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn within(elapsed: Duration, limit_s: f64, detail: String) -> Verdict {
    let s = elapsed.as_secs_f64();
    if s < limit_s {
        Ok(format!("{detail} ({s:.1}s)"))
    } else {
        Err(format!("{detail}; runtime {s:.1}s exceeds {limit_s}s"))
    }
}

fn checks(results: &[CheckResult]) -> Result<String, String> {
    let text: Vec<String> = results
        .iter()
        .map(|c| format!("{} {:.4} vs {}", c.check_name, c.observed, c.bound))
        .collect();
    if results.iter().all(CheckResult::passed) {
        Ok(text.join(", "))
    } else {
        Err(text.join(", "))
    }
}

// ---- 1: gradients --------------------------------------------------------

fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let h = 1e-6;
    (0..x.len())
        .map(|i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (f(&xp) - f(&xm)) / (2.0 * h)
        })
        .collect()
}

/// Worst `|fd − an| / (1e-4 max(|fd|, |an|) + 1e-7)`; at most 1 passes.
fn mismatch(fd: &[f64], an: &[f64]) -> f64 {
    fd.iter()
        .zip(an)
        .map(|(a, b)| (a - b).abs() / (1e-4 * a.abs().max(b.abs()) + 1e-7))
        .fold(0.0, f64::max)
}

fn with_ends(s0: &[f64], g: &[f64], free: &[Vec<f64>], actions: &[Vec<f64>]) -> Trajectory<f64> {
    let mut states = vec![s0.to_vec()];
    states.extend(free.iter().cloned());
    states.push(g.to_vec());
    Trajectory::new(states, actions.to_vec()).unwrap()
}

/// Stop-gradient loss with state inputs frozen at `inputs`, targets free.
fn frozen_grasp(
    m: &dyn WorldModel<f64>,
    s0: &[f64],
    g: &[f64],
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    actions: &[Vec<f64>],
    gamma: f64,
) -> f64 {
    let t = actions.len();
    (0..t)
        .map(|i| {
            let s_in = if i == 0 { s0 } else { &inputs[i - 1] };
            let tgt = if i + 1 == t { g } else { &targets[i] };
            let mu = m.forward(s_in, &actions[i]).unwrap();
            vector::dist_sq(&mu, tgt) + gamma * vector::dist_sq(&mu, g)
        })
        .sum()
}

fn probe(m: &dyn WorldModel<f64>, rng: &mut RngStream, s0: &[f64], g: &[f64]) -> [f64; 3] {
    let (n, k) = (m.state_dim(), m.action_dim());
    let t = 2 + rng.below(6);
    let p = PlanProblem::new(m, s0, g, t).unwrap();
    let actions = vector::unflatten(&gauss_vec(rng, t * k, 0.5).unwrap(), k);
    let free: Vec<Vec<f64>> = (1..t)
        .map(|i| {
            let w = i as f64 / t as f64;
            let line: Vec<f64> = s0.iter().zip(g).map(|(a, b)| a + w * (b - a)).collect();
            vector::add(&line, &gauss_vec(rng, n, 0.2).unwrap())
        })
        .collect();
    let ua = vector::flatten(&actions);
    let us = vector::flatten(&free);

    let (_, gs) = shooting_value_grad(&p, &actions).unwrap();
    let fs = |x: &[f64]| shooting_value(&p, &vector::unflatten(x, k)).unwrap();
    let e_shoot = mismatch(&fd_gradient(&fs, &ua), &vector::flatten(&gs));

    let (_, gl) = lifted_value_grad(&p, &with_ends(s0, g, &free, &actions)).unwrap();
    let split = us.len();
    let mut z = us.clone();
    z.extend(&ua);
    let fl = |x: &[f64]| lifted_value(&p, &vector::unflatten(&x[..split], n), &vector::unflatten(&x[split..], k)).unwrap();
    let mut an = vector::flatten(&gl.d_states);
    an.extend(vector::flatten(&gl.d_actions));
    let e_lift = mismatch(&fd_gradient(&fl, &z), &an);

    let gamma = rng.uniform_range(0.1, 2.0);
    let (_, gg) = grasp_value_grad(&p, &with_ends(s0, g, &free, &actions), gamma).unwrap();
    let fa = |x: &[f64]| frozen_grasp(m, s0, g, &free, &free, &vector::unflatten(x, k), gamma);
    let ft = |x: &[f64]| frozen_grasp(m, s0, g, &free, &vector::unflatten(x, n), &actions, gamma);
    let e_grasp = mismatch(&fd_gradient(&fa, &ua), &vector::flatten(&gg.d_actions))
        .max(mismatch(&fd_gradient(&ft, &us), &vector::flatten(&gg.d_states)));
    [e_shoot, e_lift, e_grasp]
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = RngStream::new(101, 0);
    let a = DenseMatrix::new(3, 3, gauss_vec(&mut rng, 9, 0.5).unwrap()).unwrap();
    let b = DenseMatrix::new(3, 2, gauss_vec(&mut rng, 6, 1.0).unwrap()).unwrap();
    let linear = LinearModel::new(a, b).unwrap();
    let mlp = MlpModel::<f64>::random(3, 2, &[16, 16], &mut rng).unwrap();
    let wall = WallWorld::new(vec![Wall::new([0.0, -0.5], [0.0, 0.5], 0.2).unwrap()], 1.0, 0.1).unwrap();
    let models: [(&str, &dyn WorldModel<f64>); 3] = [("linear", &linear), ("mlp", &mlp), ("wall", &wall)];
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, m) in models {
        let mut worst = [0.0f64; 3];
        for _ in 0..100 {
            let (s0, g) = if name == "wall" {
                // straddle the wall so the penalty is active along the path
                let s0 = vec![rng.uniform_range(-0.5, -0.05), rng.uniform_range(-0.6, 0.6)];
                let g = vec![rng.uniform_range(0.05, 0.5), rng.uniform_range(-0.6, 0.6)];
                (s0, g)
            } else {
                (gauss_vec(&mut rng, 3, 1.0).unwrap(), gauss_vec(&mut rng, 3, 1.0).unwrap())
            };
            let e = probe(m, &mut rng, &s0, &g);
            for i in 0..3 {
                worst[i] = worst[i].max(e[i]);
            }
        }
        ok &= worst.iter().all(|&e| e <= 1.0);
        parts.push(format!("{name} shoot/lift/grasp {:.2}/{:.2}/{:.2}", worst[0], worst[1], worst[2]));
    }
    let detail = format!("worst tolerance use: {}", parts.join("; "));
    if !ok {
        return Err(detail);
    }
    within(start.elapsed(), 10.0, detail)
}

// ---- 2-6: theory ---------------------------------------------------------

fn timed(limit: f64, f: impl FnOnce() -> Vec<CheckResult>) -> Verdict {
    let start = Instant::now();
    let detail = checks(&f())?;
    within(start.elapsed(), limit, detail)
}

// ---- 7: convex planners --------------------------------------------------

fn shooting_map(m: &LinearModel<f64>, s0: &[f64], horizon: usize) -> (DMatrix<f64>, DVector<f64>) {
    let (n, k) = (m.state_dim(), m.action_dim());
    let zero = vec![vec![0.0; k]; horizon];
    let free = rollout(m, s0, &zero).unwrap().terminal().to_vec();
    let mut c = DMatrix::zeros(n, k * horizon);
    for j in 0..k * horizon {
        let mut a = zero.clone();
        a[j / k][j % k] = 1.0;
        let col = rollout(m, &vec![0.0; n], &a).unwrap().terminal().to_vec();
        for i in 0..n {
            c[(i, j)] = col[i];
        }
    }
    (c, DVector::from_vec(free))
}

fn criterion_7() -> Verdict {
    let mut rng = RngStream::new(77, 0);
    let mut worst: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    for _ in 0..5 {
        let a = DenseMatrix::new(3, 3, gauss_vec(&mut rng, 9, 0.3).unwrap())
            .unwrap()
            .add(&DenseMatrix::identity(3).scaled(0.6))
            .unwrap();
        let b = DenseMatrix::new(3, 2, gauss_vec(&mut rng, 6, 0.7).unwrap()).unwrap();
        let m = LinearModel::new(a, b).unwrap();
        let s0 = gauss_vec(&mut rng, 3, 1.0).unwrap();
        let g = gauss_vec(&mut rng, 3, 1.0).unwrap();
        let horizon = 4;
        let (c, free) = shooting_map(&m, &s0, horizon);
        let rhs = DVector::from_column_slice(&g) - free;
        let y = (&c * c.transpose()).lu().solve(&rhs).ok_or("uncontrollable draw")?;
        let best = (&c * (c.transpose() * y) - &rhs).norm_squared();
        let lam = (c.transpose() * &c * 2.0).symmetric_eigen().eigenvalues.max();
        let p = PlanProblem::new(&m, &s0, &g, horizon).unwrap();

        let gd = plan_gd(&p, &GdConfig { eta: 1.0 / lam, steps: 20_000, stop_loss: 1e-10, ..GdConfig::default() }, &mut rng.derive(1));
        let lifted = plan_lifted(
            &p,
            &LiftedConfig { eta_a: 0.05, eta_s: 0.05, steps: 50_000, sigma_state: 0.0, stop_loss: 1e-14, ..LiftedConfig::default() },
            &mut rng.derive(2),
        );
        let grasp = plan_grasp(
            &p,
            &GraspConfig {
                sigma_state: 0.0,
                goal_weights: Some([vec![0.0; horizon - 1], vec![0.5]].concat()),
                k_sync: Some(1),
                j_sync: 1,
                eta_sync: 1.0 / lam,
                steps: 20_000,
                stop_loss: 1e-10,
                ..GraspConfig::default()
            },
            &mut rng.derive(3),
        );
        for r in [gd, lifted, grasp] {
            let r = r.map_err(|e| e.to_string())?;
            worst = worst.max(r.final_loss);
            worst_gap = worst_gap.max((r.final_loss - best).abs());
        }
    }
    let detail = format!("worst loss {worst:.2e}, worst gap to oracle {worst_gap:.2e}");
    if worst < 1e-6 && worst_gap < 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---- 8-10: benchmark -----------------------------------------------------

fn rate(r: &BenchReport, cell: &str) -> f64 {
    r.cell(cell).unwrap_or_else(|| panic!("cell {cell}")).summary.success_rate
}

fn criterion_8(report: &BenchReport, elapsed: Duration) -> Verdict {
    let mut fails = Vec::new();
    let mut parts = Vec::new();
    for h in [40, 60, 80] {
        let (g, d) = (rate(report, &format!("grasp_h{h}")), rate(report, &format!("gd_h{h}")));
        parts.push(format!("T={h} grasp {:.2} gd {:.2}", g, d));
        if g < d {
            fails.push(format!("(a) T={h}"));
        }
    }
    let full = rate(report, "grasp_h40");
    let nosync = rate(report, "grasp_nosync_h40");
    parts.push(format!("no-sync {nosync:.2}"));
    if !(full - nosync >= 0.20) {
        fails.push("(b)".into());
    }
    let sweep = [
        (0.0, rate(report, "grasp_h40_sigma/sigma_state=0.0")),
        (0.3, full),
        (1.0, rate(report, "grasp_h40_sigma/sigma_state=1.0")),
    ];
    parts.push(format!("sigma sweep {sweep:?}"));
    let best = sweep.iter().map(|s| s.1).fold(f64::MIN, f64::max);
    let interior = best == sweep[1].1 && best > sweep[0].1 && best > sweep[2].1;
    if !interior {
        fails.push("(c)".into());
    }
    let detail = parts.join(", ");
    if !fails.is_empty() {
        return Err(format!("{detail}; failed {}", fails.join(" ")));
    }
    within(elapsed, 900.0, detail)
}

fn criterion_9() -> Verdict {
    let cfg = load("wall_detour.json");
    let (_, specs) = cfg.specs().map_err(|e| e.to_string())?.remove(0);
    let mut solved = 0;
    let mut detours = 0;
    let mut largest: f64 = 0.0;
    for spec in &specs {
        let Ok(d) = distance_profile(spec) else { continue };
        solved += 1;
        let rise = d.windows(2).map(|w| w[1] - w[0]).fold(f64::MIN, f64::max);
        if rise > 1e-6 {
            detours += 1;
            largest = largest.max(d.iter().copied().fold(f64::MIN, f64::max) - d[0]);
        }
    }
    let detail = format!(
        "{detours} of {solved} solved detour seeds move away from the goal (largest excess over d_0 {largest:.3})"
    );
    if detours >= 1 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_10(bench: &BenchConfig, serial: &BenchReport) -> Verdict {
    let mut parts = Vec::new();
    for (name, cfg, one) in [
        ("wall_benchmark", bench.clone(), Some(serial)),
        ("wall_detour", load("wall_detour.json"), None),
    ] {
        let a = match one {
            Some(r) => r.clone(),
            None => run_bench(&cfg, 1).map_err(|e| e.to_string())?,
        };
        let b = run_bench(&cfg, 8).map_err(|e| e.to_string())?;
        let same = a.to_json().unwrap() == b.to_json().unwrap() && trials_csv(&a).unwrap() == trials_csv(&b).unwrap();
        if !same {
            return Err(format!("{name}: workers 1 and 8 differ"));
        }
        parts.push(format!("{name} identical"));
    }
    Ok(format!("{} at workers 1 and 8", parts.join(", ")))
}

#[test]
fn acceptance_criteria() {
    let rng = RngStream::new(2024, 0);
    let mut results: Vec<(usize, &str, Verdict)> = Vec::new();
    let mut record = |n, name, v: Verdict| {
        let (tag, text) = match &v {
            Ok(t) => ("PASS", t),
            Err(t) => ("FAIL", t),
        };
        println!("{tag} [{n:>2}] {name}: {text}");
        results.push((n, name, v));
    };

    record(1, "gradient correctness", criterion_1());
    record(2, "lifted smoothness bound", timed(30.0, || lifted_smoothness_checks(&rng).unwrap()));
    record(3, "shooting explosion", timed(10.0, || shooting_growth_checks(&[5, 10, 20]).unwrap()));
    record(4, "stop-gradient contraction", timed(30.0, || contraction_checks(&rng).unwrap()));
    record(5, "OU tube variance", timed(60.0, || ou_tube_checks(&rng, 1_000_000).unwrap()));
    record(6, "smoothing in expectation", timed(f64::INFINITY, || smoothing_checks(&rng, 10_000).unwrap()));
    record(7, "convex planner equivalence", criterion_7());

    let bench = load("wall_benchmark.json");
    let start = Instant::now();
    let report = run_bench(&bench, 1).expect("benchmark runs");
    record(8, "wall benchmark directions", criterion_8(&report, start.elapsed()));
    record(9, "detour profile", criterion_9());
    record(10, "bench determinism", criterion_10(&bench, &report));

    let failed: Vec<_> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
