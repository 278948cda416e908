use rayon::prelude::*;
use serde::Serialize;

use super::{chunk_rngs, chunk_sizes, Mat, MC_CHUNKS};
use crate::error::{argument, check_dim, Result};
use crate::numerics::{max_eig_sym, vector, RngStream};
use crate::worldmodel::{LinearModel, WorldModel};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OuTubeReport {
    pub eta_s: f64,
    pub sigma: f64,
    pub samples: usize,
    pub empirical_mean: f64,
    pub empirical_var: f64,
    /// `σ² / (4η_s(1 − η_s))`
    pub predicted_var: f64,
    /// `σ² / (1 − ρ²)` with `ρ = 1 − 2η_s`
    pub lyapunov_var: f64,
    /// `|empirical − predicted| / predicted`, or the absolute gap when the
    /// prediction is zero.
    pub rel_error: f64,
    /// `|1 − 2η_s|`
    pub mean_rate: f64,
}

/// Simulates `s ← (1 − 2η_s) s + 2η_s μ + σξ` around `μ = 1` from `s = 0`
/// and measures the stationary variance after `burn_in` steps.
///
/// The work is split over independent chains, each with its own burn-in;
/// `samples` counts post-burn-in states over all chains.
pub fn ou_tube_check(eta_s: f64, sigma: f64, samples: usize, burn_in: usize, rng: &RngStream) -> Result<OuTubeReport> {
    if !(eta_s > 0.0 && eta_s < 1.0) {
        return Err(argument("eta_s must lie in (0, 1)"));
    }
    if !(sigma >= 0.0) || samples < 2 {
        return Err(argument("sigma must be non-negative and samples >= 2"));
    }
    let mu = 1.0;
    let rho = 1.0 - 2.0 * eta_s;
    let sizes = chunk_sizes(samples, MC_CHUNKS);
    let rngs = chunk_rngs(rng, sizes.len());
    // sums of (s − μ) and (s − μ)² per chain
    let parts: Vec<(f64, f64)> = sizes
        .par_iter()
        .zip(rngs)
        .map(|(&count, mut r)| {
            let mut s = 0.0;
            for _ in 0..burn_in {
                s = rho * s + 2.0 * eta_s * mu + sigma * r.standard_normal();
            }
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                s = rho * s + 2.0 * eta_s * mu + sigma * r.standard_normal();
                let d = s - mu;
                s1 += d;
                s2 += d * d;
            }
            (s1, s2)
        })
        .collect();
    let n = samples as f64;
    let s1: f64 = parts.iter().map(|p| p.0).sum();
    let s2: f64 = parts.iter().map(|p| p.1).sum();
    let mean_dev = s1 / n;
    let empirical_var = ((s2 - n * mean_dev * mean_dev) / (n - 1.0)).max(0.0);
    let predicted_var = sigma * sigma / (4.0 * eta_s * (1.0 - eta_s));
    let lyapunov_var = sigma * sigma / (1.0 - rho * rho);
    let rel_error = if predicted_var > 0.0 {
        (empirical_var - predicted_var).abs() / predicted_var
    } else {
        empirical_var
    };
    Ok(OuTubeReport {
        eta_s,
        sigma,
        samples,
        empirical_mean: mu + mean_dev,
        empirical_var,
        predicted_var,
        lyapunov_var,
        rel_error,
        mean_rate: rho.abs(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TubeDriftReport {
    /// `α = 2η_a`
    pub alpha: f64,
    /// `αγ λ_max(BBᵀ)`
    pub contraction_param: f64,
    /// `‖E[μ^k] − g‖` from the recursion, `k = 0..=steps`.
    pub predicted_distance: Vec<f64>,
    /// Same quantity from the sample mean.
    pub empirical_distance: Vec<f64>,
    /// Largest `|sample mean − recursion| / std error` over steps and coordinates.
    pub max_z: f64,
    pub samples: usize,
}

/// Runs the stop-gradient action update for one step of a linear model,
/// `a ← a − 2η_a Bᵀ[(μ − s') + γ(μ − g)]`, with `μ = A s̄ + B a + c` and the
/// next state drawn from a zero-mean tube `s' = μ + τζ`. Compares the sample
/// mean of `μ^k` with `m ← (I − αγP) m + αγP g`, `P = BBᵀ`.
#[allow(clippy::too_many_arguments)]
pub fn tube_drift_check(
    model: &LinearModel<f64>,
    s_bar: &[f64],
    g: &[f64],
    gamma: f64,
    eta_a: f64,
    tube_sigma: f64,
    steps: usize,
    samples: usize,
    rng: &RngStream,
) -> Result<TubeDriftReport> {
    let (n, m) = (model.state_dim(), model.action_dim());
    check_dim("s_bar", n, s_bar.len())?;
    check_dim("goal", n, g.len())?;
    if !(gamma > 0.0 && eta_a > 0.0 && tube_sigma >= 0.0) || samples < 2 {
        return Err(argument("need gamma, eta_a > 0, tube_sigma >= 0 and samples >= 2"));
    }
    let alpha = 2.0 * eta_a;
    let b = model.b();
    let p = b.transpose().gram();
    let lam = max_eig_sym(&p, 1e-12)?;
    let contraction_param = alpha * gamma * lam;
    if contraction_param >= 1.0 {
        return Err(argument(format!("drift precondition violated: αγλ_max(BBᵀ) = {contraction_param}")));
    }
    let a0 = vec![0.0; m];
    let mu0 = model.step(s_bar, &a0);

    let mut predicted = vec![mu0.clone()];
    for k in 0..steps {
        let e = vector::sub(&predicted[k], g);
        let next = vector::sub(&predicted[k], &vector::scale(&p.matvec(&e), alpha * gamma));
        predicted.push(next);
    }

    let sizes = chunk_sizes(samples, MC_CHUNKS);
    let rngs = chunk_rngs(rng, sizes.len());
    let parts: Vec<(Vec<f64>, Vec<f64>)> = sizes
        .par_iter()
        .zip(rngs)
        .map(|(&count, mut r)| {
            let mut s1 = vec![0.0; (steps + 1) * n];
            let mut s2 = vec![0.0; (steps + 1) * n];
            for _ in 0..count {
                let mut a = a0.clone();
                let mut mu = mu0.clone();
                for k in 0..=steps {
                    for i in 0..n {
                        let d = mu[i] - predicted[k][i];
                        s1[k * n + i] += d;
                        s2[k * n + i] += d * d;
                    }
                    if k == steps {
                        break;
                    }
                    let resid: Vec<f64> = (0..n)
                        .map(|i| -tube_sigma * r.standard_normal() + gamma * (mu[i] - g[i]))
                        .collect();
                    let grad = b.matvec_t(&resid);
                    vector::axpy(-alpha, &grad, &mut a);
                    mu = model.step(s_bar, &a);
                }
            }
            (s1, s2)
        })
        .collect();
    let total = samples as f64;
    let mut s1 = vec![0.0; (steps + 1) * n];
    let mut s2 = vec![0.0; (steps + 1) * n];
    for (a, bq) in &parts {
        for i in 0..s1.len() {
            s1[i] += a[i];
            s2[i] += bq[i];
        }
    }
    let mut max_z: f64 = 0.0;
    let mut empirical_distance = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let mut mean = vec![0.0; n];
        for i in 0..n {
            let dm = s1[k * n + i] / total;
            let var = ((s2[k * n + i] - total * dm * dm) / (total - 1.0)).max(0.0);
            let se = (var / total).sqrt();
            mean[i] = predicted[k][i] + dm;
            let z = if se > 0.0 {
                dm.abs() / se
            } else if dm.abs() <= 1e-12 * (1.0 + predicted[k][i].abs()) {
                0.0
            } else {
                f64::INFINITY
            };
            max_z = max_z.max(z);
        }
        empirical_distance.push(vector::dist(&mean, g));
    }
    Ok(TubeDriftReport {
        alpha,
        contraction_param,
        predicted_distance: predicted.iter().map(|x| vector::dist(x, g)).collect(),
        empirical_distance,
        max_z,
        samples,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RolloutCovarianceReport {
    pub sigma_env: f64,
    pub samples: usize,
    /// `tr Σ_t` from `Σ_{t+1} = AΣ_tAᵀ + σ²I`, `t = 0..=T`.
    pub predicted_trace: Vec<f64>,
    pub empirical_trace: Vec<f64>,
    /// Largest relative deviation of a per-coordinate variance over all steps.
    pub max_rel_dev: f64,
    /// Largest `‖Σ̂_t − Σ_t‖_F / ‖Σ_t‖_F` over `t ≥ 1`.
    pub max_rel_frobenius: f64,
}

/// Noisy zero-action rollouts `s_{t+1} = F(s_t, 0) + σξ` compared with the
/// exact linear covariance recursion.
pub fn rollout_covariance_check(
    model: &LinearModel<f64>,
    s0: &[f64],
    sigma_env: f64,
    horizon: usize,
    samples: usize,
    rng: &RngStream,
) -> Result<RolloutCovarianceReport> {
    let (n, m) = (model.state_dim(), model.action_dim());
    check_dim("s0", n, s0.len())?;
    if !(sigma_env >= 0.0) || samples < 2 || horizon == 0 {
        return Err(argument("need sigma_env >= 0, samples >= 2, horizon >= 1"));
    }
    let a = model.a();
    let mut predicted = vec![Mat::zeros(n, n)];
    for t in 0..horizon {
        let next = a
            .matmul(&predicted[t])?
            .matmul(&a.transpose())?
            .add(&Mat::identity(n).scaled(sigma_env * sigma_env))?;
        predicted.push(next);
    }
    // deterministic mean path
    let zero = vec![0.0; m];
    let mut means = vec![s0.to_vec()];
    for t in 0..horizon {
        let next = model.step(&means[t], &zero);
        means.push(next);
    }

    let sizes = chunk_sizes(samples, MC_CHUNKS);
    let rngs = chunk_rngs(rng, sizes.len());
    let parts: Vec<(Vec<f64>, Vec<f64>)> = sizes
        .par_iter()
        .zip(rngs)
        .map(|(&count, mut r)| {
            let mut s1 = vec![0.0; (horizon + 1) * n];
            let mut s2 = vec![0.0; (horizon + 1) * n * n];
            for _ in 0..count {
                let mut s = s0.to_vec();
                for t in 1..=horizon {
                    s = model.step(&s, &zero);
                    for x in s.iter_mut() {
                        *x += sigma_env * r.standard_normal();
                    }
                    let d = vector::sub(&s, &means[t]);
                    for i in 0..n {
                        s1[t * n + i] += d[i];
                        for j in 0..n {
                            s2[(t * n + i) * n + j] += d[i] * d[j];
                        }
                    }
                }
            }
            (s1, s2)
        })
        .collect();
    let total = samples as f64;
    let mut s1 = vec![0.0; (horizon + 1) * n];
    let mut s2 = vec![0.0; (horizon + 1) * n * n];
    for (a1, a2) in &parts {
        s1.iter_mut().zip(a1).for_each(|(x, y)| *x += y);
        s2.iter_mut().zip(a2).for_each(|(x, y)| *x += y);
    }
    let mut empirical_trace = vec![0.0];
    let mut max_rel_dev: f64 = 0.0;
    let mut max_rel_frobenius: f64 = 0.0;
    for t in 1..=horizon {
        let cov = Mat::from_fn(n, n, |i, j| {
            let (mi, mj) = (s1[t * n + i] / total, s1[t * n + j] / total);
            (s2[(t * n + i) * n + j] - total * mi * mj) / (total - 1.0)
        });
        let pred = &predicted[t];
        empirical_trace.push((0..n).map(|i| cov.get(i, i)).sum());
        for i in 0..n {
            let (e, p) = (cov.get(i, i), pred.get(i, i));
            let dev = if p > 0.0 { (e - p).abs() / p } else { e.abs() };
            max_rel_dev = max_rel_dev.max(dev);
        }
        let diff = cov.add(&pred.scaled(-1.0))?.frobenius();
        let scale = pred.frobenius();
        max_rel_frobenius = max_rel_frobenius.max(if scale > 0.0 { diff / scale } else { diff });
    }
    Ok(RolloutCovarianceReport {
        sigma_env,
        samples,
        predicted_trace: predicted.iter().map(|c| (0..n).map(|i| c.get(i, i)).sum()).collect(),
        empirical_trace,
        max_rel_dev,
        max_rel_frobenius,
    })
}
