use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::{
    boltzmann_check, clamp_smoothing_check, contraction_check, gaussian_smoothing_check, ou_tube_check,
    rollout_covariance_check, smoothness_report, tube_drift_check, BoltzmannConfig, LinearPlanSystem, Mat,
    ModeDirection,
};
use crate::error::Result;
use crate::numerics::{gauss_vec, min_eig_sym, RngStream};
use crate::worldmodel::LinearModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
}

/// One line of the `theory-check` report. `margin = bound − observed`;
/// every check passes when the observed statistic stays at or below its bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub check_name: String,
    pub status: CheckStatus,
    pub observed: f64,
    pub bound: f64,
    pub margin: f64,
}

impl CheckResult {
    pub fn at_most(name: &str, observed: f64, bound: f64) -> Self {
        Self::build(name, observed, bound, observed <= bound)
    }

    pub fn below(name: &str, observed: f64, bound: f64) -> Self {
        Self::build(name, observed, bound, observed < bound)
    }

    fn build(name: &str, observed: f64, bound: f64, ok: bool) -> Self {
        Self {
            check_name: name.to_string(),
            status: if ok && observed.is_finite() { CheckStatus::Pass } else { CheckStatus::Fail },
            observed,
            bound,
            margin: bound - observed,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }
}

/// Two-sided z threshold whose family-wise error over `k` comparisons
/// matches a single 3σ test.
pub fn bonferroni_z(k: usize) -> f64 {
    let alpha = 2.0 * (1.0 - Normal::standard().cdf(3.0));
    Normal::standard().inverse_cdf(1.0 - alpha / (2.0 * k.max(1) as f64))
}

fn random_matrix(rng: &mut RngStream, r: usize, c: usize, sd: f64) -> Mat {
    Mat::new(r, c, gauss_vec(rng, r * c, sd).expect("finite sd")).expect("shape")
}

/// Lifted constant against `6(1 + ‖A‖² + ‖B‖²)` over 50 random systems with
/// `n, m ≤ 4` at `T ∈ {2, 10, 40}`, and its spread across `T`.
pub fn lifted_smoothness_checks(rng: &RngStream) -> Result<Vec<CheckResult>> {
    let mut r = rng.derive(0);
    let mut worst_ratio: f64 = 0.0;
    let mut worst_spread: f64 = 1.0;
    for _ in 0..50 {
        let n = 1 + r.below(4);
        let m = 1 + r.below(4);
        let scale = r.uniform_range(0.3, 2.0);
        let a = random_matrix(&mut r, n, n, scale / (n as f64).sqrt());
        let b = random_matrix(&mut r, n, m, 1.0 / (m as f64).sqrt());
        let mut ls = Vec::new();
        for t in [2, 10, 40] {
            let sys = LinearPlanSystem::homogeneous(a.clone(), b.clone(), t)?;
            let rep = smoothness_report(&sys, None)?;
            let l = rep.l_lifted.expect("T >= 2");
            worst_ratio = worst_ratio.max(l / rep.upper_bound_lifted);
            ls.push(l);
        }
        let hi = ls.iter().copied().fold(f64::MIN, f64::max);
        let lo = ls.iter().copied().fold(f64::MAX, f64::min);
        worst_spread = worst_spread.max(hi / lo);
    }
    Ok(vec![
        CheckResult::at_most("lifted_smoothness_bound", worst_ratio, 1.0),
        CheckResult::below("lifted_smoothness_horizon_spread", worst_spread, 2.0),
    ])
}

/// The unstable test system: eigenvalue 1.5 with a certified left mode.
pub fn unstable_system(horizon: usize) -> Result<(LinearPlanSystem, ModeDirection)> {
    let a = Mat::from_rows(&[vec![1.5, 0.3], vec![0.0, 0.5]])?;
    let b = Mat::from_rows(&[vec![1.0, 0.0], vec![0.5, 1.0]])?;
    let sys = LinearPlanSystem::homogeneous(a, b, horizon)?;
    // (Aᵀ − 1.5 I) v = 0  ⇒  v ∝ (1, 0.3)
    let norm = (1.0f64 + 0.09).sqrt();
    let mode = ModeDirection::new(&sys, vec![1.0 / norm, 0.3 / norm], vec![1.0, 0.0], 1.5)?;
    Ok((sys, mode))
}

/// Shooting lower bound at each horizon and the fitted growth rate of
/// `log λ_max(H_S)` against `2 log|λ|`.
pub fn shooting_growth_checks(horizons: &[usize]) -> Result<Vec<CheckResult>> {
    let mut worst: f64 = 0.0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &t in horizons {
        let (sys, mode) = unstable_system(t)?;
        let rep = smoothness_report(&sys, Some(&mode))?;
        worst = worst.max(rep.lower_bound_shooting.expect("mode given") / rep.l_shooting);
        xs.push(t as f64);
        ys.push(rep.l_shooting.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let target = 2.0 * 1.5f64.ln();
    Ok(vec![
        CheckResult::at_most("shooting_lower_bound", worst, 1.0),
        CheckResult::at_most("shooting_log_slope_rel_error", (slope - target).abs() / target, 0.1),
    ])
}

/// Error-ratio test of the noise-free stop-gradient iteration on 10 random
/// systems whose `B` has full column rank, with `η = 1/L`.
pub fn contraction_checks(rng: &RngStream) -> Result<Vec<CheckResult>> {
    let mut r = rng.derive(1);
    let mut worst = f64::NEG_INFINITY;
    let mut defect: f64 = 0.0;
    let mut done = 0;
    while done < 10 {
        let n = 2 + r.below(3);
        let m = 1 + r.below(n);
        let a = random_matrix(&mut r, n, n, 0.8 / (n as f64).sqrt());
        let b = random_matrix(&mut r, n, m, 1.0 / (m as f64).sqrt());
        if min_eig_sym(&b.gram(), 1e-12)? < 0.05 {
            continue;
        }
        let t = 3 + r.below(4);
        let s0 = gauss_vec(&mut r, n, 1.0)?;
        let g = gauss_vec(&mut r, n, 1.0)?;
        let sys = LinearPlanSystem::new(a, b, t, s0, g)?;
        let beta = 0.5;
        let l = super::block_hessians(&sys, beta)
            .iter()
            .map(|h| crate::numerics::max_eig_sym(h, 1e-12))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let rep = contraction_check(&sys, beta, 1.0 / l, 2_000_000)?;
        worst = worst.max(rep.observed_ratio - rep.q_bound);
        defect = defect.max(rep.triangular_defect).max(rep.block_defect);
        done += 1;
    }
    Ok(vec![
        CheckResult::at_most("contraction_ratio_excess", worst, 0.02),
        CheckResult::at_most("contraction_block_structure_defect", defect, 1e-9),
    ])
}

/// Stationary tube variance in a 3 × 2 grid of `(η_s, σ)`, 10⁶ samples each.
pub fn ou_tube_checks(rng: &RngStream, samples: usize) -> Result<Vec<CheckResult>> {
    let mut worst: f64 = 0.0;
    let mut k = 0;
    for eta in [0.1, 0.25, 0.5] {
        for sigma in [0.05, 0.2] {
            let rep = ou_tube_check(eta, sigma, samples, 1000, &rng.derive(100 + k))?;
            worst = worst.max(rep.rel_error);
            k += 1;
        }
    }
    Ok(vec![CheckResult::at_most("ou_tube_variance_rel_error", worst, 0.05)])
}

/// Clamp-function smoothing: perturbed-derivative means against the
/// analytic smoothed derivative, and the smoothed-gradient norm bound.
pub fn smoothing_checks(rng: &RngStream, draws: usize) -> Result<Vec<CheckResult>> {
    let sigma = 0.1;
    let probes: Vec<f64> = (-12..=12).map(|i| i as f64 * 0.1).collect();
    let clamp = clamp_smoothing_check(sigma, &probes, draws, &rng.derive(2))?;
    let worst_z = clamp.iter().map(|p| p.z_score).fold(0.0, f64::max);
    let f = |x: &[f64]| x[0].clamp(-1.0, 1.0);
    let grid: Vec<Vec<f64>> = probes.iter().map(|&x| vec![x]).collect();
    let rep = gaussian_smoothing_check(&f, 1.0, 1.0, sigma, &grid, draws, &rng.derive(3))?;
    let worst_grad = rep
        .probes
        .iter()
        .map(|p| p.grad_norm - 3.0 * p.std_error)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(vec![
        CheckResult::at_most("smoothing_clamp_max_z", worst_z, 3.0),
        CheckResult::at_most("smoothing_gradient_bound", worst_grad, rep.bound),
    ])
}

/// Tube-centre drift with `B = I`, `γ = 1`, `α = 0.1`.
pub fn drift_checks(rng: &RngStream) -> Result<Vec<CheckResult>> {
    let m = LinearModel::new(Mat::identity(2).scaled(0.8), Mat::identity(2))?;
    let steps = 30;
    let rep = tube_drift_check(&m, &[1.0, -1.0], &[2.0, 1.0], 1.0, 0.05, 0.3, steps, 4000, &rng.derive(4))?;
    let rate_err = rep
        .predicted_distance
        .windows(2)
        .map(|w| (w[1] / w[0] - 0.9).abs())
        .fold(0.0, f64::max);
    Ok(vec![
        CheckResult::at_most("tube_drift_max_z", rep.max_z, bonferroni_z(2 * (steps + 1))),
        CheckResult::at_most("tube_drift_rate_error", rate_err, 1e-12),
    ])
}

/// Noisy-rollout covariance: random walk exactness and unstable growth.
pub fn rollout_covariance_checks(rng: &RngStream) -> Result<Vec<CheckResult>> {
    let sigma = 0.1;
    let walk = LinearModel::new(Mat::identity(2), Mat::identity(2))?;
    let rep = rollout_covariance_check(&walk, &[0.0, 0.0], sigma, 10, 10_000, &rng.derive(5))?;
    let t = 10;
    let unstable = LinearModel::new(Mat::identity(2).scaled(1.2), Mat::identity(2))?;
    let grow = rollout_covariance_check(&unstable, &[0.0, 0.0], sigma, t, 10_000, &rng.derive(6))?;
    let floor = 1.2f64.powi(2 * (t as i32 - 1)) * sigma * sigma;
    Ok(vec![
        CheckResult::at_most("rollout_covariance_random_walk_rel_dev", rep.max_rel_dev, 0.05),
        CheckResult::at_most("rollout_covariance_unstable_growth", floor / grow.empirical_trace[t], 1.0),
    ])
}

pub fn boltzmann_checks(rng: &RngStream) -> Result<Vec<CheckResult>> {
    let rep = boltzmann_check(&BoltzmannConfig::default(), &rng.derive(7))?;
    Ok(vec![CheckResult::at_most("boltzmann_mode_ratio_rel_error", rep.rel_error, 0.2)])
}

/// Every check at its reference settings.
pub fn run_all_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let rng = RngStream::new(seed, 0);
    let mut out = lifted_smoothness_checks(&rng)?;
    out.extend(shooting_growth_checks(&[5, 10, 20])?);
    out.extend(contraction_checks(&rng)?);
    out.extend(ou_tube_checks(&rng, 1_000_000)?);
    out.extend(smoothing_checks(&rng, 10_000)?);
    out.extend(drift_checks(&rng)?);
    out.extend(rollout_covariance_checks(&rng)?);
    out.extend(boltzmann_checks(&rng)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bonferroni_reduces_to_three_sigma() {
        assert!((bonferroni_z(1) - 3.0).abs() < 1e-6);
        assert!(bonferroni_z(60) > 3.5);
    }

    #[test]
    fn result_status() {
        assert!(CheckResult::at_most("x", 1.0, 1.0).passed());
        assert!(!CheckResult::below("x", 2.0, 2.0).passed());
        assert!(!CheckResult::at_most("x", f64::NAN, 1.0).passed());
        let json = serde_json::to_string(&CheckResult::at_most("x", 0.5, 1.0)).unwrap();
        assert_eq!(json, r#"{"check_name":"x","status":"pass","observed":0.5,"bound":1.0,"margin":0.5}"#);
    }
}
