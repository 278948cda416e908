use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use super::{chunk_rngs, chunk_sizes, MC_CHUNKS};
use crate::error::{argument, Result};
use crate::numerics::{vector, RngStream};

/// `c_d = E‖Z‖ = √2 Γ((d+1)/2) / Γ(d/2)` for `Z ~ N(0, I_d)`.
pub fn gaussian_norm_mean(d: usize) -> f64 {
    let d = d as f64;
    (2f64.sqrt().ln() + ln_gamma((d + 1.0) / 2.0) - ln_gamma(d / 2.0)).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothingProbe {
    pub x: Vec<f64>,
    /// Norm of the Monte-Carlo smoothed gradient.
    pub grad_norm: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothingReport {
    pub sigma: f64,
    pub c_d: f64,
    /// `min(Lip, c_d ‖L‖_∞ / σ)`
    pub bound: f64,
    pub lipschitz_bound: f64,
    pub sup_bound: f64,
    pub probes: Vec<SmoothingProbe>,
    /// Largest `grad_norm − 3·std_error − bound` over probes.
    pub worst_margin: f64,
    pub pass: bool,
}

/// Estimates `∇L_σ(x) = E[(L(x + σZ) − L(x)) Z] / σ` at each probe and
/// checks it against `min(Lip(L), c_d/σ · ‖L‖_∞)`.
pub fn gaussian_smoothing_check(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    lipschitz: f64,
    sup_norm: f64,
    sigma: f64,
    probes: &[Vec<f64>],
    samples: usize,
    rng: &RngStream,
) -> Result<SmoothingReport> {
    if !(sigma > 0.0) {
        return Err(argument("sigma must be positive"));
    }
    if samples < 2 || probes.is_empty() {
        return Err(argument("need at least two samples and one probe"));
    }
    let d = probes[0].len();
    if d == 0 || probes.iter().any(|p| p.len() != d) {
        return Err(argument("probes must share a positive dimension"));
    }
    let c_d = gaussian_norm_mean(d);
    let sup_bound = c_d / sigma * sup_norm;
    let bound = lipschitz.min(sup_bound);
    let n = samples as f64;
    let mut out = Vec::with_capacity(probes.len());
    let mut worst = f64::NEG_INFINITY;
    for (pi, x) in probes.iter().enumerate() {
        let base = f(x);
        let sizes = chunk_sizes(samples, MC_CHUNKS);
        let rngs = chunk_rngs(&rng.derive(pi as u64), sizes.len());
        let parts: Vec<(Vec<f64>, Vec<f64>)> = sizes
            .par_iter()
            .zip(rngs)
            .map(|(&count, mut r)| {
                let mut s1 = vec![0.0; d];
                let mut s2 = vec![0.0; d];
                let mut xp = vec![0.0; d];
                let mut z = vec![0.0; d];
                for _ in 0..count {
                    for (zi, (xpi, &xi)) in z.iter_mut().zip(xp.iter_mut().zip(x)) {
                        *zi = r.standard_normal();
                        *xpi = xi + sigma * *zi;
                    }
                    let w = (f(&xp) - base) / sigma;
                    for i in 0..d {
                        let y = w * z[i];
                        s1[i] += y;
                        s2[i] += y * y;
                    }
                }
                (s1, s2)
            })
            .collect();
        let mut s1 = vec![0.0; d];
        let mut s2 = vec![0.0; d];
        for (a, b) in &parts {
            for i in 0..d {
                s1[i] += a[i];
                s2[i] += b[i];
            }
        }
        let mean: Vec<f64> = s1.iter().map(|s| s / n).collect();
        let var_sum: f64 = (0..d).map(|i| ((s2[i] - n * mean[i] * mean[i]) / (n - 1.0)).max(0.0)).sum();
        let grad_norm = vector::norm(&mean);
        let std_error = (var_sum / n).sqrt();
        worst = worst.max(grad_norm - 3.0 * std_error - bound);
        out.push(SmoothingProbe {
            x: x.clone(),
            grad_norm,
            std_error,
        });
    }
    Ok(SmoothingReport {
        sigma,
        c_d,
        bound,
        lipschitz_bound: lipschitz,
        sup_bound,
        probes: out,
        worst_margin: worst,
        pass: worst <= 0.0,
    })
}

/// `d/dx E[clamp(x + σZ, −1, 1)] = Φ((1−x)/σ) − Φ((−1−x)/σ)`.
pub fn clamp_smoothed_derivative(x: f64, sigma: f64) -> f64 {
    let phi = Normal::standard();
    phi.cdf((1.0 - x) / sigma) - phi.cdf((-1.0 - x) / sigma)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClampProbe {
    pub x: f64,
    /// Mean of `clamp'(x + σZ)` over the draws.
    pub mc_mean: f64,
    pub analytic: f64,
    /// `√(p(1−p)/N)` at the analytic `p`.
    pub std_error: f64,
    /// `|mc_mean − analytic| / std_error`
    pub z_score: f64,
}

/// Averages perturbed derivatives of `clamp(·, −1, 1)` and compares them
/// with the analytic smoothed derivative.
pub fn clamp_smoothing_check(sigma: f64, probes: &[f64], samples: usize, rng: &RngStream) -> Result<Vec<ClampProbe>> {
    if !(sigma > 0.0) || samples == 0 {
        return Err(argument("sigma must be positive and samples nonzero"));
    }
    Ok(probes
        .iter()
        .enumerate()
        .map(|(pi, &x)| {
            let sizes = chunk_sizes(samples, MC_CHUNKS);
            let rngs = chunk_rngs(&rng.derive(pi as u64), sizes.len());
            let hits: usize = sizes
                .par_iter()
                .zip(rngs)
                .map(|(&count, mut r)| {
                    (0..count)
                        .filter(|_| (x + sigma * r.standard_normal()).abs() < 1.0)
                        .count()
                })
                .collect::<Vec<_>>()
                .into_iter()
                .sum();
            let mc_mean = hits as f64 / samples as f64;
            let analytic = clamp_smoothed_derivative(x, sigma);
            let std_error = (analytic * (1.0 - analytic) / samples as f64).sqrt();
            let diff = (mc_mean - analytic).abs();
            let z_score = if std_error > 0.0 {
                diff / std_error
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            ClampProbe {
                x,
                mc_mean,
                analytic,
                std_error,
                z_score,
            }
        })
        .collect())
}
