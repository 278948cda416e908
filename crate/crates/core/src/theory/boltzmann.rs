use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chunk_rngs;
use crate::error::{argument, Result};
use crate::numerics::RngStream;
use crate::objectives::{lifted_parts, PlanProblem};
use crate::worldmodel::WorldModel;

/// State `(x, y₁, y₂)`, scalar action: `F(s, a) = (a, x² − 1, d·σ(kx))`.
///
/// Over a two-step horizon with `s_0 = s_2 = 0`, the lifted loss is
/// `U(x₁) = (x₁² − 1)² + d²σ(kx₁)²` plus terms that are Gaussian in the
/// remaining variables, so the stationary law of `x₁` is `∝ exp(−βU)`:
/// two wells near `±1`, the one at `+1` raised by about `d²`.
struct DoubleWell {
    depth: f64,
    steepness: f64,
}

impl DoubleWell {
    fn sig(&self, x: f64) -> f64 {
        1.0 / (1.0 + (-self.steepness * x).exp())
    }

    fn potential(&self, x: f64) -> f64 {
        (x * x - 1.0).powi(2) + (self.depth * self.sig(x)).powi(2)
    }
}

impl WorldModel<f64> for DoubleWell {
    fn state_dim(&self) -> usize {
        3
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn step(&self, s: &[f64], a: &[f64]) -> Vec<f64> {
        vec![a[0], s[0] * s[0] - 1.0, self.depth * self.sig(s[0])]
    }

    fn pullback(&self, s: &[f64], _a: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let sg = self.sig(s[0]);
        let ds = 2.0 * s[0] * c[1] + self.depth * self.steepness * sg * (1.0 - sg) * c[2];
        (vec![ds, 0.0, 0.0], vec![c[0]])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoltzmannConfig {
    /// Squared depth offset `d²` of the upper well.
    pub depth_sq: f64,
    pub steepness: f64,
    /// Inverse temperature set through the noise scale `√(2η/β)`.
    pub beta: f64,
    pub eta: f64,
    pub chains: usize,
    pub steps_per_chain: usize,
    pub burn_in: usize,
}

impl Default for BoltzmannConfig {
    fn default() -> Self {
        Self {
            depth_sq: 0.3,
            steepness: 6.0,
            beta: 2.0,
            eta: 2e-3,
            chains: 32,
            steps_per_chain: 150_000,
            burn_in: 5_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoltzmannReport {
    pub beta_nominal: f64,
    /// `1 / (2 Var(y₁))`, from a coordinate whose conditional law is exactly `N(·, 1/(2β))`.
    pub beta_fit: f64,
    /// `U(upper well) − U(lower well)` at the two minima.
    pub delta_l: f64,
    /// Samples with `x₁ > 0` over samples with `x₁ < 0`.
    pub weight_ratio: f64,
    /// `exp(−β_fit ΔL)`
    pub predicted_ratio: f64,
    pub rel_error: f64,
    /// Sign changes of `x₁` summed over chains.
    pub crossings: usize,
    pub samples: usize,
}

fn well_minimum(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f((a + b) / 2.0)
}

/// Full Langevin on the free state and both actions of a double-well lifted
/// loss; compares the two mode weights of `x₁` with `exp(−βΔL)`.
pub fn boltzmann_check(cfg: &BoltzmannConfig, rng: &RngStream) -> Result<BoltzmannReport> {
    if !(cfg.beta > 0.0 && cfg.eta > 0.0 && cfg.depth_sq >= 0.0 && cfg.steepness > 0.0) {
        return Err(argument("beta, eta, steepness must be positive and depth_sq non-negative"));
    }
    if cfg.chains == 0 || cfg.steps_per_chain < 2 {
        return Err(argument("need at least one chain and two steps"));
    }
    let model = DoubleWell {
        depth: cfg.depth_sq.sqrt(),
        steepness: cfg.steepness,
    };
    let zero = [0.0; 3];
    let p = PlanProblem::new(&model, &zero, &zero, 2)?;
    let noise = (2.0 * cfg.eta / cfg.beta).sqrt();
    let sizes = vec![cfg.steps_per_chain; cfg.chains];
    let rngs = chunk_rngs(rng, cfg.chains);

    // per chain: (positive count, y₁ sum, y₁ sumsq, crossings)
    let parts: Vec<Result<(usize, f64, f64, usize)>> = sizes
        .par_iter()
        .zip(rngs)
        .enumerate()
        .map(|(ci, (&count, mut r))| {
            let x0 = if ci % 2 == 0 { 1.0 } else { -1.0 };
            let mut states = vec![vec![x0, -1.0, 0.0]];
            let mut actions = vec![vec![x0], vec![0.0]];
            let (mut pos, mut ys, mut yss, mut cross) = (0usize, 0.0, 0.0, 0usize);
            let mut last_sign = x0 > 0.0;
            for k in 0..cfg.burn_in + count {
                let (_, g) = lifted_parts(&p, &states, &actions)?;
                for (x, d) in states.iter_mut().flatten().zip(g.d_states.iter().flatten()) {
                    *x += -cfg.eta * d + noise * r.standard_normal();
                }
                for (x, d) in actions.iter_mut().flatten().zip(g.d_actions.iter().flatten()) {
                    *x += -cfg.eta * d + noise * r.standard_normal();
                }
                let x1 = states[0][0];
                let sign = x1 > 0.0;
                if k >= cfg.burn_in {
                    pos += usize::from(sign);
                    let y = states[0][1];
                    ys += y;
                    yss += y * y;
                    cross += usize::from(sign != last_sign);
                }
                last_sign = sign;
            }
            Ok((pos, ys, yss, cross))
        })
        .collect();
    let mut pos = 0;
    let (mut ys, mut yss, mut crossings) = (0.0, 0.0, 0);
    for part in parts {
        let (a, b, c, d) = part?;
        pos += a;
        ys += b;
        yss += c;
        crossings += d;
    }
    let samples = cfg.chains * cfg.steps_per_chain;
    let n = samples as f64;
    let ym = ys / n;
    let var_y = (yss - n * ym * ym) / (n - 1.0);
    let beta_fit = 1.0 / (2.0 * var_y);
    let u = |x: f64| model.potential(x);
    let upper = well_minimum(&u, 0.2, 2.0);
    let lower = well_minimum(&u, -2.0, -0.2);
    let delta_l = upper - lower;
    let neg = samples - pos;
    let weight_ratio = pos as f64 / neg.max(1) as f64;
    let predicted_ratio = (-beta_fit * delta_l).exp();
    Ok(BoltzmannReport {
        beta_nominal: cfg.beta,
        beta_fit,
        delta_l,
        weight_ratio,
        predicted_ratio,
        rel_error: (weight_ratio - predicted_ratio).abs() / predicted_ratio,
        crossings,
        samples,
    })
}
