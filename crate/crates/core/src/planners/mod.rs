//! Planner engines: shooting GD, lifted GD, GRASP and CEM.
//!
//! Each planner is a pure function of `(problem, config, rng)`. Configs are
//! JSON objects whose fields are all optional; unknown fields are rejected.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{gauss_vec, vector, Real, RngStream};
use crate::objectives::PlanProblem;

mod cem;
mod gd;
mod grasp;
mod lifted;

pub use cem::{cem_refit, plan_cem, CemConfig};
pub use gd::{plan_gd, plan_gd_noisy, GdConfig};
pub use grasp::{plan_grasp, GraspConfig};
pub use lifted::{plan_lifted, plan_lifted_from, LiftedConfig};

/// Any loss or state norm above this aborts the inner loop.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// One planner iteration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRecord<T> {
    pub iteration: usize,
    /// The loss the planner descends (shooting, lifted or GRASP).
    pub loss: T,
    /// Shooting loss when it was evaluated this iteration.
    pub shooting_loss: Option<T>,
    pub actions: Vec<Vec<T>>,
    /// Free states of lifted planners.
    pub states: Option<Vec<Vec<T>>>,
    pub elapsed: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PlanTrace<T> {
    pub records: Vec<TraceRecord<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanResult<T> {
    pub actions: Vec<Vec<T>>,
    /// Shooting loss of `actions`, recomputed after planning.
    pub final_loss: T,
    pub iterations_used: usize,
    pub wall_clock: f64,
    pub diverged: bool,
    pub trace: Option<PlanTrace<T>>,
}

/// Tagged union of planner configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlannerConfig {
    Gd(GdConfig),
    Lifted(LiftedConfig),
    Grasp(GraspConfig),
    Cem(CemConfig),
}

impl PlannerConfig {
    pub fn name(&self) -> &'static str {
        match self {
            PlannerConfig::Gd(c) if c.sigma_action > 0.0 || c.sigma_state > 0.0 => "gd_noisy",
            PlannerConfig::Gd(_) => "gd",
            PlannerConfig::Lifted(_) => "lifted",
            PlannerConfig::Grasp(_) => "grasp",
            PlannerConfig::Cem(_) => "cem",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PlannerConfig::Gd(c) => c.validate(),
            PlannerConfig::Lifted(c) => c.validate(),
            PlannerConfig::Grasp(c) => c.validate(),
            PlannerConfig::Cem(c) => c.validate(),
        }
    }

    /// Overrides the step budget for an early-exit loss threshold.
    pub fn set_stop_loss(&mut self, stop: f64) {
        match self {
            PlannerConfig::Gd(c) => c.stop_loss = stop,
            PlannerConfig::Lifted(c) => c.stop_loss = stop,
            PlannerConfig::Grasp(c) => c.stop_loss = stop,
            PlannerConfig::Cem(c) => c.stop_loss = stop,
        }
    }
}

/// Runs the configured planner.
pub fn plan<T: Real>(p: &PlanProblem<'_, T>, cfg: &PlannerConfig, rng: &mut RngStream) -> Result<PlanResult<T>> {
    match cfg {
        PlannerConfig::Gd(c) => plan_gd_noisy(p, c, rng),
        PlannerConfig::Lifted(c) => plan_lifted(p, c, rng),
        PlannerConfig::Grasp(c) => plan_grasp(p, c, rng),
        PlannerConfig::Cem(c) => plan_cem(p, c, rng),
    }
}

pub(crate) fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn check_rate(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_error(format!("{name} must be positive, got {v}")))
    }
}

pub(crate) fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_error(format!("{name} must be non-negative, got {v}")))
    }
}

#[inline]
pub(crate) fn diverging<T: Real>(v: T) -> bool {
    !v.is_finite() || v.as_f64() > DIVERGENCE_LIMIT
}

pub(crate) fn states_diverging<T: Real>(states: &[Vec<T>]) -> bool {
    states.iter().any(|s| diverging(vector::norm(s)))
}

pub(crate) fn grads_finite<T: Real>(g: &[Vec<T>]) -> bool {
    g.iter().all(|x| vector::all_finite(x))
}

/// `a ← a − η g`, blockwise.
pub(crate) fn descend<T: Real>(x: &mut [Vec<T>], g: &[Vec<T>], eta: T) {
    for (xi, gi) in x.iter_mut().zip(g) {
        vector::axpy(-eta, gi, xi);
    }
}

pub(crate) struct Clock(Instant);

impl Clock {
    pub(crate) fn start() -> Self {
        Clock(Instant::now())
    }

    pub(crate) fn elapsed(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Default state-init variance: `(0.1 ‖g − s0‖)²`.
pub(crate) fn default_init_eps<T: Real>(p: &PlanProblem<'_, T>) -> f64 {
    (0.1 * vector::dist(p.s0, p.goal).as_f64()).powi(2)
}

/// `s_t = (t/T) g + (1 − t/T) s0 + z`, `z ~ N(0, εI)`, for `t = 1..T−1`.
pub(crate) fn init_states<T: Real>(p: &PlanProblem<'_, T>, eps: f64, rng: &mut RngStream) -> Result<Vec<Vec<T>>> {
    let sd = T::lit(eps.sqrt());
    (1..p.horizon)
        .map(|t| {
            let w = T::lit(t as f64 / p.horizon as f64);
            let z = gauss_vec(rng, p.state_dim(), sd)?;
            Ok(vector::add(&vector::lerp(p.s0, p.goal, w), &z))
        })
        .collect()
}

pub(crate) fn zero_actions<T: Real>(p: &PlanProblem<'_, T>) -> Vec<Vec<T>> {
    vec![vec![T::zero(); p.action_dim()]; p.horizon]
}

/// Adds `N(0, σ²)` noise to every block.
pub(crate) fn perturb<T: Real>(x: &mut [Vec<T>], sigma: T, rng: &mut RngStream) -> Result<()> {
    for xi in x.iter_mut() {
        let z = gauss_vec(rng, xi.len(), sigma)?;
        for (v, zi) in xi.iter_mut().zip(z) {
            *v += zi;
        }
    }
    Ok(())
}

/// Lowest shooting loss seen so far; ties keep the earlier candidate.
pub(crate) struct Best<T> {
    pub(crate) loss: T,
    pub(crate) actions: Vec<Vec<T>>,
}

impl<T: Real> Best<T> {
    pub(crate) fn new(loss: T, actions: Vec<Vec<T>>) -> Self {
        let loss = if loss.is_nan() { T::infinity() } else { loss };
        Self { loss, actions }
    }

    pub(crate) fn offer(&mut self, loss: T, actions: &[Vec<T>]) {
        if loss < self.loss {
            self.loss = loss;
            self.actions = actions.to_vec();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn configs_reject_unknown_fields() {
        let ok: PlannerConfig = serde_json::from_str(r#"{"kind":"grasp","steps":10}"#).unwrap();
        assert!(matches!(ok, PlannerConfig::Grasp(ref c) if c.steps == 10));
        assert!(serde_json::from_str::<PlannerConfig>(r#"{"kind":"grasp","stepz":10}"#).is_err());
        assert!(serde_json::from_str::<PlannerConfig>(r#"{"kind":"mppi"}"#).is_err());
        let cem: PlannerConfig = serde_json::from_str(r#"{"kind":"cem"}"#).unwrap();
        assert_eq!(cem, PlannerConfig::Cem(CemConfig::default()));
    }

    #[test]
    fn config_round_trip() {
        for cfg in [
            PlannerConfig::Gd(GdConfig::default()),
            PlannerConfig::Lifted(LiftedConfig::default()),
            PlannerConfig::Grasp(GraspConfig::default()),
            PlannerConfig::Cem(CemConfig::default()),
        ] {
            let text = serde_json::to_string(&cfg).unwrap();
            assert_eq!(serde_json::from_str::<PlannerConfig>(&text).unwrap(), cfg);
        }
    }
}
