use serde::{Deserialize, Serialize};

use super::{
    check_nonneg, check_rate, config_error, default_init_eps, descend, diverging, grads_finite, init_states,
    perturb, states_diverging, zero_actions, Clock, PlanResult, PlanTrace, TraceRecord,
};
use crate::error::{Error, Result};
use crate::numerics::{Real, RngStream};
use crate::objectives::{lifted_parts, shooting_value, PlanProblem};

/// Joint gradient descent on states and actions of the full lifted loss,
/// with optional Gaussian noise on the states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiftedConfig {
    pub steps: usize,
    pub eta_a: f64,
    pub eta_s: f64,
    pub sigma_state: f64,
    /// Multiplies `sigma_state` after every step.
    pub noise_decay: f64,
    /// Variance of the state-init noise; `null` means `(0.1 ‖g − s0‖)²`.
    pub init_eps: Option<f64>,
    pub stop_loss: f64,
    pub record_trace: bool,
}

impl Default for LiftedConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            eta_a: 0.1,
            eta_s: 0.1,
            sigma_state: 0.0,
            noise_decay: 1.0,
            init_eps: None,
            stop_loss: 0.0,
            record_trace: false,
        }
    }
}

impl LiftedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(config_error("steps must be >= 1"));
        }
        check_rate("eta_a", self.eta_a)?;
        check_rate("eta_s", self.eta_s)?;
        check_nonneg("sigma_state", self.sigma_state)?;
        check_rate("noise_decay", self.noise_decay)?;
        if let Some(e) = self.init_eps {
            check_nonneg("init_eps", e)?;
        }
        check_nonneg("stop_loss", self.stop_loss)
    }
}

/// Lifted-state GD. States start on the noisy `s0 → g` interpolation and
/// actions at zero; the returned actions are the final iterate.
pub fn plan_lifted<T: Real>(p: &PlanProblem<'_, T>, cfg: &LiftedConfig, rng: &mut RngStream) -> Result<PlanResult<T>> {
    cfg.validate()?;
    let eps = cfg.init_eps.unwrap_or_else(|| default_init_eps(p));
    let states = init_states(p, eps, &mut rng.derive(0))?;
    plan_lifted_from(p, cfg, states, zero_actions(p), rng)
}

/// [`plan_lifted`] from explicit free states `s_1..s_{T−1}` and actions.
pub fn plan_lifted_from<T: Real>(
    p: &PlanProblem<'_, T>,
    cfg: &LiftedConfig,
    mut states: Vec<Vec<T>>,
    mut actions: Vec<Vec<T>>,
    rng: &mut RngStream,
) -> Result<PlanResult<T>> {
    cfg.validate()?;
    p.check_free_states(&states)?;
    p.check_actions(&actions)?;
    let clock = Clock::start();
    let mut noise_rng = rng.derive(1);
    let (eta_a, eta_s) = (T::lit(cfg.eta_a), T::lit(cfg.eta_s));
    let mut sigma = cfg.sigma_state;
    let mut trace = cfg.record_trace.then(PlanTrace::default);
    let mut diverged = false;
    let mut used = 0;

    for k in 0..cfg.steps {
        let (value, grads) = match lifted_parts(p, &states, &actions) {
            Ok(r) => r,
            Err(Error::Divergence { .. }) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        if diverging(value) || !grads_finite(&grads.d_actions) || !grads_finite(&grads.d_states) {
            diverged = true;
            break;
        }
        if let Some(tr) = trace.as_mut() {
            tr.records.push(TraceRecord {
                iteration: k,
                loss: value,
                shooting_loss: None,
                actions: actions.clone(),
                states: Some(states.clone()),
                elapsed: clock.elapsed(),
            });
        }
        if value.as_f64() <= cfg.stop_loss {
            break;
        }
        let prev = (actions.clone(), states.clone());
        descend(&mut actions, &grads.d_actions, eta_a);
        p.project_actions(&mut actions);
        descend(&mut states, &grads.d_states, eta_s);
        if sigma > 0.0 {
            perturb(&mut states, T::lit(sigma), &mut noise_rng)?;
            sigma *= cfg.noise_decay;
        }
        if states_diverging(&states) || states_diverging(&actions) {
            actions = prev.0;
            diverged = true;
            break;
        }
        used = k + 1;
    }

    let final_loss = shooting_value(p, &actions).unwrap_or(T::infinity());
    Ok(PlanResult {
        actions,
        final_loss,
        iterations_used: used,
        wall_clock: clock.elapsed(),
        diverged,
        trace,
    })
}
