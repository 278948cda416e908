use serde::{Deserialize, Serialize};

use super::{
    check_nonneg, check_rate, config_error, default_init_eps, descend, diverging, grads_finite, init_states,
    perturb, states_diverging, zero_actions, Best, Clock, PlanResult, PlanTrace, TraceRecord,
};
use crate::error::{Error, Result};
use crate::numerics::{vector, Real, RngStream};
use crate::objectives::{grasp_parts, shooting_value, shooting_value_grad, GoalWeights, PlanProblem};
use crate::worldmodel::rollout;

/// Stochastic lifted planner with stop-gradient dynamics, dense goal
/// shaping and periodic rollout synchronization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraspConfig {
    pub steps: usize,
    pub eta_a: f64,
    pub eta_s: f64,
    pub sigma_state: f64,
    pub gamma: f64,
    /// Per-step goal weights `β_t`; `null` uses `gamma` everywhere.
    pub goal_weights: Option<Vec<f64>>,
    /// Sync period; `null` disables synchronization.
    pub k_sync: Option<usize>,
    pub j_sync: usize,
    pub eta_sync: f64,
    pub noise_decay: f64,
    /// Variance of the state-init noise; `null` means `(0.1 ‖g − s0‖)²`.
    pub init_eps: Option<f64>,
    /// Stop at a sync point whose shooting loss is at or below this value.
    pub stop_loss: f64,
    pub record_trace: bool,
}

impl Default for GraspConfig {
    fn default() -> Self {
        Self {
            steps: 400,
            eta_a: 0.1,
            eta_s: 0.25,
            sigma_state: 0.02,
            gamma: 0.5,
            goal_weights: None,
            k_sync: Some(50),
            j_sync: 10,
            eta_sync: 0.05,
            noise_decay: 1.0,
            init_eps: None,
            stop_loss: 0.0,
            record_trace: false,
        }
    }
}

impl GraspConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(config_error("steps must be >= 1"));
        }
        check_rate("eta_a", self.eta_a)?;
        check_rate("eta_s", self.eta_s)?;
        check_rate("eta_sync", self.eta_sync)?;
        check_rate("gamma", self.gamma)?;
        check_nonneg("sigma_state", self.sigma_state)?;
        check_rate("noise_decay", self.noise_decay)?;
        check_nonneg("stop_loss", self.stop_loss)?;
        if self.k_sync == Some(0) {
            return Err(config_error("k_sync must be >= 1 or null"));
        }
        if let Some(e) = self.init_eps {
            check_nonneg("init_eps", e)?;
        }
        if let Some(w) = &self.goal_weights {
            for &b in w {
                check_nonneg("goal weight", b)?;
            }
        }
        Ok(())
    }

    fn weights<T: Real>(&self, horizon: usize) -> Result<GoalWeights<T>> {
        let w = match &self.goal_weights {
            Some(b) => GoalWeights::PerStep(b.iter().map(|&x| T::lit(x)).collect()),
            None => GoalWeights::Constant(T::lit(self.gamma)),
        };
        w.validate(horizon).map_err(|e| config_error(e.to_string()))?;
        Ok(w)
    }
}

/// Runs the GRASP loop. Each iteration takes a joint step on the
/// stop-gradient loss and perturbs the free states. Every `k_sync`
/// iterations the states are replaced by a rollout of the current actions,
/// `j_sync` shooting-GD steps refine the actions, and the states are
/// re-seeded from the rollout of the refined actions. The returned actions
/// are the best by shooting loss over all sync points and the final iterate.
pub fn plan_grasp<T: Real>(p: &PlanProblem<'_, T>, cfg: &GraspConfig, rng: &mut RngStream) -> Result<PlanResult<T>> {
    cfg.validate()?;
    let weights = cfg.weights::<T>(p.horizon)?;
    let clock = Clock::start();
    let eps = cfg.init_eps.unwrap_or_else(|| default_init_eps(p));
    let mut states = init_states(p, eps, &mut rng.derive(0))?;
    let mut noise_rng = rng.derive(1);
    let mut actions = zero_actions(p);
    let (eta_a, eta_s, eta_sync) = (T::lit(cfg.eta_a), T::lit(cfg.eta_s), T::lit(cfg.eta_sync));
    let mut sigma = cfg.sigma_state;
    let mut best: Option<Best<T>> = None;
    let mut trace = cfg.record_trace.then(PlanTrace::default);
    let mut diverged = false;
    let mut used = 0;

    'outer: for k in 0..cfg.steps {
        let (value, grads) = match grasp_parts(p, &states, &actions, &weights) {
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

        let mut shooting = None;
        if cfg.k_sync.is_some_and(|ks| (k + 1) % ks == 0) {
            for _ in 0..cfg.j_sync {
                match shooting_value_grad(p, &actions) {
                    Ok((v, g)) if !diverging(v) && grads_finite(&g) => {
                        offer(&mut best, v, &actions);
                        descend(&mut actions, &g, eta_sync);
                        p.project_actions(&mut actions);
                    }
                    Ok(_) | Err(Error::Divergence { .. }) => {
                        diverged = true;
                        break 'outer;
                    }
                    Err(e) => return Err(e),
                }
            }
            let roll = rollout(p.model, p.s0, &actions)?;
            let v = vector::dist_sq(roll.terminal(), p.goal);
            if diverging(v) || states_diverging(&roll.states) {
                diverged = true;
                break;
            }
            offer(&mut best, v, &actions);
            states = roll.states[1..p.horizon].to_vec();
            shooting = Some(v);
        }
        if let Some(tr) = trace.as_mut() {
            tr.records.push(TraceRecord {
                iteration: k,
                loss: value,
                shooting_loss: shooting,
                actions: actions.clone(),
                states: Some(states.clone()),
                elapsed: clock.elapsed(),
            });
        }
        if shooting.is_some_and(|v| v.as_f64() <= cfg.stop_loss) {
            break;
        }
    }

    let last = shooting_value(p, &actions).unwrap_or(T::infinity());
    offer(&mut best, last, &actions);
    let actions = best.map_or_else(|| zero_actions(p), |b| b.actions);
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

fn offer<T: Real>(best: &mut Option<Best<T>>, v: T, actions: &[Vec<T>]) {
    match best.as_mut() {
        Some(b) => b.offer(v, actions),
        None => *best = Some(Best::new(v, actions.to_vec())),
    }
}
