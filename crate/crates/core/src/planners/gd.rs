use serde::{Deserialize, Serialize};

use super::{
    check_nonneg, check_rate, config_error, descend, diverging, grads_finite, perturb, zero_actions, Best,
    Clock, PlanResult, PlanTrace, TraceRecord,
};
use crate::error::{Error, Result};
use crate::numerics::{gauss_vec, vector, Real, RngStream};
use crate::objectives::{shooting_value, shooting_value_grad, PlanProblem};

/// Shooting gradient descent, optionally with action or rollout noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GdConfig {
    pub steps: usize,
    pub eta: f64,
    /// Std of the perturbation applied to actions before each gradient evaluation.
    pub sigma_action: f64,
    /// Std of the additive state noise injected at every rollout step.
    pub sigma_state: f64,
    /// Stop once the shooting loss is at or below this value.
    pub stop_loss: f64,
    pub record_trace: bool,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            eta: 0.1,
            sigma_action: 0.0,
            sigma_state: 0.0,
            stop_loss: 0.0,
            record_trace: false,
        }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(config_error("steps must be >= 1"));
        }
        check_rate("eta", self.eta)?;
        check_nonneg("sigma_action", self.sigma_action)?;
        check_nonneg("sigma_state", self.sigma_state)?;
        check_nonneg("stop_loss", self.stop_loss)
    }
}

/// Noise-free shooting GD from zero actions. Noise fields of `cfg` are ignored.
pub fn plan_gd<T: Real>(p: &PlanProblem<'_, T>, cfg: &GdConfig, rng: &mut RngStream) -> Result<PlanResult<T>> {
    let clean = GdConfig {
        sigma_action: 0.0,
        sigma_state: 0.0,
        ..cfg.clone()
    };
    plan_gd_noisy(p, &clean, rng)
}

/// Shooting GD whose gradient is evaluated at perturbed actions and/or along
/// a noisy rollout; the update is applied to the clean actions. With both
/// noise levels at zero this is exactly [`plan_gd`].
pub fn plan_gd_noisy<T: Real>(p: &PlanProblem<'_, T>, cfg: &GdConfig, rng: &mut RngStream) -> Result<PlanResult<T>> {
    cfg.validate()?;
    let clock = Clock::start();
    let eta = T::lit(cfg.eta);
    let noisy = cfg.sigma_action > 0.0 || cfg.sigma_state > 0.0;
    let mut noise_rng = rng.derive(1);
    let mut actions = zero_actions(p);
    let mut best: Option<Best<T>> = None;
    let mut trace = cfg.record_trace.then(PlanTrace::default);
    let mut diverged = false;
    let mut used = 0;

    for k in 0..=cfg.steps {
        let (clean_loss, grad) = if noisy {
            let clean = match shooting_value(p, &actions) {
                Ok(v) => v,
                Err(Error::Divergence { .. }) => T::infinity(),
                Err(e) => return Err(e),
            };
            let grad = if k < cfg.steps {
                noisy_gradient(p, &actions, cfg, &mut noise_rng)?
            } else {
                None
            };
            (clean, grad)
        } else {
            match shooting_value_grad(p, &actions) {
                Ok((v, g)) => (v, Some(g)),
                Err(Error::Divergence { .. }) => (T::infinity(), None),
                Err(e) => return Err(e),
            }
        };
        if diverging(clean_loss) {
            diverged = true;
            break;
        }
        match best.as_mut() {
            Some(b) => b.offer(clean_loss, &actions),
            None => best = Some(Best::new(clean_loss, actions.clone())),
        }
        if let Some(tr) = trace.as_mut() {
            tr.records.push(TraceRecord {
                iteration: k,
                loss: clean_loss,
                shooting_loss: Some(clean_loss),
                actions: actions.clone(),
                states: None,
                elapsed: clock.elapsed(),
            });
        }
        if k == cfg.steps || clean_loss.as_f64() <= cfg.stop_loss {
            break;
        }
        let Some(grad) = grad else {
            diverged = true;
            break;
        };
        if !grads_finite(&grad) {
            diverged = true;
            break;
        }
        descend(&mut actions, &grad, eta);
        p.project_actions(&mut actions);
        used = k + 1;
    }

    let actions = match best {
        Some(b) => b.actions,
        None => zero_actions(p),
    };
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

/// Shooting gradient at `a + σ_a ξ` along `s_{t+1} = F(s_t, ã_t) + σ_s ζ_t`.
/// `None` when the noisy rollout blows up.
fn noisy_gradient<T: Real>(
    p: &PlanProblem<'_, T>,
    actions: &[Vec<T>],
    cfg: &GdConfig,
    rng: &mut RngStream,
) -> Result<Option<Vec<Vec<T>>>> {
    let mut a = actions.to_vec();
    if cfg.sigma_action > 0.0 {
        perturb(&mut a, T::lit(cfg.sigma_action), rng)?;
    }
    let mut states = Vec::with_capacity(p.horizon + 1);
    states.push(p.s0.to_vec());
    for (t, at) in a.iter().enumerate() {
        let mut next = p.model.step(&states[t], at);
        if cfg.sigma_state > 0.0 {
            let z = gauss_vec(rng, p.state_dim(), T::lit(cfg.sigma_state))?;
            next = vector::add(&next, &z);
        }
        if !vector::all_finite(&next) {
            return Ok(None);
        }
        states.push(next);
    }
    let mut lam: Vec<T> = vector::sub(&states[p.horizon], p.goal)
        .into_iter()
        .map(|r| r + r)
        .collect();
    let mut grads = vec![Vec::new(); p.horizon];
    for t in (0..p.horizon).rev() {
        let (gs, ga) = p.model.pullback(&states[t], &a[t], &lam);
        grads[t] = ga;
        lam = gs;
    }
    Ok(Some(grads))
}
