use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_nonneg, check_rate, config_error, Clock, PlanResult, PlanTrace, TraceRecord};
use crate::error::{Error, Result};
use crate::numerics::{vector, Real, RngStream};
use crate::objectives::{shooting_value, PlanProblem};

/// Diagonal-Gaussian cross-entropy method over the flat action vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CemConfig {
    pub population: usize,
    pub elites: usize,
    pub iterations: usize,
    pub init_std: f64,
    pub min_std: f64,
    /// Stop once the mean's shooting loss is at or below this value.
    pub stop_loss: f64,
    pub record_trace: bool,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self {
            population: 256,
            elites: 32,
            iterations: 50,
            init_std: 1.0,
            min_std: 0.05,
            stop_loss: 0.0,
            record_trace: false,
        }
    }
}

impl CemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.elites == 0 || self.elites > self.population {
            return Err(config_error("need 1 <= elites <= population"));
        }
        if self.iterations == 0 {
            return Err(config_error("iterations must be >= 1"));
        }
        check_rate("init_std", self.init_std)?;
        check_nonneg("min_std", self.min_std)?;
        check_nonneg("stop_loss", self.stop_loss)
    }
}

/// Mean and (population) standard deviation of `samples`, floored at `min_std`.
pub fn cem_refit<T: Real>(samples: &[&[T]], min_std: T) -> (Vec<T>, Vec<T>) {
    let dim = samples[0].len();
    let n = T::lit(samples.len() as f64);
    let mut mean = vec![T::zero(); dim];
    for s in samples {
        for (m, &x) in mean.iter_mut().zip(s.iter()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![T::zero(); dim];
    for s in samples {
        for ((v, &x), &m) in var.iter_mut().zip(s.iter()).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let std = var.into_iter().map(|v| (v / n).sqrt().max(min_std)).collect();
    (mean, std)
}

fn score<T: Real>(p: &PlanProblem<'_, T>, flat: &[T]) -> Result<T> {
    match shooting_value(p, &vector::unflatten(flat, p.action_dim())) {
        Ok(v) if v.is_nan() => Ok(T::infinity()),
        Ok(v) => Ok(v),
        Err(Error::Divergence { .. }) => Ok(T::infinity()),
        Err(e) => Err(e),
    }
}

/// CEM from a zero mean. Candidates are drawn serially from `rng` and scored
/// in parallel; elites are the lowest losses with ties broken by index.
pub fn plan_cem<T: Real>(p: &PlanProblem<'_, T>, cfg: &CemConfig, rng: &mut RngStream) -> Result<PlanResult<T>> {
    cfg.validate()?;
    let clock = Clock::start();
    let dim = p.horizon * p.action_dim();
    let mut mean = vec![T::zero(); dim];
    let mut std = vec![T::lit(cfg.init_std); dim];
    let min_std = T::lit(cfg.min_std);
    let mut trace = cfg.record_trace.then(PlanTrace::default);
    let mut used = 0;

    for it in 0..cfg.iterations {
        let mut draw = rng.derive(it as u64);
        let candidates: Vec<Vec<T>> = (0..cfg.population)
            .map(|_| {
                mean.iter()
                    .zip(&std)
                    .map(|(&m, &s)| {
                        let x = m + s * T::lit(draw.standard_normal());
                        p.action_bound.map_or(x, |b| x.max(-b).min(b))
                    })
                    .collect()
            })
            .collect();
        let losses = candidates
            .par_iter()
            .map(|c| score(p, c))
            .collect::<Result<Vec<T>>>()?;
        let mut order: Vec<usize> = (0..cfg.population).collect();
        order.sort_by(|&a, &b| losses[a].partial_cmp(&losses[b]).expect("NaN mapped to inf").then(a.cmp(&b)));
        let elites: Vec<&[T]> = order[..cfg.elites].iter().map(|&i| candidates[i].as_slice()).collect();
        (mean, std) = cem_refit(&elites, min_std);
        used = it + 1;
        let mean_loss = score(p, &mean)?;
        if let Some(tr) = trace.as_mut() {
            tr.records.push(TraceRecord {
                iteration: it,
                loss: losses[order[0]],
                shooting_loss: Some(mean_loss),
                actions: vector::unflatten(&mean, p.action_dim()),
                states: None,
                elapsed: clock.elapsed(),
            });
        }
        if mean_loss.as_f64() <= cfg.stop_loss {
            break;
        }
    }

    let actions = vector::unflatten(&mean, p.action_dim());
    let final_loss = shooting_value(p, &actions).unwrap_or(T::infinity());
    Ok(PlanResult {
        actions,
        final_loss,
        iterations_used: used,
        wall_clock: clock.elapsed(),
        diverged: !final_loss.is_finite(),
        trace,
    })
}
