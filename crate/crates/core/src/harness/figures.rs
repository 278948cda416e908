use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{execute, wald_half_width, TrialRecord, TrialSpec, WorldSpec};
use crate::error::{Error, Result};
use crate::numerics::{vector, RngStream};
use crate::objectives::{grasp_value, landscape_slice, shooting_value, GoalWeights, LandscapeField, PlanProblem};
use crate::planners::{GraspConfig, PlannerConfig};
use crate::worldmodel::{rollout, AnyModel, WorldModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Shooting,
    /// Stop-gradient lifted loss with the free states frozen at the rollout
    /// of the converged actions.
    Grasp,
}

fn goal_weights(planner: &PlannerConfig) -> GoalWeights<f64> {
    let cfg = match planner {
        PlannerConfig::Grasp(c) => c.clone(),
        _ => GraspConfig::default(),
    };
    match cfg.goal_weights {
        Some(b) => GoalWeights::PerStep(b),
        None => GoalWeights::Constant(cfg.gamma),
    }
}

fn slice(
    spec: &TrialSpec,
    model: &dyn WorldModel<f64>,
    center: &[Vec<f64>],
    kind: LossKind,
    grid: usize,
    radius: f64,
) -> Result<LandscapeField<f64>> {
    let p = PlanProblem::new(model, &spec.s0, &spec.goal, spec.horizon)?;
    let m = p.action_dim();
    let flat = vector::flatten(center);
    let mut rng = RngStream::new(spec.seed, 2);
    match kind {
        LossKind::Shooting => landscape_slice(|x| shooting_value(&p, &vector::unflatten(x, m)), &flat, &mut rng, grid, radius),
        LossKind::Grasp => {
            let traj = rollout(model, &spec.s0, center)?;
            let free = traj.states[1..spec.horizon].to_vec();
            let w = goal_weights(&spec.planner);
            landscape_slice(|x| grasp_value(&p, &free, &vector::unflatten(x, m), &w), &flat, &mut rng, grid, radius)
        }
    }
}

fn converge(spec: &TrialSpec) -> Result<(AnyModel<f64>, Vec<Vec<f64>>)> {
    spec.validate()?;
    let world = spec.world.build()?;
    let planning = spec.planning_model.as_ref().map(WorldSpec::build).transpose()?;
    let ex = execute(spec, &world, planning.as_ref())?;
    Ok((planning.unwrap_or(world), ex.report.actions))
}

/// Runs the trial's planner, then slices `kind` around the returned actions
/// along two random directions seeded by the trial seed. Writes
/// `alpha,beta,loss` CSV to `out` when given.
pub fn emit_landscape(
    spec: &TrialSpec,
    kind: LossKind,
    grid: usize,
    radius: f64,
    out: Option<&Path>,
) -> Result<LandscapeField<f64>> {
    let (model, center) = converge(spec)?;
    let field = slice(spec, &model, &center, kind, grid, radius)?;
    if let Some(path) = out {
        std::fs::write(path, field.to_csv())?;
    }
    Ok(field)
}

/// Shooting and stop-gradient slices around the same converged point, along
/// the same directions.
pub fn landscape_pair(spec: &TrialSpec, grid: usize, radius: f64) -> Result<(LandscapeField<f64>, LandscapeField<f64>)> {
    let (model, center) = converge(spec)?;
    Ok((
        slice(spec, &model, &center, LossKind::Shooting, grid, radius)?,
        slice(spec, &model, &center, LossKind::Grasp, grid, radius)?,
    ))
}

/// `‖s_t − g‖` along the executed trajectory of a successful trial.
pub fn distance_profile(spec: &TrialSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let world = spec.world.build()?;
    let planning = spec.planning_model.as_ref().map(WorldSpec::build).transpose()?;
    let ex = execute(spec, &world, planning.as_ref())?;
    if !ex.report.success {
        return Err(Error::TrialFailed(format!(
            "goal not reached: closest approach {} > radius {}",
            ex.report.final_distance, spec.success_radius
        )));
    }
    Ok(ex.trajectory.states.iter().map(|s| vector::dist(s, &spec.goal)).collect())
}

pub fn profile_csv(profile: &[f64]) -> String {
    let mut text = String::from("t,distance\n");
    for (t, x) in profile.iter().enumerate() {
        let _ = writeln!(text, "{t},{x}");
    }
    text
}

/// Writes `t,distance` CSV and returns the profile.
pub fn emit_distance_profile(spec: &TrialSpec, out: &Path) -> Result<Vec<f64>> {
    let d = distance_profile(spec)?;
    std::fs::write(out, profile_csv(&d))?;
    Ok(d)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub time: f64,
    pub success_rate: f64,
    pub ci_half_width: f64,
}

/// Fraction of trials solved within cost `τ` for each `τ` in `grid`.
pub fn cumulative_success_curve(trials: &[TrialRecord], grid: &[f64]) -> Vec<CurvePoint> {
    let n = trials.len();
    grid.iter()
        .map(|&tau| {
            let k = trials.iter().filter(|t| t.success && t.time as f64 <= tau).count();
            let p = if n == 0 { 0.0 } else { k as f64 / n as f64 };
            CurvePoint {
                time: tau,
                success_rate: p,
                ci_half_width: wald_half_width(p, n),
            }
        })
        .collect()
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("time,success_rate,ci_half_width\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.time, p.success_rate, p.ci_half_width);
    }
    out
}
