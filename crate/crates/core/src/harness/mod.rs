//! Trials, batteries and report files.
//!
//! A trial plans open-loop on a planning model, executes the returned
//! actions on the true world and scores the minimum distance to the goal
//! along the executed trajectory. Planner cost is measured in model
//! evaluations (forwards plus pullbacks), which is deterministic; wall-clock
//! seconds are reported alongside but kept out of battery reports.

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::{vector, DenseMatrix, RngStream};
use crate::objectives::{shooting_value, PlanProblem};
use crate::planners::{plan, PlannerConfig};
use crate::worldmodel::{rollout, AnyModel, CountingModel, LinearModel, ModelDocument, Trajectory, Wall, WallWorld, WorldModel};

mod battery;
mod figures;
mod training;

pub use battery::{
    run_battery, run_bench, trials_csv, BenchConfig, BenchReport, CellReport, CellResult, CellSpec, Sweep,
    TaskSpec, TrialRecord,
};
pub use figures::{
    cumulative_success_curve, curve_csv, distance_profile, emit_distance_profile, emit_landscape, landscape_pair,
    profile_csv, CurvePoint, LossKind,
};
pub use training::{train_model, TrainModelConfig};

/// Toolkit version folded into every config hash.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn default_stiffness() -> f64 {
    1.0
}

fn default_step_scale() -> f64 {
    0.1
}

/// A world the harness can build: analytic models or a saved model document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WorldSpec {
    Linear {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        #[serde(default)]
        offset: Option<Vec<f64>>,
    },
    Wall {
        walls: Vec<Wall<f64>>,
        #[serde(default = "default_stiffness")]
        stiffness: f64,
        #[serde(default = "default_step_scale")]
        step_scale: f64,
    },
    Document {
        path: PathBuf,
    },
}

impl WorldSpec {
    pub fn build(&self) -> Result<AnyModel<f64>> {
        let cfg = |e: Error| match e {
            Error::Io(_) => e,
            other => Error::Config(other.to_string()),
        };
        match self {
            WorldSpec::Linear { a, b, offset } => {
                let a = DenseMatrix::from_rows(a).map_err(cfg)?;
                let b = DenseMatrix::from_rows(b).map_err(cfg)?;
                let n = a.rows();
                let c = offset.clone().unwrap_or_else(|| vec![0.0; n]);
                Ok(AnyModel::Linear(LinearModel::with_offset(a, b, c).map_err(cfg)?))
            }
            WorldSpec::Wall { walls, stiffness, step_scale } => {
                let walls = walls
                    .iter()
                    .map(|w| Wall::new(w.p1, w.p2, w.thickness))
                    .collect::<Result<Vec<_>>>()
                    .map_err(cfg)?;
                Ok(AnyModel::Wall(WallWorld::new(walls, *stiffness, *step_scale).map_err(cfg)?))
            }
            WorldSpec::Document { path } => {
                let doc = ModelDocument::load(path)?;
                AnyModel::from_document(&doc).map_err(cfg)
            }
        }
    }
}

/// One open-loop planning trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialSpec {
    /// Environment the plan is executed and scored on.
    pub world: WorldSpec,
    /// Model the planner differentiates; `null` plans on `world` itself.
    #[serde(default)]
    pub planning_model: Option<WorldSpec>,
    pub planner: PlannerConfig,
    pub horizon: usize,
    pub s0: Vec<f64>,
    pub goal: Vec<f64>,
    pub success_radius: f64,
    /// Per-coordinate action bound applied by the planner.
    #[serde(default)]
    pub action_bound: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Wall-clock budget for the planner call in seconds.
    #[serde(default)]
    pub time_limit: Option<f64>,
}

impl TrialSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.success_radius > 0.0) || !self.success_radius.is_finite() {
            return bad(format!("success_radius must be positive, got {}", self.success_radius));
        }
        if self.horizon == 0 {
            return bad("horizon must be >= 1".into());
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return bad(format!("time_limit must be positive, got {t}"));
            }
        }
        if let Some(b) = self.action_bound {
            if !(b > 0.0 && b.is_finite()) {
                return bad(format!("action_bound must be positive, got {b}"));
            }
        }
        if self.s0.len() != self.goal.len() {
            return bad(format!("s0 has {} entries, goal has {}", self.s0.len(), self.goal.len()));
        }
        if self.s0.iter().chain(&self.goal).any(|x| !x.is_finite()) {
            return bad("s0 and goal must be finite".into());
        }
        self.planner.validate()
    }

    /// Hex sha256 of the canonical JSON of this spec and the toolkit version.
    pub fn config_hash(&self) -> String {
        config_hash(self)
    }
}

pub(crate) fn config_hash<C: Serialize>(config: &C) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(config).expect("configs serialize"));
    h.update(b"\0");
    h.update(VERSION.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialReport {
    pub success: bool,
    /// Planner cost in model evaluations.
    pub time: u64,
    pub wall_clock: f64,
    /// Minimum of `‖s_t − g‖` along the executed trajectory, `t = 0..T`.
    pub final_distance: f64,
    pub terminal_distance: f64,
    pub iterations: usize,
    pub diverged: bool,
    pub timed_out: bool,
    /// Shooting loss of the plan on the planning model.
    pub plan_loss: f64,
    pub config_hash: String,
    pub actions: Vec<Vec<f64>>,
}

pub(crate) struct Executed {
    pub report: TrialReport,
    pub trajectory: Trajectory<f64>,
}

/// `min_t ‖s_t − g‖` over a trajectory.
pub fn min_distance(traj: &Trajectory<f64>, goal: &[f64]) -> f64 {
    traj.states.iter().map(|s| vector::dist(s, goal)).fold(f64::INFINITY, f64::min)
}

pub(crate) fn execute(spec: &TrialSpec, world: &AnyModel<f64>, planning: Option<&AnyModel<f64>>) -> Result<Executed> {
    let planning: &dyn WorldModel<f64> = match planning {
        Some(m) => m,
        None => world,
    };
    let counting = CountingModel::new(planning);
    let p = PlanProblem::new(&counting, &spec.s0, &spec.goal, spec.horizon)?.with_action_bound(spec.action_bound)?;
    let mut rng = RngStream::new(spec.seed, 0);
    let start = Instant::now();
    let result = plan(&p, &spec.planner, &mut rng)?;
    let wall_clock = start.elapsed().as_secs_f64();
    let time = counting.forwards() + counting.pullbacks();

    let trajectory = rollout(world, &spec.s0, &result.actions)?;
    let final_distance = min_distance(&trajectory, &spec.goal);
    let terminal_distance = vector::dist(trajectory.terminal(), &spec.goal);
    let timed_out = spec.time_limit.is_some_and(|t| wall_clock > t);
    let success = !timed_out && final_distance <= spec.success_radius;
    Ok(Executed {
        report: TrialReport {
            success,
            time,
            wall_clock,
            final_distance,
            terminal_distance,
            iterations: result.iterations_used,
            diverged: result.diverged,
            timed_out,
            plan_loss: result.final_loss,
            config_hash: spec.config_hash(),
            actions: result.actions,
        },
        trajectory,
    })
}

/// Plans, executes on the true world and scores one trial.
pub fn run_trial(spec: &TrialSpec) -> Result<TrialReport> {
    spec.validate()?;
    let world = spec.world.build()?;
    let planning = spec.planning_model.as_ref().map(WorldSpec::build).transpose()?;
    Ok(execute(spec, &world, planning.as_ref())?.report)
}

/// Re-simulates `actions` on `world` and checks the reported distance.
pub(crate) fn recheck(spec: &TrialSpec, world: &AnyModel<f64>, report: &TrialReport) -> Result<()> {
    if !report.success {
        return Ok(());
    }
    let traj = rollout(world, &spec.s0, &report.actions)?;
    let d = min_distance(&traj, &spec.goal);
    if d <= spec.success_radius && d == report.final_distance {
        Ok(())
    } else {
        Err(Error::TrialFailed(format!(
            "success re-check failed: re-simulated distance {d} vs reported {} (radius {})",
            report.final_distance, spec.success_radius
        )))
    }
}

/// Shooting loss of `actions` on `model`.
pub fn plan_loss(model: &dyn WorldModel<f64>, s0: &[f64], goal: &[f64], actions: &[Vec<f64>]) -> Result<f64> {
    let p = PlanProblem::new(model, s0, goal, actions.len())?;
    shooting_value(&p, actions)
}

/// Wald 95% half-width `1.96 √(p(1−p)/N)`.
pub fn wald_half_width(p: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    1.96 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Median of a non-empty sample; mean of the two middle values for even sizes.
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}
