use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{config_hash, execute, median, recheck, wald_half_width, TrialSpec, WorldSpec, VERSION};
use crate::error::{Error, Result};
use crate::numerics::{splitmix64, RngStream};
use crate::planners::PlannerConfig;

/// Start/goal distribution of a battery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSpec {
    Fixed { s0: Vec<f64>, goal: Vec<f64> },
    /// Independent uniform draws inside two axis-aligned boxes.
    Uniform {
        s0_lo: Vec<f64>,
        s0_hi: Vec<f64>,
        goal_lo: Vec<f64>,
        goal_hi: Vec<f64>,
    },
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            TaskSpec::Fixed { s0, goal } => s0.len() == goal.len(),
            TaskSpec::Uniform { s0_lo, s0_hi, goal_lo, goal_hi } => {
                let n = s0_lo.len();
                s0_hi.len() == n
                    && goal_lo.len() == n
                    && goal_hi.len() == n
                    && s0_lo.iter().zip(s0_hi).chain(goal_lo.iter().zip(goal_hi)).all(|(l, h)| l <= h)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("task bounds must have equal lengths and lo <= hi".into()))
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> (Vec<f64>, Vec<f64>) {
        match self {
            TaskSpec::Fixed { s0, goal } => (s0.clone(), goal.clone()),
            TaskSpec::Uniform { s0_lo, s0_hi, goal_lo, goal_hi } => {
                let mut draw = |lo: &[f64], hi: &[f64]| -> Vec<f64> {
                    lo.iter().zip(hi).map(|(&l, &h)| rng.uniform_range(l, h)).collect()
                };
                let s0 = draw(s0_lo, s0_hi);
                (s0, draw(goal_lo, goal_hi))
            }
        }
    }
}

/// One planner field swept over a list of values; each value becomes a cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub name: String,
    pub planner: PlannerConfig,
    pub horizon: usize,
    #[serde(default)]
    pub sweep: Option<Sweep>,
}

/// A full battery: every cell runs on the same `trials` tasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default)]
    pub seed: u64,
    pub trials: usize,
    pub world: WorldSpec,
    #[serde(default)]
    pub planning_model: Option<WorldSpec>,
    pub task: TaskSpec,
    pub success_radius: f64,
    #[serde(default)]
    pub action_bound: Option<f64>,
    #[serde(default)]
    pub time_limit: Option<f64>,
    pub cells: Vec<CellSpec>,
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Cells after sweep expansion, as `(name, planner, horizon)`.
    pub fn expanded_cells(&self) -> Result<Vec<(String, PlannerConfig, usize)>> {
        let mut out = Vec::new();
        for cell in &self.cells {
            let Some(sweep) = &cell.sweep else {
                out.push((cell.name.clone(), cell.planner.clone(), cell.horizon));
                continue;
            };
            let base = serde_json::to_value(&cell.planner)?;
            for v in &sweep.values {
                let mut cfg = base.clone();
                let obj = cfg.as_object_mut().expect("planner configs are objects");
                if sweep.param == "kind" || !obj.contains_key(&sweep.param) {
                    return Err(Error::Config(format!("cell {}: cannot sweep {:?}", cell.name, sweep.param)));
                }
                obj.insert(sweep.param.clone(), v.clone());
                let planner: PlannerConfig =
                    serde_json::from_value(cfg).map_err(|e| Error::Config(format!("cell {}: {e}", cell.name)))?;
                out.push((format!("{}/{}={}", cell.name, sweep.param, v), planner, cell.horizon));
            }
        }
        Ok(out)
    }

    /// Seed and task of trial `index`, shared by every cell.
    pub fn trial_task(&self, index: usize) -> (u64, Vec<f64>, Vec<f64>) {
        let mut rng = RngStream::new(self.seed, 1).derive(index as u64);
        let (s0, g) = self.task.sample(&mut rng);
        (splitmix64(self.seed ^ splitmix64(index as u64)), s0, g)
    }

    /// Trial specs of every expanded cell, with the cell names.
    pub fn specs(&self) -> Result<Vec<(String, Vec<TrialSpec>)>> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.cells.is_empty() {
            return Err(Error::Config("at least one cell is required".into()));
        }
        self.task.validate()?;
        let tasks: Vec<_> = (0..self.trials).map(|i| self.trial_task(i)).collect();
        self.expanded_cells()?
            .into_iter()
            .map(|(name, planner, horizon)| {
                let specs = tasks
                    .iter()
                    .map(|(seed, s0, goal)| TrialSpec {
                        world: self.world.clone(),
                        planning_model: self.planning_model.clone(),
                        planner: planner.clone(),
                        horizon,
                        s0: s0.clone(),
                        goal: goal.clone(),
                        success_radius: self.success_radius,
                        action_bound: self.action_bound,
                        seed: *seed,
                        time_limit: self.time_limit,
                    })
                    .collect();
                Ok((name, specs))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub seed: u64,
    pub success: bool,
    /// Planner cost in model evaluations.
    pub time: u64,
    pub final_distance: Option<f64>,
    pub iterations: usize,
    pub diverged: bool,
    pub timed_out: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub name: String,
    pub planner: String,
    pub horizon: usize,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub ci_half_width: f64,
    /// Median cost over successful trials only.
    pub median_time: Option<f64>,
    pub diverged: usize,
    pub timed_out: usize,
    pub errors: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub summary: CellReport,
    pub trials: Vec<TrialRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub version: String,
    pub config_hash: String,
    pub config: BenchConfig,
    pub cells: Vec<CellResult>,
}

impl BenchReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn cell(&self, name: &str) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.summary.name == name)
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::Config("workers must be >= 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn run_one(index: usize, spec: &TrialSpec) -> TrialRecord {
    let outcome = (|| {
        let world = spec.world.build()?;
        let planning = spec.planning_model.as_ref().map(WorldSpec::build).transpose()?;
        let ex = execute(spec, &world, planning.as_ref())?;
        recheck(spec, &world, &ex.report)?;
        Ok::<_, Error>(ex.report)
    })();
    match outcome {
        Ok(r) => TrialRecord {
            index,
            seed: spec.seed,
            success: r.success,
            time: r.time,
            final_distance: Some(r.final_distance),
            iterations: r.iterations,
            diverged: r.diverged,
            timed_out: r.timed_out,
            error: None,
        },
        Err(e) => TrialRecord {
            index,
            seed: spec.seed,
            success: false,
            time: 0,
            final_distance: None,
            iterations: 0,
            diverged: matches!(e, Error::Divergence { .. }),
            timed_out: false,
            error: Some(e.to_string()),
        },
    }
}

fn aggregate(name: &str, specs: &[TrialSpec], trials: Vec<TrialRecord>) -> CellResult {
    let n = trials.len();
    let successes = trials.iter().filter(|t| t.success).count();
    let p = successes as f64 / n as f64;
    let times: Vec<f64> = trials.iter().filter(|t| t.success).map(|t| t.time as f64).collect();
    CellResult {
        summary: CellReport {
            name: name.to_string(),
            planner: specs[0].planner.name().to_string(),
            horizon: specs[0].horizon,
            trials: n,
            successes,
            success_rate: p,
            ci_half_width: wald_half_width(p, n),
            median_time: median(&times),
            diverged: trials.iter().filter(|t| t.diverged).count(),
            timed_out: trials.iter().filter(|t| t.timed_out).count(),
            errors: trials.iter().filter(|t| t.error.is_some()).count(),
        },
        trials,
    }
}

/// Runs every spec on a pool of `workers` threads. Individual trial errors
/// are recorded, never propagated; invalid specs are rejected up front.
pub fn run_battery(name: &str, specs: &[TrialSpec], workers: usize) -> Result<CellResult> {
    if specs.is_empty() {
        return Err(Error::Config("a battery needs at least one trial".into()));
    }
    for s in specs {
        s.validate()?;
    }
    let trials = pool(workers)?.install(|| specs.par_iter().enumerate().map(|(i, s)| run_one(i, s)).collect());
    Ok(aggregate(name, specs, trials))
}

/// Runs all cells of a battery config.
pub fn run_bench(config: &BenchConfig, workers: usize) -> Result<BenchReport> {
    let cells = config.specs()?;
    for (_, specs) in &cells {
        for s in specs {
            s.validate()?;
        }
    }
    let pool = pool(workers)?;
    let mut results = Vec::with_capacity(cells.len());
    for (name, specs) in &cells {
        let trials = pool.install(|| specs.par_iter().enumerate().map(|(i, s)| run_one(i, s)).collect());
        results.push(aggregate(name, specs, trials));
    }
    Ok(BenchReport {
        version: VERSION.to_string(),
        config_hash: config_hash(config),
        config: config.clone(),
        cells: results,
    })
}

/// One row per trial across all cells.
pub fn trials_csv(report: &BenchReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(["cell", "index", "seed", "success", "time", "final_distance", "iterations", "diverged", "timed_out", "error"])
        .map_err(io)?;
    for cell in &report.cells {
        for t in &cell.trials {
            w.write_record([
                cell.summary.name.clone(),
                t.index.to_string(),
                t.seed.to_string(),
                t.success.to_string(),
                t.time.to_string(),
                t.final_distance.map(|d| d.to_string()).unwrap_or_default(),
                t.iterations.to_string(),
                t.diverged.to_string(),
                t.timed_out.to_string(),
                t.error.clone().unwrap_or_default(),
            ])
            .map_err(io)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
