use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use grasp_core::harness::{
    cumulative_success_curve, distance_profile, emit_landscape, profile_csv, run_bench, run_trial, train_model, trials_csv,
    BenchConfig, BenchReport, LossKind, TrainModelConfig, TrialSpec,
};
use grasp_core::theory::{run_all_checks, CheckStatus};
use grasp_core::Error;
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "grasp", version, about = "Gradient-based planning over differentiable world models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for batteries (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output file; stdout when omitted (bench defaults to bench_report.json).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and print its report.
    Plan,
    /// Run a battery; writes the report JSON and a per-trial CSV beside it.
    Bench,
    /// Loss slice around the planner's converged actions, as CSV.
    Landscape {
        #[arg(long, value_enum, default_value = "shooting")]
        loss: LossArg,
        #[arg(long, default_value_t = 21)]
        grid: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
    },
    /// Distance to the goal along the executed trajectory, as CSV.
    Profile,
    /// Cumulative success over planner cost from a bench report (or config).
    Curve {
        /// Restrict to one cell.
        #[arg(long)]
        cell: Option<String>,
        #[arg(long, default_value_t = 50)]
        points: usize,
    },
    /// Run the closed-form and Monte-Carlo checks; prints results as JSON.
    TheoryCheck,
    /// Fit an MLP world model to a reference world and save it.
    TrainModel,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Shooting,
    Grasp,
}

enum Failure {
    Config(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Json(_) => Failure::Config(e.to_string()),
            other => Failure::Internal(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn read_config<C: DeserializeOwned>(path: Option<&Path>) -> Result<C, Failure> {
    let path = path.ok_or_else(|| Failure::Config("--config is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Internal(format!("write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Failure::Internal(e.to_string()))
}

fn workers(cli: &Cli) -> usize {
    cli.workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn trial_spec(cli: &Cli) -> Result<TrialSpec, Failure> {
    let mut spec: TrialSpec = read_config(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        spec.seed = s;
    }
    Ok(spec)
}

fn bench(cli: &Cli) -> Outcome {
    let mut cfg: BenchConfig = read_config(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let report = run_bench(&cfg, workers(cli))?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("bench_report.json"));
    emit(Some(&out), &report.to_json()?)?;
    let csv = out.with_extension("trials.csv");
    emit(Some(&csv), &trials_csv(&report)?)?;
    for c in &report.cells {
        let s = &c.summary;
        eprintln!(
            "{}: {}/{} ({:.1}% ± {:.1}), median cost {}",
            s.name,
            s.successes,
            s.trials,
            100.0 * s.success_rate,
            100.0 * s.ci_half_width,
            s.median_time.map_or("-".into(), |t| t.to_string()),
        );
    }
    Ok(())
}

fn curve(cli: &Cli, cell: Option<&str>, points: usize) -> Outcome {
    if points < 2 {
        return Err(Failure::Config("--points must be >= 2".into()));
    }
    let path = cli.config.as_deref();
    let report = match read_config::<BenchReport>(path) {
        Ok(r) => r,
        Err(_) => {
            let mut cfg: BenchConfig = read_config(path)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            run_bench(&cfg, workers(cli))?
        }
    };
    let cells: Vec<_> = report
        .cells
        .iter()
        .filter(|c| cell.is_none_or(|n| n == c.summary.name))
        .collect();
    if cells.is_empty() {
        return Err(Failure::Config(format!("no cell named {:?}", cell.unwrap_or_default())));
    }
    let max = cells.iter().flat_map(|c| &c.trials).map(|t| t.time).max().unwrap_or(0) as f64;
    let grid: Vec<f64> = (0..points).map(|i| max * i as f64 / (points - 1) as f64).collect();
    let mut text = String::from("cell,time,success_rate,ci_half_width\n");
    for c in cells {
        for p in cumulative_success_curve(&c.trials, &grid) {
            let _ = writeln!(text, "{},{},{},{}", c.summary.name, p.time, p.success_rate, p.ci_half_width);
        }
    }
    emit(cli.out.as_deref(), &text)
}

fn theory(cli: &Cli) -> Outcome {
    let seed = cli.seed.unwrap_or(0);
    let checks = run_all_checks(seed)?;
    let failed = checks.iter().filter(|c| c.status == CheckStatus::Fail).count();
    for c in &checks {
        eprintln!("{:?} {} observed {} bound {}", c.status, c.check_name, c.observed, c.bound);
    }
    eprintln!("{} checks, {failed} failed", checks.len());
    emit(cli.out.as_deref(), &to_json(&checks)?)
}

fn train(cli: &Cli) -> Outcome {
    let mut cfg: TrainModelConfig = read_config(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let (doc, report) = train_model(&cfg)?;
    eprintln!(
        "train mse {:.3e}, held-out mse {:.3e} ({} / {} samples)",
        report.train_mse, report.heldout_mse, report.train_size, report.heldout_size
    );
    emit(cli.out.as_deref(), &(doc.to_json()? + "\n"))
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Plan => {
            let r = run_trial(&trial_spec(cli)?)?;
            emit(cli.out.as_deref(), &to_json(&r)?)
        }
        Command::Bench => bench(cli),
        Command::Landscape { loss, grid, radius } => {
            let kind = match loss {
                LossArg::Shooting => LossKind::Shooting,
                LossArg::Grasp => LossKind::Grasp,
            };
            let field = emit_landscape(&trial_spec(cli)?, kind, *grid, *radius, None).map_err(|e| match e {
                Error::Argument(m) => Failure::Config(m),
                other => other.into(),
            })?;
            eprintln!("total variation {}, roughness {}", field.total_variation(), field.roughness());
            emit(cli.out.as_deref(), &field.to_csv())
        }
        Command::Profile => {
            let d = distance_profile(&trial_spec(cli)?)?;
            emit(cli.out.as_deref(), &profile_csv(&d))
        }
        Command::Curve { cell, points } => curve(cli, cell.as_deref(), *points),
        Command::TheoryCheck => theory(cli),
        Command::TrainModel => train(cli),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
