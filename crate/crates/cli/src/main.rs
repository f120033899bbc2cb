//! `tdho`: scenario-driven runs of the oscillator laboratory.
//!
//! Exit status: 0 on success, 1 for invalid input (nothing is written),
//! 2 for a numerical failure (an `error.json` diagnostic is written).

mod csv;
mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use run::{pretty, Run};
use tdho_core::scenario::{Scenario, Task};
use tdho_core::Error;

pub const OUT_ENV: &str = "TDHO_OUT";
pub const DEFAULT_ROOT: &str = "runs";

#[derive(Debug, Parser)]
#[command(name = "tdho", version, about = "Coupled time-dependent oscillators: invariants, moments and grid runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classical solution pair and physical trajectory.
    Simulate(Flags),
    /// Wronskian invariant drift and pair invariants.
    Invariants(Flags),
    /// Ermakov amplitudes, residuals and Lewis values per oscillator.
    Ermakov(Flags),
    /// Gaussian moment evolution with ⟨G⟩ and ⟨GG†⟩.
    Gaussian(Flags),
    /// Direct split-step run of the coupled pair.
    Oracle2d(Flags),
    /// Frame-chain solve compared with the direct run.
    Pipeline(Flags),
    /// Runs the scenario's tasks and writes a summary.
    Report(Flags),
}

#[derive(Debug, Args)]
struct Flags {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory (default: $TDHO_OUT/<name>, else runs/<name>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// ODE tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Split-step size.
    #[arg(long)]
    dt: Option<f64>,
    /// Grid points per axis.
    #[arg(long)]
    grid: Option<usize>,
    /// Seed for generated chains.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    parallel: Option<usize>,
}

impl Command {
    fn split(self) -> (Task, Flags) {
        match self {
            Command::Simulate(f) => (Task::Simulate, f),
            Command::Invariants(f) => (Task::Invariants, f),
            Command::Ermakov(f) => (Task::Ermakov, f),
            Command::Gaussian(f) => (Task::Gaussian, f),
            Command::Oracle2d(f) => (Task::Oracle2d, f),
            Command::Pipeline(f) => (Task::Pipeline, f),
            Command::Report(f) => (Task::Report, f),
        }
    }
}

fn prepare(task: Task, flags: &Flags) -> Result<(Run, PathBuf), String> {
    let text = fs::read_to_string(&flags.scenario)
        .map_err(|e| format!("cannot read {}: {e}", flags.scenario.display()))?;
    let mut scenario = Scenario::from_json(&text).map_err(|e| e.to_string())?;
    let tol = &mut scenario.tolerances;
    if let Some(v) = flags.tol {
        tol.ode_tol = v;
    }
    if let Some(v) = flags.dt {
        tol.dt = v;
    }
    if let Some(v) = flags.grid {
        tol.grid.n = v;
    }
    if flags.seed.is_some() {
        scenario.seed = flags.seed;
    }
    if flags.parallel == Some(0) {
        return Err("--parallel must be at least 1".into());
    }
    let chain = scenario.validate().map_err(|e| e.to_string())?;
    if task.needs_pair() && chain.n != 2 {
        return Err(format!("{} needs n = 2, chain has n = {}", task.name(), chain.n));
    }
    let root = match (&flags.out, &scenario.output) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_ROOT))
            .join(&scenario.name),
    };
    let run = Run {
        scenario,
        chain,
        parallel: flags.parallel,
    };
    Ok((run, root))
}

fn write_all(dir: &Path, files: &[(String, String)]) -> std::io::Result<()> {
    for (name, body) in files {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, body)?;
    }
    Ok(())
}

fn fail(dir: &Path, task: Task, err: &Error) -> ExitCode {
    let diag = json!({
        "task": task.name(),
        "kind": if err.is_validation() { "validation" } else { "numerical" },
        "error": err.to_string(),
        "detail": format!("{err:?}"),
    });
    eprintln!("{}", pretty(&diag).trim_end());
    if err.is_validation() {
        return ExitCode::from(1);
    }
    if let Err(e) = write_all(dir, &[("error.json".into(), pretty(&diag))]) {
        eprintln!("could not write diagnostic: {e}");
    }
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, flags) = cli.command.split();
    let (run, root) = match prepare(task, &flags) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    if let Some(k) = run.parallel {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let dir = if task == Task::Report {
        root
    } else {
        root.join(task.name())
    };
    match run.execute(task) {
        Ok(out) => {
            let manifest = run.manifest(task, &out);
            let mut files = out.files;
            files.push(("manifest.json".into(), pretty(&manifest)));
            if let Err(e) = write_all(&dir, &files) {
                eprintln!("error: writing {}: {e}", dir.display());
                return ExitCode::from(2);
            }
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&dir, task, &e),
    }
}
