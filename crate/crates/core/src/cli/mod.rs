//! Batch front-end: config in, JSON report out.
//!
//! Exit status is 0 when every check passes, 2 when a check fails and 1 on
//! any error.

mod config;
mod report;
mod tasks;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

pub use config::{AlmostAbelianParams, ModelConfig, RunConfig, RunSection, Sl2rParams, Task, Tolerances};
pub use report::{Check, Relation, Report, TaskReport};

use crate::error::{Error, Result};
use crate::models::{build_almost_abelian, build_flat_almost_abelian, build_sl2r};
use crate::par::Execution;
use tasks::{run_task, Family};

#[derive(Debug, Parser)]
#[command(name = "curvhom", version, about = "Curvature-homogeneous metrics with κ-nullity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    /// Print the available tasks and exit.
    #[arg(long)]
    pub list_tasks: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the tasks of a config file.
    Run {
        config: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `run.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// `name=value`, repeatable.
        #[arg(long = "tol", value_name = "NAME=VALUE")]
        tol: Vec<String>,
        /// Add wall-clock time to the report (breaks byte-identity).
        #[arg(long)]
        timing: bool,
        /// Run point sweeps on one thread.
        #[arg(long)]
        sequential: bool,
    },
}

/// A config with command-line overrides applied.
pub fn load_config(path: &Path, seed: Option<u64>, tol: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    for t in tol {
        cfg.tolerances.apply_override(t)?;
    }
    Ok(cfg)
}

pub fn run(cfg: &RunConfig, exec: Execution) -> Result<Report> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.run.tasks.len());
    match &cfg.model {
        ModelConfig::Sl2r(p) => {
            let model = build_sl2r(p.phi()?)?;
            let family = Family::Sl2(&model);
            for &t in &cfg.run.tasks {
                out.push(run_task(t, &model, &family, cfg, exec)?);
            }
        }
        ModelConfig::AlmostAbelian(p) => {
            let spec = p.spec()?;
            let model = build_almost_abelian(&spec)?;
            let family = Family::Aa(&model);
            for &t in &cfg.run.tasks {
                out.push(run_task(t, &model, &family, cfg, exec)?);
            }
        }
    }
    Ok(Report::new(cfg.clone(), out))
}

/// Undeformed counterpart, for flat-model runs from code.
pub fn run_flat(cfg: &RunConfig, exec: Execution) -> Result<Report> {
    let ModelConfig::AlmostAbelian(p) = &cfg.model else {
        return Err(Error::Config("flat runs need an almost_abelian model".into()));
    };
    let model = build_flat_almost_abelian(&p.spec()?)?;
    let family = Family::Aa(&model);
    let out = cfg
        .run
        .tasks
        .iter()
        .map(|&t| run_task(t, &model, &family, cfg, exec))
        .collect::<Result<Vec<_>>>()?;
    Ok(Report::new(cfg.clone(), out))
}

pub fn list_tasks() -> String {
    Task::ALL
        .iter()
        .map(|t| format!("{:<16}{}\n", t.name(), t.describe()))
        .collect()
}

/// Parses arguments, runs, and returns the exit status.
pub fn main_with(cli: Cli) -> i32 {
    if cli.list_tasks {
        print!("{}", list_tasks());
        return 0;
    }
    let Some(Command::Run {
        config,
        out,
        seed,
        tol,
        timing,
        sequential,
    }) = cli.command
    else {
        eprintln!("nothing to do; try `curvhom run <config>` or `--list-tasks`");
        return 1;
    };
    let exec = if sequential { Execution::Sequential } else { Execution::default() };
    let start = Instant::now();
    let result = load_config(&config, seed, &tol).and_then(|cfg| run(&cfg, exec));
    let mut report = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if timing {
        report.wall_clock_s = Some(start.elapsed().as_secs_f64());
    }
    let text = report.to_json();
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, &text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return 1;
            }
        }
        None => print!("{text}"),
    }
    for t in &report.tasks {
        for c in t.checks.iter().filter(|c| !c.pass) {
            eprintln!("FAIL {}: {} (residual {:e}, tol {:e})", t.task, c.name, c.residual, c.tol);
        }
    }
    if report.pass {
        0
    } else {
        2
    }
}
