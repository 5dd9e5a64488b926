//! Report document. Keys appear in declaration order.

use serde::Serialize;
use serde_json::Value;

use super::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    /// Passes when `residual <= tol`.
    #[serde(rename = "<=")]
    AtMost,
    /// Passes when `residual > tol`.
    #[serde(rename = ">")]
    Exceeds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub relation: Relation,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, residual: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            residual,
            relation: Relation::AtMost,
            tol,
            pass: residual <= tol,
        }
    }

    pub fn exceeds(name: impl Into<String>, residual: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            residual,
            relation: Relation::Exceeds,
            tol,
            pass: residual > tol,
        }
    }

    /// `|actual − expected|` judged with tolerance 0.
    pub fn count(name: impl Into<String>, actual: usize, expected: usize) -> Self {
        Check::at_most(name, actual.abs_diff(expected) as f64, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskReport {
    pub task: String,
    pub values: Value,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl TaskReport {
    pub fn new(task: impl Into<String>, values: Value, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        TaskReport {
            task: task.into(),
            values,
            checks,
            pass,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
    pub nalgebra: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: ToolInfo,
    pub config: RunConfig,
    pub tasks: Vec<TaskReport>,
    pub checks_total: usize,
    pub checks_failed: usize,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_s: Option<f64>,
}

impl Report {
    pub fn new(config: RunConfig, tasks: Vec<TaskReport>) -> Self {
        let checks_total = tasks.iter().map(|t| t.checks.len()).sum();
        let checks_failed = tasks.iter().flat_map(|t| &t.checks).filter(|c| !c.pass).count();
        Report {
            tool: ToolInfo {
                name: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                nalgebra: "0.35",
            },
            config,
            tasks,
            checks_total,
            checks_failed,
            pass: checks_failed == 0,
            wall_clock_s: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
