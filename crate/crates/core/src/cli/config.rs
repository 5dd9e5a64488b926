//! Run configuration, read from TOML.
//!
//! ```toml
//! [model]
//! kind = "almost_abelian"
//! weights = [1, 2]
//! a = 1.0
//! z = [1.0, 0.0, 1.0, 0.0]
//!
//! [run]
//! tasks = ["curvature", "holonomy"]
//! points = 20
//! seed = 7
//!
//! [tolerances]
//! oracle = 1e-6
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{AlmostAbelianSpec, PeriodicPhi};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub run: RunSection,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Sl2r(Sl2rParams),
    AlmostAbelian(AlmostAbelianParams),
}

/// `φ = ε cos θ`, or a general trigonometric polynomial via `phi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Sl2rParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<PeriodicPhi>,
}

impl Sl2rParams {
    pub fn phi(&self) -> Result<PeriodicPhi> {
        match (&self.epsilon, &self.phi) {
            (Some(_), Some(_)) => Err(Error::Config("give either model.epsilon or model.phi, not both".into())),
            (Some(e), None) => Ok(PeriodicPhi::epsilon_cos(*e)),
            (None, Some(p)) => Ok(p.clone()),
            (None, None) => Ok(PeriodicPhi::zero()),
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlmostAbelianParams {
    /// Defaults to twice the number of weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub weights: Vec<i64>,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "one")]
    pub c1: f64,
    #[serde(default = "one")]
    pub c2: f64,
    pub z: Vec<f64>,
}

impl AlmostAbelianParams {
    pub fn spec(&self) -> Result<AlmostAbelianSpec> {
        let spec = AlmostAbelianSpec {
            m: self.m.unwrap_or(2 * self.weights.len()),
            weights: self.weights.clone(),
            a: self.a,
            c1: self.c1,
            c2: self.c2,
            z: self.z.clone(),
        };
        spec.validated()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Curvature,
    NullityScan,
    WarpCheck,
    Holonomy,
    Homogeneity,
    EqnsResidual,
    OracleCompare,
    GeodesicProbe,
}

impl Task {
    pub const ALL: [Task; 8] = [
        Task::Curvature,
        Task::NullityScan,
        Task::WarpCheck,
        Task::Holonomy,
        Task::Homogeneity,
        Task::EqnsResidual,
        Task::OracleCompare,
        Task::GeodesicProbe,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Task::Curvature => "curvature",
            Task::NullityScan => "nullity_scan",
            Task::WarpCheck => "warp_check",
            Task::Holonomy => "holonomy",
            Task::Homogeneity => "homogeneity",
            Task::EqnsResidual => "eqns_residual",
            Task::OracleCompare => "oracle_compare",
            Task::GeodesicProbe => "geodesic_probe",
        }
    }

    pub fn describe(&self) -> &'static str {
        match self {
            Task::Curvature => "curvature by tables and by moving frames, symmetries, scalar",
            Task::NullityScan => "κ-nullity indices over a κ grid",
            Task::WarpCheck => "nullity-of-warping checks with negative controls",
            Task::Holonomy => "infinitesimal holonomy at the basepoint (almost_abelian)",
            Task::Homogeneity => "curvature invariants across points and against the model tensor",
            Task::EqnsResidual => "frame equations and LC table (sl2r)",
            Task::OracleCompare => "finite-difference curvature against the tables",
            Task::GeodesicProbe => "geodesic shots with energy drift",
        }
    }

    /// Whether the task applies to `model`.
    pub fn supports(&self, model: &ModelConfig) -> bool {
        match (self, model) {
            (Task::Holonomy, ModelConfig::Sl2r(_)) => false,
            (Task::EqnsResidual, ModelConfig::AlmostAbelian(_)) => false,
            _ => true,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_points() -> usize {
    10
}

fn default_grid() -> Vec<f64> {
    vec![-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0]
}

fn default_shots() -> usize {
    4
}

fn default_length() -> f64 {
    10.0
}

fn default_step() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub tasks: Vec<Task>,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub kappa_grid: Vec<f64>,
    /// Highest covariant derivative for `holonomy`; defaults to `m − 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_order: Option<usize>,
    #[serde(default = "default_shots")]
    pub geodesic_shots: usize,
    #[serde(default = "default_length")]
    pub geodesic_length: f64,
    #[serde(default = "default_step")]
    pub geodesic_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Scalar curvature, sectional curvature, spectra.
    pub curvature: f64,
    /// Tables against moving frames.
    pub paths: f64,
    /// Tables against the closed-form component array.
    pub table: f64,
    pub symmetry: f64,
    /// Relative SVD threshold for nullity.
    pub nullity: f64,
    /// Angle or subspace distance of nullity kernels.
    pub kernel: f64,
    pub warp: f64,
    /// Negative controls must exceed this.
    pub control: f64,
    pub holonomy: f64,
    pub homogeneity: f64,
    pub eqns: f64,
    pub oracle: f64,
    /// Allowed deviation of the step-halving error ratio from 4.
    pub fd_ratio: f64,
    pub geodesic_energy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            curvature: 1e-8,
            paths: 1e-9,
            table: 1e-10,
            symmetry: 1e-9,
            nullity: 1e-8,
            kernel: 1e-8,
            warp: 1e-8,
            control: 1e-3,
            holonomy: 1e-8,
            homogeneity: 1e-8,
            eqns: 1e-12,
            oracle: 1e-6,
            fd_ratio: 0.5,
            geodesic_energy: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = match name {
            "curvature" => &mut self.curvature,
            "paths" => &mut self.paths,
            "table" => &mut self.table,
            "symmetry" => &mut self.symmetry,
            "nullity" => &mut self.nullity,
            "kernel" => &mut self.kernel,
            "warp" => &mut self.warp,
            "control" => &mut self.control,
            "holonomy" => &mut self.holonomy,
            "homogeneity" => &mut self.homogeneity,
            "eqns" => &mut self.eqns,
            "oracle" => &mut self.oracle,
            "fd_ratio" => &mut self.fd_ratio,
            "geodesic_energy" => &mut self.geodesic_energy,
            _ => return Err(Error::Config(format!("unknown tolerance `{name}`"))),
        };
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::Config(format!("tolerance `{name}` must be a nonnegative number")));
        }
        *slot = value;
        Ok(())
    }

    /// Parses `name=value`.
    pub fn apply_override(&mut self, arg: &str) -> Result<()> {
        let (name, value) = arg
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected name=value, got `{arg}`")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("tolerance `{name}`: `{value}` is not a number")))?;
        self.set(name.trim(), v)
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.model {
            ModelConfig::Sl2r(p) => {
                p.phi()?;
            }
            ModelConfig::AlmostAbelian(p) => {
                p.spec()?;
            }
        }
        if self.run.tasks.is_empty() {
            return Err(Error::Config("run.tasks is empty".into()));
        }
        if let Some(t) = self.run.tasks.iter().find(|t| !t.supports(&self.model)) {
            return Err(Error::Config(format!("task `{t}` does not apply to this model kind")));
        }
        if self.run.points == 0 {
            return Err(Error::Config("run.points must be positive".into()));
        }
        if !(self.run.geodesic_step > 0.0 && self.run.geodesic_length > 0.0) {
            return Err(Error::Config("geodesic length and step must be positive".into()));
        }
        Ok(())
    }
}
