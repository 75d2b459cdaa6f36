//! TOML problem configuration.
//!
//! Unknown keys are rejected. Overrides are dotted key paths applied to the
//! parsed document before it is deserialized, so `a.b=3` behaves exactly as
//! if `b = 3` had been written in table `[a]`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elasticity::SolverSettings;
use crate::error::Result;
use crate::fields::{DesignField, StimulusField, TargetDisplacement};
use crate::functional::RegularizationParams;
use crate::materials::{Material, PhaseSet};
use crate::mesh::{build_hexagon_mesh, build_rect_mesh, BoxRegion, ClampOrientation, Mesh, Side};
use crate::optimizer::{OptimizerConfig, Scheme};
use crate::problem::DesignProblem;
use crate::stimulus_update::StimulusCarrier;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("at `{key}`: {message}")]
    Key { key: String, message: String },
    #[error("bad override `{0}`: expected KEY=VALUE")]
    Override(String),
}

impl ConfigError {
    fn key(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Key {
            key: key.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Rect {
        lx: f64,
        ly: f64,
        dirichlet_side: Side,
    },
    Hexagon {
        edge: f64,
        #[serde(default)]
        clamp_orientation: ClampOrientation,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetRegion {
    Box {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },
    /// Centered regular hexagon (hexagonal domains only).
    Hexagon { edge: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialsSpec {
    #[serde(default = "default_eta")]
    pub eta: f64,
    pub passive: Material,
    pub responsive: Material,
}

fn default_eta() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub rtol: f64,
    pub max_iter_factor: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let s = SolverSettings::default();
        SolverSpec {
            rtol: s.rtol,
            max_iter_factor: s.max_iter_factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSpec {
    pub rho2: f64,
    pub rho3: f64,
    pub stimulus: f64,
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec {
            rho2: 0.3,
            rho3: 0.3,
            stimulus: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// VTK snapshot every this many iterations (0: first and last only).
    pub cadence: usize,
    /// Displacement magnification of the composite image.
    pub render_scale: f64,
    /// Image width in pixels.
    pub render_width: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: PathBuf::from("out"),
            cadence: 0,
            render_scale: 0.0,
            render_width: 600,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: String,
    pub scheme: Scheme,
    #[serde(default)]
    pub stimulus_carrier: StimulusCarrier,
    /// Mesh cell size.
    pub h: f64,
    /// Prescribed displacements `ū_j`, one per load case.
    pub targets: Vec<[f64; 2]>,
    pub domain: DomainSpec,
    pub target_region: TargetRegion,
    pub materials: MaterialsSpec,
    pub regularization: RegularizationParams,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::key(key, format!("must be positive and finite, got {v}")))
    }
}

fn in_range(key: &str, v: f64, lo: f64, hi: f64) -> Result<(), ConfigError> {
    if v >= lo && v <= hi {
        Ok(())
    } else {
        Err(ConfigError::key(key, format!("must lie in [{lo}, {hi}], got {v}")))
    }
}

fn check_material(prefix: &str, m: &Material) -> Result<(), ConfigError> {
    positive(&format!("{prefix}.young"), m.young)?;
    if !(m.poisson > -1.0 && m.poisson < 0.5) {
        return Err(ConfigError::key(
            format!("{prefix}.poisson"),
            format!("must lie in (-1, 0.5), got {}", m.poisson),
        ));
    }
    if !(m.beta >= 0.0) || !m.beta.is_finite() {
        return Err(ConfigError::key(
            format!("{prefix}.beta"),
            format!("must be finite and non-negative, got {}", m.beta),
        ));
    }
    Ok(())
}

impl ProblemSpec {
    /// Range and consistency checks beyond what deserialization enforces.
    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("h", self.h)?;
        if self.targets.is_empty() {
            return Err(ConfigError::key("targets", "at least one target displacement is required"));
        }
        for (j, t) in self.targets.iter().enumerate() {
            if !t.iter().all(|c| c.is_finite()) {
                return Err(ConfigError::key(format!("targets[{j}]"), "components must be finite"));
            }
        }
        match &self.domain {
            DomainSpec::Rect { lx, ly, .. } => {
                positive("domain.lx", *lx)?;
                positive("domain.ly", *ly)?;
                match &self.target_region {
                    TargetRegion::Box {
                        x_min,
                        x_max,
                        y_min,
                        y_max,
                    } => {
                        in_range("target_region.x_min", *x_min, 0.0, *lx)?;
                        in_range("target_region.x_max", *x_max, *x_min, *lx)?;
                        in_range("target_region.y_min", *y_min, 0.0, *ly)?;
                        in_range("target_region.y_max", *y_max, *y_min, *ly)?;
                    }
                    TargetRegion::Hexagon { .. } => {
                        return Err(ConfigError::key(
                            "target_region.kind",
                            "a hexagonal target requires a hexagonal domain",
                        ))
                    }
                }
            }
            DomainSpec::Hexagon { edge, .. } => {
                positive("domain.edge", *edge)?;
                match &self.target_region {
                    TargetRegion::Hexagon { edge: te } => {
                        if !(*te > 0.0 && te < edge) {
                            return Err(ConfigError::key(
                                "target_region.edge",
                                format!("must lie in (0, {edge}), got {te}"),
                            ));
                        }
                    }
                    TargetRegion::Box { .. } => {
                        return Err(ConfigError::key(
                            "target_region.kind",
                            "a hexagonal domain requires a hexagonal target",
                        ))
                    }
                }
            }
        }
        let m = &self.materials;
        if !(m.eta > 0.0 && m.eta <= 1e-2) {
            return Err(ConfigError::key("materials.eta", format!("must lie in (0, 1e-2], got {}", m.eta)));
        }
        check_material("materials.passive", &m.passive)?;
        check_material("materials.responsive", &m.responsive)?;
        let r = &self.regularization;
        positive("regularization.epsilon", r.epsilon)?;
        for (k, v) in [
            ("regularization.alpha", r.alpha),
            ("regularization.nu2", r.nu2),
            ("regularization.nu3", r.nu3),
            ("regularization.stimulus_weight", r.stimulus_weight),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ConfigError::key(k, format!("must be finite and non-negative, got {v}")));
            }
        }
        positive("solver.rtol", self.solver.rtol)?;
        if self.solver.max_iter_factor == 0 {
            return Err(ConfigError::key("solver.max_iter_factor", "must be at least 1"));
        }
        self.optimizer
            .validate()
            .map_err(|e| ConfigError::key("optimizer", e.to_string()))?;
        in_range("initial.rho2", self.initial.rho2, 0.0, 1.0)?;
        in_range("initial.rho3", self.initial.rho3, 0.0, 1.0)?;
        in_range("initial.stimulus", self.initial.stimulus, -1.0, 1.0)?;
        if !(self.output.render_scale >= 0.0) {
            return Err(ConfigError::key("output.render_scale", "must be non-negative"));
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        match (&self.domain, &self.target_region) {
            (
                DomainSpec::Rect {
                    lx,
                    ly,
                    dirichlet_side,
                },
                TargetRegion::Box {
                    x_min,
                    x_max,
                    y_min,
                    y_max,
                },
            ) => build_rect_mesh(
                *lx,
                *ly,
                self.h,
                *dirichlet_side,
                BoxRegion {
                    x_min: *x_min,
                    x_max: *x_max,
                    y_min: *y_min,
                    y_max: *y_max,
                },
            ),
            (
                DomainSpec::Hexagon {
                    edge,
                    clamp_orientation,
                },
                TargetRegion::Hexagon { edge: te },
            ) => build_hexagon_mesh(*edge, self.h, *te, *clamp_orientation),
            _ => Err(ConfigError::key("target_region.kind", "does not match the domain kind").into()),
        }
    }

    pub fn build_problem(&self) -> Result<DesignProblem> {
        self.validate()?;
        let mesh = self.build_mesh()?;
        let phases = PhaseSet::new(self.materials.passive, self.materials.responsive, self.materials.eta)?;
        let targets = self.targets.iter().map(|t| TargetDisplacement::Constant(*t)).collect();
        let solver = SolverSettings {
            rtol: self.solver.rtol,
            max_iter_factor: self.solver.max_iter_factor,
        };
        let mut problem = DesignProblem::new(mesh, phases, targets, self.regularization, solver)?;
        problem.carrier = self.stimulus_carrier;
        Ok(problem)
    }

    pub fn initial_fields(&self, num_nodes: usize) -> (DesignField, StimulusField) {
        (
            DesignField::constant(num_nodes, self.initial.rho2, self.initial.rho3),
            StimulusField::constant(self.targets.len(), num_nodes, self.initial.stimulus),
        )
    }

    /// Serialized form that parses back to the same spec.
    pub fn echo(&self) -> Result<String, ConfigError> {
        toml::to_string_pretty(self).map_err(|e| ConfigError::Syntax(e.to_string()))
    }
}

/// Parses `KEY=VALUE`; the value is read as a TOML literal, falling back to
/// a bare string.
fn parse_override(raw: &str) -> Result<(Vec<String>, toml::Value), ConfigError> {
    let (key, value) = raw.split_once('=').ok_or_else(|| ConfigError::Override(raw.to_string()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::Override(raw.to_string()));
    }
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key.split('.').map(str::to_string).collect(), parsed))
}

fn apply_override(doc: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), ConfigError> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut table = doc;
    for (i, part) in parents.iter().enumerate() {
        let entry = table
            .entry(part.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::key(path[..=i].join("."), "is not a table"))?;
    }
    table.insert(last.clone(), value);
    Ok(())
}

/// Parses and validates a configuration document.
pub fn parse_str(text: &str, overrides: &[String]) -> Result<ProblemSpec, ConfigError> {
    let mut doc: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    for raw in overrides {
        let (path, value) = parse_override(raw)?;
        apply_override(&mut doc, &path, value)?;
    }
    let spec: ProblemSpec = serde_path_to_error::deserialize(toml::Value::Table(doc)).map_err(|e| {
        let key = e.path().to_string();
        ConfigError::key(if key == "." { String::new() } else { key }, e.into_inner().to_string())
    })?;
    spec.validate()?;
    Ok(spec)
}

pub fn parse_config(path: &Path, overrides: &[String]) -> Result<ProblemSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_str(&text, overrides)
}
