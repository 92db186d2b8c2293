//! Run configuration: a TOML document describing grids, ε, the time integrator and output.
//!
//! ```toml
//! schema_version = 1
//! scenario = "sod1d"
//! epsilon = 1e-5
//! t_end = 0.15
//!
//! [space]
//! cells = [100]
//! bounds = [[0.0, 1.0]]
//! boundary = ["outflow"]
//! reconstruction = "weno3"
//!
//! [velocity]
//! dim = 1
//! nodes = 80
//! bounds = [-8.0, 8.0]
//!
//! [method]
//! kind = "prk"
//! tableau = "rk4"
//! inner_dt = 1e-5
//! inner_steps = 2
//! outer_dt = 0.004
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bgk_rhs::{BgkOperator, Stiffness};
use crate::error::{Error, Result};
use crate::integrators::{
    validate_tableau, ButcherTableau, Method, ProjectiveParameters, TABLEAU_NAMES,
};
use crate::linear_analysis::{
    advise_parameters, build_basis, Advice, AdviceContext, SpectrumSetup, TransportSymbol,
    WeightedBasis, DEFAULT_CFL_FRACTION, DEFAULT_INNER_STEPS,
};
use crate::phase_space::{
    Axis, Boundary, DistributionField, MaxwellianMode, PhaseSpace, SpatialGrid, VelocityGrid,
};
use crate::scenarios::{self, MacroState, SCENARIO_NAMES};
use crate::transport::ReconstructionOrder;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub scenario: String,
    pub epsilon: f64,
    pub t_end: f64,
    /// Defaults to `[t_end]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_times: Option<Vec<f64>>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub maxwellian: MaxwellianMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub progress_every: Option<usize>,
    /// Density amplitude of the `wave1d` scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// Macroscopic state of the `equilibrium` scenario, `[rho, ux, uy, T]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<[f64; 4]>,
    pub space: SpaceConfig,
    pub velocity: VelocityConfig,
    pub method: MethodConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub cells: Vec<usize>,
    pub bounds: Vec<[f64; 2]>,
    pub boundary: Vec<Boundary>,
    #[serde(default)]
    pub reconstruction: ReconstructionOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocityConfig {
    pub dim: usize,
    /// Nodes per axis.
    pub nodes: usize,
    /// Symmetric interval `[−v_max, v_max]`, shared by all axes.
    pub bounds: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Fe,
    Rk4,
    Pfe,
    Prk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TableauSpec {
    Named(String),
    Inline {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        c: Vec<f64>,
    },
}

impl TableauSpec {
    pub fn resolve(&self) -> Option<ButcherTableau> {
        match self {
            TableauSpec::Named(name) => ButcherTableau::named(name),
            TableauSpec::Inline { a, b, c } => {
                Some(ButcherTableau::new(a.clone(), b.clone(), c.clone()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub kind: MethodKind,
    /// Step size of `fe` and `rk4`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tableau: Option<TableauSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_dt: Option<f64>,
    /// Derive `(δt, K, Δt)` from ε and Δx instead of giving them.
    #[serde(default)]
    pub advise: bool,
    #[serde(default = "default_cfl")]
    pub cfl_fraction: f64,
}

fn default_cfl() -> f64 {
    DEFAULT_CFL_FRACTION
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default)]
    pub symbol: TransportSymbol,
    /// Wavenumbers to analyse; all `0..I` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<usize>>,
}

/// Parses and validates a configuration document. `origin` labels diagnostics.
pub fn parse_config(text: &str, origin: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    let errors = cfg.violations();
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Validation {
            path: origin.to_string(),
            errors: errors
                .into_iter()
                .map(|(key, msg)| match locate(text, &key) {
                    Some(line) => format!("line {line}: {key}: {msg}"),
                    None => format!("{key}: {msg}"),
                })
                .collect(),
        })
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, &path.display().to_string())
}

/// 1-based line of the first assignment to the last segment of `key`.
fn locate(text: &str, key: &str) -> Option<usize> {
    let leaf = key.rsplit('.').next()?;
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(leaf)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

impl ScenarioConfig {
    pub fn serialize(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        self.snapshot_times.clone().unwrap_or_else(|| vec![self.t_end])
    }

    /// Every violated constraint as `(key, message)`.
    pub fn violations(&self) -> Vec<(String, String)> {
        let mut v: Vec<(String, String)> = Vec::new();
        let mut err = |k: &str, m: String| v.push((k.to_string(), m));

        if self.schema_version != SCHEMA_VERSION {
            err(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            );
        }
        let dims = match self.scenario.as_str() {
            "sod1d" | "wave1d" => Some((1, 1)),
            "shockbubble2d" => Some((2, 2)),
            "equilibrium" => None,
            other => {
                err(
                    "scenario",
                    format!(
                        "unknown scenario '{other}'; known scenarios: {}",
                        SCENARIO_NAMES.join(", ")
                    ),
                );
                None
            }
        };
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            err("epsilon", format!("must be finite and > 0, got {}", self.epsilon));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            err("t_end", format!("must be finite and >= 0, got {}", self.t_end));
        }
        if let Some(times) = &self.snapshot_times {
            for t in times {
                if !(*t >= 0.0 && *t <= self.t_end) {
                    err("snapshot_times", format!("{t} outside [0, t_end = {}]", self.t_end));
                }
            }
        }
        if self.progress_every == Some(0) {
            err("progress_every", "must be >= 1".into());
        }
        if let Some(a) = self.amplitude {
            if !(a.abs() < 1.0) {
                err("amplitude", format!("|amplitude| must be < 1 to keep density positive, got {a}"));
            }
        }
        if let Some([rho, _, _, t]) = self.state {
            if !(rho > 0.0) || !(t > 0.0) {
                err("state", format!("density and temperature must be > 0, got rho={rho}, T={t}"));
            }
        }

        let s = &self.space;
        let dx = s.cells.len();
        if !(1..=2).contains(&dx) {
            err("space.cells", format!("spatial dimension must be 1 or 2, got {dx}"));
        }
        if s.bounds.len() != dx {
            err("space.bounds", format!("{} intervals for {dx} axes", s.bounds.len()));
        }
        if s.boundary.len() != dx {
            err("space.boundary", format!("{} boundary tags for {dx} axes", s.boundary.len()));
        }
        let ghost = s.reconstruction.ghost_width();
        for (k, &n) in s.cells.iter().enumerate() {
            if n < ghost.max(1) {
                err(
                    "space.cells",
                    format!("axis {k} has {n} cells, {} needs at least {ghost}", s.reconstruction.name()),
                );
            }
        }
        for (k, b) in s.bounds.iter().enumerate() {
            if !(b[1] > b[0]) || !b[0].is_finite() || !b[1].is_finite() {
                err("space.bounds", format!("axis {k}: need finite lower < upper, got {b:?}"));
            }
        }

        let vel = &self.velocity;
        if !(1..=2).contains(&vel.dim) {
            err("velocity.dim", format!("must be 1 or 2, got {}", vel.dim));
        }
        if vel.nodes == 0 {
            err("velocity.nodes", "must be > 0".into());
        }
        if !(vel.bounds[1] > 0.0) || vel.bounds[0] != -vel.bounds[1] {
            err(
                "velocity.bounds",
                format!("must be symmetric [-v, v] with v > 0, got {:?}", vel.bounds),
            );
        }
        match dims {
            Some((sx, sv)) if (sx, sv) != (dx, vel.dim) => err(
                "scenario",
                format!("{} needs Dx={sx}, Dv={sv}; configured Dx={dx}, Dv={}", self.scenario, vel.dim),
            ),
            None if self.scenario == "equilibrium" && dx > vel.dim => err(
                "velocity.dim",
                format!("each spatial axis needs a velocity component: Dx={dx} > Dv={}", vel.dim),
            ),
            _ => {}
        }

        let m = &self.method;
        let explicit = [m.inner_dt.is_some(), m.inner_steps.is_some(), m.outer_dt.is_some()];
        match m.kind {
            MethodKind::Fe | MethodKind::Rk4 => {
                match m.dt {
                    Some(dt) if dt > 0.0 && dt.is_finite() => {}
                    Some(dt) => err("method.dt", format!("must be > 0, got {dt}")),
                    None => err("method.dt", "required for fe and rk4".into()),
                }
                if m.advise || explicit.iter().any(|&b| b) || m.tableau.is_some() {
                    err(
                        "method.kind",
                        "inner_dt, inner_steps, outer_dt, tableau and advise only apply to pfe and prk".into(),
                    );
                }
            }
            MethodKind::Pfe | MethodKind::Prk => {
                if m.dt.is_some() {
                    err("method.dt", "not used by projective methods; set inner_dt and outer_dt".into());
                }
                let tableau = match (m.kind, &m.tableau) {
                    (MethodKind::Pfe, Some(_)) => {
                        err("method.tableau", "pfe has no tableau; use kind = \"prk\"".into());
                        None
                    }
                    (MethodKind::Pfe, None) => Some(ButcherTableau::forward_euler()),
                    (_, None) => Some(ButcherTableau::classical_rk4()),
                    (_, Some(spec)) => match spec.resolve() {
                        Some(t) => {
                            if let Err(vs) = validate_tableau(&t) {
                                for x in vs {
                                    err("method.tableau", x.to_string());
                                }
                                None
                            } else {
                                Some(t)
                            }
                        }
                        None => {
                            err(
                                "method.tableau",
                                format!("unknown tableau; known tableaus: {}", TABLEAU_NAMES.join(", ")),
                            );
                            None
                        }
                    },
                };
                if m.advise {
                    if explicit.iter().any(|&b| b) {
                        err(
                            "method.advise",
                            "advise = true and explicit inner_dt/inner_steps/outer_dt are mutually exclusive".into(),
                        );
                    }
                } else if explicit.iter().all(|&b| b) {
                    let p = ProjectiveParameters {
                        inner_dt: m.inner_dt.unwrap_or_default(),
                        inner_steps: m.inner_steps.unwrap_or_default(),
                        outer_dt: m.outer_dt.unwrap_or_default(),
                    };
                    for x in p.violations() {
                        err("method.outer_dt", format!("projective constraint violated: {x}"));
                    }
                    if let Some(t) = &tableau {
                        for x in p.stage_violations(t) {
                            err("method.outer_dt", format!("projective constraint violated: {x}"));
                        }
                    }
                } else {
                    err(
                        "method.kind",
                        "projective methods need inner_dt, inner_steps and outer_dt, or advise = true".into(),
                    );
                }
            }
        }
        if !(m.cfl_fraction > 0.0) {
            err("method.cfl_fraction", format!("must be > 0, got {}", m.cfl_fraction));
        }
        if let Some(modes) = &self.spectrum.modes {
            if let Some(&n) = s.cells.first() {
                if modes.iter().any(|&k| k >= n) {
                    err("spectrum.modes", format!("wavenumbers must be < {n}"));
                }
            }
        }
        v
    }

    pub fn phase(&self) -> Result<Arc<PhaseSpace>> {
        let axes = self
            .space
            .cells
            .iter()
            .zip(&self.space.bounds)
            .zip(&self.space.boundary)
            .map(|((&n, b), &bc)| Axis::new(n, b[0], b[1], bc))
            .collect();
        let space = SpatialGrid::new(axes)?;
        let velocity = VelocityGrid::new(self.velocity.dim, self.velocity.nodes, self.velocity.bounds[1])?;
        Ok(PhaseSpace::new(space, velocity))
    }

    pub fn initial_field(&self, phase: Arc<PhaseSpace>) -> Result<DistributionField> {
        match self.scenario.as_str() {
            "sod1d" => scenarios::sod_1d(phase),
            "shockbubble2d" => scenarios::shock_bubble_2d(phase),
            "wave1d" => scenarios::density_wave_1d(phase, self.amplitude.unwrap_or(0.1)),
            "equilibrium" => {
                let [rho, ux, uy, t] = self.state.unwrap_or([1.0, 0.0, 0.0, 1.0]);
                scenarios::uniform_equilibrium(MacroState::new(rho, [ux, uy], t)?, phase)
            }
            other => Err(Error::Validation {
                path: String::new(),
                errors: vec![format!("unknown scenario '{other}'")],
            }),
        }
    }

    pub fn operator(&self, phase: Arc<PhaseSpace>) -> Result<BgkOperator> {
        Ok(BgkOperator::new(
            phase,
            Stiffness::new(self.epsilon)?,
            self.space.reconstruction,
            self.maxwellian,
        ))
    }

    pub fn tableau(&self) -> Option<ButcherTableau> {
        match self.method.kind {
            MethodKind::Fe | MethodKind::Rk4 => None,
            MethodKind::Pfe => Some(ButcherTableau::forward_euler()),
            MethodKind::Prk => match &self.method.tableau {
                Some(spec) => spec.resolve(),
                None => Some(ButcherTableau::classical_rk4()),
            },
        }
    }

    pub fn basis(&self, phase: &PhaseSpace) -> Result<WeightedBasis> {
        build_basis(&phase.velocity, phase.velocity.dim())
    }

    /// Spectral setup along the first spatial axis.
    pub fn spectrum_setup<'a>(&self, phase: &PhaseSpace, basis: &'a WeightedBasis) -> SpectrumSetup<'a> {
        SpectrumSetup {
            basis,
            cells: phase.space.axis(0).cells,
            dx: phase.space.spacing(0),
            axis: 0,
            symbol: self.spectrum.symbol,
        }
    }

    /// Runs the parameter advisor for this configuration (projective methods only).
    pub fn advice(&self, phase: &PhaseSpace) -> Result<Advice> {
        let basis = self.basis(phase)?;
        let tableau = self.tableau().unwrap_or_else(ButcherTableau::classical_rk4);
        let ctx = AdviceContext {
            setup: self.spectrum_setup(phase, &basis),
            tableau,
            inner_steps: self.method.inner_steps.unwrap_or(DEFAULT_INNER_STEPS),
        };
        advise_parameters(self.epsilon, phase.space.min_spacing(), self.method.cfl_fraction, &ctx)
    }

    /// The time integrator, consulting the advisor when `advise = true`.
    pub fn resolve_method(&self, phase: &PhaseSpace) -> Result<(Method, Option<Advice>)> {
        let m = &self.method;
        let (params, advice) = match m.kind {
            MethodKind::Fe => return Ok((Method::ForwardEuler { dt: m.dt.unwrap_or_default() }, None)),
            MethodKind::Rk4 => return Ok((Method::Rk4 { dt: m.dt.unwrap_or_default() }, None)),
            _ if m.advise => {
                let a = self.advice(phase)?;
                (a.params, Some(a))
            }
            _ => (
                ProjectiveParameters::new(
                    m.inner_dt.unwrap_or_default(),
                    m.inner_steps.unwrap_or_default(),
                    m.outer_dt.unwrap_or_default(),
                )?,
                None,
            ),
        };
        let method = match m.kind {
            MethodKind::Pfe => Method::ProjectiveEuler(params),
            _ => Method::ProjectiveRk {
                tableau: self.tableau().ok_or_else(|| {
                    Error::InvalidParameters("unknown tableau".into())
                })?,
                params,
            },
        };
        method.validate()?;
        Ok((method, advice))
    }
}
