//! Experiment configuration: JSON with a mandatory schema version.

use std::path::Path;

use carleman::barriers::{BarrierConfig, BarrierSpec};
use carleman::initial_data::{horizon_estimate, InitialDataSpec, DEFAULT_HORIZON_FRACTION};
use carleman::interaction::{RateKind, RateSpec};
use carleman::kinetic::step_count;
use carleman::model::{Boundary, Grid, ModelParams, Region};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n: usize,
    pub alpha: f64,
    #[serde(default = "default_rate")]
    pub rate: RateKind,
}

fn default_rate() -> RateKind {
    RateKind::PowerSum
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub cells: Vec<usize>,
    pub dx: f64,
    /// Lower corner; defaults to the origin.
    #[serde(default)]
    pub origin: Option<Vec<f64>>,
    pub boundary: Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierBlock {
    #[serde(default)]
    pub lower: Option<BarrierConfig>,
    #[serde(default)]
    pub upper: Option<BarrierConfig>,
    #[serde(default)]
    pub certify: Option<CertifyConfig>,
    /// Largest allowed violation of the barrier bounds on the audit region.
    #[serde(default = "default_audit_tol")]
    pub audit_tolerance: f64,
}

fn default_audit_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default = "yes")]
    pub convergence: bool,
    #[serde(default = "yes")]
    pub mass: bool,
    #[serde(default = "yes")]
    pub bounds: bool,
    #[serde(default)]
    pub flux: bool,
    #[serde(default)]
    pub ficks: bool,
    #[serde(default)]
    pub entropy: bool,
    /// Extra primitives added to the initial data of a companion run; enables the contraction series.
    #[serde(default)]
    pub contraction: Option<carleman::initial_data::Recipe>,
    /// Compact set K for local norms; defaults to the central half box.
    #[serde(default)]
    pub region: Option<Region>,
    #[serde(default = "default_mass_tol")]
    pub mass_tolerance: f64,
    #[serde(default = "default_bound_tol")]
    pub bound_tolerance: f64,
}

fn yes() -> bool {
    true
}
fn default_mass_tol() -> f64 {
    1e-10
}
fn default_bound_tol() -> f64 {
    1e-10
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub initial_data: InitialDataSpec,
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub horizon_fraction: Option<f64>,
    /// Snapshot times; defaults to t_end alone.
    #[serde(default)]
    pub snapshots: Option<Vec<f64>>,
    #[serde(default)]
    pub barriers: Option<BarrierBlock>,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    /// Certify barriers only; no solver runs.
    #[serde(default)]
    pub certify_only: bool,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

/// A validated configuration with every derived quantity resolved.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub params: Vec<ModelParams>,
    pub rate: RateSpec,
    pub grid: Grid,
    pub t_end: f64,
    pub schedule: Vec<f64>,
    pub lower: Option<BarrierSpec>,
    pub upper: Option<BarrierSpec>,
    pub region: Region,
    pub warnings: Vec<String>,
}

/// One violation, addressed by its JSON field path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Issue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn issue(path: impl Into<String>, message: impl ToString) -> Issue {
    Issue { path: path.into(), message: message.to_string() }
}

pub fn load(path: &Path) -> Result<ExperimentConfig, Vec<Issue>> {
    let text = std::fs::read_to_string(path).map_err(|e| vec![issue("$", format!("cannot read {}: {e}", path.display()))])?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<ExperimentConfig, Vec<Issue>> {
    let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| vec![issue("$", e)])?;
    match raw.get("schema_version").and_then(|v| v.as_u64()) {
        None => return Err(vec![issue("schema_version", "missing (required)")]),
        Some(v) if v != SCHEMA_VERSION as u64 => {
            return Err(vec![issue("schema_version", format!("unsupported version {v}, expected {SCHEMA_VERSION}"))])
        }
        _ => {}
    }
    serde_json::from_value(raw).map_err(|e| vec![issue("$", e)])
}

/// Cross-field checks. All violations are collected before returning.
pub fn validate(config: ExperimentConfig) -> Result<Experiment, Vec<Issue>> {
    let mut issues = Vec::new();
    let mut warnings = Vec::new();
    let m = &config.model;

    let grid = match Grid::new(&config.grid.cells, &[config.grid.dx], config.grid.boundary) {
        Ok(g) => match &config.grid.origin {
            Some(o) => g.with_origin(o).map_err(|e| issue("grid.origin", e)),
            None => Ok(g),
        },
        Err(e) => Err(issue("grid", e)),
    };
    let grid = match grid {
        Ok(g) if g.dim() == m.n => Some(g),
        Ok(g) => {
            issues.push(issue("grid.cells", format!("{} axes for model dimension {}", g.dim(), m.n)));
            None
        }
        Err(e) => {
            issues.push(e);
            None
        }
    };

    if config.epsilons.is_empty() {
        issues.push(issue("epsilons", "at least one value is required"));
    }
    for (k, w) in config.epsilons.windows(2).enumerate() {
        if !(w[1] < w[0]) {
            issues.push(issue(format!("epsilons[{}]", k + 1), format!("{} does not decrease from {}", w[1], w[0])));
        }
    }
    let mut params = Vec::new();
    for (k, &eps) in config.epsilons.iter().enumerate() {
        match ModelParams::new(m.n, m.alpha, eps) {
            Ok(p) => params.push(p),
            Err(e) => issues.push(issue(format!("epsilons[{k}]"), e)),
        }
    }
    if let Some(p) = params.first() {
        if let Err(e) = config.initial_data.validate(p) {
            issues.push(issue("initial_data", e));
        }
    }

    let mut lower = None;
    let mut upper = None;
    if let Some(b) = &config.barriers {
        for (name, cfg, slot, want_super) in
            [("lower", &b.lower, &mut lower, false), ("upper", &b.upper, &mut upper, true)]
        {
            let Some(cfg) = cfg else { continue };
            match BarrierSpec::try_from(cfg.clone()) {
                Err(e) => issues.push(issue(format!("barriers.{name}"), e)),
                Ok(s) if s.case.is_supersolution() != want_super => issues.push(issue(
                    format!("barriers.{name}.case"),
                    format!("{} cannot serve as the {name} barrier", s.case.name()),
                )),
                Ok(s) if s.n != m.n || s.alpha != m.alpha => issues.push(issue(
                    format!("barriers.{name}"),
                    format!("barrier (n = {}, alpha = {}) differs from the model", s.n, s.alpha),
                )),
                Ok(s) => *slot = Some(s),
            }
        }
    }

    // Horizon and end time.
    let mut t_end = config.t_end.unwrap_or(f64::NAN);
    if let Some(p) = params.first() {
        let h = horizon_estimate(&config.initial_data, p);
        let frac = config.horizon_fraction.unwrap_or(DEFAULT_HORIZON_FRACTION);
        let cap = h.experiment_horizon(frac);
        match config.t_end {
            None if cap.is_finite() => t_end = cap,
            None => issues.push(issue("t_end", "required when the horizon estimate is infinite")),
            Some(t) if !(t > 0.0) => issues.push(issue("t_end", format!("{t} must be positive"))),
            Some(t) if cap.is_finite() && t > cap => issues.push(issue(
                "t_end",
                format!("{t} exceeds {frac} x min(T1, T2) = {cap} (T1 = {}, T2 = {})", h.t1, h.t2),
            )),
            Some(_) => {}
        }
    }
    if config.certify_only {
        t_end = t_end.max(0.0);
    }
    for (name, spec) in [("lower", &lower), ("upper", &upper)] {
        if let Some(s) = spec {
            if !config.certify_only && t_end.is_finite() && s.life_span_end() <= t_end {
                issues.push(issue(
                    format!("barriers.{name}"),
                    format!("life span ends at {} before t_end = {t_end}", s.life_span_end()),
                ));
            }
        }
    }

    let mut schedule = config.snapshots.clone().unwrap_or_else(|| if t_end.is_finite() { vec![t_end] } else { vec![] });
    schedule.retain(|&t| t != 0.0);
    for (k, w) in schedule.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            issues.push(issue(format!("snapshots[{}]", k + 1), "times must increase"));
        }
    }
    if let (Some(g), false) = (&grid, config.certify_only) {
        for p in &params {
            let dt = p.epsilon * g.dx();
            let steps = step_count(t_end, dt);
            for (k, &t) in schedule.iter().enumerate() {
                let j = (t / dt).round();
                if (j * dt - t).abs() > 1e-9 * dt.max(t) {
                    issues.push(issue(
                        format!("snapshots[{k}]"),
                        format!("{t} is not a multiple of dt = eps*dx = {dt} for eps = {}", p.epsilon),
                    ));
                } else if j as usize > steps || t > t_end * (1.0 + 1e-12) {
                    issues.push(issue(format!("snapshots[{k}]"), format!("{t} lies beyond t_end = {t_end}")));
                }
            }
            if (steps as f64 * dt - t_end).abs() > 1e-9 * t_end {
                warnings.push(format!("eps = {}: t_end = {t_end} is not a multiple of dt = {dt}; runs stop at {}", p.epsilon, steps as f64 * dt));
            }
        }
    }

    let region = match (&config.diagnostics.region, &grid) {
        (Some(r), Some(g)) => match r.cells(g) {
            Ok(_) => r.clone(),
            Err(e) => {
                issues.push(issue("diagnostics.region", e));
                r.clone()
            }
        },
        (None, Some(g)) => Region::central_half(g),
        (_, None) => Region::cube(&[0.0], &[1.0]).expect("valid placeholder"),
    };

    // Domain of dependence: information from a frozen boundary travels at 1/eps.
    if let (Some(g), Boundary::FrozenFarField, false) = (&grid, config.grid.boundary, config.certify_only) {
        let clearance = region.clearance(g);
        for p in &params {
            if t_end / p.epsilon > clearance {
                warnings.push(format!(
                    "eps = {}: boundary information can reach the region (speed 1/eps over t_end = {t_end} exceeds clearance {clearance})",
                    p.epsilon
                ));
            }
        }
    }

    if issues.is_empty() {
        Ok(Experiment {
            rate: RateSpec::new(m.rate, m.alpha),
            params,
            grid: grid.expect("checked"),
            t_end,
            schedule,
            lower,
            upper,
            region,
            warnings,
            config,
        })
    } else {
        Err(issues)
    }
}
