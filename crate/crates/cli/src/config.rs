//! Run configuration: JSON schema, loading and validation.

use std::path::{Path, PathBuf};

use perisys::evolution::{Scheme, StepperConfig};
use perisys::grid::{EdgeAveraging, Grid};
use perisys::model::{ProblemConfig, ProblemSpec};
use perisys::periodic::{OuterUpdate, PeriodicConfig, SigmaRamp, TRIVIAL_THRESHOLD};
use perisys::Domain;
use serde::{Deserialize, Serialize};

use crate::presets;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSource,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSettings>,
}

/// Either a bundled preset's problem or inline problem data, with an
/// optional regularization override.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inline: Option<ProblemConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Cells along x.
    pub cells: usize,
    /// Cells along y on rectangles; defaults to `cells`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells_y: Option<usize>,
    /// Time steps per period.
    pub steps: usize,
    /// Optional explicit step; must satisfy `dt * steps = T`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub delta_g: f64,
    pub scheme: Scheme,
    pub averaging: EdgeAveraging,
    pub clamp_negative: bool,
    pub tol_outer: f64,
    pub tol_map: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub omega: f64,
    /// Fixed outer relaxation; adaptive when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_relaxation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_ramp: Option<SigmaRamp>,
    pub trivial_threshold: f64,
    pub seed: u64,
    /// Amplitude of the initial sine bump.
    pub initial_amplitude: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            cells: 100,
            cells_y: None,
            steps: 1000,
            dt: None,
            delta_g: 1e-8,
            scheme: Scheme::ImexLagged,
            averaging: EdgeAveraging::Kirchhoff,
            clamp_negative: true,
            tol_outer: 1e-6,
            tol_map: 1e-7,
            max_outer: 200,
            max_inner: 200,
            omega: 0.7,
            outer_relaxation: None,
            sigma_ramp: None,
            trivial_threshold: TRIVIAL_THRESHOLD,
            seed: 0,
            initial_amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub epsilons: Vec<f64>,
    /// `[cells, steps]` pairs; the configured resolution when empty.
    #[serde(default)]
    pub resolutions: Vec<[usize; 2]>,
    /// Warm-started continuation along `epsilons` instead of independent
    /// solves.
    #[serde(default)]
    pub continuation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_proxy: Option<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(vec![format!("{path}: {}", e.inner())])
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The problem data with the preset resolved and overrides applied.
    pub fn problem_config(&self) -> Result<ProblemConfig, CliError> {
        let mut c = match (&self.problem.preset, &self.problem.inline) {
            (Some(name), None) => presets::load(name)?.problem_config()?,
            (None, Some(c)) => c.clone(),
            (Some(_), Some(_)) => {
                return Err(CliError::Config(vec![
                    "problem: give either preset or inline, not both".into(),
                ]))
            }
            (None, None) => {
                return Err(CliError::Config(vec![
                    "problem: preset or inline required".into()
                ]))
            }
        };
        if let Some(e) = self.problem.epsilon {
            c.epsilon = e;
        }
        Ok(c)
    }

    /// Replaces a preset reference by the inline problem it names.
    pub fn resolved(&self) -> Result<Self, CliError> {
        let mut out = self.clone();
        out.problem = ProblemSource {
            preset: None,
            inline: Some(self.problem_config()?),
            epsilon: None,
        };
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mut errs = Vec::new();
        match self.problem_config() {
            Ok(c) => validate_problem(&c, &self.numerics, &mut errs),
            Err(CliError::Config(e)) => errs.extend(e),
            Err(e) => errs.push(e.to_string()),
        }
        validate_numerics(&self.numerics, &mut errs);
        if let Some(s) = &self.sweep {
            if s.epsilons.iter().any(|e| !(*e > 0.0)) {
                errs.push("sweep.epsilons: values must be positive".into());
            }
            if s.continuation && !perisys::periodic::is_valid_schedule(&s.epsilons) {
                errs.push(
                    "sweep.epsilons: continuation needs a strictly decreasing schedule".into(),
                );
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(errs))
        }
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        let c = self.problem_config()?;
        let n = &self.numerics;
        Grid::for_domain(&c.domain, n.cells, n.cells_y.unwrap_or(n.cells))
            .map_err(|e| CliError::Config(vec![e.to_string()]))
    }

    pub fn spec(&self) -> Result<ProblemSpec, CliError> {
        let c = self.problem_config()?;
        ProblemSpec::build(&c, self.grid()?, self.numerics.steps)
            .map_err(|e| CliError::Config(vec![e.to_string()]))
    }

    pub fn stepper(&self, spec: &ProblemSpec) -> StepperConfig {
        let n = &self.numerics;
        StepperConfig {
            delta_g: n.delta_g,
            scheme: n.scheme,
            clamp_negative: n.clamp_negative,
            averaging: n.averaging,
            ..StepperConfig::for_spec(spec)
        }
    }

    pub fn periodic(&self, spec: &ProblemSpec) -> PeriodicConfig {
        let n = &self.numerics;
        PeriodicConfig {
            stepper: self.stepper(spec),
            tol_outer: n.tol_outer,
            tol_map: n.tol_map,
            max_outer: n.max_outer,
            max_inner: n.max_inner,
            omega: n.omega,
            outer_update: n
                .outer_relaxation
                .map_or(OuterUpdate::default(), OuterUpdate::Fixed),
            sigma_ramp: n.sigma_ramp,
            trivial_threshold: n.trivial_threshold,
            linf_proxy: None,
        }
    }
}

fn validate_problem(c: &ProblemConfig, n: &Numerics, errs: &mut Vec<String>) {
    for (name, v) in [("p", c.p), ("q", c.q)] {
        if !(v > 1.0 && v < 2.0) {
            errs.push(format!(
                "problem.{name}: {v} outside (1, 2); the standing hypotheses require {name} in (1, 2)"
            ));
        }
    }
    for (name, v) in [
        ("m", c.m),
        ("n", c.n),
        ("period", c.period),
        ("epsilon", c.epsilon),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            errs.push(format!("problem.{name}: {v} must be positive"));
        }
    }
    if !(c.alpha >= 1.0) {
        errs.push(format!("problem.alpha: {} must be >= 1", c.alpha));
    }
    for (i, t) in c.tau.iter().enumerate() {
        if !(*t > 0.0) || !t.is_finite() {
            errs.push(format!("problem.tau[{i}]: {t} must be positive"));
        }
    }
    match c.domain {
        Domain::Interval { length } if !(length > 0.0) => {
            errs.push("problem.domain.length must be positive".into())
        }
        Domain::Rectangle { lx, ly } if !(lx > 0.0 && ly > 0.0) => {
            errs.push("problem.domain: side lengths must be positive".into())
        }
        _ => {}
    }
    if let Some(dt) = n.dt {
        let covered = dt * n.steps as f64;
        if (covered - c.period).abs() > 1e-9 * c.period {
            errs.push(format!(
                "numerics.dt: dt * steps = {covered} differs from the period {}",
                c.period
            ));
        }
    }
}

fn validate_numerics(n: &Numerics, errs: &mut Vec<String>) {
    if n.cells < 4 || n.cells_y.is_some_and(|c| c < 4) {
        errs.push("numerics.cells: at least 4 cells per axis".into());
    }
    if n.steps == 0 {
        errs.push("numerics.steps: must be positive".into());
    }
    for (name, v) in [
        ("delta_g", n.delta_g),
        ("tol_outer", n.tol_outer),
        ("tol_map", n.tol_map),
    ] {
        if !(v > 0.0) {
            errs.push(format!("numerics.{name}: {v} must be positive"));
        }
    }
    if !(n.omega > 0.0 && n.omega <= 1.0) {
        errs.push(format!("numerics.omega: {} must lie in (0, 1]", n.omega));
    }
    if let Some(b) = n.outer_relaxation {
        if !(b > 0.0 && b <= 1.0) {
            errs.push(format!("numerics.outer_relaxation: {b} must lie in (0, 1]"));
        }
    }
    if let Some(r) = n.sigma_ramp {
        if !(r.start > 0.0 && r.start <= 1.0) {
            errs.push(format!(
                "numerics.sigma_ramp.start: {} must lie in (0, 1]",
                r.start
            ));
        }
    }
    if n.max_outer == 0 || n.max_inner == 0 {
        errs.push("numerics: iteration limits must be positive".into());
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))?;
    RunConfig::from_json(&text)
}
