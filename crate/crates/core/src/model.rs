//! Continuous problem data, standing hypotheses and diffusion regimes.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Domain, Grid, GridError};

/// Tolerance for deciding `m (p - 1) == 1`.
pub const REGIME_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("exponent {name} = {value} must lie in the open interval (1, 2)")]
    ExponentOutOfRange { name: &'static str, value: f64 },
    #[error("{name} = {value} must be positive")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} = {value} is not finite")]
    NotFinite { name: &'static str, value: f64 },
    #[error("step count must be positive")]
    NoSteps,
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Slow,
    Normal,
    Fast,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Slow => "slow",
            Regime::Normal => "normal",
            Regime::Fast => "fast",
        })
    }
}

/// Regime from the product `m (p - 1)` compared with 1.
pub fn classify_by_product(x: f64) -> Regime {
    if (x - 1.0).abs() <= REGIME_TOLERANCE {
        Regime::Normal
    } else if x > 1.0 {
        Regime::Slow
    } else {
        Regime::Fast
    }
}

pub fn classify_diffusion(m: f64, p: f64) -> Result<Regime, ModelError> {
    check_exponent("p", p)?;
    if !(m > 0.0) || !m.is_finite() {
        return Err(ModelError::NonPositive {
            name: "m",
            value: m,
        });
    }
    Ok(classify_by_product(m * (p - 1.0)))
}

/// Fast diffusion is compatible with `m > p` only when `p` is below the
/// golden ratio.
pub fn fast_admissible(p: f64) -> bool {
    p < 0.5 * (1.0 + 5f64.sqrt())
}

fn check_exponent(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value > 1.0 && value < 2.0 {
        Ok(())
    } else {
        Err(ModelError::ExponentOutOfRange { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceProfile {
    #[default]
    One,
    /// Product of half-wave sines, vanishing on the boundary.
    Sine,
    /// `x / Lx` (times `y / Ly` on rectangles).
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeProfile {
    #[default]
    Constant,
    /// `1 + depth * cos(2 pi t / T)`
    Cosine { depth: f64 },
}

/// Analytic coefficient description, sampled onto the grid at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Coefficient {
    Constant(f64),
    Separable {
        amplitude: f64,
        #[serde(default)]
        space: SpaceProfile,
        #[serde(default)]
        time: TimeProfile,
    },
}

impl Coefficient {
    pub fn eval(&self, x: f64, y: f64, t: f64, domain: &Domain, period: f64) -> f64 {
        match *self {
            Coefficient::Constant(c) => c,
            Coefficient::Separable {
                amplitude,
                space,
                time,
            } => {
                let (lx, ly) = match *domain {
                    Domain::Interval { length } => (length, f64::NAN),
                    Domain::Rectangle { lx, ly } => (lx, ly),
                };
                let two_d = domain.dim() == 2;
                let s = match space {
                    SpaceProfile::One => 1.0,
                    SpaceProfile::Sine => {
                        let sx = (std::f64::consts::PI * x / lx).sin();
                        if two_d {
                            sx * (std::f64::consts::PI * y / ly).sin()
                        } else {
                            sx
                        }
                    }
                    SpaceProfile::Linear => {
                        if two_d {
                            (x / lx) * (y / ly)
                        } else {
                            x / lx
                        }
                    }
                };
                let tt = match time {
                    TimeProfile::Constant => 1.0,
                    TimeProfile::Cosine { depth } => {
                        1.0 + depth * (2.0 * std::f64::consts::PI * t / period).cos()
                    }
                };
                amplitude * s * tt
            }
        }
    }

    pub fn is_time_invariant(&self) -> bool {
        match self {
            Coefficient::Constant(_) => true,
            Coefficient::Separable { time, .. } => {
                matches!(time, TimeProfile::Constant)
                    || matches!(time, TimeProfile::Cosine { depth } if *depth == 0.0)
            }
        }
    }
}

/// Optional replacement for the sampled kernel envelope constants.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeOverride {
    pub kbar2: Option<f64>,
    pub kbar3: Option<f64>,
    pub klow2: Option<f64>,
    pub klow3: Option<f64>,
    pub klow1: Option<f64>,
    pub klow4: Option<f64>,
}

fn default_alpha() -> f64 {
    2.0
}

/// Serializable description of the continuous problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub p: f64,
    pub q: f64,
    pub m: f64,
    pub n: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub tau: [f64; 4],
    pub period: f64,
    pub domain: Domain,
    pub a: Coefficient,
    pub b: Coefficient,
    pub k1: Coefficient,
    pub k2: Coefficient,
    pub k3: Coefficient,
    pub k4: Coefficient,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeOverride>,
}

/// Values of a field on every node at `S` equally spaced times over one
/// period. Time-invariant data keeps a single slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampled {
    nodes: usize,
    samples: usize,
    data: Vec<f64>,
}

impl Sampled {
    pub fn from_coefficient(c: &Coefficient, grid: &Grid, steps: usize, period: f64) -> Self {
        let nodes = grid.node_count();
        let domain = grid.domain();
        let samples = if c.is_time_invariant() { 1 } else { steps };
        let dt = period / steps as f64;
        let mut data = Vec::with_capacity(nodes * samples);
        for j in 0..samples {
            let t = j as f64 * dt;
            for k in 0..nodes {
                let [x, y] = grid.coords(k);
                data.push(c.eval(x, y, t, &domain, period));
            }
        }
        Self {
            nodes,
            samples,
            data,
        }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self {
            nodes: grid.node_count(),
            samples: 1,
            data: vec![value; grid.node_count()],
        }
    }

    /// Values at time step `j` (wrapped periodically).
    pub fn at(&self, j: usize) -> &[f64] {
        let k = j % self.samples;
        &self.data[k * self.nodes..(k + 1) * self.nodes]
    }

    pub fn is_time_invariant(&self) -> bool {
        self.samples == 1
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Space-time integral of `|f|` over one period (trapezoid in space,
    /// periodic rectangle rule in time).
    pub fn l1_spacetime(&self, grid: &Grid, period: f64) -> f64 {
        let per: f64 = (0..self.samples)
            .map(|j| {
                self.at(j)
                    .iter()
                    .enumerate()
                    .map(|(k, v)| grid.node_weight(k) * v.abs())
                    .sum::<f64>()
            })
            .sum();
        per * period / self.samples as f64
    }

    /// Space-time integral of `f * g` where `g` is time independent.
    pub fn integrate_against(&self, grid: &Grid, period: f64, g: &[f64]) -> f64 {
        let per: f64 = (0..self.samples)
            .map(|j| {
                self.at(j)
                    .iter()
                    .zip(g)
                    .enumerate()
                    .map(|(k, (v, w))| grid.node_weight(k) * v * w)
                    .sum::<f64>()
            })
            .sum();
        per * period / self.samples as f64
    }
}

/// Bounds `-klow_i <= K_i <= kbar_i` (i = 2, 3) and floors `K_i >= klow_i`
/// (i = 1, 4).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelEnvelope {
    pub kbar2: f64,
    pub kbar3: f64,
    pub klow2: f64,
    pub klow3: f64,
    pub klow1: f64,
    pub klow4: f64,
}

impl KernelEnvelope {
    pub fn from_samples(k: &[Arc<Sampled>; 4]) -> Self {
        Self {
            kbar2: k[1].max().max(0.0),
            kbar3: k[2].max().max(0.0),
            klow2: (-k[1].min()).max(0.0),
            klow3: (-k[2].min()).max(0.0),
            klow1: k[0].min().max(0.0),
            klow4: k[3].min().max(0.0),
        }
    }

    pub fn with_override(mut self, o: &EnvelopeOverride) -> Self {
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut self.kbar2, o.kbar2);
        set(&mut self.kbar3, o.kbar3);
        set(&mut self.klow2, o.klow2);
        set(&mut self.klow3, o.klow3);
        set(&mut self.klow1, o.klow1);
        set(&mut self.klow4, o.klow4);
        self
    }

    pub fn is_coercive(&self) -> bool {
        self.klow1 > 0.0 && self.klow4 > 0.0
    }
}

/// The continuous problem with coefficients and kernels sampled on a grid
/// at `steps` times per period.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub p: f64,
    pub q: f64,
    pub m: f64,
    pub n: f64,
    pub alpha: f64,
    pub tau: [f64; 4],
    pub period: f64,
    pub epsilon: f64,
    pub grid: Grid,
    pub steps: usize,
    pub a: Arc<Sampled>,
    pub b: Arc<Sampled>,
    pub k: [Arc<Sampled>; 4],
    pub envelope: KernelEnvelope,
    pub config: ProblemConfig,
}

impl ProblemSpec {
    /// Samples `config` on `grid` at `steps` equally spaced times. Only
    /// structural problems (non-finite numbers, non-positive period or
    /// steps) are errors; hypothesis failures are reported by
    /// [`validate_hypotheses`].
    pub fn build(config: &ProblemConfig, grid: Grid, steps: usize) -> Result<Self, ModelError> {
        let finite = [
            ("p", config.p),
            ("q", config.q),
            ("m", config.m),
            ("n", config.n),
            ("alpha", config.alpha),
            ("period", config.period),
            ("epsilon", config.epsilon),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(ModelError::NotFinite { name, value });
            }
        }
        if !(config.period > 0.0) {
            return Err(ModelError::NonPositive {
                name: "period",
                value: config.period,
            });
        }
        if steps == 0 {
            return Err(ModelError::NoSteps);
        }
        let sample =
            |c: &Coefficient| Arc::new(Sampled::from_coefficient(c, &grid, steps, config.period));
        let k = [
            sample(&config.k1),
            sample(&config.k2),
            sample(&config.k3),
            sample(&config.k4),
        ];
        let mut envelope = KernelEnvelope::from_samples(&k);
        if let Some(o) = &config.envelope {
            envelope = envelope.with_override(o);
        }
        Ok(Self {
            p: config.p,
            q: config.q,
            m: config.m,
            n: config.n,
            alpha: config.alpha,
            tau: config.tau,
            period: config.period,
            epsilon: config.epsilon,
            grid,
            steps,
            a: sample(&config.a),
            b: sample(&config.b),
            k,
            envelope,
            config: config.clone(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.period / self.steps as f64
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        let mut s = self.clone();
        s.epsilon = epsilon;
        s.config.epsilon = epsilon;
        s
    }

    pub fn omega_measure(&self) -> f64 {
        self.grid.measure()
    }

    /// `|Q_T| = |Omega| T`
    pub fn q_measure(&self) -> f64 {
        self.grid.measure() * self.period
    }

    pub fn sup_a(&self) -> f64 {
        self.a.sup_abs()
    }

    pub fn sup_b(&self) -> f64 {
        self.b.sup_abs()
    }

    pub fn kernel_l1(&self, i: usize) -> f64 {
        self.k[i].l1_spacetime(&self.grid, self.period)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime_u: Regime,
    pub regime_v: Regime,
    /// Both `p` and `q` lie below the golden ratio.
    pub fast_admissible: bool,
    pub notes: Vec<String>,
    pub hypothesis_violations: Vec<String>,
}

impl RegimeReport {
    pub fn holds(&self) -> bool {
        self.hypothesis_violations.is_empty()
    }
}

/// Lists every failed standing hypothesis by name. Never fails; an
/// exponent outside `(1, 2)` yields a violation and a `Fast` placeholder
/// regime computed from the raw product.
pub fn validate_hypotheses(spec: &ProblemSpec) -> RegimeReport {
    let mut v = Vec::new();
    let mut notes = Vec::new();
    for (name, value) in [("p", spec.p), ("q", spec.q)] {
        if !(value > 1.0 && value < 2.0) {
            v.push(format!("{name} in (1, 2) fails ({name} = {value})"));
        }
    }
    if !(spec.m > spec.p) {
        v.push("m > p fails".to_string());
    }
    if !(spec.n > spec.q) {
        v.push("n > q fails".to_string());
    }
    if !(spec.alpha >= 1.0) {
        v.push("alpha >= 1 fails".to_string());
    }
    for (i, tau) in spec.tau.iter().enumerate() {
        if !(*tau > 0.0) || !tau.is_finite() {
            v.push(format!("tau{} > 0 fails", i + 1));
        }
    }
    if spec.a.min() < 0.0 {
        v.push("a non-negativity fails".to_string());
    }
    if spec.b.min() < 0.0 {
        v.push("b non-negativity fails".to_string());
    }
    if spec.k[0].min() < 0.0 {
        v.push("K1 non-negativity fails".to_string());
    }
    if spec.k[3].min() < 0.0 {
        v.push("K4 non-negativity fails".to_string());
    }
    let e = &spec.envelope;
    let slack = 1e-12;
    for (i, lo, hi) in [(2usize, e.klow2, e.kbar2), (3, e.klow3, e.kbar3)] {
        if lo < 0.0 || hi < 0.0 {
            v.push(format!("K{i} envelope constants must be non-negative"));
        }
        let k = &spec.k[i - 1];
        if k.min() < -lo - slack || k.max() > hi + slack {
            v.push(format!("K{i} envelope consistency fails"));
        }
    }
    if e.klow1 > spec.k[0].min() + slack {
        v.push("K1 floor consistency fails".to_string());
    }
    if e.klow4 > spec.k[3].min() + slack {
        v.push("K4 floor consistency fails".to_string());
    }
    let xu = spec.m * (spec.p - 1.0);
    let xv = spec.n * (spec.q - 1.0);
    let regime_u = classify_by_product(xu);
    let regime_v = classify_by_product(xv);
    for (c, x, r) in [("u", xu, regime_u), ("v", xv, regime_v)] {
        if r == Regime::Normal {
            notes.push(format!(
                "Boundary: {c} is on the normal-diffusion line (|m(p-1) - 1| = {:e} <= {REGIME_TOLERANCE:e})",
                (x - 1.0).abs()
            ));
        }
    }
    notes.push("positive geometric density of the boundary holds for intervals and rectangles; not checked".to_string());
    RegimeReport {
        regime_u,
        regime_v,
        fast_admissible: fast_admissible(spec.p) && fast_admissible(spec.q),
        notes,
        hypothesis_violations: v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_config() -> ProblemConfig {
        ProblemConfig {
            p: 1.5,
            q: 1.5,
            m: 2.0,
            n: 2.0,
            alpha: 2.0,
            tau: [0.25, 0.5, 0.25, 0.5],
            period: 1.0,
            domain: Domain::Interval { length: 1.0 },
            a: Coefficient::Constant(5.0),
            b: Coefficient::Constant(5.0),
            k1: Coefficient::Constant(1.0),
            k2: Coefficient::Constant(0.1),
            k3: Coefficient::Constant(0.1),
            k4: Coefficient::Constant(1.0),
            epsilon: 0.1,
            envelope: None,
        }
    }

    fn build(c: &ProblemConfig) -> ProblemSpec {
        ProblemSpec::build(c, Grid::interval(1.0, 16).unwrap(), 8).unwrap()
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_diffusion(3.0, 1.5).unwrap(), Regime::Slow);
        assert_eq!(classify_diffusion(2.0, 1.5).unwrap(), Regime::Normal);
        assert_eq!(classify_diffusion(1.5, 1.4).unwrap(), Regime::Fast);
        assert!(fast_admissible(1.4));
        assert!(matches!(
            classify_diffusion(2.0, 2.5),
            Err(ModelError::ExponentOutOfRange { name: "p", .. })
        ));
        assert!(classify_diffusion(2.0, 1.0).is_err());
    }

    #[test]
    fn valid_toy_problem_has_no_violations() {
        let r = validate_hypotheses(&build(&toy_config()));
        assert!(r.holds(), "{:?}", r.hypothesis_violations);
        assert_eq!(r.regime_u, Regime::Normal);
        assert!(r.notes.iter().any(|n| n.starts_with("Boundary")));
    }

    #[test]
    fn named_violations() {
        let mut c = toy_config();
        c.m = 1.2;
        let r = validate_hypotheses(&build(&c));
        assert!(r.hypothesis_violations.contains(&"m > p fails".to_string()));

        let mut c = toy_config();
        c.k1 = Coefficient::Separable {
            amplitude: 1.0,
            space: SpaceProfile::One,
            time: TimeProfile::Cosine { depth: 2.0 },
        };
        let r = validate_hypotheses(&build(&c));
        assert!(r
            .hypothesis_violations
            .contains(&"K1 non-negativity fails".to_string()));

        let mut c = toy_config();
        c.tau[2] = 0.0;
        c.envelope = Some(EnvelopeOverride {
            kbar2: Some(0.01),
            ..Default::default()
        });
        let r = validate_hypotheses(&build(&c));
        assert!(r
            .hypothesis_violations
            .contains(&"tau3 > 0 fails".to_string()));
        assert!(r
            .hypothesis_violations
            .contains(&"K2 envelope consistency fails".to_string()));
    }

    #[test]
    fn envelope_from_samples() {
        let mut c = toy_config();
        c.k2 = Coefficient::Separable {
            amplitude: 0.5,
            space: SpaceProfile::One,
            time: TimeProfile::Cosine { depth: 3.0 },
        };
        let s = build(&c);
        assert!((s.envelope.kbar2 - 2.0).abs() < 1e-12);
        assert!((s.envelope.klow2 - 1.0).abs() < 1e-12);
        assert_eq!(s.envelope.klow1, 1.0);
        assert!(s.envelope.is_coercive());
        assert!((s.kernel_l1(0) - 1.0).abs() < 1e-12);
    }
}
