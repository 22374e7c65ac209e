//! Time stepping of the regularized system over one period.
//!
//! The default scheme is linearly implicit in the diffusion with the
//! coefficient lagged at the old state and explicit in the reaction:
//! `(M + dt A(w(u^n))) u^{n+1} = M (u^n + dt (R^n + 1 - sigma))`
//! with `M` the lumped (trapezoid) mass. The explicit scheme is kept for
//! comparisons and enforces `dt <= 0.25 h^2 / max w`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{
    DiffusionLaw, EdgeAveraging, Field, Grid, Trajectory, TrajectoryError, NEGATIVE_TOLERANCE,
};
use crate::linalg::LinalgError;
use crate::model::ProblemSpec;
use crate::nonlocal::{
    integrals_from_frames, reaction_into, transient_position, DelayEvaluator, NonlocalError,
};

/// Explicit stability constant `c` in `dt <= c h^2 / max w`.
pub const EXPLICIT_STABILITY: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Nonlocal(#[from] NonlocalError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("explicit step dt = {dt:e} exceeds the stability limit {limit:e}")]
    StabilityViolation { dt: f64, limit: f64 },
    #[error("steps times dt = {covered} does not match the period {period}")]
    PeriodMismatch { covered: f64, period: f64 },
    #[error("time step must be positive, got {0}")]
    BadStep(f64),
    #[error("non-finite value produced at step {step}")]
    NonFinite { step: usize },
    #[error("negative value {value:e} at node {node} in the initial data")]
    NegativeInitial { node: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    ImexLagged,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub delta_g: f64,
    pub scheme: Scheme,
    pub clamp_negative: bool,
    pub averaging: EdgeAveraging,
    /// Homotopy weight: scales the degenerate diffusion by `sigma^(p-1)` and
    /// adds the source `1 - sigma`. The physical problem has `sigma = 1`.
    pub sigma: f64,
}

impl StepperConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            delta_g: 1e-8,
            scheme: Scheme::ImexLagged,
            clamp_negative: true,
            averaging: EdgeAveraging::Kirchhoff,
            sigma: 1.0,
        }
    }

    pub fn for_spec(spec: &ProblemSpec) -> Self {
        Self::new(spec.dt())
    }

    fn laws(&self, spec: &ProblemSpec) -> (DiffusionLaw, DiffusionLaw) {
        let mk = |p: f64, m: f64| DiffusionLaw {
            p,
            m,
            eps: spec.epsilon,
            sigma: self.sigma,
            delta_g: self.delta_g,
            averaging: self.averaging,
        };
        (mk(spec.p, spec.m), mk(spec.q, spec.n))
    }
}

/// Mass removed by clamping negative values to zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClampStats {
    pub mass_u: f64,
    pub mass_v: f64,
    pub events: usize,
}

impl ClampStats {
    fn absorb(&mut self, other: ClampStats) {
        self.mass_u += other.mass_u;
        self.mass_v += other.mass_v;
        self.events += other.events;
    }
}

/// Advances one component by one step. `rate` holds the explicit reaction
/// at every node.
fn advance(
    grid: &Grid,
    law: &DiffusionLaw,
    u: &[f64],
    rate: &[f64],
    source: f64,
    cfg: &StepperConfig,
) -> Result<Vec<f64>, EvolutionError> {
    let w = law.element_weights(grid, u);
    let dt = cfg.dt;
    let mut out = vec![0.0; u.len()];
    match cfg.scheme {
        Scheme::ImexLagged => {
            let mut a = grid.weighted_stiffness(&w);
            let mut rhs = vec![0.0; a.dim()];
            for n in grid.interior_nodes() {
                let k = grid.unknown_index(n).expect("interior");
                let mw = grid.node_weight(n);
                a.add_diagonal(k, mw / dt);
                rhs[k] = mw * (u[n] / dt + rate[n] + source);
            }
            let sol = a.solve(&rhs)?;
            for n in grid.interior_nodes() {
                out[n] = sol[grid.unknown_index(n).expect("interior")];
            }
        }
        Scheme::Explicit => {
            let wmax = w.iter().fold(0.0f64, |m, x| m.max(*x));
            let h = grid.min_spacing();
            let limit = EXPLICIT_STABILITY * h * h / wmax;
            if dt > limit * (1.0 + 1e-12) {
                return Err(EvolutionError::StabilityViolation { dt, limit });
            }
            let div = grid.weighted_divergence(&w, u);
            for n in grid.interior_nodes() {
                out[n] = u[n] + dt * (div.values()[n] + rate[n] + source);
            }
        }
    }
    Ok(out)
}

fn clamp(values: &mut [f64], enabled: bool) -> (f64, usize) {
    if !enabled {
        return (0.0, 0);
    }
    let mut mass = 0.0;
    let mut events = 0;
    for v in values.iter_mut() {
        if *v < 0.0 {
            mass -= *v;
            events += 1;
            *v = 0.0;
        }
    }
    (mass, events)
}

fn check_initial(f: &Field) -> Result<(), EvolutionError> {
    if let Some((node, &value)) = f
        .values()
        .iter()
        .enumerate()
        .find(|(_, v)| **v < -NEGATIVE_TOLERANCE)
    {
        return Err(EvolutionError::NegativeInitial { node, value });
    }
    Ok(())
}

/// One step from step index `j` given the four delayed integrals.
pub fn step_with_integrals(
    spec: &ProblemSpec,
    cfg: &StepperConfig,
    j: usize,
    ints: [f64; 4],
    u: &Field,
    v: &Field,
) -> Result<(Field, Field, ClampStats), EvolutionError> {
    let grid = &spec.grid;
    let nn = grid.node_count();
    let mut ru = vec![0.0; nn];
    let mut rv = vec![0.0; nn];
    reaction_into(spec, j, ints, u.values(), v.values(), &mut ru, &mut rv);
    let (law_u, law_v) = cfg.laws(spec);
    let source = 1.0 - cfg.sigma;
    let mut un = advance(grid, &law_u, u.values(), &ru, source, cfg)?;
    let mut vn = advance(grid, &law_v, v.values(), &rv, source, cfg)?;
    if un.iter().chain(&vn).any(|x| !x.is_finite()) {
        return Err(EvolutionError::NonFinite { step: j + 1 });
    }
    let (mu, eu) = clamp(&mut un, cfg.clamp_negative);
    let (mv, ev) = clamp(&mut vn, cfg.clamp_negative);
    if eu + ev > 0 {
        log::trace!("step {j}: clamped {} nodes, mass {:e}", eu + ev, mu + mv);
    }
    Ok((
        Field::from_values(grid, un).expect("grid length"),
        Field::from_values(grid, vn).expect("grid length"),
        ClampStats {
            mass_u: mu,
            mass_v: mv,
            events: eu + ev,
        },
    ))
}

/// One step from `t_j = j dt` to `t_{j+1}` with delayed terms from `evaluator`.
pub fn step(
    u: &Field,
    v: &Field,
    j: usize,
    cfg: &StepperConfig,
    evaluator: &DelayEvaluator<'_>,
) -> Result<(Field, Field, ClampStats), EvolutionError> {
    check_initial(u)?;
    check_initial(v)?;
    step_with_integrals(evaluator.spec(), cfg, j, evaluator.integrals(j), u, v)
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub trajectory: Trajectory,
    pub clamp: ClampStats,
}

/// Integrates over one period, `S` steps of size `dt` with `S dt = T`.
pub fn sweep_period(
    u0: &Field,
    v0: &Field,
    cfg: &StepperConfig,
    evaluator: &DelayEvaluator<'_>,
) -> Result<Sweep, EvolutionError> {
    let spec = evaluator.spec();
    let covered = cfg.dt * spec.steps as f64;
    if (covered - spec.period).abs() > 1e-9 * spec.period {
        return Err(EvolutionError::PeriodMismatch {
            covered,
            period: spec.period,
        });
    }
    check_initial(u0)?;
    check_initial(v0)?;
    let mut us = Vec::with_capacity(spec.steps + 1);
    let mut vs = Vec::with_capacity(spec.steps + 1);
    us.push(u0.clone());
    vs.push(v0.clone());
    let mut stats = ClampStats::default();
    for j in 0..spec.steps {
        let (un, vn, c) =
            step_with_integrals(spec, cfg, j, evaluator.integrals(j), &us[j], &vs[j])?;
        stats.absorb(c);
        us.push(un);
        vs.push(vn);
    }
    if stats.events > 0 {
        log::debug!(
            "period sweep clamped {} values, mass u {:e} v {:e}",
            stats.events,
            stats.mass_u,
            stats.mass_v
        );
    }
    Ok(Sweep {
        trajectory: Trajectory::new(spec.grid, cfg.dt, us, vs)?,
        clamp: stats,
    })
}

#[derive(Debug, Clone)]
pub struct TransientRun {
    pub trajectory: Trajectory,
    pub clamp: ClampStats,
    /// Initial stretch `[0, max tau)` whose delayed terms read the constant
    /// extension of the initial data.
    pub burn_in: f64,
}

/// Integrates `steps` steps from `(u0, v0)`. Delayed terms read the run's
/// own past; before `t = 0` the history is the initial data held constant.
/// Coefficients are periodic in time, so `steps` may exceed one period.
pub fn run_transient(
    spec: &ProblemSpec,
    cfg: &StepperConfig,
    u0: &Field,
    v0: &Field,
    steps: usize,
) -> Result<TransientRun, EvolutionError> {
    if !(cfg.dt > 0.0) {
        return Err(EvolutionError::BadStep(cfg.dt));
    }
    check_initial(u0)?;
    check_initial(v0)?;
    let mut us = Vec::with_capacity(steps + 1);
    let mut vs = Vec::with_capacity(steps + 1);
    us.push(u0.clone());
    vs.push(v0.clone());
    let mut stats = ClampStats::default();
    let dt = cfg.dt;
    for j in 0..steps {
        let ints =
            integrals_from_frames(spec, &us, &vs, j, |j, tau| transient_position(j, tau, dt))?;
        let (un, vn, c) = step_with_integrals(spec, cfg, j, ints, &us[j], &vs[j])?;
        stats.absorb(c);
        us.push(un);
        vs.push(vn);
    }
    let burn_in = spec.tau.iter().copied().fold(0.0, f64::max);
    Ok(TransientRun {
        trajectory: Trajectory::new(spec.grid, dt, us, vs)?,
        clamp: stats,
        burn_in,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{norm_lr_space, Component, Domain};
    use crate::model::{Coefficient, ProblemConfig};

    fn config(a: f64, k: f64, p: f64, m: f64, eps: f64) -> ProblemConfig {
        ProblemConfig {
            p,
            q: p,
            m,
            n: m,
            alpha: 2.0,
            tau: [0.25, 0.5, 0.25, 0.5],
            period: 1.0,
            domain: Domain::Interval { length: 1.0 },
            a: Coefficient::Constant(a),
            b: Coefficient::Constant(a),
            k1: Coefficient::Constant(k),
            k2: Coefficient::Constant(0.0),
            k3: Coefficient::Constant(0.0),
            k4: Coefficient::Constant(k),
            epsilon: eps,
            envelope: None,
        }
    }

    #[test]
    fn zero_is_fixed() {
        let s = ProblemSpec::build(
            &config(5.0, 1.0, 1.5, 2.0, 0.1),
            Grid::interval(1.0, 20).unwrap(),
            50,
        )
        .unwrap();
        let z = Field::zeros(&s.grid);
        let ev = DelayEvaluator::constant(&s, &z, &z).unwrap();
        let sw = sweep_period(&z, &z, &StepperConfig::for_spec(&s), &ev).unwrap();
        assert_eq!(sw.trajectory.sup(Component::U), 0.0);
        assert_eq!(sw.trajectory.sup(Component::V), 0.0);
    }

    #[test]
    fn pure_diffusion_step_does_not_grow_l2() {
        let s = ProblemSpec::build(
            &config(0.0, 0.0, 1.5, 2.0, 0.1),
            Grid::interval(1.0, 50).unwrap(),
            100,
        )
        .unwrap();
        let u = Field::sine_bump(&s.grid, 1.0);
        let ev = DelayEvaluator::constant(&s, &u, &u).unwrap();
        let cfg = StepperConfig::for_spec(&s);
        let mut cur = u.clone();
        for j in 0..20 {
            let (next, _, _) = step(&cur, &cur, j, &cfg, &ev).unwrap();
            assert!(norm_lr_space(&s.grid, &next, 2.0) <= norm_lr_space(&s.grid, &cur, 2.0));
            cur = next;
        }
    }

    #[test]
    fn near_linear_heat_decays_like_first_mode() {
        // p close to 2, tiny data so the degenerate part is negligible, eps = 1
        let p = 1.999;
        let amp = 1e-6;
        let s = ProblemSpec::build(
            &config(0.0, 0.0, p, 2.0, 1.0),
            Grid::interval(1.0, 100).unwrap(),
            1000,
        )
        .unwrap();
        let u = Field::sine_bump(&s.grid, amp);
        let mut cfg = StepperConfig::for_spec(&s);
        cfg.delta_g = 1.0;
        let run = run_transient(&s, &cfg, &u, &u, 100).unwrap();
        let tr = &run.trajectory;
        let mid = s.grid.node_count() / 2;
        for j in [25, 50, 100] {
            let t = tr.time(j);
            let got = tr.frame(Component::U, j).values()[mid] / amp;
            let want = (-std::f64::consts::PI.powi(2) * t).exp();
            assert!(
                (got / want - 1.0).abs() < 0.02,
                "t={t} got {got} want {want}"
            );
        }
    }

    #[test]
    fn explicit_scheme_enforces_stability() {
        let s = ProblemSpec::build(
            &config(0.0, 0.0, 1.9, 2.0, 1.0),
            Grid::interval(1.0, 20).unwrap(),
            10,
        )
        .unwrap();
        let u = Field::sine_bump(&s.grid, 1.0);
        let ev = DelayEvaluator::constant(&s, &u, &u).unwrap();
        let mut cfg = StepperConfig::for_spec(&s);
        cfg.scheme = Scheme::Explicit;
        assert!(matches!(
            step(&u, &u, 0, &cfg, &ev),
            Err(EvolutionError::StabilityViolation { .. })
        ));
    }

    #[test]
    fn sweep_requires_whole_period() {
        let s = ProblemSpec::build(
            &config(1.0, 1.0, 1.5, 2.0, 0.1),
            Grid::interval(1.0, 10).unwrap(),
            10,
        )
        .unwrap();
        let u = Field::sine_bump(&s.grid, 1.0);
        let ev = DelayEvaluator::constant(&s, &u, &u).unwrap();
        let cfg = StepperConfig::new(0.05);
        assert!(matches!(
            sweep_period(&u, &u, &cfg, &ev),
            Err(EvolutionError::PeriodMismatch { .. })
        ));
    }
}
