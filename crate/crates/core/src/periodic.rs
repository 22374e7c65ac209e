//! Periodic orbits as fixed points of the period map.
//!
//! Outer loop: freeze a periodic history for the delayed terms. Inner loop:
//! damped Picard iteration on the period map against that history. The
//! converged sweep becomes the next history, blended with the previous one
//! by a relaxation factor that is either fixed or adapted from the last two
//! residuals (Aitken's dynamic relaxation).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolution::{sweep_period, ClampStats, EvolutionError, StepperConfig};
use crate::grid::{Component, Field, Trajectory, TrajectoryError};
use crate::model::ProblemSpec;
use crate::nonlocal::{DelayEvaluator, NonlocalError};

/// Default sup-norm threshold below which a component counts as zero.
pub const TRIVIAL_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Error, Clone)]
pub enum PeriodicError {
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Nonlocal(#[from] NonlocalError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("no convergence after {} outer iterations (outer residual {:e})", .0.outer_iterations, .0.outer_residual)]
    MaxIterations(Box<PeriodicResult>),
    #[error("sup norm {sup:e} exceeds {limit:e} at outer iteration {outer}")]
    DivergenceDetected { sup: f64, limit: f64, outer: usize },
    #[error("initial data does not match the problem grid")]
    BadInitial,
}

impl PeriodicError {
    /// The best iterate when the solve ran out of iterations.
    pub fn best_iterate(&self) -> Option<&PeriodicResult> {
        match self {
            PeriodicError::MaxIterations(r) => Some(r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Trivial,
    SemiTrivialU,
    SemiTrivialV,
    Coexistence,
}

pub fn classify(sup_u: f64, sup_v: f64, threshold: f64) -> Classification {
    match (sup_u > threshold, sup_v > threshold) {
        (false, false) => Classification::Trivial,
        (true, false) => Classification::SemiTrivialU,
        (false, true) => Classification::SemiTrivialV,
        (true, true) => Classification::Coexistence,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterUpdate {
    /// `h <- h + beta (new - h)` with a fixed `beta`.
    Fixed(f64),
    /// `beta` adapted from consecutive residuals, clamped to `[min, max]`.
    Aitken { initial: f64, min: f64, max: f64 },
}

impl Default for OuterUpdate {
    fn default() -> Self {
        OuterUpdate::Aitken {
            initial: 0.5,
            min: 0.05,
            max: 1.0,
        }
    }
}

/// Homotopy `sigma_k = start + (1 - start) min(1, k / ramp)` over outer
/// iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaRamp {
    pub start: f64,
    pub outer_iterations: usize,
}

impl SigmaRamp {
    pub fn sigma(&self, k: usize) -> f64 {
        if self.outer_iterations == 0 {
            return 1.0;
        }
        let f = (k as f64 / self.outer_iterations as f64).min(1.0);
        self.start + (1.0 - self.start) * f
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicConfig {
    pub stepper: StepperConfig,
    pub tol_outer: f64,
    pub tol_map: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Picard damping `next = (1 - omega) prev + omega image`.
    pub omega: f64,
    pub outer_update: OuterUpdate,
    pub sigma_ramp: Option<SigmaRamp>,
    pub trivial_threshold: f64,
    /// Stand-in for the a priori sup bound; the solve aborts when a sweep
    /// exceeds ten times this value.
    pub linf_proxy: Option<f64>,
}

impl PeriodicConfig {
    pub fn for_spec(spec: &ProblemSpec) -> Self {
        Self {
            stepper: StepperConfig::for_spec(spec),
            tol_outer: 1e-6,
            tol_map: 1e-7,
            max_outer: 200,
            max_inner: 200,
            omega: 0.7,
            outer_update: OuterUpdate::default(),
            sigma_ramp: None,
            trivial_threshold: TRIVIAL_THRESHOLD,
            linf_proxy: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PeriodicResult {
    pub trajectory: Trajectory,
    /// `max |(u, v)(T) - (u, v)(0)|` of the accepted sweep.
    pub map_residual: f64,
    /// `max |history_{k+1} - history_k|` over space-time at the last outer step.
    pub outer_residual: f64,
    pub classification: Classification,
    pub epsilon: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
    pub sup_u: f64,
    pub sup_v: f64,
    pub clamp: ClampStats,
    pub outer_residuals: Vec<f64>,
}

/// End state of one period started at `(u0, v0)` with delayed terms read
/// from `history`.
pub fn period_map(
    u0: &Field,
    v0: &Field,
    history: &Trajectory,
    spec: &ProblemSpec,
    cfg: &StepperConfig,
) -> Result<(Field, Field), PeriodicError> {
    let ev = DelayEvaluator::from_history(spec, history)?;
    let sweep = sweep_period(u0, v0, cfg, &ev)?;
    let (u, v) = sweep.trajectory.last();
    Ok((u.clone(), v.clone()))
}

struct Inner {
    sweep: Trajectory,
    start: (Field, Field),
    residual: f64,
    iterations: usize,
    clamp: ClampStats,
}

fn inner_solve(
    spec: &ProblemSpec,
    cfg: &PeriodicConfig,
    stepper: &StepperConfig,
    ev: &DelayEvaluator<'_>,
    mut x: (Field, Field),
) -> Result<Inner, PeriodicError> {
    let mut clamp = ClampStats::default();
    let mut last = None;
    for i in 0..cfg.max_inner.max(1) {
        let sw = sweep_period(&x.0, &x.1, stepper, ev)?;
        clamp.mass_u += sw.clamp.mass_u;
        clamp.mass_v += sw.clamp.mass_v;
        clamp.events += sw.clamp.events;
        let (iu, iv) = sw.trajectory.last();
        let res = iu.max_abs_diff(&x.0).max(iv.max_abs_diff(&x.1));
        if !res.is_finite() {
            return Err(EvolutionError::NonFinite { step: spec.steps }.into());
        }
        if res <= cfg.tol_map {
            return Ok(Inner {
                sweep: sw.trajectory,
                start: x,
                residual: res,
                iterations: i + 1,
                clamp,
            });
        }
        let next = (x.0.blend(iu, cfg.omega), x.1.blend(iv, cfg.omega));
        last = Some((sw.trajectory, res));
        x = next;
    }
    let (sweep, residual) = last.expect("at least one sweep");
    log::debug!(
        "inner loop hit {} iterations, map residual {residual:e}",
        cfg.max_inner
    );
    Ok(Inner {
        sweep,
        start: x,
        residual,
        iterations: cfg.max_inner,
        clamp,
    })
}

fn blend_trajectories(
    old: &Trajectory,
    new: &Trajectory,
    beta: f64,
) -> Result<Trajectory, TrajectoryError> {
    let blend = |c| {
        old.frames(c)
            .iter()
            .zip(new.frames(c))
            .map(|(a, b)| a.blend(b, beta))
            .collect::<Vec<_>>()
    };
    let mut t = Trajectory::new(
        *old.grid(),
        old.dt(),
        blend(Component::U),
        blend(Component::V),
    )?;
    t.mark_periodic();
    Ok(t)
}

/// Space-time inner product of two trajectory differences `(a1 - a0)` and
/// `(b1 - b0)`, summed over both components and all frames.
fn diff_dot(a1: &Trajectory, a0: &Trajectory, b1: &Trajectory, b0: &Trajectory) -> f64 {
    let mut s = 0.0;
    for c in [Component::U, Component::V] {
        let frames = a1
            .frames(c)
            .iter()
            .zip(a0.frames(c))
            .zip(b1.frames(c).iter().zip(b0.frames(c)));
        for ((x1, x0), (y1, y0)) in frames {
            for k in 0..x1.len() {
                s += (x1.values()[k] - x0.values()[k]) * (y1.values()[k] - y0.values()[k]);
            }
        }
    }
    s
}

/// Residual trajectory `new - old` kept as a pair for the Aitken update.
struct ResidualPair {
    new: Trajectory,
    old: Trajectory,
}

fn aitken_beta(prev: &ResidualPair, cur: &ResidualPair, beta: f64) -> Option<f64> {
    // r_k = cur.new - cur.old, r_{k-1} = prev.new - prev.old
    // beta_k = -beta_{k-1} <r_{k-1}, r_k - r_{k-1}> / |r_k - r_{k-1}|^2
    let rr_prev = diff_dot(&prev.new, &prev.old, &prev.new, &prev.old);
    let rr_cur = diff_dot(&cur.new, &cur.old, &cur.new, &cur.old);
    let cross = diff_dot(&cur.new, &cur.old, &prev.new, &prev.old);
    let denom = rr_cur - 2.0 * cross + rr_prev;
    if !(denom > 0.0) {
        return None;
    }
    let num = cross - rr_prev;
    Some(-beta * num / denom)
}

/// Searches a periodic orbit starting from `init`.
pub fn solve_periodic(
    spec: &ProblemSpec,
    cfg: &PeriodicConfig,
    init: (Field, Field),
) -> Result<PeriodicResult, PeriodicError> {
    let grid = spec.grid;
    if grid.check_len(init.0.values()).is_err() || grid.check_len(init.1.values()).is_err() {
        return Err(PeriodicError::BadInitial);
    }
    let mut history = Trajectory::constant(grid, spec.dt(), spec.steps, &init.0, &init.1)?;
    history.mark_periodic();
    let mut x = init;
    let mut beta = match cfg.outer_update {
        OuterUpdate::Fixed(b) => b,
        OuterUpdate::Aitken { initial, .. } => initial,
    };
    let mut prev_pair: Option<ResidualPair> = None;
    let mut residuals = Vec::new();
    let mut inner_total = 0;
    let mut clamp = ClampStats::default();
    let mut best: Option<PeriodicResult> = None;
    let limit = cfg.linf_proxy.map(|r| 10.0 * r);

    for k in 0..cfg.max_outer.max(1) {
        let sigma = cfg.sigma_ramp.map_or(1.0, |r| r.sigma(k));
        let mut stepper = cfg.stepper;
        stepper.sigma = sigma;
        let ev = DelayEvaluator::from_history(spec, &history)?;
        let inner = inner_solve(spec, cfg, &stepper, &ev, x)?;
        inner_total += inner.iterations;
        clamp.mass_u += inner.clamp.mass_u;
        clamp.mass_v += inner.clamp.mass_v;
        clamp.events += inner.clamp.events;
        let mut sweep = inner.sweep;
        sweep.mark_periodic();
        let sup_u = sweep.sup(Component::U);
        let sup_v = sweep.sup(Component::V);
        if let Some(limit) = limit {
            if sup_u.max(sup_v) > limit {
                return Err(PeriodicError::DivergenceDetected {
                    sup: sup_u.max(sup_v),
                    limit,
                    outer: k + 1,
                });
            }
        }
        let outer_res = sweep.max_abs_diff(&history);
        residuals.push(outer_res);
        log::debug!(
            "outer {k}: sigma {sigma:.3} inner {} map {:e} outer {outer_res:e} beta {beta:.3} sup ({sup_u:.4e}, {sup_v:.4e})",
            inner.iterations,
            inner.residual
        );
        let ramp_done = sigma >= 1.0;
        let result = PeriodicResult {
            map_residual: inner.residual,
            outer_residual: outer_res,
            classification: classify(sup_u, sup_v, cfg.trivial_threshold),
            epsilon: spec.epsilon,
            outer_iterations: k + 1,
            inner_iterations: inner_total,
            converged: false,
            sup_u,
            sup_v,
            clamp,
            outer_residuals: residuals.clone(),
            trajectory: sweep.clone(),
        };
        if ramp_done && outer_res <= cfg.tol_outer && inner.residual <= cfg.tol_map {
            return Ok(PeriodicResult {
                converged: true,
                ..result
            });
        }
        if ramp_done && best.as_ref().is_none_or(|b| outer_res < b.outer_residual) {
            best = Some(result);
        }

        if let OuterUpdate::Aitken { min, max, .. } = cfg.outer_update {
            let cur = ResidualPair {
                new: sweep.clone(),
                old: history.clone(),
            };
            if let Some(prev) = &prev_pair {
                if ramp_done {
                    if let Some(b) = aitken_beta(prev, &cur, beta) {
                        beta = b.clamp(min, max);
                    }
                }
            }
            prev_pair = Some(cur);
        }
        history = blend_trajectories(&history, &sweep, beta)?;
        x = inner.start;
    }
    let best = best.unwrap_or_else(|| unreachable_best(spec));
    Err(PeriodicError::MaxIterations(Box::new(best)))
}

fn unreachable_best(spec: &ProblemSpec) -> PeriodicResult {
    let z = Field::zeros(&spec.grid);
    let mut t =
        Trajectory::constant(spec.grid, spec.dt(), spec.steps, &z, &z).expect("valid trajectory");
    t.mark_periodic();
    PeriodicResult {
        trajectory: t,
        map_residual: f64::NAN,
        outer_residual: f64::INFINITY,
        classification: Classification::Trivial,
        epsilon: spec.epsilon,
        outer_iterations: 0,
        inner_iterations: 0,
        converged: false,
        sup_u: 0.0,
        sup_v: 0.0,
        clamp: ClampStats::default(),
        outer_residuals: Vec::new(),
    }
}

#[derive(Debug, Clone)]
pub struct ContinuationStep {
    pub epsilon: f64,
    pub outcome: Result<PeriodicResult, PeriodicError>,
    /// `max |orbit(eps_k) - orbit(eps_{k-1})|` when both solves produced an orbit.
    pub sup_difference: Option<f64>,
}

/// Solves along a strictly decreasing schedule, warm-starting each solve
/// from the previous orbit's initial state. Failures are recorded and the
/// schedule continues from the last available orbit.
pub fn epsilon_continuation(
    spec: &ProblemSpec,
    cfg: &PeriodicConfig,
    schedule: &[f64],
    init: (Field, Field),
) -> Vec<ContinuationStep> {
    let mut out: Vec<ContinuationStep> = Vec::with_capacity(schedule.len());
    let mut start = init;
    let mut prev: Option<Trajectory> = None;
    for &eps in schedule {
        let s = spec.with_epsilon(eps);
        let outcome = solve_periodic(&s, cfg, start.clone());
        let orbit = match &outcome {
            Ok(r) => Some(&r.trajectory),
            Err(e) => e.best_iterate().map(|r| &r.trajectory),
        };
        let sup_difference = match (&prev, orbit) {
            (Some(a), Some(b)) => Some(a.max_abs_diff(b)),
            _ => None,
        };
        if let Some(orbit) = orbit {
            start = (
                orbit.frame(Component::U, 0).clone(),
                orbit.frame(Component::V, 0).clone(),
            );
            prev = Some(orbit.clone());
        }
        out.push(ContinuationStep {
            epsilon: eps,
            outcome,
            sup_difference,
        });
    }
    out
}

/// Checks that a schedule is positive and strictly decreasing.
pub fn is_valid_schedule(schedule: &[f64]) -> bool {
    !schedule.is_empty()
        && schedule.iter().all(|e| *e > 0.0 && e.is_finite())
        && schedule.windows(2).all(|w| w[1] < w[0])
}
