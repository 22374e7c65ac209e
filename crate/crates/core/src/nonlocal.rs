//! Delayed nonlocal interaction terms `I_i(t) = integral K_i(xi, t) w^alpha(xi, t - tau_i) dxi`.
//!
//! `I_1` and `I_3` read `u`, `I_2` and `I_4` read `v`. The reaction rates are
//! `R_u = (a - I_1 + I_2) (u+)^(p-1)` and `R_v = (b + I_3 - I_4) (v+)^(q-1)`.

use thiserror::Error;

use crate::grid::{Component, Field, Grid, Trajectory, NEGATIVE_TOLERANCE};
use crate::model::ProblemSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NonlocalError {
    #[error("delayed value {value:e} at node {node} is negative")]
    NegativeDelayed { node: usize, value: f64 },
    #[error("nonlocal power must be at least 1, got {0}")]
    AlphaBelowOne(f64),
    #[error("history has {found} steps, the problem is sampled at {expected}")]
    HistoryMismatch { expected: usize, found: usize },
    #[error("current state has a negative value {value:e} at node {node}")]
    NegativeState { node: usize, value: f64 },
}

/// Component read by each of the four kernels.
pub const KERNEL_SOURCE: [Component; 4] = [Component::U, Component::V, Component::U, Component::V];

#[inline]
fn pow_alpha(w: f64, alpha: f64) -> f64 {
    if alpha == 2.0 {
        w * w
    } else {
        w.powf(alpha)
    }
}

/// Trapezoid quadrature of `K w^alpha`.
pub fn kernel_integral(
    grid: &Grid,
    k: &[f64],
    w: &[f64],
    alpha: f64,
) -> Result<f64, NonlocalError> {
    if !(alpha >= 1.0) {
        return Err(NonlocalError::AlphaBelowOne(alpha));
    }
    let mut s = 0.0;
    for (node, (kv, wv)) in k.iter().zip(w).enumerate() {
        if *wv < -NEGATIVE_TOLERANCE {
            return Err(NonlocalError::NegativeDelayed { node, value: *wv });
        }
        if *kv != 0.0 {
            s += grid.node_weight(node) * kv * pow_alpha(wv.max(0.0), alpha);
        }
    }
    Ok(s)
}

/// Same as [`kernel_integral`] on the linear blend `(1 - w) a + w b` without
/// materializing it.
fn kernel_integral_blend(
    grid: &Grid,
    k: &[f64],
    a: &[f64],
    b: &[f64],
    wt: f64,
    alpha: f64,
) -> Result<f64, NonlocalError> {
    if wt == 0.0 {
        return kernel_integral(grid, k, a, alpha);
    }
    let mut s = 0.0;
    for node in 0..k.len() {
        let x = (1.0 - wt) * a[node] + wt * b[node];
        if x < -NEGATIVE_TOLERANCE {
            return Err(NonlocalError::NegativeDelayed { node, value: x });
        }
        if k[node] != 0.0 {
            s += grid.node_weight(node) * k[node] * pow_alpha(x.max(0.0), alpha);
        }
    }
    Ok(s)
}

/// Frame index and blend weight for time `t_j - tau` on a periodic record of
/// `steps` steps. `tau` is reduced modulo the period first, so a delay of
/// one period lands exactly on `j`.
pub fn periodic_position(j: usize, tau: f64, dt: f64, steps: usize) -> (usize, f64) {
    let period = dt * steps as f64;
    let shift = tau.rem_euclid(period) / dt;
    let mut pos = (j % steps) as f64 - shift;
    if pos < 0.0 {
        pos += steps as f64;
    }
    split_position(pos, steps)
}

/// Frame index and weight for `t_j - tau` on a transient record whose
/// history before `t = 0` is the initial frame.
pub fn transient_position(j: usize, tau: f64, dt: f64) -> (usize, f64) {
    let pos = (j as f64 - tau / dt).max(0.0);
    split_position(pos, j)
}

fn split_position(pos: f64, last: usize) -> (usize, f64) {
    let k = (pos.floor() as usize).min(last);
    let w = pos - k as f64;
    if k == last || w <= 0.0 {
        (k, 0.0)
    } else {
        (k, w)
    }
}

/// The four integrals at step `j` read from explicit frame lists.
pub fn integrals_from_frames(
    spec: &ProblemSpec,
    u: &[Field],
    v: &[Field],
    j: usize,
    position: impl Fn(usize, f64) -> (usize, f64),
) -> Result<[f64; 4], NonlocalError> {
    let mut out = [0.0; 4];
    for (i, slot) in out.iter_mut().enumerate() {
        let kv = spec.k[i].at(j);
        if kv.iter().all(|&x| x == 0.0) {
            continue;
        }
        let frames = match KERNEL_SOURCE[i] {
            Component::U => u,
            Component::V => v,
        };
        let (k, w) = position(j, spec.tau[i]);
        let next = if w > 0.0 { &frames[k + 1] } else { &frames[k] };
        *slot = kernel_integral_blend(
            &spec.grid,
            kv,
            frames[k].values(),
            next.values(),
            w,
            spec.alpha,
        )?;
    }
    Ok(out)
}

/// Delayed integrals tabulated over one period of a frozen history.
#[derive(Debug, Clone)]
pub struct DelayEvaluator<'a> {
    spec: &'a ProblemSpec,
    table: Vec<[f64; 4]>,
}

impl<'a> DelayEvaluator<'a> {
    /// Tabulates `I_i(t_j)` for `j = 0..S`. A periodic history wraps delays
    /// modulo the period; a non-periodic one uses the transient rule.
    pub fn from_history(
        spec: &'a ProblemSpec,
        history: &Trajectory,
    ) -> Result<Self, NonlocalError> {
        if !(spec.alpha >= 1.0) {
            return Err(NonlocalError::AlphaBelowOne(spec.alpha));
        }
        if history.steps() != spec.steps {
            return Err(NonlocalError::HistoryMismatch {
                expected: spec.steps,
                found: history.steps(),
            });
        }
        let dt = spec.dt();
        let s = spec.steps;
        let u = history.frames(Component::U);
        let v = history.frames(Component::V);
        let table = (0..s)
            .map(|j| {
                if history.is_periodic() {
                    integrals_from_frames(spec, u, v, j, |j, tau| periodic_position(j, tau, dt, s))
                } else {
                    integrals_from_frames(spec, u, v, j, |j, tau| transient_position(j, tau, dt))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { spec, table })
    }

    /// History that is constant in time at `(u0, v0)`.
    pub fn constant(spec: &'a ProblemSpec, u0: &Field, v0: &Field) -> Result<Self, NonlocalError> {
        let one = integrals_from_frames(
            spec,
            std::slice::from_ref(u0),
            std::slice::from_ref(v0),
            0,
            |_, _| (0, 0.0),
        )?;
        let table = if spec.k.iter().all(|k| k.is_time_invariant()) {
            vec![one; spec.steps]
        } else {
            (0..spec.steps)
                .map(|j| {
                    integrals_from_frames(
                        spec,
                        std::slice::from_ref(u0),
                        std::slice::from_ref(v0),
                        j,
                        |_, _| (0, 0.0),
                    )
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        Ok(Self { spec, table })
    }

    pub fn spec(&self) -> &ProblemSpec {
        self.spec
    }

    pub fn integrals(&self, j: usize) -> [f64; 4] {
        self.table[j % self.table.len()]
    }

    /// Step index nearest to time `t` (wrapped into one period).
    pub fn step_of(&self, t: f64) -> usize {
        let s = self.spec.steps;
        ((t.rem_euclid(self.spec.period) / self.spec.dt()).round() as usize) % s
    }

    pub fn reaction_rates(
        &self,
        j: usize,
        u_now: &Field,
        v_now: &Field,
    ) -> Result<(Field, Field), NonlocalError> {
        for f in [u_now, v_now] {
            if let Some((node, &value)) = f
                .values()
                .iter()
                .enumerate()
                .find(|(_, v)| **v < -NEGATIVE_TOLERANCE)
            {
                return Err(NonlocalError::NegativeState { node, value });
            }
        }
        let mut ru = vec![0.0; u_now.len()];
        let mut rv = vec![0.0; v_now.len()];
        reaction_into(
            self.spec,
            j,
            self.integrals(j),
            u_now.values(),
            v_now.values(),
            &mut ru,
            &mut rv,
        );
        Ok((
            Field::from_values(&self.spec.grid, ru).expect("grid length"),
            Field::from_values(&self.spec.grid, rv).expect("grid length"),
        ))
    }
}

/// Writes `R_u`, `R_v` at step `j` given the four integrals.
pub fn reaction_into(
    spec: &ProblemSpec,
    j: usize,
    ints: [f64; 4],
    u: &[f64],
    v: &[f64],
    ru: &mut [f64],
    rv: &mut [f64],
) {
    let a = spec.a.at(j);
    let b = spec.b.at(j);
    let eu = spec.p - 1.0;
    let ev = spec.q - 1.0;
    for i in 0..u.len() {
        let up = u[i].max(0.0);
        ru[i] = if up > 0.0 {
            (a[i] - ints[0] + ints[1]) * up.powf(eu)
        } else {
            0.0
        };
        let vp = v[i].max(0.0);
        rv[i] = if vp > 0.0 {
            (b[i] + ints[2] - ints[3]) * vp.powf(ev)
        } else {
            0.0
        };
    }
}
