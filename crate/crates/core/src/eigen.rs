//! First Dirichlet eigenpair of the r-Laplacian `-div(|grad z|^(r-2) grad z) = mu |z|^(r-2) z`.
//!
//! The discrete Rayleigh quotient `Q(z) = E(z) / N(z)` with
//! `E = sum_e vol_e ((|g_e|^2 + delta^2)^(r/2) - delta^r)` and
//! `N = sum_i w_i |z_i|^r` is minimized by preconditioned gradient descent:
//! the search direction `d = Q A(z)^{-1} (M z^(r-1)) - z` uses the lagged
//! weighted stiffness `A(z)` as metric, and a backtracking line search on
//! normalized iterates keeps the quotient sequence non-increasing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Field, Grid};
use crate::linalg::LinalgError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("exponent r = {0} must exceed 1")]
    BadExponent(f64),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub delta_g: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iterations: 2000,
            delta_g: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub r: f64,
    pub mu: f64,
    pub e: Field,
    /// Relative change of the quotient at the last iteration.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest element gradient magnitude of `e`.
    pub grad_sup: f64,
    /// `max e^(r-1)`.
    pub pow_sup: f64,
    /// Quotient after every accepted iteration.
    pub history: Vec<f64>,
    pub delta_g: f64,
}

fn energy(grid: &Grid, z: &[f64], r: f64, delta: f64) -> f64 {
    let d2 = delta * delta;
    let base = d2.powf(0.5 * r);
    let mut s = 0.0;
    grid.for_each_element(|e| {
        let g = e.gradient(z);
        let g2 = g[0] * g[0] + g[1] * g[1];
        s += e.volume * ((g2 + d2).powf(0.5 * r) - base);
    });
    s
}

fn lr_power(grid: &Grid, z: &[f64], r: f64) -> f64 {
    z.iter()
        .enumerate()
        .map(|(n, v)| grid.node_weight(n) * v.abs().powf(r))
        .sum()
}

fn normalize(grid: &Grid, z: &mut [f64], r: f64) {
    let nrm = lr_power(grid, z, r).powf(1.0 / r);
    for v in z.iter_mut() {
        *v /= nrm;
    }
}

/// `A(z)^{-1} (M |z|^(r-2) z)` on the interior, zero on the boundary.
fn preconditioned(grid: &Grid, z: &[f64], r: f64, delta: f64) -> Result<Vec<f64>, EigenError> {
    let d2 = delta * delta;
    let half = 0.5 * (r - 2.0);
    let mut w = Vec::with_capacity(grid.element_count());
    grid.for_each_element(|e| {
        let g = e.gradient(z);
        w.push((g[0] * g[0] + g[1] * g[1] + d2).powf(half));
    });
    let a = grid.weighted_stiffness(&w);
    let mut rhs = vec![0.0; a.dim()];
    for n in grid.interior_nodes() {
        let k = grid.unknown_index(n).expect("interior");
        rhs[k] = grid.node_weight(n) * z[n].abs().powf(r - 1.0) * z[n].signum();
    }
    let sol = a.solve(&rhs)?;
    let mut out = vec![0.0; z.len()];
    for n in grid.interior_nodes() {
        out[n] = sol[grid.unknown_index(n).expect("interior")];
    }
    Ok(out)
}

/// Rayleigh quotient of a Dirichlet field.
pub fn rayleigh_quotient(grid: &Grid, z: &Field, r: f64, delta_g: f64) -> f64 {
    energy(grid, z.values(), r, delta_g) / lr_power(grid, z.values(), r)
}

pub fn first_eigenpair(grid: &Grid, r: f64, tol: f64) -> Result<EigenPair, EigenError> {
    first_eigenpair_with(
        grid,
        r,
        &EigenOptions {
            tol,
            ..EigenOptions::default()
        },
    )
}

pub fn first_eigenpair_with(
    grid: &Grid,
    r: f64,
    opts: &EigenOptions,
) -> Result<EigenPair, EigenError> {
    if !(r > 1.0) || !r.is_finite() {
        return Err(EigenError::BadExponent(r));
    }
    if !(opts.tol > 0.0) {
        return Err(EigenError::BadTolerance(opts.tol));
    }
    let delta = opts.delta_g;
    let mut z = Field::sine_bump(grid, 1.0).into_values();
    normalize(grid, &mut z, r);
    let mut q = energy(grid, &z, r, delta);
    let mut history = vec![q];
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let step_tol = opts.tol.sqrt();
    while iterations < opts.max_iterations {
        iterations += 1;
        let y = preconditioned(grid, &z, r, delta)?;
        let mut target = y;
        normalize(grid, &mut target, r);
        let mut s = 1.0;
        let mut accepted = None;
        while s > 1e-6 {
            let mut cand: Vec<f64> = z
                .iter()
                .zip(&target)
                .map(|(a, b)| (1.0 - s) * a + s * b)
                .collect();
            normalize(grid, &mut cand, r);
            let qc = energy(grid, &cand, r, delta);
            if qc <= q {
                accepted = Some((cand, qc));
                break;
            }
            s *= 0.5;
        }
        let Some((cand, qc)) = accepted else {
            residual = 0.0;
            converged = true;
            break;
        };
        let change = cand
            .iter()
            .zip(&z)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        residual = (q - qc) / q;
        z = cand;
        q = qc;
        history.push(q);
        if residual <= opts.tol && change <= step_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("eigen solve r = {r}: no convergence in {iterations} iterations (residual {residual:e})");
    }
    let mut grad_sup = 0.0f64;
    grid.for_each_element(|e| {
        let g = e.gradient(&z);
        grad_sup = grad_sup.max((g[0] * g[0] + g[1] * g[1]).sqrt());
    });
    let pow_sup = z.iter().fold(0.0f64, |m, v| m.max(v.abs().powf(r - 1.0)));
    Ok(EigenPair {
        r,
        mu: q,
        e: Field::from_values(grid, z).expect("grid length"),
        residual,
        iterations,
        converged,
        grad_sup,
        pow_sup,
        history,
        delta_g: delta,
    })
}

/// Closed-form first eigenvalue on an interval of length `l`:
/// `(r - 1) (pi_r / l)^r` with `pi_r = 2 pi / (r sin(pi / r))`.
pub fn interval_eigenvalue(r: f64, l: f64) -> f64 {
    let pi_r = 2.0 * std::f64::consts::PI / (r * (std::f64::consts::PI / r).sin());
    (r - 1.0) * (pi_r / l).powf(r)
}
