//! Uniform grids on intervals and rectangles: node layout, quadrature,
//! norms and the conservative discretization of the degenerate flux.
//!
//! On a rectangle every cell is split into two right triangles along its
//! anti-diagonal. Gradients are constant per triangle and built from one
//! x-edge and one y-edge difference, so the weighted stiffness matrix keeps
//! the five-point pattern and reduces to the usual five-point Laplacian when
//! the weight is constant. On an interval the "elements" are the cells.

mod csv;
mod trajectory;

pub use self::csv::{read_csv, write_csv, CsvError};
pub use trajectory::{norm_lr_spacetime, sup_norm, Component, Trajectory, TrajectoryError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::BandedSpd;

/// Interior values below this are treated as genuinely negative.
pub const NEGATIVE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("axis {axis} needs at least 4 cells (3 interior nodes), got {cells}")]
    TooFewCells { axis: char, cells: usize },
    #[error("domain side length must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error("field has {found} values but the grid has {expected} nodes")]
    LengthMismatch { expected: usize, found: usize },
    #[error("negative value {value:e} at interior node {node}")]
    NegativeValue { node: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    Interval { length: f64 },
    Rectangle { lx: f64, ly: f64 },
}

impl Domain {
    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Interval { length } => length,
            Domain::Rectangle { lx, ly } => lx * ly,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
        }
    }
}

/// Uniform node grid with boundary nodes included. Node `(i, j)` has index
/// `j * (nx + 1) + i`; on an interval `ny == 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

/// One x- or y-difference `(f[to] - f[from]) * inv_h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisDiff {
    pub from: usize,
    pub to: usize,
    pub inv_h: f64,
}

/// A cell (1D) or triangle (2D) with a constant gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub volume: f64,
    nodes: [usize; 3],
    arity: usize,
    diffs: [AxisDiff; 2],
    dim: usize,
}

impl Element {
    pub fn nodes(&self) -> &[usize] {
        &self.nodes[..self.arity]
    }

    pub fn diffs(&self) -> &[AxisDiff] {
        &self.diffs[..self.dim]
    }

    pub fn gradient(&self, f: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (k, d) in self.diffs().iter().enumerate() {
            g[k] = (f[d.to] - f[d.from]) * d.inv_h;
        }
        g
    }

    pub fn centroid(&self, grid: &Grid) -> [f64; 2] {
        let mut c = [0.0; 2];
        for &n in self.nodes() {
            let x = grid.coords(n);
            c[0] += x[0];
            c[1] += x[1];
        }
        let k = self.arity as f64;
        [c[0] / k, c[1] / k]
    }
}

impl Grid {
    pub fn interval(length: f64, cells: usize) -> Result<Self, GridError> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(GridError::NonPositiveLength(length));
        }
        if cells < 4 {
            return Err(GridError::TooFewCells { axis: 'x', cells });
        }
        Ok(Self {
            nx: cells,
            ny: 0,
            hx: length / cells as f64,
            hy: 1.0,
        })
    }

    pub fn rectangle(lx: f64, ly: f64, cells_x: usize, cells_y: usize) -> Result<Self, GridError> {
        for l in [lx, ly] {
            if !(l > 0.0) || !l.is_finite() {
                return Err(GridError::NonPositiveLength(l));
            }
        }
        if cells_x < 4 {
            return Err(GridError::TooFewCells {
                axis: 'x',
                cells: cells_x,
            });
        }
        if cells_y < 4 {
            return Err(GridError::TooFewCells {
                axis: 'y',
                cells: cells_y,
            });
        }
        Ok(Self {
            nx: cells_x,
            ny: cells_y,
            hx: lx / cells_x as f64,
            hy: ly / cells_y as f64,
        })
    }

    /// `cells_y` is ignored on intervals.
    pub fn for_domain(domain: &Domain, cells_x: usize, cells_y: usize) -> Result<Self, GridError> {
        match *domain {
            Domain::Interval { length } => Self::interval(length, cells_x),
            Domain::Rectangle { lx, ly } => Self::rectangle(lx, ly, cells_x, cells_y),
        }
    }

    pub fn dim(&self) -> usize {
        if self.ny == 0 {
            1
        } else {
            2
        }
    }

    pub fn cells(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn spacing(&self) -> (f64, f64) {
        (self.hx, self.hy)
    }

    pub fn max_spacing(&self) -> f64 {
        if self.dim() == 1 {
            self.hx
        } else {
            self.hx.max(self.hy)
        }
    }

    pub fn min_spacing(&self) -> f64 {
        if self.dim() == 1 {
            self.hx
        } else {
            self.hx.min(self.hy)
        }
    }

    pub fn lengths(&self) -> (f64, f64) {
        (self.hx * self.nx as f64, self.hy * self.ny as f64)
    }

    pub fn domain(&self) -> Domain {
        let (lx, ly) = self.lengths();
        if self.dim() == 1 {
            Domain::Interval { length: lx }
        } else {
            Domain::Rectangle { lx, ly }
        }
    }

    pub fn measure(&self) -> f64 {
        self.domain().measure()
    }

    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    fn row_len(&self) -> usize {
        self.nx + 1
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.row_len() + i
    }

    pub fn coords(&self, node: usize) -> [f64; 2] {
        let i = node % self.row_len();
        let j = node / self.row_len();
        [i as f64 * self.hx, j as f64 * self.hy]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let i = node % self.row_len();
        let j = node / self.row_len();
        let on_x = i == 0 || i == self.nx;
        if self.dim() == 1 {
            on_x
        } else {
            on_x || j == 0 || j == self.ny
        }
    }

    /// Composite trapezoid weight of a node.
    pub fn node_weight(&self, node: usize) -> f64 {
        let i = node % self.row_len();
        let j = node / self.row_len();
        let wx = if i == 0 || i == self.nx {
            0.5 * self.hx
        } else {
            self.hx
        };
        if self.dim() == 1 {
            wx
        } else {
            let wy = if j == 0 || j == self.ny {
                0.5 * self.hy
            } else {
                self.hy
            };
            wx * wy
        }
    }

    /// Number of unknowns in a Dirichlet solve.
    pub fn interior_count(&self) -> usize {
        if self.dim() == 1 {
            self.nx - 1
        } else {
            (self.nx - 1) * (self.ny - 1)
        }
    }

    /// Position of an interior node among the unknowns, `None` on the boundary.
    pub fn unknown_index(&self, node: usize) -> Option<usize> {
        if self.is_boundary(node) {
            return None;
        }
        let i = node % self.row_len();
        let j = node / self.row_len();
        Some(if self.dim() == 1 {
            i - 1
        } else {
            (j - 1) * (self.nx - 1) + (i - 1)
        })
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(move |&n| !self.is_boundary(n))
    }

    fn unknown_bandwidth(&self) -> usize {
        if self.dim() == 1 {
            1
        } else {
            self.nx - 1
        }
    }

    /// Visits every element. Intervals: one per cell. Rectangles: the lower
    /// and upper triangle of every cell.
    pub fn for_each_element(&self, mut f: impl FnMut(&Element)) {
        let ix = 1.0 / self.hx;
        if self.dim() == 1 {
            for i in 0..self.nx {
                let d = AxisDiff {
                    from: i,
                    to: i + 1,
                    inv_h: ix,
                };
                f(&Element {
                    volume: self.hx,
                    nodes: [i, i + 1, 0],
                    arity: 2,
                    diffs: [d, d],
                    dim: 1,
                });
            }
            return;
        }
        let iy = 1.0 / self.hy;
        let vol = 0.5 * self.hx * self.hy;
        for j in 0..self.ny {
            for i in 0..self.nx {
                let n00 = self.index(i, j);
                let n10 = self.index(i + 1, j);
                let n01 = self.index(i, j + 1);
                let n11 = self.index(i + 1, j + 1);
                f(&Element {
                    volume: vol,
                    nodes: [n00, n10, n01],
                    arity: 3,
                    diffs: [
                        AxisDiff {
                            from: n00,
                            to: n10,
                            inv_h: ix,
                        },
                        AxisDiff {
                            from: n00,
                            to: n01,
                            inv_h: iy,
                        },
                    ],
                    dim: 2,
                });
                f(&Element {
                    volume: vol,
                    nodes: [n11, n01, n10],
                    arity: 3,
                    diffs: [
                        AxisDiff {
                            from: n01,
                            to: n11,
                            inv_h: ix,
                        },
                        AxisDiff {
                            from: n10,
                            to: n11,
                            inv_h: iy,
                        },
                    ],
                    dim: 2,
                });
            }
        }
    }

    pub fn element_count(&self) -> usize {
        if self.dim() == 1 {
            self.nx
        } else {
            2 * self.nx * self.ny
        }
    }

    /// Trapezoid quadrature of nodal values over the domain.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter()
            .enumerate()
            .map(|(n, v)| self.node_weight(n) * v)
            .sum()
    }

    /// Stiffness matrix `sum_e vol_e w_e grad^T grad` restricted to the
    /// interior unknowns.
    pub fn weighted_stiffness(&self, weights: &[f64]) -> BandedSpd {
        let mut a = BandedSpd::zeros(self.interior_count(), self.unknown_bandwidth());
        let mut k = 0;
        self.for_each_element(|e| {
            let w = weights[k] * e.volume;
            k += 1;
            for d in e.diffs() {
                let c = w * d.inv_h * d.inv_h;
                let ua = self.unknown_index(d.from);
                let ub = self.unknown_index(d.to);
                if let Some(a_) = ua {
                    a.add_diagonal(a_, c);
                }
                if let Some(b_) = ub {
                    a.add_diagonal(b_, c);
                }
                if let (Some(a_), Some(b_)) = (ua, ub) {
                    a.add(a_, b_, -c);
                }
            }
        });
        a
    }

    /// `(A u)_i` for all nodes, where `A` is the weighted stiffness operator
    /// (boundary entries are the raw flux balance and are usually ignored).
    pub fn apply_weighted_stiffness(&self, weights: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.node_count()];
        let mut k = 0;
        self.for_each_element(|e| {
            let w = weights[k] * e.volume;
            k += 1;
            for d in e.diffs() {
                let flux = w * d.inv_h * (u[d.to] - u[d.from]) * d.inv_h;
                out[d.to] += flux;
                out[d.from] -= flux;
            }
        });
        out
    }

    /// `div(w grad u)` at nodes: `-(A u)_i / weight_i` in the interior, zero on
    /// the boundary.
    pub fn weighted_divergence(&self, weights: &[f64], u: &[f64]) -> Field {
        let au = self.apply_weighted_stiffness(weights, u);
        let values = au
            .iter()
            .enumerate()
            .map(|(n, v)| {
                if self.is_boundary(n) {
                    0.0
                } else {
                    -v / self.node_weight(n)
                }
            })
            .collect();
        Field { values }
    }

    pub fn check_len(&self, f: &[f64]) -> Result<(), GridError> {
        if f.len() != self.node_count() {
            return Err(GridError::LengthMismatch {
                expected: self.node_count(),
                found: f.len(),
            });
        }
        Ok(())
    }
}

/// Nodal values on a grid. Dirichlet fields carry exact zeros on the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            values: vec![0.0; grid.node_count()],
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self, GridError> {
        grid.check_len(&values)?;
        Ok(Self { values })
    }

    /// Samples `f(x, y)` at interior nodes; boundary nodes are set to zero.
    pub fn dirichlet_from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|n| {
                if grid.is_boundary(n) {
                    0.0
                } else {
                    let [x, y] = grid.coords(n);
                    f(x, y)
                }
            })
            .collect();
        Self { values }
    }

    /// Samples `f` at every node, boundary included.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|n| {
                let [x, y] = grid.coords(n);
                f(x, y)
            })
            .collect();
        Self { values }
    }

    /// Product of half-wave sines scaled to `amplitude`.
    pub fn sine_bump(grid: &Grid, amplitude: f64) -> Self {
        let (lx, ly) = grid.lengths();
        let two_d = grid.dim() == 2;
        Self::dirichlet_from_fn(grid, |x, y| {
            let sx = (std::f64::consts::PI * x / lx).sin();
            let sy = if two_d {
                (std::f64::consts::PI * y / ly).sin()
            } else {
                1.0
            };
            amplitude * sx * sy
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// `(1 - w) * self + w * other`
    pub fn blend(&self, other: &Field, w: f64) -> Self {
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (1.0 - w) * a + w * b)
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Sets negative entries to zero and returns the removed mass
    /// `sum |negative part|`.
    pub fn clamp_nonnegative(&mut self) -> f64 {
        let mut removed = 0.0;
        for v in &mut self.values {
            if *v < 0.0 {
                removed -= *v;
                *v = 0.0;
            }
        }
        removed
    }

    /// Errors when an interior value is below `-NEGATIVE_TOLERANCE`.
    pub fn check_nonnegative(&self, grid: &Grid) -> Result<(), GridError> {
        for (n, &v) in self.values.iter().enumerate() {
            if v < -NEGATIVE_TOLERANCE && !grid.is_boundary(n) {
                return Err(GridError::NegativeValue { node: n, value: v });
            }
        }
        Ok(())
    }
}

/// Per-axis edge differences located at edge midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeGradient {
    /// `(f[i+1, j] - f[i, j]) / hx`, row-major over `j = 0..=ny`, `i = 0..nx`.
    pub x: Vec<f64>,
    /// `(f[i, j+1] - f[i, j]) / hy`, row-major over `j = 0..ny`, `i = 0..=nx`.
    /// Empty on intervals.
    pub y: Vec<f64>,
}

impl EdgeGradient {
    pub fn max_abs(&self) -> f64 {
        self.x
            .iter()
            .chain(&self.y)
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn discrete_gradient(grid: &Grid, f: &Field) -> EdgeGradient {
    let v = f.values();
    let (nx, ny) = grid.cells();
    let (hx, hy) = grid.spacing();
    let mut x = Vec::with_capacity(nx * (ny + 1));
    for j in 0..=ny {
        for i in 0..nx {
            x.push((v[grid.index(i + 1, j)] - v[grid.index(i, j)]) / hx);
        }
    }
    let mut y = Vec::new();
    if grid.dim() == 2 {
        y.reserve(ny * (nx + 1));
        for j in 0..ny {
            for i in 0..=nx {
                y.push((v[grid.index(i, j + 1)] - v[grid.index(i, j)]) / hy);
            }
        }
    }
    EdgeGradient { x, y }
}

/// `(integral |f|^r)^(1/r)` by composite trapezoid quadrature.
pub fn norm_lr_space(grid: &Grid, f: &Field, r: f64) -> f64 {
    power_integral(grid, f.values(), r).powf(1.0 / r)
}

/// `integral |f|^r` by composite trapezoid quadrature.
pub fn power_integral(grid: &Grid, f: &[f64], r: f64) -> f64 {
    f.iter()
        .enumerate()
        .map(|(n, v)| {
            let a = v.abs();
            let pw = if r == 2.0 {
                a * a
            } else if r == 1.0 {
                a
            } else {
                a.powf(r)
            };
            grid.node_weight(n) * pw
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeAveraging {
    #[default]
    Arithmetic,
    Harmonic,
    /// `((u_j^m - u_i^m) / (m (u_j - u_i)))^(p-1)` per axis difference,
    /// so the degenerate flux is the difference quotient of `u^m`.
    Kirchhoff,
}

/// Mean of `s^(m-1)` over the segment between `a` and `b`.
fn divided_power(a: f64, b: f64, m: f64) -> f64 {
    let (a, b) = (a.max(0.0), b.max(0.0));
    let d = b - a;
    if d.abs() <= 1e-8 * a.max(b) || d == 0.0 {
        return (0.5 * (a + b)).powf(m - 1.0);
    }
    (b.powf(m) - a.powf(m)) / (m * d)
}

/// Coefficient law of the regularized operator
/// `div((eps + sigma^(p-1) m^(p-1) u^((m-1)(p-1))) (|grad u|^2 + delta^2)^((p-2)/2) grad u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionLaw {
    pub p: f64,
    pub m: f64,
    pub eps: f64,
    /// Homotopy weight on the degenerate part; 1 for the physical problem.
    pub sigma: f64,
    pub delta_g: f64,
    pub averaging: EdgeAveraging,
}

impl DiffusionLaw {
    pub fn new(p: f64, m: f64, eps: f64, delta_g: f64) -> Self {
        Self {
            p,
            m,
            eps,
            sigma: 1.0,
            delta_g,
            averaging: EdgeAveraging::Arithmetic,
        }
    }

    /// Degeneracy exponent `(m - 1)(p - 1)`.
    pub fn degeneracy(&self) -> f64 {
        (self.m - 1.0) * (self.p - 1.0)
    }

    /// Element weights `D_e = c_e (|g_e|^2 + delta^2)^((p-2)/2)` where `c_e`
    /// averages the nodal degenerate coefficient over the element.
    pub fn element_weights(&self, grid: &Grid, u: &[f64]) -> Vec<f64> {
        let l = self.degeneracy();
        let pref = (self.sigma * self.m).powf(self.p - 1.0);
        let nodal: Vec<f64> = u.iter().map(|&x| x.max(0.0).powf(l)).collect();
        let half = 0.5 * (self.p - 2.0);
        let d2 = self.delta_g * self.delta_g;
        let mut w = Vec::with_capacity(grid.element_count());
        grid.for_each_element(|e| {
            let nodes = e.nodes();
            let avg = match self.averaging {
                EdgeAveraging::Arithmetic => {
                    nodes.iter().map(|&n| nodal[n]).sum::<f64>() / nodes.len() as f64
                }
                EdgeAveraging::Harmonic => {
                    if nodes.iter().any(|&n| nodal[n] <= 0.0) {
                        0.0
                    } else {
                        nodes.len() as f64 / nodes.iter().map(|&n| 1.0 / nodal[n]).sum::<f64>()
                    }
                }
                EdgeAveraging::Kirchhoff => {
                    let ds = e.diffs();
                    ds.iter()
                        .map(|d| divided_power(u[d.from], u[d.to], self.m).powf(self.p - 1.0))
                        .sum::<f64>()
                        / ds.len() as f64
                }
            };
            let g = e.gradient(u);
            let g2 = g[0] * g[0] + g[1] * g[1];
            w.push((self.eps + pref * avg) * (g2 + d2).powf(half));
        });
        w
    }

    pub fn divergence(&self, grid: &Grid, u: &[f64]) -> Field {
        let w = self.element_weights(grid, u);
        grid.weighted_divergence(&w, u)
    }
}

/// Conservative discretization of the regularized degenerate flux
/// divergence with zero Dirichlet boundary values.
pub fn degenerate_flux_divergence(
    grid: &Grid,
    u: &Field,
    p: f64,
    m: f64,
    eps: f64,
    delta_g: f64,
) -> Result<Field, GridError> {
    grid.check_len(u.values())?;
    u.check_nonnegative(grid)?;
    Ok(DiffusionLaw::new(p, m, eps, delta_g).divergence(grid, u.values()))
}

/// Discrete pairing `<-div F(u), u>` with the trapezoid weights.
pub fn energy_pairing(grid: &Grid, div: &Field, u: &Field) -> f64 {
    div.values()
        .iter()
        .zip(u.values())
        .enumerate()
        .filter(|(n, _)| !grid.is_boundary(*n))
        .map(|(n, (d, v))| -grid.node_weight(n) * d * v)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kirchhoff_flux_is_difference_of_u_power() {
        let g = Grid::interval(1.0, 8).unwrap();
        let (p, m) = (1.5, 3.0);
        let u: Vec<f64> = (0..=8)
            .map(|i| {
                if i == 0 || i == 8 {
                    0.0
                } else {
                    0.2 + 0.1 * i as f64
                }
            })
            .collect();
        let mut law = DiffusionLaw::new(p, m, 0.0, 0.0);
        law.averaging = EdgeAveraging::Kirchhoff;
        let w = law.element_weights(&g, &u);
        let h = 1.0 / 8.0;
        for (k, wk) in w.iter().enumerate() {
            let du = (u[k + 1] - u[k]) / h;
            let dw = (u[k + 1].powf(m) - u[k].powf(m)) / h;
            let expected = dw.abs().powf(p - 2.0) * dw;
            assert!(
                (wk * du - expected).abs() <= 1e-12 * expected.abs().max(1.0),
                "cell {k}"
            );
        }
    }

    #[test]
    fn divided_power_limits() {
        assert_eq!(divided_power(2.0, 2.0, 3.0), 4.0);
        assert!((divided_power(0.0, 4.0, 2.0) - 2.0).abs() < 1e-15);
        assert_eq!(divided_power(-1.0, 0.0, 2.0), 0.0);
    }

    #[test]
    fn grid_rejects_coarse_axes() {
        assert!(matches!(
            Grid::interval(1.0, 3),
            Err(GridError::TooFewCells {
                axis: 'x',
                cells: 3
            })
        ));
        assert!(Grid::rectangle(1.0, 1.0, 8, 2).is_err());
        assert!(Grid::interval(-1.0, 8).is_err());
    }

    #[test]
    fn boundary_mask_and_weights() {
        let g = Grid::rectangle(2.0, 1.0, 4, 5).unwrap();
        let boundary = (0..g.node_count()).filter(|&n| g.is_boundary(n)).count();
        assert_eq!(boundary, 2 * 5 + 2 * 4);
        let total: f64 = (0..g.node_count()).map(|n| g.node_weight(n)).sum();
        assert!((total - 2.0).abs() < 1e-14);
        assert_eq!(g.interior_count(), 3 * 4);
    }

    #[test]
    fn lr_norm_examples() {
        let g = Grid::interval(1.0, 200).unwrap();
        let one = Field::from_fn(&g, |_, _| 1.0);
        assert!((norm_lr_space(&g, &one, 2.0) - 1.0).abs() < 1e-14);
        let lin = Field::from_fn(&g, |x, _| x);
        let h = 1.0 / 200.0;
        let exact = (1.0f64 / 3.0).sqrt();
        assert!((norm_lr_space(&g, &lin, 2.0) - exact).abs() < h * h);
        assert_eq!(norm_lr_space(&g, &Field::zeros(&g), 2.0), 0.0);
    }

    #[test]
    fn trapezoid_converges_at_second_order() {
        // Richardson check on three grids for integral of sin(pi x)^3 over [0,1]
        let errs: Vec<f64> = [50, 100, 200]
            .iter()
            .map(|&n| {
                let g = Grid::interval(1.0, n).unwrap();
                let f = Field::from_fn(&g, |x, _| (std::f64::consts::PI * x).sin().powi(3) + x * x);
                let exact = 4.0 / (3.0 * std::f64::consts::PI) + 1.0 / 3.0;
                (power_integral(&g, f.values(), 1.0) - exact).abs()
            })
            .collect();
        let o1 = (errs[0] / errs[1]).log2();
        let o2 = (errs[1] / errs[2]).log2();
        assert!(o1 >= 1.95 && o2 >= 1.95, "orders {o1} {o2}");
    }

    #[test]
    fn gradient_examples() {
        let g = Grid::interval(1.0, 10).unwrap();
        let z = discrete_gradient(&g, &Field::zeros(&g));
        assert!(z.x.iter().all(|&v| v == 0.0));
        let lin = Field::from_fn(&g, |x, _| x);
        let d = discrete_gradient(&g, &lin);
        assert!(d.x.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        // quadratic: edge differences equal the derivative at the midpoint
        let q = Field::from_fn(&g, |x, _| x * x);
        let d = discrete_gradient(&g, &q);
        for (i, v) in d.x.iter().enumerate() {
            let xm = (i as f64 + 0.5) * 0.1;
            assert!((v - 2.0 * xm).abs() < 1e-12);
            let xl = i as f64 * 0.1;
            assert!((v - 2.0 * xl).abs() <= 0.1 + 1e-12);
        }
    }

    #[test]
    fn rectangle_constant_weight_is_five_point_laplacian() {
        let g = Grid::rectangle(1.0, 1.0, 6, 6).unwrap();
        let f = Field::dirichlet_from_fn(&g, |x, y| x * (1.0 - x) * y * (1.0 - y));
        let w = vec![1.0; g.element_count()];
        let div = g.weighted_divergence(&w, f.values());
        let (hx, hy) = g.spacing();
        let v = f.values();
        for j in 1..6 {
            for i in 1..6 {
                let n = g.index(i, j);
                let lap = (v[g.index(i + 1, j)] - 2.0 * v[n] + v[g.index(i - 1, j)]) / (hx * hx)
                    + (v[g.index(i, j + 1)] - 2.0 * v[n] + v[g.index(i, j - 1)]) / (hy * hy);
                assert!((div.values()[n] - lap).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_field_has_zero_divergence() {
        let g = Grid::interval(1.0, 16).unwrap();
        let d = degenerate_flux_divergence(&g, &Field::zeros(&g), 1.5, 2.0, 0.1, 1e-8).unwrap();
        assert!(d.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_interior_rejected() {
        let g = Grid::interval(1.0, 8).unwrap();
        let mut f = Field::zeros(&g);
        f.values_mut()[3] = -1e-6;
        assert!(matches!(
            degenerate_flux_divergence(&g, &f, 1.5, 2.0, 0.1, 1e-8),
            Err(GridError::NegativeValue { node: 3, .. })
        ));
        f.values_mut()[3] = -1e-12;
        assert!(degenerate_flux_divergence(&g, &f, 1.5, 2.0, 0.1, 1e-8).is_ok());
    }

    #[test]
    fn compact_support_divergence_sums_to_zero() {
        for g in [
            Grid::interval(1.0, 40).unwrap(),
            Grid::rectangle(1.0, 2.0, 12, 14).unwrap(),
        ] {
            let (nx, ny) = g.cells();
            let f = Field::from_fn(&g, |x, y| {
                let [cx, cy] = [
                    x / g.lengths().0,
                    if ny > 0 { y / g.lengths().1 } else { 0.5 },
                ];
                let inside = cx > 0.2 && cx < 0.8 && cy > 0.2 && cy < 0.8;
                if inside {
                    1.0 + (7.0 * cx).sin() * 0.3 + cy
                } else {
                    0.0
                }
            });
            let _ = nx;
            let d = degenerate_flux_divergence(&g, &f, 1.4, 2.5, 0.05, 1e-8).unwrap();
            let s: f64 = (0..g.node_count())
                .map(|n| g.node_weight(n) * d.values()[n])
                .sum();
            assert!(s.abs() < 1e-12, "net flux {s}");
        }
    }
}
