use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{power_integral, Field, Grid, GridError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    U,
    V,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("trajectory needs at least two frames, got {0}")]
    TooShort(usize),
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("u has {u} frames but v has {v}")]
    FrameCountMismatch { u: usize, v: usize },
    #[error("frame {frame}: {source}")]
    Frame { frame: usize, source: GridError },
    #[error("operation needs a periodic trajectory")]
    NotPeriodic,
}

/// Frames `(u, v)` at `t_j = j * dt` for `j = 0..=S`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: Grid,
    dt: f64,
    u: Vec<Field>,
    v: Vec<Field>,
    periodic: bool,
    closure_residual: f64,
}

impl Trajectory {
    pub fn new(grid: Grid, dt: f64, u: Vec<Field>, v: Vec<Field>) -> Result<Self, TrajectoryError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(TrajectoryError::BadStep(dt));
        }
        if u.len() != v.len() {
            return Err(TrajectoryError::FrameCountMismatch {
                u: u.len(),
                v: v.len(),
            });
        }
        if u.len() < 2 {
            return Err(TrajectoryError::TooShort(u.len()));
        }
        for (frame, (a, b)) in u.iter().zip(&v).enumerate() {
            grid.check_len(a.values())
                .and_then(|_| grid.check_len(b.values()))
                .map_err(|source| TrajectoryError::Frame { frame, source })?;
        }
        Ok(Self {
            grid,
            dt,
            u,
            v,
            periodic: false,
            closure_residual: f64::NAN,
        })
    }

    /// Constant-in-time trajectory over `steps` steps.
    pub fn constant(
        grid: Grid,
        dt: f64,
        steps: usize,
        u: &Field,
        v: &Field,
    ) -> Result<Self, TrajectoryError> {
        Self::new(
            grid,
            dt,
            vec![u.clone(); steps + 1],
            vec![v.clone(); steps + 1],
        )
    }

    /// Marks the trajectory as one period of a periodic orbit and records
    /// `max |frame S - frame 0|`.
    pub fn mark_periodic(&mut self) -> f64 {
        let s = self.steps();
        let r = self.u[s]
            .max_abs_diff(&self.u[0])
            .max(self.v[s].max_abs_diff(&self.v[0]));
        self.periodic = true;
        self.closure_residual = r;
        r
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn closure_residual(&self) -> f64 {
        self.closure_residual
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of steps `S`; there are `S + 1` frames.
    pub fn steps(&self) -> usize {
        self.u.len() - 1
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.steps() as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn frames(&self, c: Component) -> &[Field] {
        match c {
            Component::U => &self.u,
            Component::V => &self.v,
        }
    }

    pub fn frame(&self, c: Component, j: usize) -> &Field {
        &self.frames(c)[j]
    }

    pub fn last(&self) -> (&Field, &Field) {
        let s = self.steps();
        (&self.u[s], &self.v[s])
    }

    pub fn into_frames(self) -> (Vec<Field>, Vec<Field>) {
        (self.u, self.v)
    }

    /// Values at time `t`, linearly interpolated between frames. Periodic
    /// trajectories wrap `t` modulo the period; others hold the first frame
    /// for `t < 0` and the last frame past the end.
    pub fn sample(&self, c: Component, t: f64) -> Vec<f64> {
        let frames = self.frames(c);
        let s = self.steps();
        let pos = if self.periodic {
            let period = self.duration();
            t.rem_euclid(period) / self.dt
        } else {
            (t / self.dt).clamp(0.0, s as f64)
        };
        self.lerp(frames, pos)
    }

    /// Values at `t_j - tau` in step units, so `tau` equal to the period
    /// aliases `tau = 0` exactly on periodic trajectories.
    pub fn delayed(&self, c: Component, j: usize, tau: f64) -> Vec<f64> {
        let frames = self.frames(c);
        let s = self.steps();
        if self.periodic {
            let period = self.duration();
            let shift = tau.rem_euclid(period) / self.dt;
            let mut pos = j as f64 - shift;
            if pos < 0.0 {
                pos += s as f64;
            }
            self.lerp(frames, pos)
        } else {
            let pos = (j as f64 - tau / self.dt).clamp(0.0, s as f64);
            self.lerp(frames, pos)
        }
    }

    fn lerp(&self, frames: &[Field], pos: f64) -> Vec<f64> {
        let s = self.steps();
        let k = (pos.floor() as usize).min(s);
        let w = pos - k as f64;
        if w <= 0.0 || k == s {
            return frames[k].values().to_vec();
        }
        let a = frames[k].values();
        let b = frames[k + 1].values();
        a.iter()
            .zip(b)
            .map(|(x, y)| (1.0 - w) * x + w * y)
            .collect()
    }

    /// `(integral over [0, S dt] of integral |f|^r)^(1/r)` with trapezoid
    /// rules in space and time.
    pub fn lr_norm(&self, c: Component, r: f64) -> f64 {
        self.power_integral(c, r).powf(1.0 / r)
    }

    /// Space-time integral of `|f|^r`.
    pub fn power_integral(&self, c: Component, r: f64) -> f64 {
        let frames = self.frames(c);
        let s = self.steps();
        frames
            .iter()
            .enumerate()
            .map(|(j, f)| {
                let w = if j == 0 || j == s {
                    0.5 * self.dt
                } else {
                    self.dt
                };
                w * power_integral(&self.grid, f.values(), r)
            })
            .sum()
    }

    pub fn sup(&self, c: Component) -> f64 {
        self.frames(c).iter().fold(0.0, |m, f| m.max(f.max_abs()))
    }

    pub fn min(&self, c: Component) -> f64 {
        self.frames(c)
            .iter()
            .fold(f64::INFINITY, |m, f| m.min(f.min()))
    }

    /// `max |self - other|` over all frames of both components.
    pub fn max_abs_diff(&self, other: &Trajectory) -> f64 {
        let mut d = 0.0f64;
        for c in [Component::U, Component::V] {
            for (a, b) in self.frames(c).iter().zip(other.frames(c)) {
                d = d.max(a.max_abs_diff(b));
            }
        }
        d
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            dt: self.dt,
            u: self.u.iter().map(|f| f.scaled(factor)).collect(),
            v: self.v.iter().map(|f| f.scaled(factor)).collect(),
            periodic: self.periodic,
            closure_residual: self.closure_residual * factor.abs(),
        }
    }
}

/// Space-time `L^r(Q_T)` norm of a periodic trajectory.
pub fn norm_lr_spacetime(tr: &Trajectory, c: Component, r: f64) -> Result<f64, TrajectoryError> {
    if !tr.is_periodic() {
        return Err(TrajectoryError::NotPeriodic);
    }
    Ok(tr.lr_norm(c, r))
}

pub fn sup_norm(tr: &Trajectory, c: Component) -> f64 {
    tr.sup(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(grid: &Grid, steps: usize, dt: f64) -> Trajectory {
        let u: Vec<Field> = (0..=steps)
            .map(|j| Field::from_fn(grid, |x, _| x * j as f64))
            .collect();
        let v: Vec<Field> = (0..=steps)
            .map(|_| Field::from_fn(grid, |_, _| 2.0))
            .collect();
        Trajectory::new(*grid, dt, u, v).unwrap()
    }

    #[test]
    fn spacetime_norms_of_simple_fields() {
        let g = Grid::interval(1.0, 100).unwrap();
        let one = Field::from_fn(&g, |_, _| 1.0);
        let mut tr = Trajectory::constant(g, 0.01, 100, &one, &Field::zeros(&g)).unwrap();
        assert_eq!(
            norm_lr_spacetime(&tr, Component::U, 2.0),
            Err(TrajectoryError::NotPeriodic)
        );
        tr.mark_periodic();
        assert!((norm_lr_spacetime(&tr, Component::U, 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(norm_lr_spacetime(&tr, Component::V, 2.0).unwrap(), 0.0);
        let lin = Field::from_fn(&g, |x, _| x);
        let mut tr = Trajectory::constant(g, 0.5, 4, &lin, &lin).unwrap();
        tr.mark_periodic();
        let exact = (2.0f64 / 3.0).sqrt();
        assert!((norm_lr_spacetime(&tr, Component::U, 2.0).unwrap() - exact).abs() < 1e-4);
    }

    #[test]
    fn sup_norm_matches_scan() {
        let g = Grid::interval(1.0, 10).unwrap();
        let tr = ramp(&g, 5, 0.1);
        assert!((sup_norm(&tr, Component::U) - 5.0).abs() < 1e-12);
        assert_eq!(sup_norm(&tr, Component::V), 2.0);
    }

    #[test]
    fn delay_wraps_and_interpolates() {
        let g = Grid::interval(1.0, 4).unwrap();
        let mut tr = ramp(&g, 10, 0.1);
        tr.mark_periodic();
        let period = tr.duration();
        for j in 0..=10 {
            assert_eq!(
                tr.delayed(Component::U, j, period),
                tr.delayed(Component::U, j, 0.0)
            );
        }
        // halfway between frames 2 and 3
        let d = tr.delayed(Component::U, 5, 0.25);
        let want = tr
            .frame(Component::U, 2)
            .blend(tr.frame(Component::U, 3), 0.5);
        for (a, b) in d.iter().zip(want.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        // before the start, a transient holds frame 0
        let mut open = tr.clone();
        open.periodic = false;
        assert_eq!(
            open.delayed(Component::U, 1, 0.5),
            open.frame(Component::U, 0).values()
        );
    }
}
