//! Independent checks: pointwise inequalities, a periodic growth bound, weak-form
//! residuals of computed orbits, a priori bound compliance and a Hölder
//! spot check.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::BoundsReport;
use crate::grid::{Component, Element, Trajectory};
use crate::model::ProblemSpec;
use crate::nonlocal::{integrals_from_frames, periodic_position, reaction_into};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
    /// Reported value only, no threshold.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    /// Signed worst-case margin; negative means violated.
    pub margin: f64,
    pub samples: usize,
    pub value: Option<f64>,
    pub detail: Option<String>,
}

impl CheckResult {
    fn judged(name: impl Into<String>, margin: f64, samples: usize) -> Self {
        Self {
            name: name.into(),
            status: if margin >= 0.0 {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            margin,
            samples,
            value: None,
            detail: None,
        }
    }

    fn with_value(mut self, v: f64) -> Self {
        self.value = Some(v);
        self
    }

    fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status != CheckStatus::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VerificationReport {
    pub seed: Option<u64>,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Appends `other`, keeping checks sorted by name.
    pub fn merge(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
        self.checks.sort_by(|a, b| a.name.cmp(&b.name));
        if self.seed.is_none() {
            self.seed = other.seed;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Both sides of the pointwise Picone inequality
/// `|Du|^(p-2) Du . (p phi^(p-1) Dphi / u^(p-1) - (p-1) phi^p Du / u^p) <= |Dphi|^p`.
pub fn picone_sides(p: f64, u: f64, phi: f64, du: &[f64], dphi: &[f64]) -> (f64, f64) {
    let rhs = norm(dphi).powf(p);
    let gu = norm(du);
    if gu == 0.0 {
        return (0.0, rhs);
    }
    let w = gu.powf(p - 2.0);
    let a = p * (phi / u).powf(p - 1.0);
    let b = (p - 1.0) * (phi / u).powf(p);
    let lhs = w * (a * dot(du, dphi) - b * gu * gu);
    (lhs, rhs)
}

/// Margin of one tuple normalized by `|Dphi|^p + |lhs|`; the tuple violates
/// the inequality when this is below `-tol`.
pub fn picone_margin(p: f64, u: f64, phi: f64, du: &[f64], dphi: &[f64]) -> f64 {
    let (lhs, rhs) = picone_sides(p, u, phi, du, dphi);
    let scale = rhs + lhs.abs();
    if scale == 0.0 {
        0.0
    } else {
        (rhs - lhs) / scale
    }
}

pub const PICONE_TOLERANCE: f64 = 1e-12;

pub fn picone_check(p: f64, samples: usize, seed: u64) -> VerificationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut violations = 0usize;
    let mut du = [0.0; 3];
    let mut dphi = [0.0; 3];
    for _ in 0..samples {
        let d = rng.random_range(1..=3usize);
        let u = 10.0 - rng.random_range(0.0..10.0);
        let phi = 10.0 - rng.random_range(0.0..10.0);
        for i in 0..d {
            du[i] = rng.random_range(-10.0..=10.0);
            dphi[i] = rng.random_range(-10.0..=10.0);
        }
        let m = picone_margin(p, u, phi, &du[..d], &dphi[..d]);
        if m < -PICONE_TOLERANCE {
            violations += 1;
        }
        worst = worst.min(m);
    }
    let mut c = CheckResult::judged(format!("picone_p{p}"), worst + PICONE_TOLERANCE, samples)
        .with_value(violations as f64);
    if violations > 0 {
        c.status = CheckStatus::Fail;
    }
    VerificationReport {
        seed: Some(seed),
        checks: vec![c],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum GrowthOutcome {
    /// Hypothesis satisfied and `beta - gamma max f^alpha >= -1e-10`.
    Holds {
        margin: f64,
    },
    Violated {
        margin: f64,
    },
    /// The samples do not satisfy `f' <= f^s (beta - gamma f^alpha)`.
    Skipped {
        hypothesis_margin: f64,
    },
}

pub const GROWTH_HYPOTHESIS_TOLERANCE: f64 = 1e-6;

/// `f` holds one period of samples at spacing `period / f.len()`; the
/// derivative is the periodic central difference.
pub fn periodic_growth_oracle(
    f: &[f64],
    period: f64,
    s: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> GrowthOutcome {
    let n = f.len();
    if n < 3 || f.iter().any(|x| !(*x > 0.0)) {
        return GrowthOutcome::Skipped {
            hypothesis_margin: f64::NEG_INFINITY,
        };
    }
    let h = period / n as f64;
    let mut hyp = f64::INFINITY;
    for i in 0..n {
        let df = (f[(i + 1) % n] - f[(i + n - 1) % n]) / (2.0 * h);
        let bound = f[i].powf(s) * (beta - gamma * f[i].powf(alpha));
        hyp = hyp.min((bound - df) / (1.0 + bound.abs()));
    }
    if hyp < -GROWTH_HYPOTHESIS_TOLERANCE {
        return GrowthOutcome::Skipped {
            hypothesis_margin: hyp,
        };
    }
    let fmax = f.iter().fold(0.0f64, |m, x| m.max(*x));
    let margin = beta - gamma * fmax.powf(alpha);
    if margin >= -1e-10 {
        GrowthOutcome::Holds { margin }
    } else {
        GrowthOutcome::Violated { margin }
    }
}

/// Separable test function `X(x, y) P(t)` with sine modes in space and a
/// trigonometric polynomial in time.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    space: Vec<(f64, usize, usize)>,
    time: Vec<(f64, f64, usize)>,
    lengths: (f64, f64),
    dim: usize,
    period: f64,
}

pub const SPACE_MODES: usize = 3;
pub const TIME_MODES: usize = 2;

impl TestFunction {
    pub fn random(rng: &mut impl Rng, lengths: (f64, f64), dim: usize, period: f64) -> Self {
        let mut space = Vec::new();
        for j in 1..=SPACE_MODES {
            let ks: Vec<usize> = if dim == 1 {
                vec![0]
            } else {
                (1..=SPACE_MODES).collect()
            };
            for k in ks {
                space.push((rng.random_range(-1.0..=1.0), j, k));
            }
        }
        let mut time = vec![(rng.random_range(-1.0..=1.0), 0.0, 0)];
        for k in 1..=TIME_MODES {
            time.push((
                rng.random_range(-1.0..=1.0),
                rng.random_range(-1.0..=1.0),
                k,
            ));
        }
        Self {
            space,
            time,
            lengths,
            dim,
            period,
        }
    }

    /// `(X, grad X)` at a point.
    fn space(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        let (lx, ly) = self.lengths;
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for &(c, j, k) in &self.space {
            let wx = j as f64 * PI / lx;
            let (sx, cx) = (wx * x).sin_cos();
            if self.dim == 1 {
                v += c * sx;
                g[0] += c * wx * cx;
            } else {
                let wy = k as f64 * PI / ly;
                let (sy, cy) = (wy * y).sin_cos();
                v += c * sx * sy;
                g[0] += c * wx * cx * sy;
                g[1] += c * wy * sx * cy;
            }
        }
        (v, g)
    }

    /// `(P, P')` at time `t`.
    fn time(&self, t: f64) -> (f64, f64) {
        let mut v = 0.0;
        let mut d = 0.0;
        for &(a, b, k) in &self.time {
            let w = 2.0 * PI * k as f64 / self.period;
            let (s, c) = (w * t).sin_cos();
            v += a * c + b * s;
            d += w * (b * c - a * s);
        }
        (v, d)
    }
}

/// Mean of `s^l` over the segment between `a` and `b`.
fn segment_mean_power(a: f64, b: f64, l: f64) -> f64 {
    let (a, b) = (a.max(0.0), b.max(0.0));
    let d = b - a;
    if d.abs() <= 1e-8 * a.max(b) || d == 0.0 {
        return (0.5 * (a + b)).powf(l);
    }
    (b.powf(l + 1.0) - a.powf(l + 1.0)) / ((l + 1.0) * d)
}

/// `(eps + m^(p-1) <u^((m-1)(p-1))>) |g|^(p-2)` with the degenerate
/// coefficient integrated exactly along each axis difference of the
/// piecewise linear reconstruction.
fn flux_weight(e: &Element, f: &[f64], p: f64, m: f64, eps: f64, g: [f64; 2]) -> f64 {
    let l = (m - 1.0) * (p - 1.0);
    let ds = e.diffs();
    let mean = ds
        .iter()
        .map(|d| segment_mean_power(f[d.from], f[d.to], l))
        .sum::<f64>()
        / ds.len() as f64;
    let g2 = g[0] * g[0] + g[1] * g[1] + WEAK_DELTA * WEAK_DELTA;
    (eps + m.powf(p - 1.0) * mean) * g2.powf(0.5 * (p - 2.0))
}

const WEAK_DELTA: f64 = 1e-12;

/// Declared first-order tolerance `C (dt + h)` for the normalized residual.
pub const WEAK_RESIDUAL_CONSTANT: f64 = 9.0;

pub fn weak_residual_tolerance(dt: f64, h: f64) -> f64 {
    WEAK_RESIDUAL_CONSTANT * (dt + h)
}

/// Largest normalized weak-form residual over random test functions and
/// both equations, plus `||grad u^m||_{L^p(Q_T)}` and
/// `||grad v^n||_{L^q(Q_T)}` as informational checks.
pub fn weak_residual(
    tr: &Trajectory,
    spec: &ProblemSpec,
    test_functions: usize,
    seed: u64,
) -> VerificationReport {
    let grid = *tr.grid();
    let s = tr.steps();
    let dt = tr.dt();
    let nn = grid.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tests: Vec<TestFunction> = (0..test_functions)
        .map(|_| TestFunction::random(&mut rng, grid.lengths(), grid.dim(), tr.duration()))
        .collect();
    let node_space: Vec<Vec<(f64, [f64; 2])>> = tests
        .iter()
        .map(|tf| {
            (0..nn)
                .map(|n| {
                    let [x, y] = grid.coords(n);
                    tf.space(x, y)
                })
                .collect()
        })
        .collect();
    let mut centroids = Vec::with_capacity(grid.element_count());
    grid.for_each_element(|e| centroids.push(e.centroid(&grid)));
    let elem_space: Vec<Vec<(f64, [f64; 2])>> = tests
        .iter()
        .map(|tf| centroids.iter().map(|c| tf.space(c[0], c[1])).collect())
        .collect();
    let nt = tests.len();
    let mut res = vec![[0.0f64; 2]; nt];
    let mut mass = vec![0.0f64; nt];
    let mut grad_pow = [0.0f64; 2];
    let mut ru = vec![0.0; nn];
    let mut rv = vec![0.0; nn];
    let uf = tr.frames(Component::U);
    let vf = tr.frames(Component::V);
    let integrals_ok = s == spec.steps && grid == spec.grid;
    for j in 1..=s {
        let t = tr.time(j);
        let jj = j % s;
        let ints = if integrals_ok {
            integrals_from_frames(spec, uf, vf, jj, |j, tau| periodic_position(j, tau, dt, s))
                .unwrap_or([0.0; 4])
        } else {
            [0.0; 4]
        };
        let u = uf[j].values();
        let v = vf[j].values();
        reaction_into(spec, jj, ints, u, v, &mut ru, &mut rv);
        let fluxes = [(u, spec.p, spec.m), (v, spec.q, spec.n)];
        let mut elem_terms: Vec<[([f64; 2], f64); 2]> = Vec::with_capacity(centroids.len());
        grid.for_each_element(|e| {
            let mut pair = [([0.0; 2], 0.0); 2];
            for (c, (f, p, m)) in fluxes.iter().enumerate() {
                let g = e.gradient(f);
                let w = flux_weight(e, f, *p, *m, spec.epsilon, g);
                pair[c] = ([w * g[0], w * g[1]], e.volume);
                let mean =
                    e.nodes().iter().map(|&n| f[n].max(0.0)).sum::<f64>() / e.nodes().len() as f64;
                let gm = m * mean.powf(m - 1.0) * (g[0] * g[0] + g[1] * g[1]).sqrt();
                grad_pow[c] += dt * e.volume * gm.powf(*p);
            }
            elem_terms.push(pair);
        });
        for (i, tf) in tests.iter().enumerate() {
            let (pt, dpt) = tf.time(t);
            let mut acc = [0.0f64; 2];
            let mut abs = 0.0;
            for n in 0..nn {
                let w = grid.node_weight(n);
                let (x, _) = node_space[i][n];
                acc[0] += w * (-u[n] * x * dpt - ru[n] * x * pt);
                acc[1] += w * (-v[n] * x * dpt - rv[n] * x * pt);
                abs += w * (x * pt).abs();
            }
            for (e, terms) in elem_terms.iter().enumerate() {
                let (_, gx) = elem_space[i][e];
                for c in 0..2 {
                    let (flux, vol) = terms[c];
                    acc[c] += vol * pt * (flux[0] * gx[0] + flux[1] * gx[1]);
                }
            }
            res[i][0] += dt * acc[0];
            res[i][1] += dt * acc[1];
            mass[i] += dt * abs;
        }
    }
    let mut worst = 0.0f64;
    for (r, m) in res.iter().zip(&mass) {
        if *m > 0.0 {
            worst = worst.max(r[0].abs() / m).max(r[1].abs() / m);
        }
    }
    let tol = weak_residual_tolerance(dt, grid.max_spacing());
    let main = CheckResult::judged("weak_residual", tol - worst, 2 * nt)
        .with_value(worst)
        .with_detail(format!(
            "tolerance {tol:e} = {WEAK_RESIDUAL_CONSTANT} (dt + h)"
        ));
    let info = |name: &str, v: f64| CheckResult {
        name: name.to_string(),
        status: CheckStatus::Info,
        margin: 0.0,
        samples: s,
        value: Some(v),
        detail: None,
    };
    VerificationReport {
        seed: Some(seed),
        checks: vec![
            main,
            info("grad_um_lp", grad_pow[0].powf(1.0 / spec.p)),
            info("grad_vn_lq", grad_pow[1].powf(1.0 / spec.q)),
        ],
    }
}

/// Compares the orbit with the selected theorem's bounds and checks
/// non-negativity and finiteness.
pub fn apriori_compliance(tr: &Trajectory, report: &BoundsReport) -> VerificationReport {
    let mut checks = Vec::new();
    let samples = (tr.steps() + 1) * tr.grid().node_count();
    match report.selected_bounds() {
        Some((c1, c2, e)) => {
            for (name, comp, c) in [("bound_u", Component::U, c1), ("bound_v", Component::V, c2)] {
                let val = tr.power_integral(comp, e);
                checks.push(
                    CheckResult::judged(name, c - val, samples)
                        .with_value(val)
                        .with_detail(format!("norm exponent {e}, bound {c:e}")),
                );
            }
        }
        None => {
            for name in ["bound_u", "bound_v"] {
                checks.push(CheckResult {
                    name: name.to_string(),
                    status: CheckStatus::Skipped,
                    margin: 0.0,
                    samples: 0,
                    value: None,
                    detail: Some("no applicable theorem".to_string()),
                });
            }
        }
    }
    let min = tr.min(Component::U).min(tr.min(Component::V));
    checks.push(CheckResult::judged("nonnegative", min, samples).with_value(min));
    let sup = tr.sup(Component::U).max(tr.sup(Component::V));
    let mut fin = CheckResult::judged(
        "sup_finite",
        if sup.is_finite() { 0.0 } else { -1.0 },
        samples,
    )
    .with_value(sup);
    if !sup.is_finite() {
        fin.margin = f64::NEG_INFINITY;
    }
    checks.push(fin);
    VerificationReport { seed: None, checks }
}

/// Smallest `G` with `|f(x1,t1) - f(x2,t2)| <= G (|x1-x2|^beta + |t1-t2|^(beta/p))`
/// over random node/frame pairs; half the pairs share a time.
pub fn holder_spotcheck(
    tr: &Trajectory,
    pairs: usize,
    seed: u64,
    beta: f64,
    p: f64,
) -> VerificationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = tr.grid();
    let nn = grid.node_count();
    let nf = tr.steps() + 1;
    let mut gamma = [0.0f64; 2];
    for _ in 0..pairs {
        let (n1, n2) = (rng.random_range(0..nn), rng.random_range(0..nn));
        let j1 = rng.random_range(0..nf);
        let j2 = if rng.random_bool(0.5) {
            j1
        } else {
            rng.random_range(0..nf)
        };
        let [x1, y1] = grid.coords(n1);
        let [x2, y2] = grid.coords(n2);
        let dx = ((x1 - x2).powi(2) + (y1 - y2).powi(2)).sqrt();
        let dtime = (tr.time(j1) - tr.time(j2)).abs();
        let den = dx.powf(beta) + dtime.powf(beta / p);
        if den == 0.0 {
            continue;
        }
        for (c, comp) in [Component::U, Component::V].into_iter().enumerate() {
            let f = tr.frames(comp);
            let diff = (f[j1].values()[n1] - f[j2].values()[n2]).abs();
            gamma[c] = gamma[c].max(diff / den);
        }
    }
    let info = |name: &str, v: f64| CheckResult {
        name: name.to_string(),
        status: CheckStatus::Info,
        margin: 0.0,
        samples: pairs,
        value: Some(v),
        detail: Some(format!("beta {beta}")),
    };
    VerificationReport {
        seed: Some(seed),
        checks: vec![info("holder_u", gamma[0]), info("holder_v", gamma[1])],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Field, Grid};

    #[test]
    fn segment_mean_power_matches_quadrature() {
        let (a, b, l) = (0.3, 1.7, 0.5);
        let n = 20_000;
        let mid: f64 = (0..n)
            .map(|i| (a + (b - a) * (i as f64 + 0.5) / n as f64).powf(l))
            .sum::<f64>()
            / n as f64;
        assert!((segment_mean_power(a, b, l) - mid).abs() < 1e-9);
        assert!((segment_mean_power(0.0, 1.0, 0.5) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(segment_mean_power(1.0, 1.0, 0.5), 1.0);
    }

    #[test]
    fn picone_equality_and_sign() {
        for p in [1.2, 1.5, 1.9] {
            let du = [1.3, -0.4];
            let (l, r) = picone_sides(p, 2.5, 2.5, &du, &du);
            assert!((l - r).abs() <= 1e-12 * r);
            let (l, r) = picone_sides(p, 2.0, 3.0, &du, &[0.0, 0.0]);
            assert_eq!(r, 0.0);
            assert!(l <= 0.0);
        }
    }

    #[test]
    fn picone_random_passes() {
        for p in [1.2, 1.5, 1.9] {
            let r = picone_check(p, 5000, 7);
            assert!(r.passed(), "{r:?}");
            assert_eq!(r.checks[0].value, Some(0.0));
        }
    }

    #[test]
    fn growth_oracle_examples() {
        let n = 2000;
        let f: Vec<f64> = (0..n)
            .map(|i| 2.0 + (2.0 * PI * i as f64 / n as f64).sin())
            .collect();
        match periodic_growth_oracle(&f, 2.0 * PI, 1.0, 1.0, 4.0, 1.0) {
            GrowthOutcome::Holds { margin } => assert!((margin - 1.0).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            periodic_growth_oracle(&f, 2.0 * PI, 1.0, 1.0, 3.0, 1.0),
            GrowthOutcome::Skipped { .. }
        ));
        let c = vec![1.5; 16];
        assert!(matches!(
            periodic_growth_oracle(&c, 1.0, 2.0, 2.0, 2.25, 1.0),
            GrowthOutcome::Holds { margin } if margin.abs() < 1e-12
        ));
        assert!(matches!(
            periodic_growth_oracle(&c, 1.0, 2.0, 2.0, 2.0, 1.0),
            GrowthOutcome::Skipped { .. }
        ));
    }

    fn linear_trajectory() -> Trajectory {
        let g = Grid::interval(1.0, 10).unwrap();
        let f = Field::from_fn(&g, |x, _| 3.0 * x);
        let mut tr = Trajectory::constant(g, 0.25, 4, &f, &f).unwrap();
        tr.mark_periodic();
        tr
    }

    #[test]
    fn holder_linear_and_constant() {
        let tr = linear_trajectory();
        let r = holder_spotcheck(&tr, 400, 3, 1.0, 1.5);
        assert!((r.check("holder_u").unwrap().value.unwrap() - 3.0).abs() < 1e-12);
        let g = Grid::interval(1.0, 10).unwrap();
        let c = Field::from_fn(&g, |_, _| 0.7);
        let tr = Trajectory::constant(g, 0.25, 4, &c, &c).unwrap();
        assert_eq!(
            holder_spotcheck(&tr, 100, 3, 0.5, 1.5)
                .check("holder_v")
                .unwrap()
                .value,
            Some(0.0)
        );
    }

    #[test]
    fn report_merge_sorted() {
        let mut a = picone_check(1.5, 10, 1);
        a.merge(picone_check(1.2, 10, 1));
        assert_eq!(a.checks[0].name, "picone_p1.2");
        assert_eq!(a.checks.len(), 2);
    }
}
