//! Explicit a priori constants and theorem-applicability verdicts.
//!
//! Every constant here is a closed-form expression in the problem data
//! (exponents, sup norms of the growth rates, kernel envelopes, the period,
//! domain measure) and the first eigenpairs of the `p`- and `q`-Laplacians.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigen::EigenPair;
use crate::model::{validate_hypotheses, KernelEnvelope, ProblemSpec, REGIME_TOLERANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("coercivity fails: klow1 * klow4 = {product} <= kbar2 * kbar3 = {cross}")]
    InfeasibleCoercivity { product: f64, cross: f64 },
    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),
    #[error("s = {s} outside the admissible interval (0, {max})")]
    InadmissibleS { s: f64, max: f64 },
    #[error("theta = {0} is not positive")]
    NonpositiveTheta(f64),
    #[error("precondition fails: {0}")]
    Precondition(String),
    #[error("{0} is not finite")]
    NonFinite(&'static str),
}

/// Scalar problem data entering the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub p: f64,
    pub q: f64,
    pub m: f64,
    pub n: f64,
    pub alpha: f64,
    pub period: f64,
    /// `|Omega|`
    pub omega: f64,
    pub sup_a: f64,
    pub sup_b: f64,
    pub envelope: KernelEnvelope,
}

impl BoundInputs {
    pub fn from_spec(spec: &ProblemSpec) -> Self {
        Self {
            p: spec.p,
            q: spec.q,
            m: spec.m,
            n: spec.n,
            alpha: spec.alpha,
            period: spec.period,
            omega: spec.omega_measure(),
            sup_a: spec.sup_a(),
            sup_b: spec.sup_b(),
            envelope: spec.envelope,
        }
    }

    /// `|Q_T| = |Omega| T`
    pub fn q_measure(&self) -> f64 {
        self.omega * self.period
    }

    fn cross_kernels_nonpositive(&self) -> bool {
        self.envelope.kbar2 == 0.0 && self.envelope.kbar3 == 0.0
    }
}

fn finite(name: &'static str, v: f64) -> Result<f64, BoundsError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(BoundsError::NonFinite(name))
    }
}

pub fn coercive_c1_c2(
    klow1: f64,
    klow4: f64,
    kbar2: f64,
    kbar3: f64,
    sup_a: f64,
    sup_b: f64,
    period: f64,
) -> Result<(f64, f64), BoundsError> {
    let product = klow1 * klow4;
    let cross = kbar2 * kbar3;
    if !(klow1 > 0.0 && klow4 > 0.0) || product <= cross {
        return Err(BoundsError::InfeasibleCoercivity { product, cross });
    }
    if cross == 0.0 && kbar2 == 0.0 && kbar3 == 0.0 {
        return competitive_c1_c2(klow1, klow4, sup_a, sup_b, period);
    }
    let den = product - cross;
    Ok((
        period * (klow4 * sup_a + kbar2 * sup_b) / den,
        period * (kbar3 * sup_a + klow1 * sup_b) / den,
    ))
}

/// `(T ||a|| / klow1, T ||b|| / klow4)`, the coercive bound without cross
/// kernels.
pub fn competitive_c1_c2(
    klow1: f64,
    klow4: f64,
    sup_a: f64,
    sup_b: f64,
    period: f64,
) -> Result<(f64, f64), BoundsError> {
    if !(klow1 > 0.0 && klow4 > 0.0) {
        return Err(BoundsError::Precondition(
            "klow1 > 0 and klow4 > 0".to_string(),
        ));
    }
    Ok((period * sup_a / klow1, period * sup_b / klow4))
}

fn noncoercive_one(p: f64, m: f64, sup: f64, mu: f64, omega: f64, qm: f64) -> f64 {
    let x = m * (p - 1.0);
    let big_p = (p - 1.0) * (m - 1.0);
    let e = 2.0 / big_p;
    let inner = omega.powf(1.0 - 0.5 * p) * sup * (x + 1.0).powf(p) / (m.powf(p - 1.0) * p.powf(p));
    let qfac = if (x - 1.0).abs() <= REGIME_TOLERANCE {
        1.0
    } else {
        qm.powf((x - 1.0) / big_p)
    };
    qfac / mu.powf(e) * inner.powf(e)
}

pub fn noncoercive_competitive_c1_c2(
    inp: &BoundInputs,
    mu_p: f64,
    mu_q: f64,
) -> Result<(f64, f64), BoundsError> {
    for (c, p, m) in [("u", inp.p, inp.m), ("v", inp.q, inp.n)] {
        if m * (p - 1.0) < 1.0 - REGIME_TOLERANCE {
            return Err(BoundsError::RegimeMismatch(format!(
                "fast diffusion in {c}; slow or normal required"
            )));
        }
    }
    if !inp.cross_kernels_nonpositive() {
        return Err(BoundsError::Precondition("K2 <= 0 and K3 <= 0".to_string()));
    }
    let qm = inp.q_measure();
    Ok((
        finite(
            "C1",
            noncoercive_one(inp.p, inp.m, inp.sup_a, mu_p, inp.omega, qm),
        )?,
        finite(
            "C2",
            noncoercive_one(inp.q, inp.n, inp.sup_b, mu_q, inp.omega, qm),
        )?,
    ))
}

/// Constants of the large-exponent bound and its threshold case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BruteforceConstants {
    pub cp: f64,
    pub cq: f64,
    pub alpha_p: f64,
    pub alpha_q: f64,
    pub beta_p: f64,
    pub beta_q: f64,
    pub c1: f64,
    pub c2: f64,
}

/// `min{m(p-1)/(p+1), n(q-1)/(q+1)}`
pub fn exponent_threshold(inp: &BoundInputs) -> f64 {
    (inp.m * (inp.p - 1.0) / (inp.p + 1.0)).min(inp.n * (inp.q - 1.0) / (inp.q + 1.0))
}

fn c_exponent(p: f64, m: f64, mu: f64, omega: f64, period: f64) -> f64 {
    let big_p = (p - 1.0) * (m - 1.0);
    let base = (big_p + 2.0).powf(p) * omega.powf(0.5 * big_p)
        / (p.powf(p) * m.powf(p - 1.0) * (3.0 - p) * mu);
    base.powf(4.0 / (big_p + 2.0)) * period.powf((big_p - 2.0) / (big_p + 2.0))
}

fn bruteforce_constants(inp: &BoundInputs, mu_p: f64, mu_q: f64) -> BruteforceConstants {
    let t = inp.period;
    let pp = (inp.p - 1.0) * (inp.m - 1.0);
    let qq = (inp.q - 1.0) * (inp.n - 1.0);
    let e = pp * qq;
    let (k2, k3) = (inp.envelope.kbar2, inp.envelope.kbar3);
    let cp = c_exponent(inp.p, inp.m, mu_p, inp.omega, t);
    let cq = c_exponent(inp.q, inp.n, mu_q, inp.omega, t);
    let cp_pow = cp.powf((pp + 2.0) / pp);
    let cq_pow = cq.powf((qq + 2.0) / qq);
    let ta = 2.0 * t * inp.sup_a * inp.sup_a;
    let tb = 2.0 * t * inp.sup_b * inp.sup_b;
    let cross_p = cp_pow * (2.0 * k2 * k2 * cq_pow).powf(2.0 / pp);
    let cross_q = cq_pow * (2.0 * k3 * k3 * cp_pow).powf(2.0 / qq);
    let alpha_p = cp_pow * ta.powf(2.0 / pp) + cross_p * tb.powf(4.0 / e);
    let alpha_q = cq_pow * tb.powf(2.0 / qq) + cross_q * ta.powf(4.0 / e);
    let beta_p = cross_p * (2.0 * k3 * k3).powf(4.0 / e);
    let beta_q = cross_q * (2.0 * k2 * k2).powf(4.0 / e);
    let bound = |alpha: f64, beta: f64| {
        if beta == 0.0 {
            (t * alpha).sqrt()
        } else if (e - 4.0).abs() <= REGIME_TOLERANCE {
            (t * alpha / (1.0 - beta)).sqrt()
        } else {
            (t * (e / (e - 4.0) * alpha + beta.powf(e / (e - 4.0)))).sqrt()
        }
    };
    BruteforceConstants {
        cp,
        cq,
        alpha_p,
        alpha_q,
        beta_p,
        beta_q,
        c1: bound(alpha_p, beta_p),
        c2: bound(alpha_q, beta_q),
    }
}

pub fn bruteforce_regime_c1_c2(
    inp: &BoundInputs,
    mu_p: f64,
    mu_q: f64,
) -> Result<BruteforceConstants, BoundsError> {
    let th = exponent_threshold(inp);
    if (th - 1.0).abs() <= REGIME_TOLERANCE {
        return Err(BoundsError::RegimeMismatch(
            "threshold exponent equals 1; use normal_diffusion_condition".to_string(),
        ));
    }
    if th < 1.0 {
        return Err(BoundsError::RegimeMismatch(format!(
            "min{{m(p-1)/(p+1), n(q-1)/(q+1)}} = {th} must exceed 1"
        )));
    }
    let c = bruteforce_constants(inp, mu_p, mu_q);
    finite("C1", c.c1)?;
    finite("C2", c.c2)?;
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalCondition {
    /// Left side of the smallness condition; it must stay below 1.
    pub value: f64,
    pub holds: bool,
    /// Bounds when the condition holds.
    pub constants: Option<BruteforceConstants>,
}

pub fn normal_diffusion_condition(
    inp: &BoundInputs,
    mu_p: f64,
    mu_q: f64,
) -> Result<NormalCondition, BoundsError> {
    let th = exponent_threshold(inp);
    if (th - 1.0).abs() > REGIME_TOLERANCE {
        return Err(BoundsError::RegimeMismatch(format!(
            "min{{m(p-1)/(p+1), n(q-1)/(q+1)}} = {th} is not 1"
        )));
    }
    let c = bruteforce_constants(inp, mu_p, mu_q);
    let value = c.beta_p;
    let holds = value < 1.0 && c.beta_q < 1.0;
    Ok(NormalCondition {
        value,
        holds,
        constants: (holds && c.c1.is_finite() && c.c2.is_finite()).then_some(c),
    })
}

/// Eigen-weighted growth integrals and the data entering `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaInputs {
    /// `int_{Q_T} a e_p^p`
    pub a_ep: f64,
    /// `int_{Q_T} b e_q^q`
    pub b_eq: f64,
    pub mu_p: f64,
    pub mu_q: f64,
    pub klow2: f64,
    pub klow3: f64,
    pub period: f64,
}

impl ThetaInputs {
    pub fn from_spec(spec: &ProblemSpec, ep: &EigenPair, eq: &EigenPair) -> Self {
        let pow = |e: &EigenPair, r: f64| -> Vec<f64> {
            e.e.values().iter().map(|v| v.max(0.0).powf(r)).collect()
        };
        Self {
            a_ep: spec
                .a
                .integrate_against(&spec.grid, spec.period, &pow(ep, spec.p)),
            b_eq: spec
                .b
                .integrate_against(&spec.grid, spec.period, &pow(eq, spec.q)),
            mu_p: ep.mu,
            mu_q: eq.mu,
            klow2: spec.envelope.klow2,
            klow3: spec.envelope.klow3,
            period: spec.period,
        }
    }
}

pub fn theta(c1: f64, c2: f64, eps0: f64, d: &ThetaInputs) -> f64 {
    let t = d.period;
    let first = d.a_ep / t - eps0 * d.mu_p - d.klow2 * c2 / t;
    let second = d.b_eq / t - eps0 * d.mu_q - d.klow3 * c1 / t;
    first.min(second)
}

/// Supremum of the `eps0` keeping `theta > 0`; zero if none does.
pub fn max_eps0(c1: f64, c2: f64, d: &ThetaInputs) -> f64 {
    let t = d.period;
    let first = (d.a_ep / t - d.klow2 * c2 / t) / d.mu_p;
    let second = (d.b_eq / t - d.klow3 * c1 / t) / d.mu_q;
    first.min(second).max(0.0)
}

/// Half of [`max_eps0`].
pub fn default_eps0(c1: f64, c2: f64, d: &ThetaInputs) -> f64 {
    0.5 * max_eps0(c1, c2, d)
}

/// Upper end of the open interval `(0, s_max)` of admissible `s`.
pub fn s_upper(p: f64, m: f64, q: f64, n: f64) -> f64 {
    ((p - 1.0) * (m - p) / p).min((q - 1.0) * (n - q) / q)
}

fn m_bound(
    p: f64,
    m: f64,
    sup: f64,
    kbar: f64,
    omega: f64,
    qm: f64,
    mu: f64,
    s: f64,
    r: f64,
) -> f64 {
    let big_p = (p - 1.0) * (m - 1.0);
    let beta = p * (big_p - s) / (big_p - p * s);
    let inv_beta_conj = 1.0 - 1.0 / beta;
    let num = (sup + kbar * omega * r * r)
        * qm.powf(inv_beta_conj)
        * mu.powf(-1.0 / beta)
        * (big_p - s).powf(p);
    let den = (m * (p - 1.0)).powf(p - 1.0) * ((p - 1.0) * (m - p) - p * s);
    (num / den).powf(beta / (p * (beta - 1.0)))
}

pub fn gradient_bounds_m1_m2(
    inp: &BoundInputs,
    mu_p: f64,
    mu_q: f64,
    s: f64,
    r_proxy: f64,
) -> Result<(f64, f64), BoundsError> {
    let max = s_upper(inp.p, inp.m, inp.q, inp.n);
    if !(s > 0.0 && s < max) {
        return Err(BoundsError::InadmissibleS { s, max });
    }
    if !(r_proxy > 0.0) {
        return Err(BoundsError::Precondition(format!(
            "R proxy must be positive, got {r_proxy}"
        )));
    }
    let qm = inp.q_measure();
    let e = &inp.envelope;
    let m1 = m_bound(
        inp.p, inp.m, inp.sup_a, e.kbar2, inp.omega, qm, mu_p, s, r_proxy,
    );
    let m2 = m_bound(
        inp.q, inp.n, inp.sup_b, e.kbar3, inp.omega, qm, mu_q, s, r_proxy,
    );
    Ok((finite("M1", m1)?, finite("M2", m2)?))
}

/// Lower-bound constants for nontrivial solutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBounds {
    pub r0: f64,
    pub d1: f64,
    pub d2: f64,
    pub k_p: f64,
    pub k_q: f64,
    pub lambda0: f64,
}

/// Data for [`r0_and_lambda`] beyond the scalar inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenTerms {
    pub pow_sup_p: f64,
    pub grad_sup_p: f64,
    pub pow_sup_q: f64,
    pub grad_sup_q: f64,
    /// `||K_i||_{L^1(Q_T)}`, i = 1..4
    pub kernel_l1: [f64; 4],
}

impl EigenTerms {
    pub fn from_spec(spec: &ProblemSpec, ep: &EigenPair, eq: &EigenPair) -> Self {
        Self {
            pow_sup_p: ep.pow_sup,
            grad_sup_p: ep.grad_sup,
            pow_sup_q: eq.pow_sup,
            grad_sup_q: eq.grad_sup,
            kernel_l1: [0, 1, 2, 3].map(|i| spec.kernel_l1(i)),
        }
    }
}

/// `root` is the exponent replacing `1/2` in the first and third entries
/// of each minimum (`1/alpha` for the generalized nonlinearity).
#[allow(clippy::too_many_arguments)]
pub fn r0_and_lambda(
    inp: &BoundInputs,
    eig: &EigenTerms,
    theta_in: &ThetaInputs,
    m1: f64,
    m2: f64,
    s: f64,
    eps0: f64,
    c1: f64,
    c2: f64,
    root: f64,
) -> Result<LowerBounds, BoundsError> {
    let th = theta(c1, c2, eps0, theta_in);
    if !(th > 0.0) {
        return Err(BoundsError::NonpositiveTheta(th));
    }
    let qm = inp.q_measure();
    let grad = |p: f64, m: f64, pow_sup: f64, grad_sup: f64, mb: f64| {
        let big_p = (p - 1.0) * (m - 1.0);
        p * pow_sup * grad_sup * (m * (p - 1.0) * mb / (big_p - s)).powf(p - 1.0) * qm.powf(1.0 / p)
    };
    let gp = grad(inp.p, inp.m, eig.pow_sup_p, eig.grad_sup_p, m1);
    let gq = grad(inp.q, inp.n, eig.pow_sup_q, eig.grad_sup_q, m2);
    let l1 = eig.kernel_l1;
    let d1 = l1[0] + l1[1] + gp;
    let d2 = l1[2] + l1[3] + gq;
    let t = theta_in.period;
    let np = theta_in.a_ep - eps0 * t * theta_in.mu_p;
    let nq = theta_in.b_eq - eps0 * t * theta_in.mu_q;
    let pair = |x: f64| x.powf(root).min(x.powf(1.0 / s));
    let r0 = pair(np / d1).min(pair(nq / d2));
    let k_p = l1[0] + gp;
    let k_q = l1[3] + gq;
    let lambda0 = pair(t * th / k_p).min(pair(t * th / k_q));
    Ok(LowerBounds {
        r0: finite("r0", r0)?,
        d1,
        d2,
        k_p,
        k_q,
        lambda0: finite("lambda0", lambda0)?,
    })
}

/// `(s_k, alpha_k)` with `s_k = 2 p^k + (p^k - p)/(p - 1) + m - 1` and
/// `alpha_k = p (s_k + 2) / (m (p - 1) + s_k + 1)`.
pub fn moser_exponents(p: f64, m: f64, k: u32) -> (f64, f64) {
    let pk = p.powi(k as i32);
    let s = 2.0 * pk + (pk - p) / (p - 1.0) + m - 1.0;
    (s, p * (s + 2.0) / (m * (p - 1.0) + s + 1.0))
}

/// `alpha_k / p = 1 + (1 - m(p-1)) / (m(p-1) + s_k + 1)`, exactly 1 on the
/// normal-diffusion line.
pub fn moser_ratio(p: f64, m: f64, k: u32) -> f64 {
    let (s, _) = moser_exponents(p, m, k);
    let x = m * (p - 1.0);
    1.0 + (1.0 - x) / (x + s + 1.0)
}

/// Smallest slack `ln M - sum_{j=1}^{i} ln(alpha_{k-j} / p)` over
/// `1 <= i <= k <= k_max`; the product bound holds when it is `>= 0`.
pub fn product_bound_margin(p: f64, m: f64, k_max: u32) -> f64 {
    let x = m * (p - 1.0);
    let ln_m = (1.0 - x).abs() / (2.0 * (p - 1.0));
    let logs: Vec<f64> = (0..k_max)
        .map(|k| {
            let (s, _) = moser_exponents(p, m, k);
            ((1.0 - x) / (x + s + 1.0)).ln_1p()
        })
        .collect();
    let mut worst = f64::INFINITY;
    for k in 1..=k_max as usize {
        let mut sum = 0.0;
        for j in 1..=k {
            sum += logs[k - j];
            worst = worst.min(ln_m - sum);
        }
    }
    worst
}

pub fn product_bound_check(p: f64, m: f64, k_max: u32) -> bool {
    product_bound_margin(p, m, k_max) >= 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaBranch {
    Coercive,
    Noncoercive,
}

/// Bounds on `||u||^alpha_{L^alpha(Q_T)}` and `||v||^alpha_{L^alpha(Q_T)}`.
pub fn generalized_alpha_bounds(
    inp: &BoundInputs,
    mu_p: f64,
    mu_q: f64,
    branch: AlphaBranch,
) -> Result<(f64, f64), BoundsError> {
    if !(inp.alpha >= 1.0) {
        return Err(BoundsError::Precondition(format!(
            "alpha = {} must be >= 1",
            inp.alpha
        )));
    }
    if !inp.cross_kernels_nonpositive() {
        return Err(BoundsError::Precondition("K2 <= 0 and K3 <= 0".to_string()));
    }
    match branch {
        AlphaBranch::Coercive => {
            let e = &inp.envelope;
            competitive_c1_c2(e.klow1, e.klow4, inp.sup_a, inp.sup_b, inp.period)
        }
        AlphaBranch::Noncoercive => {
            let qm = inp.q_measure();
            let a = inp.alpha;
            let one = |p: f64, m: f64, sup: f64, mu: f64| {
                let x = m * (p - 1.0);
                let e = a / x;
                qm / mu.powf(e)
                    * (sup * (x + a).powf(p) / (a * m.powf(p - 1.0) * p.powf(p))).powf(e)
            };
            Ok((
                finite("C1", one(inp.p, inp.m, inp.sup_a, mu_p))?,
                finite("C2", one(inp.q, inp.n, inp.sup_b, mu_q))?,
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    Coercive,
    CoerciveCooperative,
    CoerciveCompetitive,
    NoncoerciveCompetitive,
    LargeExponent,
    ThresholdExponent,
    AlphaCoercive,
    AlphaNoncoercive,
}

impl TheoremId {
    pub const ALL: [TheoremId; 8] = [
        TheoremId::Coercive,
        TheoremId::CoerciveCooperative,
        TheoremId::CoerciveCompetitive,
        TheoremId::NoncoerciveCompetitive,
        TheoremId::LargeExponent,
        TheoremId::ThresholdExponent,
        TheoremId::AlphaCoercive,
        TheoremId::AlphaNoncoercive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TheoremId::Coercive => "coercive",
            TheoremId::CoerciveCooperative => "coercive_cooperative",
            TheoremId::CoerciveCompetitive => "coercive_competitive",
            TheoremId::NoncoerciveCompetitive => "noncoercive_competitive",
            TheoremId::LargeExponent => "large_exponent",
            TheoremId::ThresholdExponent => "threshold_exponent",
            TheoremId::AlphaCoercive => "alpha_coercive",
            TheoremId::AlphaNoncoercive => "alpha_noncoercive",
        }
    }

    /// Bounds are on `||.||^alpha_{L^alpha}` rather than `||.||^2_{L^2}`.
    pub fn is_alpha_branch(self) -> bool {
        matches!(self, TheoremId::AlphaCoercive | TheoremId::AlphaNoncoercive)
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.replace('-', "_");
        TheoremId::ALL
            .into_iter()
            .find(|t| t.as_str() == key)
            .ok_or_else(|| {
                let names: Vec<_> = TheoremId::ALL.iter().map(|t| t.as_str()).collect();
                format!(
                    "unknown theorem '{s}' (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Applicable,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremVerdict {
    pub theorem: TheoremId,
    pub verdict: Verdict,
    /// Exponent of the norm the constants bound: 2 or alpha.
    pub norm_exponent: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub theta: Option<f64>,
    pub checked: Vec<String>,
    pub failed: Vec<String>,
}

impl TheoremVerdict {
    pub fn is_applicable(&self) -> bool {
        self.verdict == Verdict::Applicable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundsOptions {
    pub eps0: Option<f64>,
    pub s: Option<f64>,
    /// Stand-in for the sup-norm bound entering `M1`, `M2`.
    pub r_proxy: Option<f64>,
    pub only: Option<TheoremId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub inputs: BoundInputs,
    pub mu_p: f64,
    pub mu_q: f64,
    pub a_ep: f64,
    pub b_eq: f64,
    pub hypothesis_violations: Vec<String>,
    pub verdicts: Vec<TheoremVerdict>,
    /// First applicable theorem; the downstream constants use its bounds.
    pub selected: Option<TheoremId>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub theta: Option<f64>,
    pub eps0: Option<f64>,
    pub s_max: f64,
    pub s: Option<f64>,
    pub r_proxy: Option<f64>,
    pub m1: Option<f64>,
    pub m2: Option<f64>,
    pub lower: Option<LowerBounds>,
    pub bruteforce: Option<BruteforceConstants>,
    pub normal_condition: Option<f64>,
    pub alpha_bounds: Option<(f64, f64)>,
    pub moser_margin_u: f64,
    pub moser_margin_v: f64,
    pub notes: Vec<String>,
}

impl BoundsReport {
    pub fn verdict(&self, id: TheoremId) -> Option<&TheoremVerdict> {
        self.verdicts.iter().find(|v| v.theorem == id)
    }

    /// Bound pair of the selected theorem with the exponent of its norm.
    pub fn selected_bounds(&self) -> Option<(f64, f64, f64)> {
        let v = self.verdict(self.selected?)?;
        Some((v.c1?, v.c2?, v.norm_exponent))
    }
}

struct Checks {
    checked: Vec<String>,
    failed: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self {
            checked: Vec::new(),
            failed: Vec::new(),
        }
    }

    fn require(&mut self, name: &str, ok: bool) {
        self.checked.push(name.to_string());
        if !ok {
            self.failed.push(name.to_string());
        }
    }

    fn finish(
        self,
        theorem: TheoremId,
        norm_exponent: f64,
        bounds: Option<(f64, f64)>,
        theta: Option<f64>,
    ) -> TheoremVerdict {
        let verdict = if self.failed.is_empty() && bounds.is_some() {
            Verdict::Applicable
        } else {
            Verdict::NotApplicable
        };
        TheoremVerdict {
            theorem,
            verdict,
            norm_exponent,
            c1: bounds.map(|b| b.0),
            c2: bounds.map(|b| b.1),
            theta,
            checked: self.checked,
            failed: self.failed,
        }
    }
}

const ALPHA_TWO_TOL: f64 = 1e-12;

fn evaluate(
    id: TheoremId,
    inp: &BoundInputs,
    th: &ThetaInputs,
    standing: bool,
    k_signs: (f64, f64, f64, f64),
) -> (TheoremVerdict, Option<BruteforceConstants>, Option<f64>) {
    let (mu_p, mu_q) = (th.mu_p, th.mu_q);
    let e = &inp.envelope;
    let (k2_min, k2_max, k3_min, k3_max) = k_signs;
    let mut c = Checks::new();
    c.require("standing hypotheses", standing);
    let alpha_two = (inp.alpha - 2.0).abs() <= ALPHA_TWO_TOL;
    let mut brute = None;
    let mut normal_value = None;
    let mut needs_theta = true;
    let bounds: Result<(f64, f64), BoundsError> = match id {
        TheoremId::Coercive => {
            c.require("alpha = 2", alpha_two);
            c.require("klow1 > 0 and klow4 > 0", e.is_coercive());
            c.require(
                "klow1 klow4 > kbar2 kbar3",
                e.klow1 * e.klow4 > e.kbar2 * e.kbar3,
            );
            coercive_c1_c2(
                e.klow1, e.klow4, e.kbar2, e.kbar3, inp.sup_a, inp.sup_b, inp.period,
            )
        }
        TheoremId::CoerciveCooperative => {
            c.require("alpha = 2", alpha_two);
            c.require("klow1 > 0 and klow4 > 0", e.is_coercive());
            c.require(
                "klow1 klow4 > kbar2 kbar3",
                e.klow1 * e.klow4 > e.kbar2 * e.kbar3,
            );
            c.require("K2 >= 0 and K3 >= 0", k2_min >= 0.0 && k3_min >= 0.0);
            c.require("a and b nontrivial", th.a_ep > 0.0 && th.b_eq > 0.0);
            needs_theta = false;
            coercive_c1_c2(
                e.klow1, e.klow4, e.kbar2, e.kbar3, inp.sup_a, inp.sup_b, inp.period,
            )
        }
        TheoremId::CoerciveCompetitive => {
            c.require("alpha = 2", alpha_two);
            c.require("klow1 > 0 and klow4 > 0", e.is_coercive());
            c.require("K2 <= 0 and K3 <= 0", k2_max <= 0.0 && k3_max <= 0.0);
            competitive_c1_c2(e.klow1, e.klow4, inp.sup_a, inp.sup_b, inp.period)
        }
        TheoremId::NoncoerciveCompetitive => {
            c.require("alpha = 2", alpha_two);
            c.require("K2 <= 0 and K3 <= 0", k2_max <= 0.0 && k3_max <= 0.0);
            c.require(
                "slow or normal diffusion",
                inp.m * (inp.p - 1.0) >= 1.0 - REGIME_TOLERANCE
                    && inp.n * (inp.q - 1.0) >= 1.0 - REGIME_TOLERANCE,
            );
            noncoercive_competitive_c1_c2(inp, mu_p, mu_q)
        }
        TheoremId::LargeExponent => {
            c.require("alpha = 2", alpha_two);
            c.require(
                "threshold exponent > 1",
                exponent_threshold(inp) > 1.0 + REGIME_TOLERANCE,
            );
            let r = bruteforce_regime_c1_c2(inp, mu_p, mu_q);
            if let Ok(b) = &r {
                brute = Some(*b);
            }
            r.map(|b| (b.c1, b.c2))
        }
        TheoremId::ThresholdExponent => {
            c.require("alpha = 2", alpha_two);
            c.require(
                "threshold exponent = 1",
                (exponent_threshold(inp) - 1.0).abs() <= REGIME_TOLERANCE,
            );
            match normal_diffusion_condition(inp, mu_p, mu_q) {
                Ok(nc) => {
                    normal_value = Some(nc.value);
                    c.require("smallness condition < 1", nc.holds);
                    brute = nc.constants;
                    nc.constants
                        .map(|b| (b.c1, b.c2))
                        .ok_or(BoundsError::Precondition("smallness condition".to_string()))
                }
                Err(err) => Err(err),
            }
        }
        TheoremId::AlphaCoercive => {
            c.require("K2 <= 0 and K3 <= 0", k2_max <= 0.0 && k3_max <= 0.0);
            c.require("klow1 > 0 and klow4 > 0", e.is_coercive());
            generalized_alpha_bounds(inp, mu_p, mu_q, AlphaBranch::Coercive)
        }
        TheoremId::AlphaNoncoercive => {
            c.require("K2 <= 0 and K3 <= 0", k2_max <= 0.0 && k3_max <= 0.0);
            generalized_alpha_bounds(inp, mu_p, mu_q, AlphaBranch::Noncoercive)
        }
    };
    let bounds = bounds.ok();
    let theta_value = bounds.map(|(c1, c2)| theta(c1, c2, 0.0, th));
    if needs_theta {
        c.require("theta > 0", theta_value.is_some_and(|t| t > 0.0));
    }
    let norm = if id.is_alpha_branch() { inp.alpha } else { 2.0 };
    (c.finish(id, norm, bounds, theta_value), brute, normal_value)
}

/// Evaluates every theorem branch (or only `opts.only`) and the downstream
/// constants for the first applicable one. Never fails: every failure is
/// reported as a verdict reason or a note.
pub fn theorem_verdicts(
    spec: &ProblemSpec,
    ep: &EigenPair,
    eq: &EigenPair,
    opts: &BoundsOptions,
) -> BoundsReport {
    let inp = BoundInputs::from_spec(spec);
    let th = ThetaInputs::from_spec(spec, ep, eq);
    let regime = validate_hypotheses(spec);
    let standing = regime.holds();
    let k_signs = (
        spec.k[1].min(),
        spec.k[1].max(),
        spec.k[2].min(),
        spec.k[2].max(),
    );
    let ids: Vec<TheoremId> = match opts.only {
        Some(id) => vec![id],
        None => TheoremId::ALL.to_vec(),
    };
    let mut verdicts = Vec::with_capacity(ids.len());
    let mut bruteforce = None;
    let mut normal_condition = None;
    let mut alpha_bounds = None;
    for id in ids {
        let (v, b, nv) = evaluate(id, &inp, &th, standing, k_signs);
        bruteforce = bruteforce.or(b);
        normal_condition = normal_condition.or(nv);
        if id.is_alpha_branch() && alpha_bounds.is_none() {
            alpha_bounds = v.c1.zip(v.c2);
        }
        verdicts.push(v);
    }
    let mut notes = Vec::new();
    let selected = verdicts
        .iter()
        .find(|v| v.is_applicable())
        .map(|v| v.theorem);
    let s_max = s_upper(spec.p, spec.m, spec.q, spec.n);
    let mut report = BoundsReport {
        inputs: inp,
        mu_p: ep.mu,
        mu_q: eq.mu,
        a_ep: th.a_ep,
        b_eq: th.b_eq,
        hypothesis_violations: regime.hypothesis_violations,
        verdicts,
        selected,
        c1: None,
        c2: None,
        theta: None,
        eps0: None,
        s_max,
        s: None,
        r_proxy: opts.r_proxy,
        m1: None,
        m2: None,
        lower: None,
        bruteforce,
        normal_condition,
        alpha_bounds,
        moser_margin_u: product_bound_margin(spec.p, spec.m, 30),
        moser_margin_v: product_bound_margin(spec.q, spec.n, 30),
        notes: Vec::new(),
    };
    let Some((c1, c2, _)) = report.selected_bounds() else {
        notes.push("no applicable theorem; downstream constants omitted".to_string());
        report.notes = notes;
        return report;
    };
    report.c1 = Some(c1);
    report.c2 = Some(c2);
    let eps0 = opts.eps0.unwrap_or_else(|| default_eps0(c1, c2, &th));
    report.eps0 = Some(eps0);
    report.theta = Some(theta(c1, c2, eps0, &th));
    let s = opts.s.unwrap_or(0.5 * s_max);
    report.s = Some(s);
    let Some(r_proxy) = opts.r_proxy else {
        notes.push("no R proxy given; M1, M2 and lower bounds omitted".to_string());
        report.notes = notes;
        return report;
    };
    match gradient_bounds_m1_m2(&inp, ep.mu, eq.mu, s, r_proxy) {
        Ok((m1, m2)) => {
            report.m1 = Some(m1);
            report.m2 = Some(m2);
            let eig = EigenTerms::from_spec(spec, ep, eq);
            match r0_and_lambda(&inp, &eig, &th, m1, m2, s, eps0, c1, c2, 1.0 / spec.alpha) {
                Ok(l) => report.lower = Some(l),
                Err(e) => notes.push(format!("lower bounds: {e}")),
            }
        }
        Err(e) => notes.push(format!("gradient bounds: {e}")),
    }
    report.notes = notes;
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(p: f64, m: f64) -> BoundInputs {
        BoundInputs {
            p,
            q: p,
            m,
            n: m,
            alpha: 2.0,
            period: 1.0,
            omega: 1.0,
            sup_a: 1.0,
            sup_b: 1.0,
            envelope: KernelEnvelope {
                kbar2: 0.0,
                kbar3: 0.0,
                klow2: 0.0,
                klow3: 0.0,
                klow1: 0.0,
                klow4: 0.0,
            },
        }
    }

    #[test]
    fn coercive_examples() {
        assert_eq!(
            coercive_c1_c2(1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0).unwrap(),
            (1.0, 1.0)
        );
        assert_eq!(
            coercive_c1_c2(2.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap(),
            (1.0, 1.0)
        );
        assert!(matches!(
            coercive_c1_c2(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0),
            Err(BoundsError::InfeasibleCoercivity { .. })
        ));
        let (a, b) = (3.7, 0.4);
        assert_eq!(
            coercive_c1_c2(1.5, 2.5, 0.0, 0.0, a, b, 2.0).unwrap(),
            competitive_c1_c2(1.5, 2.5, a, b, 2.0).unwrap()
        );
    }

    #[test]
    fn noncoercive_normal_line() {
        let mu = 3.0;
        let (c1, c2) = noncoercive_competitive_c1_c2(&toy(1.5, 2.0), mu, mu).unwrap();
        let want = mu.powi(-4) * (2.0 / 1.5f64.powf(1.5)).powi(4);
        assert!((c1 - want).abs() < 1e-12 * want);
        assert_eq!(c1, c2);
        assert!(matches!(
            noncoercive_competitive_c1_c2(&toy(1.4, 1.5), mu, mu),
            Err(BoundsError::RegimeMismatch(_))
        ));
        let mut inp = toy(1.5, 2.0);
        inp.envelope.kbar2 = 0.1;
        assert!(noncoercive_competitive_c1_c2(&inp, mu, mu).is_err());
    }

    #[test]
    fn alpha_noncoercive_at_two() {
        let inp = toy(1.6, 3.0);
        let (c1, _) = generalized_alpha_bounds(&inp, 2.0, 2.5, AlphaBranch::Noncoercive).unwrap();
        let x: f64 = 3.0 * 0.6;
        let want = 1.0 / 2f64.powf(2.0 / x)
            * ((x + 2.0).powf(1.6) / (2.0 * 3f64.powf(0.6) * 1.6f64.powf(1.6))).powf(2.0 / x);
        assert!((c1 - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn alpha_coercive_toy() {
        let mut inp = toy(1.5, 3.0);
        inp.alpha = 3.0;
        inp.sup_a = 6.0;
        inp.sup_b = 2.0;
        inp.period = 2.0;
        inp.envelope.klow1 = 4.0;
        inp.envelope.klow4 = 0.5;
        assert_eq!(
            generalized_alpha_bounds(&inp, 1.0, 1.0, AlphaBranch::Coercive).unwrap(),
            (3.0, 8.0)
        );
        inp.envelope.kbar2 = 0.2;
        assert!(matches!(
            generalized_alpha_bounds(&inp, 1.0, 1.0, AlphaBranch::Coercive),
            Err(BoundsError::Precondition(_))
        ));
    }

    #[test]
    fn bruteforce_regimes() {
        let mu = 4.0;
        assert!(matches!(
            bruteforce_regime_c1_c2(&toy(1.5, 3.0), mu, mu),
            Err(BoundsError::RegimeMismatch(_))
        ));
        // m (p - 1) / (p + 1) = 1 at p = 1.5, m = 5
        assert!(matches!(
            bruteforce_regime_c1_c2(&toy(1.5, 5.0), mu, mu),
            Err(BoundsError::RegimeMismatch(_))
        ));
        let c = bruteforce_regime_c1_c2(&toy(1.5, 6.0), mu, mu).unwrap();
        assert_eq!((c.beta_p, c.beta_q), (0.0, 0.0));
        assert!((c.c1 - (1.0 * c.alpha_p).sqrt()).abs() < 1e-14);
        assert_eq!(c.c1, c.c2);
    }

    #[test]
    fn bruteforce_direct_evaluation() {
        let mut inp = toy(1.5, 6.0);
        inp.envelope.kbar2 = 0.3;
        inp.envelope.kbar3 = 0.3;
        inp.sup_a = 2.0;
        inp.sup_b = 2.0;
        let mu = 4.0;
        let c = bruteforce_regime_c1_c2(&inp, mu, mu).unwrap();
        let big_p: f64 = 0.5 * 5.0;
        let cp = ((big_p + 2.0).powf(1.5) / (1.5f64.powf(1.5) * 6f64.sqrt() * 1.5 * mu))
            .powf(4.0 / (big_p + 2.0));
        assert!((c.cp - cp).abs() < 1e-12 * cp);
        let cpow = cp.powf((big_p + 2.0) / big_p);
        let e = big_p * big_p;
        let alpha = cpow * 8f64.powf(2.0 / big_p)
            + cpow * (0.18 * cpow).powf(2.0 / big_p) * 8f64.powf(4.0 / e);
        let beta = cpow * (0.18 * cpow).powf(2.0 / big_p) * 0.18f64.powf(4.0 / e);
        assert!((c.alpha_p - alpha).abs() < 1e-12 * alpha);
        assert!((c.beta_p - beta).abs() < 1e-12 * beta);
        let c1 = (e / (e - 4.0) * alpha + beta.powf(e / (e - 4.0))).sqrt();
        assert!((c.c1 - c1).abs() < 1e-12 * c1);
    }

    #[test]
    fn normal_condition_cases() {
        let inp = toy(1.5, 5.0);
        let nc = normal_diffusion_condition(&inp, 4.0, 4.0).unwrap();
        assert_eq!(nc.value, 0.0);
        assert!(nc.holds);
        let mut big = inp;
        big.envelope.kbar2 = 50.0;
        big.envelope.kbar3 = 50.0;
        let nc = normal_diffusion_condition(&big, 0.5, 0.5).unwrap();
        assert!(nc.value >= 1.0 && !nc.holds && nc.constants.is_none());
        let mut small = inp;
        small.envelope.kbar2 = 0.01;
        small.envelope.kbar3 = 0.01;
        let nc = normal_diffusion_condition(&small, 4.0, 4.0).unwrap();
        let c = nc.constants.unwrap();
        assert!(nc.value > 0.0 && nc.value < 1.0);
        assert!((c.c1 - (c.alpha_p / (1.0 - c.beta_p)).sqrt()).abs() < 1e-14);
        assert!(normal_diffusion_condition(&toy(1.5, 6.0), 4.0, 4.0).is_err());
    }

    fn theta_toy() -> ThetaInputs {
        ThetaInputs {
            a_ep: 2.0,
            b_eq: 3.0,
            mu_p: 5.0,
            mu_q: 7.0,
            klow2: 0.0,
            klow3: 0.0,
            period: 1.0,
        }
    }

    #[test]
    fn theta_and_eps0() {
        let d = theta_toy();
        assert_eq!(theta(1.0, 1.0, 0.0, &d), 2.0);
        let m = max_eps0(1.0, 1.0, &d);
        assert!(theta(1.0, 1.0, m, &d).abs() < 1e-14);
        assert!(theta(1.0, 1.0, default_eps0(1.0, 1.0, &d), &d) > 0.0);
        let d2 = ThetaInputs { klow2: 4.0, ..d };
        assert!(theta(1.0, 1.0, 0.0, &d2) < 0.0);
        assert_eq!(max_eps0(1.0, 1.0, &d2), 0.0);
    }

    #[test]
    fn gradient_bounds_cases() {
        let inp = toy(1.5, 3.0);
        let smax = s_upper(1.5, 3.0, 1.5, 3.0);
        assert!((smax - 0.5).abs() < 1e-15);
        let (m1, m2) = gradient_bounds_m1_m2(&inp, 3.0, 3.0, 0.25, 1.0).unwrap();
        assert!(m1 > 0.0 && m1 == m2);
        let mut zero = inp;
        zero.sup_a = 0.0;
        assert_eq!(
            gradient_bounds_m1_m2(&zero, 3.0, 3.0, 0.25, 1.0).unwrap().0,
            0.0
        );
        for s in [0.0, 0.5, 0.7, -0.1] {
            assert!(matches!(
                gradient_bounds_m1_m2(&inp, 3.0, 3.0, s, 1.0),
                Err(BoundsError::InadmissibleS { .. })
            ));
        }
    }

    #[test]
    fn lower_bounds_kernel_free() {
        let inp = toy(1.5, 3.0);
        let eig = EigenTerms {
            pow_sup_p: 1.2,
            grad_sup_p: 4.0,
            pow_sup_q: 1.2,
            grad_sup_q: 4.0,
            kernel_l1: [0.0; 4],
        };
        let d = theta_toy();
        let l = r0_and_lambda(&inp, &eig, &d, 0.3, 0.3, 0.25, 0.0, 1.0, 1.0, 0.5).unwrap();
        let grad = 1.5 * 1.2 * 4.0 * (1.5 * 0.3f64 / 0.75).sqrt();
        assert!((l.d1 - grad).abs() < 1e-12);
        assert_eq!(l.k_p, l.d1);
        let x: f64 = 2.0 / grad;
        assert!((l.lambda0 - x.sqrt().min(x.powf(4.0))).abs() < 1e-12);
        let bad = ThetaInputs { klow2: 9.0, ..d };
        assert!(matches!(
            r0_and_lambda(&inp, &eig, &bad, 0.3, 0.3, 0.25, 0.0, 1.0, 1.0, 0.5),
            Err(BoundsError::NonpositiveTheta(_))
        ));
    }

    #[test]
    fn moser_examples() {
        assert_eq!(moser_exponents(1.5, 2.0, 1).0, 4.0);
        for k in 0..=30 {
            assert_eq!(moser_ratio(1.5, 2.0, k), 1.0);
        }
        assert_eq!(product_bound_margin(1.5, 2.0, 30), 0.0);
        assert!(product_bound_check(1.2, 3.0, 30));
        let (s, a) = moser_exponents(1.3, 2.5, 4);
        assert!((a / 1.3 - moser_ratio(1.3, 2.5, 4)).abs() < 1e-14);
        assert!(s > 0.0);
    }

    #[test]
    fn theorem_ids_parse() {
        for id in TheoremId::ALL {
            assert_eq!(id.as_str().parse::<TheoremId>().unwrap(), id);
        }
        assert_eq!(
            "large-exponent".parse::<TheoremId>().unwrap(),
            TheoremId::LargeExponent
        );
        assert!("nope".parse::<TheoremId>().is_err());
    }
}
