//! Closed-form constants and bounds: `B̂_Q`, the radius `R`, bias bounds,
//! parameter-count bounds, covering-number constants, approximation-error
//! bounds and the shape of the generalization bound.
//!
//! Quantities with depth exponents are returned as natural logarithms.

use serde::{Deserialize, Serialize};

use crate::netbuild::{NetworkKind, NetworkSpec};
use crate::ridge::nq;

/// `B̂_Q = B_Q + 2q‖β‖_1`.
pub fn bhat(b_q: f64, q: usize, beta_l1: f64) -> f64 {
    b_q + 2.0 * q as f64 * beta_l1
}

/// `B̂ = 1 + 4d` for radial targets.
pub fn bhat_radial(d: usize) -> f64 {
    1.0 + 4.0 * d as f64
}

/// Inputs to [`radius_r`]. `xi_lead` is the first nonzero entry of the last
/// ridge vector; it is absent for radial networks, which have no first group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusInputs {
    pub s: usize,
    pub xi_lead: Option<f64>,
    pub beta_l1: f64,
    pub b_q: f64,
    pub q0: f64,
    pub f_sup: f64,
    pub b_hat: f64,
}

/// The five terms of `R`, in order; the first is `None` for radial inputs.
pub fn radius_terms(inp: &RadiusInputs) -> [Option<f64>; 5] {
    let s = inp.s as f64;
    let ss = s.powf(s / 2.0);
    let first = inp.xi_lead.map(|x| {
        let a = x.abs();
        ss * (1.0 + a) * (1.0 + 1.0 / a).powf(s)
    });
    [
        first,
        Some(ss * 2f64.powf(s)),
        Some(20.0 * inp.beta_l1),
        Some(4.0 * inp.f_sup / inp.b_hat),
        Some(inp.q0.abs() + 2.0 * inp.b_q),
    ]
}

/// `R = max{s^{s/2}(1+|ξ_ℓ|)(1+1/|ξ_ℓ|)^s, s^{s/2}2^s, 20‖β‖_1, 4‖f‖_∞/B̂, |Q(0)| + 2B_Q}`.
pub fn radius_r(inp: &RadiusInputs) -> f64 {
    radius_terms(inp)
        .into_iter()
        .flatten()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// [`RadiusInputs`] read off a built network.
pub fn radius_inputs_for(spec: &NetworkSpec) -> RadiusInputs {
    let m = &spec.meta;
    RadiusInputs {
        s: spec.s,
        xi_lead: m.basis.as_ref().map(|b| b.last_leading_entry()),
        beta_l1: m.beta.as_ref().map_or(0.0, |b| b.l1_norm),
        b_q: m.b_q,
        q0: m.q0,
        f_sup: m.f_sup,
        b_hat: m.b_hat,
    }
}

pub fn radius_for(spec: &NetworkSpec) -> f64 {
    radius_r(&radius_inputs_for(spec))
}

/// `log (2(s+1)R)^j`.
pub fn bias_bound_log(j: usize, s: usize, r: f64) -> f64 {
    j as f64 * (2.0 * (s as f64 + 1.0) * r).ln()
}

/// `(30 + 28n_q)N + (8d + q + 44)n_q + 4s + 49`.
pub fn composite_param_bound(d: usize, q: usize, s: usize, n: usize) -> usize {
    let n_q = nq(d, q);
    (30 + 28 * n_q) * n + (8 * d + q + 44) * n_q + 4 * s + 49
}

/// `(14d + 2)N + 22d + s + 1`.
pub fn radial_param_bound(d: usize, s: usize, n: usize) -> usize {
    (14 * d + 2) * n + 22 * d + s + 1
}

pub fn param_bound_for(spec: &NetworkSpec) -> usize {
    match spec.meta.kind {
        NetworkKind::Composite => composite_param_bound(spec.d, spec.meta.q, spec.s, spec.n),
        NetworkKind::Radial => radial_param_bound(spec.d, spec.s, spec.n),
    }
}

/// `A_1 = (3s+2)(4 + (10+d)n_q) + 10 + 2(2n_q+1)(s+9)`.
pub fn covering_a1(s: usize, d: usize, q: usize) -> f64 {
    let (s, d, n) = (s as f64, d as f64, nq(d, q) as f64);
    (3.0 * s + 2.0) * (4.0 + (10.0 + d) * n) + 10.0 + 2.0 * (2.0 * n + 1.0) * (s + 9.0)
}

/// `A'_2 = (5 + (10+d)n_q)A_1 + (s+9)(4 + (10+d)n_q)(5 + (12+d)n_q)`.
pub fn covering_a2_prime(s: usize, d: usize, q: usize) -> f64 {
    let a1 = covering_a1(s, d, q);
    let (s, d, n) = (s as f64, d as f64, nq(d, q) as f64);
    (5.0 + (10.0 + d) * n) * a1 + (s + 9.0) * (4.0 + (10.0 + d) * n) * (5.0 + (12.0 + d) * n)
}

/// `A_2 = 2A'_2`.
pub fn covering_a2(s: usize, d: usize, q: usize) -> f64 {
    2.0 * covering_a2_prime(s, d, q)
}

/// `A_1 N log(2/η) + A_2 N² log(2(s+1)R)`, a bound on the log covering
/// number of the hypothesis space at scale `η`.
pub fn covering_log_bound(n: usize, r: f64, s: usize, d: usize, q: usize, eta: f64) -> f64 {
    let nf = n as f64;
    covering_a1(s, d, q) * nf * (2.0 / eta).ln()
        + covering_a2(s, d, q) * nf * nf * (2.0 * (s as f64 + 1.0) * r).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ApproxKind {
    Composite { b_hat: f64 },
    Radial { d: usize },
}

/// `4B̂^α |f| N^{-α}` (composite) or `3(1+4d)^α |f| N^{-α}` (radial).
pub fn approx_error_bound(kind: ApproxKind, alpha: f64, seminorm: f64, n: usize) -> f64 {
    let nf = (n as f64).powf(-alpha);
    match kind {
        ApproxKind::Composite { b_hat } => 4.0 * b_hat.powf(alpha) * seminorm * nf,
        ApproxKind::Radial { d } => 3.0 * bhat_radial(d).powf(alpha) * seminorm * nf,
    }
}

pub fn approx_kind_for(spec: &NetworkSpec) -> ApproxKind {
    match spec.meta.kind {
        NetworkKind::Composite => ApproxKind::Composite {
            b_hat: spec.meta.b_hat,
        },
        NetworkKind::Radial => ApproxKind::Radial { d: spec.d },
    }
}

/// `ceil(x)` that ignores floating-point noise just above an integer.
fn ceil_clean(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// `(max{N^{-2α}, N²/m}, ⌈m^{1/(2+2α)}⌉)`.
pub fn generalization_shape(m: usize, n: usize, alpha: f64) -> (f64, usize) {
    let nf = n as f64;
    let shape = nf.powf(-2.0 * alpha).max(nf * nf / m as f64);
    let n_star = ceil_clean((m as f64).powf(1.0 / (2.0 + 2.0 * alpha))).max(1);
    (shape, n_star)
}

/// Bound values for one configuration. Fields listed in `log_fields` hold
/// natural logarithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    #[serde(rename = "B_hat")]
    pub b_hat: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "A1")]
    pub a1: f64,
    #[serde(rename = "A2")]
    pub a2: f64,
    pub covering_log: f64,
    pub bias_bound_log: f64,
    pub approx_bound: f64,
    pub gen_bound: f64,
    pub n_star: usize,
    pub param_bound: usize,
    pub log_fields: Vec<String>,
}

/// Report for a built network, with sample size `m` and covering scale `eta`.
pub fn bound_report(spec: &NetworkSpec, alpha: f64, seminorm: f64, m: usize, eta: f64) -> BoundReport {
    let r = radius_for(spec);
    let q = spec.meta.q;
    let (gen_bound, n_star) = generalization_shape(m, spec.n, alpha);
    BoundReport {
        b_hat: spec.meta.b_hat,
        r,
        a1: covering_a1(spec.s, spec.d, q),
        a2: covering_a2(spec.s, spec.d, q),
        covering_log: covering_log_bound(spec.n, r, spec.s, spec.d, q, eta),
        bias_bound_log: bias_bound_log(spec.j2 + 1, spec.s, r),
        approx_bound: approx_error_bound(approx_kind_for(spec), alpha, seminorm, spec.n),
        gen_bound,
        n_star,
        param_bound: param_bound_for(spec),
        log_fields: vec!["covering_log".into(), "bias_bound_log".into()],
    }
}
