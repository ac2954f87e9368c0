//! Assembly of complete networks for composite targets `f(Q(x))` and
//! radial targets `f(|x|²)`.
//!
//! A network has two convolutional groups. The first (absent in the radial
//! case) realizes the linear features `ξ_k·x` through a factorized stacked
//! filter and ends with downsampling. The second realizes the ridge-ReLU
//! array `σ(ξ_k·x - t_j)` through a factorized `W^{[1]}`. A fully connected
//! layer then forms `σ(Q̂(x) - B̂ t_j)` and the output is `c·h`.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::polyfactor::{factorize_filter, factorize_w1};
use crate::ridge::{nq, solve_beta, sup_norm_q, BetaCoeffs, FeaturePolynomial, RidgeBasis};
use crate::sequences::{convolve_slices, ConvLayerSpec, Filter};
use crate::spline::{knot, lcal_n, v_ell};

pub const SPEC_VERSION: u32 = 1;
/// Sample count for the `B_Q` estimate.
pub const BQ_SAMPLES: usize = 4096;

/// How the bias shifts `κ_j` that keep pre-activations nonnegative are
/// chosen. Layer `j` gets `b^(j) = κ_{j-1} T^(j) 1 - κ_j 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftRule {
    /// `κ_j = Π_{p<=j} ‖w^(p)‖_1` (times `B` in the second group).
    ProductOfNorms,
    /// `κ_j = ‖w^(j) * ... * w^(1)‖_1` (times `B` in the second group).
    #[default]
    AccumulatedNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    Composite,
    Radial,
}

/// Named univariate target families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FunctionDescriptor {
    Identity,
    Sqrt,
    AbsShift { shift: f64 },
    Constant { value: f64 },
}

impl FunctionDescriptor {
    fn raw(&self, u: f64) -> f64 {
        match *self {
            FunctionDescriptor::Identity => u,
            FunctionDescriptor::Sqrt => u.max(0.0).sqrt(),
            FunctionDescriptor::AbsShift { shift } => (u - shift).abs(),
            FunctionDescriptor::Constant { value } => value,
        }
    }
}

type Custom = std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A univariate target on a closed interval, extended as a constant
/// outside it.
#[derive(Clone)]
pub struct TargetFunction {
    pub descriptor: Option<FunctionDescriptor>,
    custom: Option<Custom>,
    pub domain: (f64, f64),
    pub alpha: f64,
    pub seminorm: f64,
    pub sup_norm: f64,
    /// Whether `seminorm` and `sup_norm` are sampled estimates.
    pub estimated: bool,
}

impl std::fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TargetFunction")
            .field("descriptor", &self.descriptor)
            .field("domain", &self.domain)
            .field("alpha", &self.alpha)
            .field("seminorm", &self.seminorm)
            .field("sup_norm", &self.sup_norm)
            .field("estimated", &self.estimated)
            .finish()
    }
}

impl TargetFunction {
    /// Exact constants for a named family on `[lo, hi]`.
    pub fn from_descriptor(desc: FunctionDescriptor, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return param(format!("empty domain [{lo}, {hi}]"));
        }
        let (alpha, seminorm, sup_norm) = match desc {
            FunctionDescriptor::Identity => (1.0, 1.0, lo.abs().max(hi.abs())),
            FunctionDescriptor::Sqrt => {
                if lo < 0.0 {
                    return param("sqrt target needs a nonnegative domain");
                }
                (0.5, 1.0, hi.sqrt())
            }
            FunctionDescriptor::AbsShift { shift } => {
                (1.0, 1.0, (lo - shift).abs().max((hi - shift).abs()))
            }
            FunctionDescriptor::Constant { value } => (1.0, 0.0, value.abs()),
        };
        Ok(TargetFunction {
            descriptor: Some(desc),
            custom: None,
            domain: (lo, hi),
            alpha,
            seminorm,
            sup_norm,
            estimated: false,
        })
    }

    /// Arbitrary function with Hölder exponent `alpha`. The semi-norm and
    /// sup-norm are estimated from divided differences on a uniform grid.
    pub fn custom(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        alpha: f64,
        lo: f64,
        hi: f64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return param(format!("Hölder exponent must lie in (0, 1], got {alpha}"));
        }
        if !(lo < hi) {
            return param(format!("empty domain [{lo}, {hi}]"));
        }
        const GRID: usize = 2000;
        let pts: Vec<f64> = (0..=GRID)
            .map(|i| lo + (hi - lo) * i as f64 / GRID as f64)
            .collect();
        let vals: Vec<f64> = pts.iter().map(|&u| f(u)).collect();
        let sup_norm = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut seminorm = 0.0f64;
        for gap in [1, 2, 5, 10, 50, 200, GRID] {
            for i in 0..pts.len().saturating_sub(gap) {
                let h = (pts[i + gap] - pts[i]).powf(alpha);
                seminorm = seminorm.max((vals[i + gap] - vals[i]).abs() / h);
            }
        }
        Ok(TargetFunction {
            descriptor: None,
            custom: Some(std::sync::Arc::new(f)),
            domain: (lo, hi),
            alpha,
            seminorm,
            sup_norm,
            estimated: true,
        })
    }

    pub fn eval(&self, u: f64) -> f64 {
        let u = u.clamp(self.domain.0, self.domain.1);
        match (&self.custom, &self.descriptor) {
            (Some(f), _) => f(u),
            (None, Some(d)) => d.raw(u),
            (None, None) => unreachable!("target without evaluator"),
        }
    }

    /// Same function on a new domain.
    pub fn with_domain(&self, lo: f64, hi: f64) -> Result<Self> {
        match (self.descriptor, &self.custom) {
            (Some(d), None) => TargetFunction::from_descriptor(d, lo, hi),
            _ => {
                let f = self.custom.clone().expect("custom evaluator");
                TargetFunction::custom(move |u| f(u), self.alpha, lo, hi)
            }
        }
    }
}

/// Fully connected weights `F^{[J₂+1]}`: one row shared by all `2N+3`
/// outputs, or explicit rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FcWeights {
    #[serde(rename = "fc_row")]
    Row(Vec<f64>),
    #[serde(rename = "fc_rows")]
    Rows(Vec<Vec<f64>>),
}

impl FcWeights {
    pub fn row(&self, i: usize) -> &[f64] {
        match self {
            FcWeights::Row(r) => r,
            FcWeights::Rows(rows) => &rows[i],
        }
    }

    pub fn rows_identical(&self) -> bool {
        match self {
            FcWeights::Row(_) => true,
            FcWeights::Rows(rows) => rows.windows(2).all(|w| w[0] == w[1]),
        }
    }

    pub fn max_row_l1(&self) -> f64 {
        let l1 = |r: &[f64]| r.iter().map(|v| v.abs()).sum::<f64>();
        match self {
            FcWeights::Row(r) => l1(r),
            FcWeights::Rows(rows) => rows.iter().map(|r| l1(r)).fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkMeta {
    pub kind: NetworkKind,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "B_hat")]
    pub b_hat: f64,
    #[serde(rename = "B_Q")]
    pub b_q: f64,
    #[serde(rename = "Q0")]
    pub q0: f64,
    pub q: usize,
    pub n_q: usize,
    /// Rows of the feature array realized by the second group.
    pub n_active: usize,
    pub basis: Option<RidgeBasis>,
    pub beta: Option<BetaCoeffs>,
    pub widths: Vec<usize>,
    pub shift_rule: ShiftRule,
    pub f_sup: f64,
    /// Feature vectors entering the second group, one per input component.
    pub group2_xi: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub version: u32,
    pub d: usize,
    pub s: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "J1")]
    pub j1: usize,
    #[serde(rename = "J2")]
    pub j2: usize,
    pub layers: Vec<ConvLayerSpec>,
    #[serde(flatten)]
    pub fc: FcWeights,
    pub fc_bias: Vec<f64>,
    pub c: Vec<f64>,
    pub meta: NetworkMeta,
}

impl NetworkSpec {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: NetworkSpec = serde_json::from_str(text)?;
        if spec.version != SPEC_VERSION {
            return param(format!("unsupported spec version {}", spec.version));
        }
        Ok(spec)
    }

    /// Width `d_{J₂}` of the last convolutional layer.
    pub fn output_width(&self) -> usize {
        *self.meta.widths.last().expect("widths")
    }
}

/// `J₁ = ⌈(n_q d - 1)/(s - 1)⌉`.
pub fn group1_depth(d: usize, n_q: usize, s: usize) -> usize {
    (n_q * d - 1).div_ceil(s - 1)
}

/// `⌈(2N+3)D/(s-1)⌉`.
pub fn group2_depth(n: usize, width: usize, s: usize) -> usize {
    ((2 * n + 3) * width).div_ceil(s - 1)
}

/// Widths `d_0, ..., d_{J₂}`.
pub fn layer_widths(d: usize, s: usize, j1: usize, j2: usize) -> Vec<usize> {
    let mut w = vec![d];
    for j in 1..=j2 {
        let prev = w[j - 1];
        w.push(if j == j1 { (d + j1 * s) / d } else { prev + s });
    }
    w
}

fn check_span(s: usize, d: usize) -> Result<()> {
    if s < 2 || s > d {
        return param(format!("filter span must satisfy 2 <= s <= d, got s={s}, d={d}"));
    }
    Ok(())
}

/// Bias shifts `κ_1, ..., κ_p` for a chain of filters fed with an input
/// bounded by `scale` in sup norm.
fn shifts(filters: &[Filter], scale: f64, rule: ShiftRule) -> Vec<f64> {
    let mut out = Vec::with_capacity(filters.len());
    match rule {
        ShiftRule::ProductOfNorms => {
            let mut prod = scale;
            for f in filters {
                prod *= f.l1_norm();
                out.push(prod);
            }
        }
        ShiftRule::AccumulatedNorm => {
            let mut acc = vec![1.0];
            for f in filters {
                acc = convolve_slices(&acc, f.coeffs());
                out.push(scale * acc.iter().map(|v| v.abs()).sum::<f64>());
            }
        }
    }
    out
}

/// Layers that carry `y + κ_in 1` to `T^{P} y + κ_j 1` at each step.
fn shifted_layers(filters: &[Filter], input_width: usize, kappa_in: f64, kappas: &[f64]) -> Vec<ConvLayerSpec> {
    let mut width = input_width;
    let mut prev = kappa_in;
    let mut layers = Vec::with_capacity(filters.len());
    for (f, &kappa) in filters.iter().zip(kappas) {
        let bias = f
            .toeplitz_row_sums(width)
            .into_iter()
            .map(|r| prev * r - kappa)
            .collect();
        layers.push(ConvLayerSpec {
            filter: f.clone(),
            bias,
            downsample_after: false,
        });
        width += f.support_len() - 1;
        prev = kappa;
    }
    layers
}

fn pad_factors(factors: Vec<Filter>, count: usize, s: usize) -> Result<Vec<Filter>> {
    if factors.len() > count {
        return Err(Error::Numerical(format!(
            "factorization produced {} factors, expected at most {count}",
            factors.len()
        )));
    }
    let mut out: Vec<Filter> = factors.iter().map(|f| Filter::padded(f.coeffs(), s + 1)).collect();
    out.resize(count, Filter::padded(&[1.0], s + 1));
    Ok(out)
}

/// First group: output of layer `J₁` is `[ξ_k·x]_{k=1}^{d_{J₁}} + B 1`.
#[derive(Debug, Clone)]
pub struct Group1 {
    pub layers: Vec<ConvLayerSpec>,
    pub b: f64,
    /// `ξ_1, ..., ξ_{d_{J₁}}` with `ξ_k = 0` for `k > n_q`.
    pub extended_xi: Vec<Vec<f64>>,
}

/// Stacked filter `W_{j+(k-1)d} = (ξ_k)_{d-j}`, `0 <= j < d`.
pub fn stacked_filter(basis: &RidgeBasis) -> Filter {
    let d = basis.d;
    let mut w = vec![0.0; basis.n_q * d];
    for (k, xi) in basis.xi.iter().enumerate() {
        for j in 0..d {
            w[j + k * d] = xi[d - 1 - j];
        }
    }
    Filter::new(w)
}

pub fn build_group1(basis: &RidgeBasis, s: usize, rule: ShiftRule) -> Result<Group1> {
    let d = basis.d;
    check_span(s, d)?;
    let j1 = group1_depth(d, basis.n_q, s);
    let w = stacked_filter(basis);
    let fac = factorize_filter(&w, s)?;
    let filters = pad_factors(fac.factors, j1, s)?;
    let kappas = shifts(&filters, 1.0, rule);
    let mut layers = shifted_layers(&filters, d, 0.0, &kappas);
    layers.last_mut().expect("J1 >= 1").downsample_after = true;
    let width = (d + j1 * s) / d;
    let mut extended_xi = basis.xi.clone();
    extended_xi.resize(width, vec![0.0; d]);
    Ok(Group1 {
        layers,
        b: *kappas.last().expect("J1 >= 1"),
        extended_xi,
    })
}

/// Second group for an input `y + input_shift·1` of width `width`, with
/// `|y| <= b` componentwise. Output entry `(j-1)·width + k` is
/// `σ(y_k - t_j)` for `k <= n_active`, `j <= 2N+3`, and zero elsewhere.
pub fn build_group2(
    width: usize,
    n_active: usize,
    n: usize,
    s: usize,
    b: f64,
    input_shift: f64,
    rule: ShiftRule,
) -> Result<Vec<ConvLayerSpec>> {
    if s < 2 {
        return param(format!("filter span must be >= 2, got {s}"));
    }
    if n_active > width {
        return param(format!("{n_active} active rows exceed width {width}"));
    }
    let depth = group2_depth(n, width, s);
    let fac = factorize_w1(n, width, s)?;
    let filters = pad_factors(fac.factors, depth, s)?;
    let kappas = shifts(&filters, b, rule);
    let kappa_in = input_shift;
    let mut layers = shifted_layers(&filters[..depth - 1], width, kappa_in, &kappas[..depth - 1]);
    let last_in = width + (depth - 1) * s;
    let prev = if depth >= 2 { kappas[depth - 2] } else { kappa_in };
    let last = &filters[depth - 1];
    let bias = last
        .toeplitz_row_sums(last_in)
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let (j, k) = (i / width + 1, i % width + 1);
            let shift = if k <= n_active && j <= 2 * n + 3 { knot(n, j) } else { b };
            prev * r + shift
        })
        .collect();
    layers.push(ConvLayerSpec {
        filter: last.clone(),
        bias,
        downsample_after: false,
    });
    Ok(layers)
}

/// `fc_row[(j-1)D + k] = N Σ_ℓ β_{k,ℓ} v^{[ℓ]}_j` and
/// `fc_bias_j = -Q(0) + B̂ t_j`.
pub fn build_fc_layer(
    beta: &BetaCoeffs,
    n: usize,
    q0: f64,
    b_hat: f64,
    width: usize,
    out_width: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let q = beta.q();
    if beta.beta.len() > width || (2 * n + 3) * width > out_width {
        return param("fully connected layout does not fit the layer widths");
    }
    let v: Vec<Vec<f64>> = (1..=q as u32).map(|l| v_ell(l, n)).collect::<Result<_>>()?;
    let nf = n as f64;
    let mut row = vec![0.0; out_width];
    for (k, bk) in beta.beta.iter().enumerate() {
        for j in 0..2 * n + 3 {
            row[j * width + k] = nf * bk.iter().zip(&v).map(|(b, vl)| b * vl[j]).sum::<f64>();
        }
    }
    let bias = (1..=2 * n + 3).map(|j| -q0 + b_hat * knot(n, j)).collect();
    Ok((row, bias))
}

/// `c = (N/B̂) 𝓛_N({f(B̂ t_k)}_{k=2}^{2N+2})`.
pub fn output_coefficients(f: &TargetFunction, n: usize, b_hat: f64) -> Result<Vec<f64>> {
    if n < 1 || !(b_hat > 0.0) {
        return param("output coefficients need N >= 1 and B_hat > 0");
    }
    let samples: Vec<f64> = (2..=2 * n + 2).map(|k| f.eval(b_hat * knot(n, k))).collect();
    let nf = n as f64;
    Ok(lcal_n(&samples)?.into_iter().map(|v| v * nf / b_hat).collect())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions {
    pub shift_rule: ShiftRule,
}

pub fn build_composite_network(
    f: &TargetFunction,
    poly: &FeaturePolynomial,
    s: usize,
    n: usize,
    seed: u64,
) -> Result<NetworkSpec> {
    build_composite_network_with(f, poly, s, n, seed, BuildOptions::default())
}

/// Composite network for `f∘Q`. `f` is re-domained to `[-B_Q, B_Q]`.
pub fn build_composite_network_with(
    f: &TargetFunction,
    poly: &FeaturePolynomial,
    s: usize,
    n: usize,
    seed: u64,
    opts: BuildOptions,
) -> Result<NetworkSpec> {
    let d = poly.dim();
    check_span(s, d)?;
    if n < 1 {
        return param("N must be >= 1");
    }
    let q = poly.degree().max(1);
    let basis = crate::ridge::generate_ridge_basis(d, q, seed)?;
    let beta = solve_beta(poly, &basis)?;
    let b_q = sup_norm_q(poly, BQ_SAMPLES, seed ^ 0x5eed);
    let mut b_hat = crate::bounds::bhat(b_q, q, beta.l1_norm);
    if b_hat == 0.0 {
        // Q ≡ 0: any positive scale bounds Q̂ ≡ 0.
        b_hat = 1.0;
    }
    let f = f.with_domain(-b_q.max(f64::MIN_POSITIVE), b_q.max(f64::MIN_POSITIVE))?;

    let g1 = build_group1(&basis, s, opts.shift_rule)?;
    let j1 = g1.layers.len();
    let width = g1.extended_xi.len();
    let g2 = build_group2(width, basis.n_q, n, s, g1.b, g1.b, opts.shift_rule)?;
    let j2 = j1 + g2.len();
    let widths = layer_widths(d, s, j1, j2);
    let (fc_row, fc_bias) = build_fc_layer(&beta, n, poly.q0(), b_hat, width, widths[j2])?;
    let c = output_coefficients(&f, n, b_hat)?;

    let mut layers = g1.layers;
    layers.extend(g2);
    Ok(NetworkSpec {
        version: SPEC_VERSION,
        d,
        s,
        n,
        j1,
        j2,
        layers,
        fc: FcWeights::Row(fc_row),
        fc_bias,
        c,
        meta: NetworkMeta {
            kind: NetworkKind::Composite,
            b: g1.b,
            b_hat,
            b_q,
            q0: poly.q0(),
            q,
            n_q: basis.n_q,
            n_active: basis.n_q,
            basis: Some(basis),
            beta: Some(beta),
            widths,
            shift_rule: opts.shift_rule,
            f_sup: f.sup_norm,
            group2_xi: g1.extended_xi,
        },
    })
}

pub fn build_radial_network(f: &TargetFunction, d: usize, s: usize, n: usize) -> Result<NetworkSpec> {
    build_radial_network_with(f, d, s, n, BuildOptions::default())
}

/// Radial network for `f(|x|²)`. `f` is re-domained to `[0, 1]`.
pub fn build_radial_network_with(
    f: &TargetFunction,
    d: usize,
    s: usize,
    n: usize,
    opts: BuildOptions,
) -> Result<NetworkSpec> {
    check_span(s, d)?;
    if n < 1 {
        return param("N must be >= 1");
    }
    let f = f.with_domain(0.0, 1.0)?;
    let b_hat = 1.0 + 4.0 * d as f64;
    let layers = build_group2(d, d, n, s, 1.0, 0.0, opts.shift_rule)?;
    let j2 = layers.len();
    let widths = layer_widths(d, s, 0, j2);
    let beta = BetaCoeffs {
        beta: vec![vec![0.0, 1.0]; d],
        l1_norm: d as f64,
    };
    let (fc_row, fc_bias) = build_fc_layer(&beta, n, 0.0, b_hat, d, widths[j2])?;
    let c = output_coefficients(&f, n, b_hat)?;
    let group2_xi = (0..d)
        .map(|k| (0..d).map(|i| if i == k { 1.0 } else { 0.0 }).collect())
        .collect();
    Ok(NetworkSpec {
        version: SPEC_VERSION,
        d,
        s,
        n,
        j1: 0,
        j2,
        layers,
        fc: FcWeights::Row(fc_row),
        fc_bias,
        c,
        meta: NetworkMeta {
            kind: NetworkKind::Radial,
            b: 1.0,
            b_hat,
            b_q: 1.0,
            q0: 0.0,
            q: 2,
            n_q: nq(d, 2),
            n_active: d,
            basis: None,
            beta: Some(beta),
            widths,
            shift_rule: opts.shift_rule,
            f_sup: f.sup_norm,
            group2_xi,
        },
    })
}

/// Per-group free-parameter counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub group1: usize,
    pub group2: usize,
    pub last: usize,
}

impl ParamCount {
    pub fn total(&self) -> usize {
        self.group1 + self.group2 + self.last
    }
}

/// Free parameters of a built network: filter taps and restricted biases
/// in the first group; biases in the second group (its filters are fixed);
/// the knot samples of `f`, plus `β`, `Q(0)` and `B̂` in the composite case.
pub fn count_free_parameters(spec: &NetworkSpec) -> ParamCount {
    let s = spec.s;
    let group1 = (spec.j1) * ((s + 1) + (2 * s + 1));
    let g2_layers = spec.j2 - spec.j1;
    let group2 = if g2_layers == 0 {
        0
    } else {
        (g2_layers - 1) * (2 * s + 1) + spec.output_width()
    };
    let samples = 2 * spec.n + 1;
    let last = match spec.meta.kind {
        NetworkKind::Composite => samples + spec.meta.q * spec.meta.n_q + 2,
        NetworkKind::Radial => samples,
    };
    ParamCount {
        group1,
        group2,
        last,
    }
}

/// Target regime for [`choose_n_for_accuracy`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    Composite { b_hat: f64 },
    Radial { d: usize },
}

/// Smallest `N` from the printed accuracy rule, clamped to at least 1.
pub fn choose_n_for_accuracy(f: &TargetFunction, regime: Regime, eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps <= 1.0) {
        return param(format!("accuracy must lie in (0, 1], got {eps}"));
    }
    let a = f.alpha;
    let raw = match regime {
        Regime::Composite { b_hat } => {
            let c = 4.0 * b_hat.powf(a);
            c.powf(1.0 / a) * f.seminorm.powf(1.0 / a) * eps.powf(-1.0 / a)
        }
        Regime::Radial { d } => {
            (1.0 + 4.0 * d as f64) * (3.0 * f.seminorm).powf(1.0 / a) * eps.powf(-1.0 / a)
        }
    };
    // Guard against ceil(51.000000000000007) style rounding.
    let r = (raw * (1.0 - 4.0 * f64::EPSILON)).ceil();
    Ok((r as usize).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ridge::generate_ridge_basis;

    fn ident(lo: f64, hi: f64) -> TargetFunction {
        TargetFunction::from_descriptor(FunctionDescriptor::Identity, lo, hi).unwrap()
    }

    #[test]
    fn depths_and_widths() {
        assert_eq!(group1_depth(2, 3, 2), 5);
        assert_eq!((2 + 5 * 2) / 2, 6);
        assert_eq!(group1_depth(3, 6, 2), 17);
        assert_eq!((3 + 17 * 2) / 3, 12);
        assert_eq!(group2_depth(8, 4, 2), 76);
        let w = layer_widths(3, 2, 17, 20);
        assert_eq!(w[16], 3 + 16 * 2);
        assert_eq!(w[17], 12);
        assert_eq!(w[20], 18);
    }

    #[test]
    fn stacked_filter_realizes_dot_products() {
        let basis = generate_ridge_basis(3, 2, 3).unwrap();
        let w = stacked_filter(&basis);
        let x = [0.2, -0.5, 0.7];
        let y = convolve_slices(w.coeffs(), &x);
        for k in 1..=basis.n_q {
            let dot: f64 = basis.xi[k - 1].iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!((y[k * 3 - 1] - dot).abs() < 1e-14);
        }
    }

    #[test]
    fn group1_shape() {
        let basis = generate_ridge_basis(2, 2, 1).unwrap();
        let g = build_group1(&basis, 2, ShiftRule::default()).unwrap();
        assert_eq!(g.layers.len(), 5);
        assert_eq!(g.extended_xi.len(), 6);
        assert!(g.layers.iter().all(|l| l.has_equal_middle_bias() && l.span() == 2));
        assert!(g.layers[4].downsample_after);
        assert!(g.b >= 1.0);
    }

    #[test]
    fn product_rule_dominates_accumulated() {
        let basis = generate_ridge_basis(3, 2, 4).unwrap();
        let acc = build_group1(&basis, 2, ShiftRule::AccumulatedNorm).unwrap();
        let prod = build_group1(&basis, 2, ShiftRule::ProductOfNorms).unwrap();
        assert!(acc.b <= prod.b * (1.0 + 1e-12));
        let w = stacked_filter(&basis);
        assert!((acc.b - w.l1_norm()).abs() <= 1e-9 * acc.b);
    }

    #[test]
    fn zero_and_constant_coefficients() {
        let zero = TargetFunction::from_descriptor(FunctionDescriptor::Constant { value: 0.0 }, -1.0, 1.0).unwrap();
        assert!(output_coefficients(&zero, 5, 3.0).unwrap().iter().all(|&c| c == 0.0));
        let one = TargetFunction::from_descriptor(FunctionDescriptor::Constant { value: 1.0 }, -1.0, 1.0).unwrap();
        let c = output_coefficients(&one, 3, 2.0).unwrap();
        let expect = [1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 1.0];
        for (a, e) in c.iter().zip(expect) {
            assert!((a - 1.5 * e).abs() < 1e-15);
        }
        let f = ident(-1.0, 1.0);
        let c = output_coefficients(&f, 4, 9.0).unwrap();
        assert!(c.iter().all(|v| v.abs() <= 16.0 / 9.0));
    }

    #[test]
    fn fc_layer_layout() {
        let beta = BetaCoeffs {
            beta: vec![vec![0.0, 1.0]; 2],
            l1_norm: 2.0,
        };
        let (row, bias) = build_fc_layer(&beta, 2, 0.0, 9.0, 2, 20).unwrap();
        let v2 = v_ell(2, 2).unwrap();
        for j in 0..7 {
            assert_eq!(row[2 * j], 2.0 * v2[j]);
            assert_eq!(row[2 * j + 1], 2.0 * v2[j]);
        }
        assert!(row[14..].iter().all(|&v| v == 0.0));
        assert_eq!(bias[1], -9.0);
        let l1: f64 = row.iter().map(|v| v.abs()).sum();
        assert!(l1 <= 4.0 * 2.0 * 7.0 * 2.0);
    }

    #[test]
    fn parameter_counts() {
        let f = ident(0.0, 1.0);
        let spec = build_radial_network(&f, 4, 2, 8).unwrap();
        assert_eq!(spec.j2, 76);
        let c = count_free_parameters(&spec);
        assert_eq!(c.total(), 4 + 7 * 76 - 5 + 17);
        assert!(c.total() <= 555);

        let poly = FeaturePolynomial::new(
            3,
            [(vec![1, 1, 0], 1.0), (vec![0, 0, 2], 1.0)],
        )
        .unwrap();
        let spec = build_composite_network(&ident(-1.0, 1.0), &poly, 2, 4, 0).unwrap();
        let c = count_free_parameters(&spec);
        assert_eq!(spec.j1, 17);
        assert_eq!(spec.meta.widths[17], 12);
        assert_eq!(c.group1, 136);
        assert_eq!(c.group2, 931);
        assert_eq!(c.last, 23);
        assert!(c.total() <= 1269);
    }

    #[test]
    fn counts_monotone_in_n() {
        let f = ident(0.0, 1.0);
        let mut prev = 0;
        for n in 1..8 {
            let t = count_free_parameters(&build_radial_network(&f, 2, 2, n).unwrap()).total();
            assert!(t > prev);
            prev = t;
        }
    }

    #[test]
    fn choose_n_examples() {
        let f = ident(0.0, 1.0);
        assert_eq!(choose_n_for_accuracy(&f, Regime::Radial { d: 4 }, 1.0).unwrap(), 51);
        assert_eq!(choose_n_for_accuracy(&f, Regime::Composite { b_hat: 9.0 }, 0.5).unwrap(), 72);
        let tiny = TargetFunction::custom(|u| 1e-6 * u, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(choose_n_for_accuracy(&tiny, Regime::Composite { b_hat: 1.0 }, 1.0).unwrap(), 1);
        assert!(choose_n_for_accuracy(&f, Regime::Radial { d: 4 }, 0.0).is_err());
        assert!(choose_n_for_accuracy(&f, Regime::Radial { d: 4 }, 1.5).is_err());
    }

    #[test]
    fn span_validation() {
        let f = ident(0.0, 1.0);
        assert!(build_radial_network(&f, 2, 3, 2).is_err());
        assert!(build_radial_network(&f, 2, 1, 2).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let f = ident(0.0, 1.0);
        let spec = build_radial_network(&f, 2, 2, 2).unwrap();
        let text = spec.to_json().unwrap();
        assert!(text.contains("\"fc_row\""));
        assert!(text.contains("\"downsample\""));
        let back = NetworkSpec::from_json(&text).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn custom_function_estimates() {
        let f = TargetFunction::custom(|u: f64| (u - 0.25).abs(), 1.0, -1.0, 1.0).unwrap();
        assert!(f.estimated);
        assert!((f.seminorm - 1.0).abs() < 1e-9);
        assert!((f.sup_norm - 1.25).abs() < 1e-12);
        assert_eq!(f.eval(5.0), 0.75);
    }
}
