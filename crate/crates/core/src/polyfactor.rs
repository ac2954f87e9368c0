//! Factorization of a long filter into a convolution of short filters.
//!
//! Convolution of filters is multiplication of their symbols
//! `w̃(z) = Σ w_k z^k`, so a long filter splits into short ones by grouping
//! the roots of its symbol. Real roots give linear factors and conjugate
//! pairs give real quadratics; these are packed greedily into factors of
//! degree at most `s` after a Leja ordering, which keeps the partial
//! products (and therefore the intermediate layer activations) small.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequences::{convolve_all, Filter};

/// Relative reconstruction tolerance for general filters.
pub const RESIDUAL_TOLERANCE: f64 = 1e-6;

const SCHUR_MAX_ITER: usize = 10_000;
const ABERTH_MAX_ITER: usize = 60;

/// A filter factored as `factors[p-1] * ... * factors[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factorization {
    pub factors: Vec<Filter>,
    /// Index of the factor that carries the leading coefficient of `W`.
    pub scale_carrier_index: usize,
    /// `‖factors[p-1] * ... * factors[0] - W‖_∞`.
    pub residual: f64,
}

impl Factorization {
    pub fn reconstruct(&self) -> Filter {
        convolve_all(&self.factors)
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }
}

/// Real root or a conjugate pair, the irreducible real factors of a symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
enum RootItem {
    Real(f64),
    /// Represented by the member with positive imaginary part.
    Pair(Complex<f64>),
}

impl RootItem {
    fn degree(self) -> usize {
        match self {
            RootItem::Real(_) => 1,
            RootItem::Pair(_) => 2,
        }
    }

    fn roots(self) -> impl Iterator<Item = Complex<f64>> {
        let (a, b) = match self {
            RootItem::Real(r) => (Complex::new(r, 0.0), None),
            RootItem::Pair(z) => (z, Some(z.conj())),
        };
        std::iter::once(a).chain(b)
    }

    /// Monic real factor with these roots, low degree first.
    fn monic_coeffs(self) -> Vec<f64> {
        match self {
            RootItem::Real(r) => vec![-r, 1.0],
            RootItem::Pair(z) => vec![z.norm_sqr(), -2.0 * z.re, 1.0],
        }
    }
}

fn horner(coeffs: &[f64], z: Complex<f64>) -> (Complex<f64>, Complex<f64>) {
    let mut p = Complex::new(0.0, 0.0);
    let mut dp = Complex::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Relative backward error `|p(z)| / Σ |a_k| |z|^k`.
fn backward_error(coeffs: &[f64], z: Complex<f64>) -> f64 {
    let (p, _) = horner(coeffs, z);
    let r = z.norm();
    let scale = coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.abs());
    if scale == 0.0 {
        0.0
    } else {
        p.norm() / scale
    }
}

fn worst_backward_error(coeffs: &[f64], roots: &[Complex<f64>]) -> f64 {
    roots
        .iter()
        .map(|&z| backward_error(coeffs, z))
        .fold(0.0, f64::max)
}

fn companion_roots(coeffs: &[f64]) -> Result<Vec<Complex<f64>>> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        m[(0, j)] = -coeffs[n - 1 - j] / lead;
    }
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    balance(&mut m);
    let schur = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Numerical(format!("eigenvalue iteration did not converge (degree {n})")))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Diagonal similarity scaling that equalizes row and column norms.
fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    const RADIX: f64 = 2.0;
    loop {
        let mut converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut cc = c;
            let mut rr = r;
            while cc < rr / RADIX {
                cc *= RADIX;
                rr /= RADIX;
                f *= RADIX;
            }
            while cc > rr * RADIX {
                cc /= RADIX;
                rr *= RADIX;
                f /= RADIX;
            }
            if (cc + rr) < 0.95 * s {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
        if converged {
            break;
        }
    }
}

/// Simultaneous Aberth–Ehrlich refinement of all roots.
fn aberth_polish(coeffs: &[f64], roots: &mut [Complex<f64>]) {
    let n = roots.len();
    for _ in 0..ABERTH_MAX_ITER {
        let mut biggest_step: f64 = 0.0;
        for i in 0..n {
            let z = roots[i];
            let (p, dp) = horner(coeffs, z);
            if p.norm() == 0.0 || dp.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let mut sum = Complex::new(0.0, 0.0);
            for (j, &zj) in roots.iter().enumerate() {
                if j != i && zj != z {
                    sum += (z - zj).inv();
                }
            }
            let step = ratio / (Complex::new(1.0, 0.0) - ratio * sum);
            if !step.re.is_finite() || !step.im.is_finite() {
                continue;
            }
            roots[i] = z - step;
            biggest_step = biggest_step.max(step.norm() / z.norm().max(1.0));
        }
        if biggest_step <= 4.0 * f64::EPSILON {
            break;
        }
    }
}

/// Aberth iteration started from points on a circle, used when the
/// eigenvalue route stalls.
fn aberth_from_circle(coeffs: &[f64]) -> Result<Vec<Complex<f64>>> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n].abs();
    let c0 = coeffs[0].abs();
    let radius = if c0 > 0.0 { (c0 / lead).powf(1.0 / n as f64) } else { 1.0 };
    let mut roots: Vec<Complex<f64>> = (0..n)
        .map(|k| Complex::from_polar(radius, 2.0 * PI * (k as f64 + 0.4) / n as f64 + 0.3))
        .collect();
    for _ in 0..20 {
        aberth_polish(coeffs, &mut roots);
    }
    let ok = roots.iter().all(|z| z.re.is_finite() && z.im.is_finite())
        && worst_backward_error(coeffs, &roots) <= 1e-10;
    if ok {
        Ok(roots)
    } else {
        Err(Error::Numerical(format!(
            "root iteration did not converge (degree {n})"
        )))
    }
}

/// All complex roots of the symbol of `w`, with multiplicity.
///
/// Roots of a real filter come back exactly closed under conjugation.
pub fn symbol_roots(w: &Filter) -> Result<Vec<Complex<f64>>> {
    let items = root_items(w)?;
    Ok(items.into_iter().flat_map(RootItem::roots).collect())
}

fn root_items(w: &Filter) -> Result<Vec<RootItem>> {
    let w = w.normalized();
    let coeffs = w.coeffs();
    if coeffs.len() < 2 {
        return Ok(Vec::new());
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("non-finite filter coefficient".into()));
    }
    // Exact zeros at the low end are roots at the origin.
    let zeros = coeffs.iter().take_while(|&&c| c == 0.0).count();
    let rest = &coeffs[zeros..];
    let mut items: Vec<RootItem> = std::iter::repeat_n(RootItem::Real(0.0), zeros).collect();
    if rest.len() < 2 {
        return Ok(items);
    }
    let initial = match companion_roots(rest) {
        Ok(r) => r,
        Err(_) => aberth_from_circle(rest)?,
    };
    let mut polished = initial.clone();
    aberth_polish(rest, &mut polished);
    let polished_ok = polished.iter().all(|z| z.re.is_finite() && z.im.is_finite());
    let roots = if polished_ok
        && worst_backward_error(rest, &polished) <= worst_backward_error(rest, &initial)
    {
        polished
    } else {
        initial
    };
    items.extend(pair_conjugates(&roots));
    Ok(items)
}

/// Splits roots into real roots and conjugate pairs.
fn pair_conjugates(roots: &[Complex<f64>]) -> Vec<RootItem> {
    let tol = |z: Complex<f64>| 1e-10 * z.norm().max(1.0);
    let mut reals = Vec::new();
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for &z in roots {
        if z.im.abs() <= tol(z) {
            reals.push(z.re);
        } else if z.im > 0.0 {
            upper.push(z);
        } else {
            lower.push(z);
        }
    }
    let mut items: Vec<RootItem> = Vec::with_capacity(roots.len());
    let mut used = vec![false; lower.len()];
    for z in upper {
        let best = lower
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .min_by(|(_, a), (_, b)| {
                (z - a.conj())
                    .norm()
                    .total_cmp(&(z - b.conj()).norm())
            })
            .map(|(j, _)| j);
        match best {
            Some(j) => {
                used[j] = true;
                let partner = lower[j].conj();
                items.push(RootItem::Pair((z + partner) * 0.5));
            }
            None => reals.push(z.re),
        }
    }
    for (j, z) in lower.iter().enumerate() {
        if !used[j] {
            reals.push(z.re);
        }
    }
    items.extend(reals.into_iter().map(RootItem::Real));
    items
}

/// Greedy Leja ordering: start from the root of largest modulus, then keep
/// taking the item farthest (in product of distances) from those chosen.
fn leja_order(mut items: Vec<RootItem>) -> Vec<RootItem> {
    if items.len() <= 1 {
        return items;
    }
    let start = items
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| {
            let ka = a.roots().next().unwrap();
            let kb = b.roots().next().unwrap();
            ka.norm()
                .total_cmp(&kb.norm())
                .then(ka.re.total_cmp(&kb.re))
        })
        .map(|(i, _)| i)
        .unwrap();
    let mut ordered = Vec::with_capacity(items.len());
    ordered.push(items.swap_remove(start));
    let mut scores = vec![0.0f64; items.len()];
    let mut last = ordered[0];
    while !items.is_empty() {
        for (score, item) in scores.iter_mut().zip(&items) {
            for c in last.roots() {
                for r in item.roots() {
                    *score += (r - c).norm().max(1e-300).ln();
                }
            }
        }
        let pick = scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        last = items.swap_remove(pick);
        scores.swap_remove(pick);
        ordered.push(last);
    }
    ordered
}

/// Packs ordered items into monic factors of degree at most `s`. Every
/// factor except the last reaches degree at least `s - 1`.
fn pack(items: &[RootItem], s: usize) -> Vec<Vec<f64>> {
    let mut factors = Vec::new();
    let mut current = vec![1.0];
    let mut degree = 0;
    for &item in items {
        if degree + item.degree() > s {
            factors.push(std::mem::replace(&mut current, vec![1.0]));
            degree = 0;
        }
        current = crate::sequences::convolve_slices(&current, &item.monic_coeffs());
        degree += item.degree();
    }
    if degree > 0 {
        factors.push(current);
    }
    factors
}

fn assemble(w: &Filter, items: Vec<RootItem>, s: usize, tolerance: f64) -> Result<Factorization> {
    let lead = *w.coeffs().last().unwrap();
    let ordered = leja_order(items);
    let mut monic = pack(&ordered, s);
    if monic.is_empty() {
        monic.push(vec![1.0]);
    }
    let factors: Vec<Filter> = monic
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            if i == 0 {
                Filter::new(c.iter().map(|v| v * lead).collect())
            } else {
                Filter::new(c)
            }
        })
        .collect();
    let recon = convolve_all(&factors);
    let residual = max_abs_diff(recon.coeffs(), w.coeffs());
    let limit = tolerance * w.sup_norm();
    if !(residual <= limit) {
        return Err(Error::Conditioning {
            residual,
            tolerance: limit,
        });
    }
    Ok(Factorization {
        factors,
        scale_carrier_index: 0,
        residual,
    })
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

/// Factors `w` into short filters each supported in `{0, ..., s}`, with at
/// most `⌈M/(s-1)⌉` factors where `M = deg w`.
pub fn factorize_filter(w: &Filter, s: usize) -> Result<Factorization> {
    if s < 2 {
        return Err(Error::Parameter(format!("filter span s must be >= 2, got {s}")));
    }
    let w = w.normalized();
    if w.is_short(s) {
        return Ok(Factorization {
            factors: vec![w],
            scale_carrier_index: 0,
            residual: 0.0,
        });
    }
    let items = root_items(&w)?;
    assemble(&w, items, s, RESIDUAL_TOLERANCE)
}

/// Upper bound on the number of factors: `⌈M/(s-1)⌉`.
pub fn max_factor_count(degree: usize, s: usize) -> usize {
    degree.div_ceil(s - 1)
}

/// `1 + max_{j<K} |w_j / w_K|`; every root of the symbol lies in the closed
/// disk of this radius.
pub fn cauchy_bound(w: &Filter) -> f64 {
    let w = w.normalized();
    let c = w.coeffs();
    let lead = *c.last().unwrap();
    if c.len() == 1 || lead == 0.0 {
        return 1.0;
    }
    1.0 + c[..c.len() - 1]
        .iter()
        .map(|v| (v / lead).abs())
        .fold(0.0, f64::max)
}

/// Checks that every factor, normalized to be monic, has coefficients of
/// magnitude at most `s^{s/2} (1 + ‖w‖_∞)^s` where `w` is `w_orig`
/// normalized to be monic.
pub fn factor_coefficient_certificate(fac: &Factorization, w_orig: &Filter, s: usize) -> bool {
    let w = w_orig.normalized();
    let lead = *w.coeffs().last().unwrap();
    if lead == 0.0 {
        return false;
    }
    let sup = w.sup_norm() / lead.abs();
    let sf = s as f64;
    let bound = sf.powf(sf / 2.0) * (1.0 + sup).powi(s as i32);
    let slack = bound * (1.0 + 1e-12);
    fac.factors.iter().all(|f| {
        let c = f.coeffs();
        let fl = *c.last().unwrap();
        fl != 0.0 && c.iter().all(|v| (v / fl).abs() <= slack)
    })
}

/// `W^{[1]}`: ones at indices `0, D, 2D, ..., (2N+3)D`, zeros elsewhere.
pub fn build_w1_sequence(n: usize, width: usize) -> Result<Filter> {
    if n < 1 || width < 1 {
        return Err(Error::Parameter(format!(
            "W^[1] needs N >= 1 and D >= 1, got N={n}, D={width}"
        )));
    }
    let len = (2 * n + 3) * width + 1;
    let mut c = vec![0.0; len];
    for k in 0..=(2 * n + 3) {
        c[k * width] = 1.0;
    }
    Ok(Filter::new(c))
}

/// Closed-form roots of the `W^{[1]}` symbol: `e^{i 2πℓ / (D(2N+4))}` for
/// `1 <= ℓ < D(2N+4)` with `(2N+4) ∤ ℓ`.
pub fn w1_roots(n: usize, width: usize) -> Vec<Complex<f64>> {
    let period = width * (2 * n + 4);
    (1..period)
        .filter(|l| l % (2 * n + 4) != 0)
        .map(|l| Complex::from_polar(1.0, 2.0 * PI * l as f64 / period as f64))
        .collect()
}

fn w1_items(n: usize, width: usize) -> Vec<RootItem> {
    let period = width * (2 * n + 4);
    let mut items = Vec::new();
    for l in 1..period {
        if l % (2 * n + 4) == 0 || 2 * l > period {
            continue;
        }
        if 2 * l == period {
            items.push(RootItem::Real(-1.0));
        } else {
            let theta = 2.0 * PI * l as f64 / period as f64;
            items.push(RootItem::Pair(Complex::new(theta.cos(), theta.sin())));
        }
    }
    items
}

/// Factors `W^{[1]}` using its closed-form roots.
pub fn factorize_w1(n: usize, width: usize, s: usize) -> Result<Factorization> {
    if s < 2 {
        return Err(Error::Parameter(format!("filter span s must be >= 2, got {s}")));
    }
    let w = build_w1_sequence(n, width)?;
    if w.is_short(s) {
        return Ok(Factorization {
            factors: vec![w],
            scale_carrier_index: 0,
            residual: 0.0,
        });
    }
    assemble(&w, w1_items(n, width), s, 1e-10)
}
