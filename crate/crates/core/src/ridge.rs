//! Ridge bases and ridge decompositions of multivariate polynomials.
//!
//! A ridge basis `ξ_1, ..., ξ_{n_q}` is a set of unit vectors whose powers
//! `(ξ_k·x)^ℓ` span the homogeneous polynomials of degree `ℓ` for every
//! `ℓ <= q`. Any `Q` of degree `q` then decomposes as
//! `Q(x) = Q(0) + Σ_{k,ℓ} β_{k,ℓ} (ξ_k·x)^ℓ`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of resampling rounds in [`generate_ridge_basis`].
pub const MAX_BASIS_ATTEMPTS: usize = 32;
/// Relative singular-value floor for the spanning check.
pub const RANK_TOLERANCE: f64 = 1e-9;
pub const BETA_RESIDUAL_TOLERANCE: f64 = 1e-9;

pub fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k.min(n));
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Dimension of the homogeneous polynomials of degree `q` in `d` variables.
pub fn nq(d: usize, q: usize) -> usize {
    binomial(d - 1 + q, q)
}

/// All multi-indices of total degree `ell` in `d` variables, in
/// lexicographically decreasing order.
pub fn multi_indices(d: usize, ell: u32) -> Vec<Vec<u32>> {
    fn rec(d: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == d {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in (0..=left).rev() {
            prefix.push(a);
            rec(d, left - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if d > 0 {
        rec(d, ell, &mut Vec::with_capacity(d), &mut out);
    }
    out
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Coefficient of `x^α` in `(ξ·x)^{|α|}`.
fn multinomial_term(xi: &[f64], alpha: &[u32]) -> f64 {
    let ell: u32 = alpha.iter().sum();
    let coef = factorial(ell) / alpha.iter().map(|&a| factorial(a)).product::<f64>();
    coef * xi
        .iter()
        .zip(alpha)
        .map(|(x, &a)| x.powi(a as i32))
        .product::<f64>()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn euclid_norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeBasis {
    /// `n_q` rows of length `d`, each of unit Euclidean norm.
    pub xi: Vec<Vec<f64>>,
    pub d: usize,
    pub q: usize,
    pub n_q: usize,
}

impl RidgeBasis {
    /// Validates unit norms and the spanning property at every degree.
    pub fn from_rows(xi: Vec<Vec<f64>>, q: usize) -> Result<Self> {
        let d = xi.first().map_or(0, Vec::len);
        if d == 0 || q == 0 {
            return Err(Error::Parameter("ridge basis needs d >= 1 and q >= 1".into()));
        }
        let n_q = nq(d, q);
        if xi.len() != n_q {
            return Err(Error::Dimension {
                expected: n_q,
                got: xi.len(),
            });
        }
        for row in &xi {
            if row.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: row.len(),
                });
            }
            if (euclid_norm(row) - 1.0).abs() > 1e-12 {
                return Err(Error::Parameter("ridge vectors must have unit norm".into()));
            }
        }
        let basis = RidgeBasis { xi, d, q, n_q };
        if !basis.spans_all_degrees() {
            return Err(Error::Parameter("ridge vectors do not span every degree".into()));
        }
        Ok(basis)
    }

    /// Columns index basis vectors, rows index monomials of degree `ell`.
    pub fn expansion_matrix(&self, ell: u32) -> DMatrix<f64> {
        let alphas = multi_indices(self.d, ell);
        DMatrix::from_fn(alphas.len(), self.n_q, |r, k| {
            multinomial_term(&self.xi[k], &alphas[r])
        })
    }

    pub fn rank_at(&self, ell: u32) -> usize {
        let m = self.expansion_matrix(ell);
        let sv = m.singular_values();
        let top = sv.max();
        sv.iter().filter(|&&v| v > RANK_TOLERANCE * top).count()
    }

    pub fn spans_all_degrees(&self) -> bool {
        (1..=self.q as u32).all(|ell| self.rank_at(ell) == nq(self.d, ell as usize))
    }

    /// First nonzero entry of the last basis vector.
    pub fn last_leading_entry(&self) -> f64 {
        self.xi
            .last()
            .and_then(|r| r.iter().copied().find(|&v| v != 0.0))
            .unwrap_or(0.0)
    }

    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        self.xi.iter().map(|r| dot(r, x)).collect()
    }
}

/// Uniform direction on the unit sphere.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = euclid_norm(&v);
        if n > 1e-8 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Uniform point of the closed unit ball.
pub fn random_ball_point<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    let dir = random_unit_vector(rng, d);
    let r: f64 = rng.random::<f64>().powf(1.0 / d as f64);
    dir.into_iter().map(|x| x * r).collect()
}

/// Seeded random basis, resampled until it spans every degree `ℓ <= q`.
pub fn generate_ridge_basis(d: usize, q: usize, seed: u64) -> Result<RidgeBasis> {
    if d == 0 || q == 0 {
        return Err(Error::Parameter("ridge basis needs d >= 1 and q >= 1".into()));
    }
    let n_q = nq(d, q);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_BASIS_ATTEMPTS {
        let xi: Vec<Vec<f64>> = (0..n_q).map(|_| random_unit_vector(&mut rng, d)).collect();
        let basis = RidgeBasis { xi, d, q, n_q };
        if basis.spans_all_degrees() {
            return Ok(basis);
        }
    }
    Err(Error::Generation {
        attempts: MAX_BASIS_ATTEMPTS,
    })
}

/// Polynomial stored as a map from multi-index to coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>", into = "BTreeMap<String, f64>")]
pub struct FeaturePolynomial {
    d: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl TryFrom<BTreeMap<String, f64>> for FeaturePolynomial {
    type Error = Error;

    fn try_from(map: BTreeMap<String, f64>) -> Result<Self> {
        let mut terms = Vec::with_capacity(map.len());
        for (k, v) in map {
            let alpha: Vec<u32> = serde_json::from_str(&k)
                .map_err(|e| Error::Parameter(format!("bad multi-index {k:?}: {e}")))?;
            terms.push((alpha, v));
        }
        let d = terms.first().map_or(0, |(a, _)| a.len());
        FeaturePolynomial::new(d, terms)
    }
}

impl From<FeaturePolynomial> for BTreeMap<String, f64> {
    fn from(p: FeaturePolynomial) -> Self {
        p.terms
            .into_iter()
            .map(|(a, v)| (serde_json::to_string(&a).expect("multi-index"), v))
            .collect()
    }
}

impl FeaturePolynomial {
    pub fn new(d: usize, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Parameter("polynomial needs d >= 1".into()));
        }
        let mut map = BTreeMap::new();
        for (alpha, v) in terms {
            if alpha.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: alpha.len(),
                });
            }
            *map.entry(alpha).or_insert(0.0) += v;
        }
        map.retain(|_, v| *v != 0.0);
        Ok(FeaturePolynomial { d, terms: map })
    }

    /// `|x|²` in `d` variables.
    pub fn norm_squared(d: usize) -> Self {
        let terms = (0..d).map(|i| {
            let mut a = vec![0; d];
            a[i] = 2;
            (a, 1.0)
        });
        FeaturePolynomial::new(d, terms).expect("valid")
    }

    pub fn constant(d: usize, value: f64) -> Self {
        FeaturePolynomial::new(d, [(vec![0; d], value)]).expect("valid")
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|a| a.iter().sum::<u32>() as usize)
            .max()
            .unwrap_or(0)
    }

    /// `Q(0)`.
    pub fn q0(&self) -> f64 {
        self.terms.get(&vec![0; self.d]).copied().unwrap_or(0.0)
    }

    pub fn coefficient(&self, alpha: &[u32]) -> f64 {
        self.terms.get(alpha).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &f64)> {
        self.terms.iter()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(a, c)| {
                c * a
                    .iter()
                    .zip(x)
                    .map(|(&p, xi)| xi.powi(p as i32))
                    .product::<f64>()
            })
            .sum()
    }

    /// Coefficients of the degree-`ell` part in [`multi_indices`] order.
    pub fn homogeneous_part(&self, ell: u32) -> Vec<f64> {
        multi_indices(self.d, ell)
            .iter()
            .map(|a| self.coefficient(a))
            .collect()
    }
}

/// `β_{k,ℓ}` stored as `beta[k][ℓ-1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaCoeffs {
    pub beta: Vec<Vec<f64>>,
    pub l1_norm: f64,
}

impl BetaCoeffs {
    pub fn zeros(n_q: usize, q: usize) -> Self {
        BetaCoeffs {
            beta: vec![vec![0.0; q]; n_q],
            l1_norm: 0.0,
        }
    }

    pub fn get(&self, k: usize, ell: usize) -> f64 {
        self.beta[k][ell - 1]
    }

    pub fn q(&self) -> usize {
        self.beta.first().map_or(0, Vec::len)
    }

    /// `Q(0) + Σ β_{k,ℓ} (ξ_k·x)^ℓ`.
    pub fn reconstruct(&self, basis: &RidgeBasis, q0: f64, x: &[f64]) -> f64 {
        let feats = basis.features(x);
        q0 + self
            .beta
            .iter()
            .zip(&feats)
            .map(|(row, f)| {
                row.iter()
                    .enumerate()
                    .map(|(l, b)| b * f.powi(l as i32 + 1))
                    .sum::<f64>()
            })
            .sum::<f64>()
    }
}

/// Minimum-norm least squares solve of the ridge decomposition, one degree
/// at a time on exact multinomial coefficients.
pub fn solve_beta(poly: &FeaturePolynomial, basis: &RidgeBasis) -> Result<BetaCoeffs> {
    if poly.dim() != basis.d {
        return Err(Error::Dimension {
            expected: basis.d,
            got: poly.dim(),
        });
    }
    if poly.degree() > basis.q {
        return Err(Error::Parameter(format!(
            "polynomial degree {} exceeds basis degree {}",
            poly.degree(),
            basis.q
        )));
    }
    let mut out = BetaCoeffs::zeros(basis.n_q, basis.q);
    for ell in 1..=basis.q as u32 {
        let target = DVector::from_vec(poly.homogeneous_part(ell));
        if target.iter().all(|&v| v == 0.0) {
            continue;
        }
        let e = basis.expansion_matrix(ell);
        let svd = e.clone().svd(true, true);
        let tol = RANK_TOLERANCE * svd.singular_values.max();
        let sol = svd.solve(&target, tol).map_err(|e| Error::Numerical(e.to_string()))?;
        let residual = (&e * &sol - &target).amax();
        if residual > BETA_RESIDUAL_TOLERANCE * target.amax().max(1.0) {
            return Err(Error::Decomposition { residual });
        }
        for (k, v) in sol.iter().enumerate() {
            out.beta[k][ell as usize - 1] = *v;
        }
    }
    out.l1_norm = out.beta.iter().flatten().map(|v| v.abs()).sum();
    Ok(out)
}

/// Sampled lower bound for `sup_{|x| <= 1} |Q(x)|`: random ball points,
/// `±e_i` and `0`, followed by a local ascent from the best point.
pub fn sup_norm_q(poly: &FeaturePolynomial, samples: usize, seed: u64) -> f64 {
    let d = poly.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_x = vec![0.0; d];
    let mut best = poly.eval(&best_x).abs();
    let consider = |x: Vec<f64>, best: &mut f64, best_x: &mut Vec<f64>| {
        let v = poly.eval(&x).abs();
        if v > *best {
            *best = v;
            *best_x = x;
        }
    };
    for i in 0..d {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[i] = sign;
            consider(e, &mut best, &mut best_x);
        }
    }
    for _ in 0..samples {
        let x = random_ball_point(&mut rng, d);
        consider(x, &mut best, &mut best_x);
    }
    let mut step = 0.25;
    while step > 1e-9 {
        let mut improved = false;
        for _ in 0..4 * d {
            let dir = random_unit_vector(&mut rng, d);
            let mut x: Vec<f64> = best_x.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            let n = euclid_norm(&x);
            if n > 1.0 {
                x.iter_mut().for_each(|v| *v /= n);
            }
            let v = poly.eval(&x).abs();
            if v > best {
                best = v;
                best_x = x;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(d: usize, terms: &[(&[u32], f64)]) -> FeaturePolynomial {
        FeaturePolynomial::new(d, terms.iter().map(|(a, v)| (a.to_vec(), *v))).unwrap()
    }

    fn fixed_basis() -> RidgeBasis {
        let r = 0.5f64.sqrt();
        RidgeBasis::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![r, r]], 2).unwrap()
    }

    #[test]
    fn nq_examples() {
        assert_eq!(nq(2, 2), 3);
        assert_eq!(nq(3, 2), 6);
        for d in 1..10 {
            assert_eq!(nq(d, 1), d);
        }
        assert_eq!(nq(4, 3), 20);
        for d in 1..6 {
            for l in 1..5 {
                assert_eq!(multi_indices(d, l).len(), nq(d, l as usize));
            }
        }
    }

    #[test]
    fn generated_bases_span() {
        for seed in 0..5 {
            let b = generate_ridge_basis(2, 2, seed).unwrap();
            assert_eq!(b.n_q, 3);
            assert_eq!(b.rank_at(2), 3);
            let b = generate_ridge_basis(3, 2, seed).unwrap();
            assert_eq!(b.n_q, 6);
            assert_eq!(b.rank_at(2), 6);
            assert_eq!(b.rank_at(1), 3);
            for row in &b.xi {
                assert!((euclid_norm(row) - 1.0).abs() < 1e-12);
            }
        }
        for q in 1..5 {
            let b = generate_ridge_basis(1, q, 7).unwrap();
            assert_eq!(b.n_q, 1);
            assert_eq!(b.xi[0][0].abs(), 1.0);
        }
    }

    #[test]
    fn generation_is_seeded() {
        assert_eq!(
            generate_ridge_basis(3, 2, 11).unwrap(),
            generate_ridge_basis(3, 2, 11).unwrap()
        );
    }

    #[test]
    fn beta_norm_squared() {
        let b = fixed_basis();
        let beta = solve_beta(&FeaturePolynomial::norm_squared(2), &b).unwrap();
        let col2: Vec<f64> = (0..3).map(|k| beta.get(k, 2)).collect();
        for (a, e) in col2.iter().zip([1.0, 1.0, 0.0]) {
            assert!((a - e).abs() < 1e-12);
        }
        assert!((0..3).all(|k| beta.get(k, 1).abs() < 1e-14));
        assert!((beta.l1_norm - 2.0).abs() < 1e-12);
    }

    #[test]
    fn beta_cross_term() {
        let b = fixed_basis();
        let q = poly(2, &[(&[1, 1], 1.0)]);
        let beta = solve_beta(&q, &b).unwrap();
        for (k, e) in [-0.5, -0.5, 1.0].into_iter().enumerate() {
            assert!((beta.get(k, 2) - e).abs() < 1e-12);
        }
    }

    #[test]
    fn beta_constant_is_zero() {
        let b = fixed_basis();
        let beta = solve_beta(&FeaturePolynomial::constant(2, 3.5), &b).unwrap();
        assert_eq!(beta.l1_norm, 0.0);
    }

    #[test]
    fn reconstruction_on_fresh_points() {
        let q = poly(3, &[(&[1, 1, 0], 1.0), (&[0, 0, 2], 1.0), (&[1, 0, 0], -0.4), (&[0, 0, 0], 0.2)]);
        let basis = generate_ridge_basis(3, 2, 5).unwrap();
        let beta = solve_beta(&q, &basis).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(999);
        for _ in 0..1000 {
            let x = random_ball_point(&mut rng, 3);
            let r = beta.reconstruct(&basis, q.q0(), &x);
            assert!((r - q.eval(&x)).abs() <= 1e-8);
        }
    }

    #[test]
    fn sup_norm_examples() {
        assert!((sup_norm_q(&FeaturePolynomial::norm_squared(3), 100, 1) - 1.0).abs() < 1e-12);
        assert_eq!(sup_norm_q(&FeaturePolynomial::constant(2, 3.0), 10, 1), 3.0);
        assert_eq!(sup_norm_q(&poly(3, &[(&[1, 0, 0], 1.0)]), 10, 1), 1.0);
        // x1 x2 + x3^2 attains 1 at e3.
        let q = poly(3, &[(&[1, 1, 0], 1.0), (&[0, 0, 2], 1.0)]);
        assert!((sup_norm_q(&q, 500, 2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_monomial_map() {
        let q: FeaturePolynomial =
            serde_json::from_str(r#"{"[2,0,0]": 1.0, "[0,2,0]": 1.0}"#).unwrap();
        assert_eq!(q.dim(), 3);
        assert_eq!(q.degree(), 2);
        assert_eq!(q.eval(&[0.5, 0.5, 0.9]), 0.5);
        let back: FeaturePolynomial = serde_json::from_str(&serde_json::to_string(&q).unwrap()).unwrap();
        assert_eq!(back, q);
        assert!(serde_json::from_str::<FeaturePolynomial>(r#"{"[2,0]": 1.0, "[1]": 1.0}"#).is_err());
    }

    #[test]
    fn last_leading_entry_skips_zeros() {
        let b = RidgeBasis::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]], 1);
        assert!(b.is_err());
        let b = RidgeBasis::from_rows(vec![vec![1.0, 0.0], vec![0.0, -1.0]], 1).unwrap();
        assert_eq!(b.last_leading_entry(), -1.0);
    }
}
