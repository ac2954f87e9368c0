//! Piecewise-linear quasi-interpolation with ReLU hat functions on a
//! uniform knot grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequences::relu;

/// Uniform knots `t_j = -1 + (j-2)/N` for `j = 1..=2N+3`, stored 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotGrid {
    pub n: usize,
    pub t: Vec<f64>,
}

impl KnotGrid {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Knot `t_j` with the 1-based index used throughout the construction.
    pub fn at(&self, j: usize) -> f64 {
        self.t[j - 1]
    }
}

/// Coefficients of a ReLU expansion `N Σ_j c_j σ(u - t_j)`.
pub type SplineCoeffs = Vec<f64>;

pub fn knot(n: usize, j: usize) -> f64 {
    -1.0 + (j as f64 - 2.0) / n as f64
}

pub fn knots(n: usize) -> Result<KnotGrid> {
    if n < 1 {
        return Err(Error::Parameter("knot grid needs N >= 1".into()));
    }
    let t = (1..=2 * n + 3).map(|j| knot(n, j)).collect();
    Ok(KnotGrid { n, t })
}

/// Hat function `δ_i`, for `2 <= i <= 2N+2`.
pub fn hat(i: usize, grid: &KnotGrid, u: f64) -> Result<f64> {
    let n = grid.n;
    if i < 2 || i > 2 * n + 2 {
        return Err(Error::Parameter(format!(
            "hat index {i} outside 2..={}",
            2 * n + 2
        )));
    }
    let nf = n as f64;
    Ok(nf
        * (relu(u - grid.at(i - 1)) - 2.0 * relu(u - grid.at(i)) + relu(u - grid.at(i + 1))))
}

/// Second-difference map `ℝ^{2N+1} → ℝ^{2N+3}`. The input holds
/// `ζ_2, ..., ζ_{2N+2}`.
pub fn lcal_n(zeta: &[f64]) -> Result<SplineCoeffs> {
    if zeta.is_empty() || zeta.len() % 2 == 0 {
        return Err(Error::Parameter(format!(
            "difference operator needs 2N+1 samples, got {}",
            zeta.len()
        )));
    }
    let m = zeta.len() + 2;
    // z(i) = ζ_i for 2 <= i <= 2N+2, zero outside.
    let z = |i: usize| -> f64 {
        if (2..m).contains(&i) {
            zeta[i - 2]
        } else {
            0.0
        }
    };
    Ok((1..=m).map(|i| z(i - 1) - 2.0 * z(i) + z(i + 1)).collect())
}

/// `N Σ_j c_j σ(u - t_j)`.
pub fn eval_relu_expansion(coeffs: &[f64], grid: &KnotGrid, u: f64) -> f64 {
    let nf = grid.n as f64;
    nf * coeffs
        .iter()
        .zip(&grid.t)
        .map(|(c, t)| c * relu(u - t))
        .sum::<f64>()
}

/// Quasi-interpolant `L_t(g)` as ReLU coefficients plus its evaluator.
#[derive(Debug, Clone)]
pub struct QuasiInterpolant {
    pub grid: KnotGrid,
    pub coeffs: SplineCoeffs,
}

impl QuasiInterpolant {
    pub fn eval(&self, u: f64) -> f64 {
        eval_relu_expansion(&self.coeffs, &self.grid, u)
    }
}

/// Samples `g` at `t_2, ..., t_{2N+2}`, with `g` extended as a constant
/// beyond `[-1, 1]`.
pub fn quasi_interpolate(g: impl Fn(f64) -> f64, n: usize) -> Result<QuasiInterpolant> {
    let grid = knots(n)?;
    let samples: Vec<f64> = (2..=2 * n + 2)
        .map(|j| g(grid.at(j).clamp(-1.0, 1.0)))
        .collect();
    let coeffs = lcal_n(&samples)?;
    Ok(QuasiInterpolant { grid, coeffs })
}

/// `v^{[ℓ]} = 𝓛_N({t_k^ℓ})`.
pub fn v_ell(ell: u32, n: usize) -> Result<SplineCoeffs> {
    if ell < 1 {
        return Err(Error::Parameter("monomial degree must be >= 1".into()));
    }
    let grid = knots(n)?;
    let samples: Vec<f64> = (2..=2 * n + 2).map(|j| grid.at(j).powi(ell as i32)).collect();
    lcal_n(&samples)
}

/// Dense grid of `20N + 1` points on `[-1, 1]` plus the knots inside it.
pub fn sup_grid(n: usize) -> Vec<f64> {
    let m = 20 * n;
    let mut pts: Vec<f64> = (0..=m).map(|i| -1.0 + 2.0 * i as f64 / m as f64).collect();
    pts.extend((2..=2 * n + 2).map(|j| knot(n, j)));
    pts
}

/// `sup_{[-1,1]} |a(u) - b(u)|` on [`sup_grid`].
pub fn sup_distance(a: impl Fn(f64) -> f64, b: impl Fn(f64) -> f64, n: usize) -> f64 {
    sup_grid(n)
        .into_iter()
        .map(|u| (a(u) - b(u)).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn knot_examples() {
        assert_eq!(knots(1).unwrap().t, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert_eq!(
            knots(2).unwrap().t,
            vec![-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5]
        );
        for n in 1..40 {
            let g = knots(n).unwrap();
            assert_eq!(g.len(), 2 * n + 3);
            assert!((g.at(1) + 1.0 + 1.0 / n as f64).abs() < 1e-15);
            assert_eq!(g.at(2), -1.0);
            assert!((g.at(2 * n + 2) - 1.0).abs() < 1e-14);
        }
        assert!(knots(0).is_err());
    }

    #[test]
    fn hat_examples() {
        for n in 1..10 {
            let g = knots(n).unwrap();
            for i in 2..=2 * n + 2 {
                assert!((hat(i, &g, g.at(i)).unwrap() - 1.0).abs() < 1e-12);
                for j in 1..=2 * n + 3 {
                    if j != i {
                        assert!(hat(i, &g, g.at(j)).unwrap().abs() < 1e-12);
                    }
                }
            }
        }
        let g = knots(2).unwrap();
        assert!((hat(3, &g, -0.75).unwrap() - 0.5).abs() < 1e-15);
        assert!(hat(1, &g, 0.0).is_err());
        assert!(hat(7, &g, 0.0).is_err());
    }

    #[test]
    fn lcal_examples() {
        assert_eq!(lcal_n(&[1.0, 1.0, 1.0]).unwrap(), vec![1.0, -1.0, 0.0, -1.0, 1.0]);
        assert_eq!(lcal_n(&[-1.0, 0.0, 1.0]).unwrap(), vec![-1.0, 2.0, 0.0, -2.0, 1.0]);
        assert!(lcal_n(&[0.0; 9]).unwrap().iter().all(|&c| c == 0.0));
        assert!(lcal_n(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn partition_of_unity() {
        for n in 1..=32 {
            let qi = quasi_interpolate(|_| 1.0, n).unwrap();
            for u in sup_grid(n) {
                assert!((qi.eval(u) - 1.0).abs() <= 1e-12, "N={n} u={u}");
            }
        }
    }

    #[test]
    fn affine_reproduction() {
        let qi = quasi_interpolate(|u| u, 1).unwrap();
        for u in sup_grid(1) {
            assert!((qi.eval(u) - u).abs() <= 1e-12);
        }
        for n in [2, 5, 16, 64] {
            let qi = quasi_interpolate(|u| 0.3 - 2.0 * u, n).unwrap();
            assert!(sup_distance(|u| qi.eval(u), |u| 0.3 - 2.0 * u, n) <= 1e-12);
        }
    }

    #[test]
    fn abs_error() {
        let qi = quasi_interpolate(f64::abs, 4).unwrap();
        assert!(sup_distance(|u| qi.eval(u), f64::abs, 4) <= 0.5);
        for a in [-0.3, 0.0, 0.7] {
            for n in [2, 4, 8, 16, 32] {
                let g = move |u: f64| (u - a).abs();
                let qi = quasi_interpolate(g, n).unwrap();
                assert!(sup_distance(|u| qi.eval(u), g, n) <= 2.0 / n as f64);
            }
        }
    }

    #[test]
    fn monomial_vectors() {
        assert_eq!(v_ell(1, 1).unwrap(), vec![-1.0, 2.0, 0.0, -2.0, 1.0]);
        for n in [1, 3, 10] {
            let g = knots(n).unwrap();
            let v = v_ell(1, n).unwrap();
            assert!(sup_distance(|u| eval_relu_expansion(&v, &g, u), |u| u, n) <= 1e-12);
        }
        let g = knots(8).unwrap();
        let v = v_ell(2, 8).unwrap();
        let err = sup_distance(|u| eval_relu_expansion(&v, &g, u), |u| u * u, 8);
        assert!(err <= 0.5);
        // Linear interpolation of u² with spacing h errs by at most h²/4.
        assert!(err <= 1.0 / (4.0 * 64.0) + 1e-12);
        for ell in 1..=6 {
            for n in 1..=128 {
                let v = v_ell(ell, n).unwrap();
                assert!(v.iter().all(|c| c.abs() <= 4.0));
            }
        }
    }

    #[test]
    fn monomial_error_bound() {
        for ell in 1..=6u32 {
            for n in [1, 2, 4, 8, 16] {
                let g = knots(n).unwrap();
                let v = v_ell(ell, n).unwrap();
                let err = sup_distance(
                    |u| eval_relu_expansion(&v, &g, u),
                    |u| u.powi(ell as i32),
                    n,
                );
                assert!(err <= 2.0 * ell as f64 / n as f64 + 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn contraction_and_interpolation(
            vals in prop::collection::vec(-5.0f64..5.0, 3..12),
            n in 1usize..24,
        ) {
            // Piecewise-linear g through `vals` on a uniform grid of [-1, 1].
            let k = vals.len() - 1;
            let g = |u: f64| {
                let x = (u.clamp(-1.0, 1.0) + 1.0) / 2.0 * k as f64;
                let i = (x.floor() as usize).min(k - 1);
                let w = x - i as f64;
                vals[i] * (1.0 - w) + vals[i + 1] * w
            };
            let qi = quasi_interpolate(g, n).unwrap();
            let g_sup = sup_grid(n).into_iter().map(|u| g(u).abs())
                .chain(vals.iter().map(|v| v.abs()))
                .fold(0.0, f64::max);
            for u in sup_grid(n) {
                prop_assert!(qi.eval(u).abs() <= g_sup + 1e-12);
            }
            for j in 2..=2 * n + 2 {
                let t = qi.grid.at(j);
                prop_assert!((qi.eval(t) - g(t)).abs() <= 1e-12 * (1.0 + g_sup));
            }
        }
    }
}
