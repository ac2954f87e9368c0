//! Finitely supported sequences and the convolutional layers built from them.
//!
//! A [`Filter`] is a real sequence supported on `{0, 1, ..., len - 1}`. Its
//! convolution with a vector supported on `{1, ..., D}` is represented by the
//! banded `(D + len - 1) x D` Toeplitz matrix returned by [`toeplitz_matrix`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold below which high-index coefficients are trimmed.
pub const TRIM_THRESHOLD: f64 = 1e-14;

/// ReLU.
#[inline]
pub fn relu(u: f64) -> f64 {
    if u > 0.0 {
        u
    } else {
        0.0
    }
}

/// A finitely supported real sequence `(w_0, ..., w_{len-1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Filter {
    coeffs: Vec<f64>,
}

impl Filter {
    /// Builds a filter in normal form: trailing (high-index) coefficients
    /// below the trim threshold are dropped. An empty or all-zero input
    /// becomes the single coefficient `[0]`.
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut f = Filter { coeffs };
        f.trim();
        f
    }

    /// Stores the coefficients verbatim, zero-padding up to `len`.
    pub fn padded(coeffs: &[f64], len: usize) -> Self {
        let mut c = coeffs.to_vec();
        if c.len() < len {
            c.resize(len, 0.0);
        }
        if c.is_empty() {
            c.push(0.0);
        }
        Filter { coeffs: c }
    }

    /// The identity filter `δ₀ = [1]`.
    pub fn delta() -> Self {
        Filter { coeffs: vec![1.0] }
    }

    fn trim(&mut self) {
        let scale = self.sup_norm();
        let cut = TRIM_THRESHOLD * scale;
        while self.coeffs.len() > 1 && self.coeffs.last().is_some_and(|c| c.abs() <= cut) {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            self.coeffs.push(0.0);
        }
    }

    /// Returns a copy in normal form.
    pub fn normalized(&self) -> Self {
        Filter::new(self.coeffs.clone())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn support_len(&self) -> usize {
        self.coeffs.len()
    }

    /// Degree of the symbol `Σ w_k z^k` (index of the last stored coefficient).
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_short(&self, s: usize) -> bool {
        self.coeffs.len() <= s + 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    pub fn sup_norm(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Filter {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Evaluates the symbol at a real point (Horner).
    pub fn symbol_at(&self, z: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * z + c)
    }

    /// Row sums of `T^w` for input width `width`, i.e. `T^w 1`.
    ///
    /// Rows whose window covers the whole filter are summed in the same tap
    /// order, so they are bitwise equal.
    pub fn toeplitz_row_sums(&self, width: usize) -> Vec<f64> {
        let len = self.coeffs.len();
        (0..width + len - 1)
            .map(|i| {
                let lo = i.saturating_sub(width - 1);
                let hi = i.min(len - 1);
                self.coeffs[lo..=hi].iter().sum()
            })
            .collect()
    }
}

/// Full convolution `(a * b)_i = Σ_k a_{i-k} b_k`.
pub fn convolve(a: &Filter, b: &Filter) -> Filter {
    Filter {
        coeffs: convolve_slices(a.coeffs(), b.coeffs()),
    }
}

pub(crate) fn convolve_slices(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (k, &bk) in b.iter().enumerate() {
            out[i + k] += ai * bk;
        }
    }
    out
}

/// Convolves a list of filters in order: `filters[n-1] * ... * filters[0]`.
pub fn convolve_all(filters: &[Filter]) -> Filter {
    let mut acc = vec![1.0];
    for f in filters {
        acc = convolve_slices(&acc, f.coeffs());
    }
    Filter { coeffs: acc }
}

/// The convolutional matrix `T^w` of shape `(width + len - 1) x width` with
/// entry `(i, k) = w_{i-k}`.
pub fn toeplitz_matrix(w: &Filter, width: usize) -> Result<DMatrix<f64>> {
    if width == 0 {
        return Err(Error::Parameter("toeplitz width must be at least 1".into()));
    }
    let len = w.support_len();
    let mut t = DMatrix::zeros(width + len - 1, width);
    for k in 0..width {
        for (m, &c) in w.coeffs().iter().enumerate() {
            t[(k + m, k)] = c;
        }
    }
    Ok(t)
}

/// Keeps every `d`-th entry: `out_i = v_{i d}` (1-based), `i = 1..⌊len/d⌋`.
pub fn downsample(v: &[f64], d: usize) -> Vec<f64> {
    if d == 0 {
        return Vec::new();
    }
    v.iter().skip(d - 1).step_by(d).copied().collect()
}

/// One convolutional layer: filter, bias, and whether the downsampling
/// operator follows the activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub filter: Filter,
    pub bias: Vec<f64>,
    #[serde(rename = "downsample")]
    pub downsample_after: bool,
}

impl ConvLayerSpec {
    /// Filter span `s`: the layer widens its input by this many entries.
    pub fn span(&self) -> usize {
        self.filter.support_len() - 1
    }

    pub fn input_width(&self) -> usize {
        self.bias.len() - self.span()
    }

    /// Whether bias entries `s+1 ..= input_width` (1-based) are all equal.
    pub fn has_equal_middle_bias(&self) -> bool {
        let s = self.span();
        let input = self.input_width();
        if input <= s + 1 {
            return true;
        }
        let middle = &self.bias[s..input];
        middle.iter().all(|&b| b == middle[0])
    }

    /// Pre-activation `T^w h - b`.
    pub fn pre_activation(&self, h: &[f64]) -> Result<Vec<f64>> {
        let expected = self.input_width();
        if h.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: h.len(),
            });
        }
        let mut out = convolve_slices(self.filter.coeffs(), h);
        for (o, b) in out.iter_mut().zip(&self.bias) {
            *o -= b;
        }
        Ok(out)
    }
}

/// `σ(T^w h - b)`, followed by downsampling with stride `d` when the layer
/// is marked for it.
pub fn apply_layer(layer: &ConvLayerSpec, h: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut out = layer.pre_activation(h)?;
    out.iter_mut().for_each(|v| *v = relu(*v));
    if layer.downsample_after {
        out = downsample(&out, d);
    }
    Ok(out)
}
