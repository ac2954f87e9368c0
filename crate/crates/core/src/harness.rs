//! Experiment orchestration: approximation-rate sweeps over `N`, the convex
//! fit of the output coefficients on noisy samples, and CSV/JSON reports.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{approx_error_bound, approx_kind_for, param_bound_for, radius_for};
use crate::error::{param, Error, Result};
use crate::netbuild::{
    build_composite_network_with, build_radial_network_with, count_free_parameters, BuildOptions,
    FunctionDescriptor, NetworkKind, NetworkSpec, ShiftRule, TargetFunction,
};
use crate::neteval::{features, output, truncate};
use crate::ridge::{random_ball_point, FeaturePolynomial};

/// Environment variable capping worker threads (0 or unset = automatic).
pub const THREADS_ENV: &str = "CONV_APPROX_THREADS";

/// Runs `f` on a pool sized by [`THREADS_ENV`].
pub fn with_thread_pool<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Independent random stream for a `(row, purpose)` pair.
pub fn stream(seed: u64, row: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(row.wrapping_mul(1 << 8) ^ purpose);
    rng
}

const PURPOSE_EVAL: u64 = 1;
const PURPOSE_TRAIN: u64 = 2;
const PURPOSE_TEST: u64 = 3;

fn default_samples() -> usize {
    2000
}

/// `x₁x₂ + x_d²`, used when a composite config names no feature.
pub fn default_feature(d: usize) -> Result<FeaturePolynomial> {
    if d < 2 {
        return param("default feature needs d >= 2");
    }
    let mut a = vec![0; d];
    a[0] = 1;
    a[1] = 1;
    let mut b = vec![0; d];
    b[d - 1] += 2;
    FeaturePolynomial::new(d, [(a, 1.0), (b, 1.0)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub kind: NetworkKind,
    pub d: usize,
    pub s: usize,
    /// Degree of the feature polynomial; informational for radial sweeps.
    #[serde(default = "two")]
    pub q: usize,
    pub f: FunctionDescriptor,
    /// Feature polynomial for composite sweeps, as a monomial map.
    #[serde(default)]
    pub feature: Option<FeaturePolynomial>,
    #[serde(rename = "N")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub shift_rule: ShiftRule,
    /// Record wall time; off by default so reports are byte-stable.
    #[serde(default)]
    pub timing: bool,
}

fn two() -> usize {
    2
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s < 2 || self.s > self.d {
            return param(format!("need 2 <= s <= d, got s={}, d={}", self.s, self.d));
        }
        if self.n_list.is_empty() || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return param("N list must be nonempty and strictly increasing");
        }
        if self.n_list[0] == 0 {
            return param("N must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub measured: f64,
    pub bound: f64,
    pub params: usize,
    pub param_bound: usize,
    pub depth: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `log(measured)` against `log(N)`.
    pub slope: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

impl SweepResult {
    /// Errors if any row violates its bound or any build failed.
    pub fn check(&self) -> Result<()> {
        let mut problems = self.failures.clone();
        for r in &self.rows {
            if !(r.measured <= r.bound) {
                problems.push(format!("N={}: measured {} > bound {}", r.n, r.measured, r.bound));
            }
            if r.params > r.param_bound {
                problems.push(format!("N={}: params {} > bound {}", r.n, r.params, r.param_bound));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Numerical(format!("sweep violations: {}", problems.join("; "))))
        }
    }
}

/// Rounds to six significant digits.
pub fn round_sig6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Target in the configured regime, and the function on the network input.
struct Problem {
    kind: NetworkKind,
    f: TargetFunction,
    feature: FeaturePolynomial,
}

impl Problem {
    fn new(kind: NetworkKind, d: usize, desc: FunctionDescriptor, feature: Option<&FeaturePolynomial>) -> Result<Self> {
        let feature = match (kind, feature) {
            (NetworkKind::Radial, _) => FeaturePolynomial::norm_squared(d),
            (NetworkKind::Composite, Some(p)) => p.clone(),
            (NetworkKind::Composite, None) => default_feature(d)?,
        };
        if feature.dim() != d {
            return Err(Error::Dimension {
                expected: d,
                got: feature.dim(),
            });
        }
        let f = TargetFunction::from_descriptor(desc, -1.0, 1.0)
            .or_else(|_| TargetFunction::from_descriptor(desc, 0.0, 1.0))?;
        Ok(Problem { kind, f, feature })
    }

    fn build(&self, d: usize, s: usize, n: usize, seed: u64, rule: ShiftRule) -> Result<NetworkSpec> {
        let opts = BuildOptions { shift_rule: rule };
        match self.kind {
            NetworkKind::Radial => build_radial_network_with(&self.f, d, s, n, opts),
            NetworkKind::Composite => build_composite_network_with(&self.f, &self.feature, s, n, seed, opts),
        }
    }

    /// `f` on the domain the built network uses.
    fn target_for(&self, spec: &NetworkSpec) -> Result<TargetFunction> {
        match self.kind {
            NetworkKind::Radial => self.f.with_domain(0.0, 1.0),
            NetworkKind::Composite => {
                let b = spec.meta.b_q.max(f64::MIN_POSITIVE);
                self.f.with_domain(-b, b)
            }
        }
    }
}

/// Random ball points, `0`, `±e_i`, and dense segments along `e_1` and
/// the main diagonal.
pub fn test_points(d: usize, samples: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; d]];
    for i in 0..d {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[i] = sign;
            pts.push(e);
        }
    }
    const LINE: usize = 400;
    let diag = 1.0 / (d as f64).sqrt();
    for i in 0..=LINE {
        let r = -1.0 + 2.0 * i as f64 / LINE as f64;
        let mut e = vec![0.0; d];
        e[0] = r;
        pts.push(e);
        pts.push(vec![r * diag; d]);
    }
    pts.extend((0..samples).map(|_| random_ball_point(rng, d)));
    pts
}

/// `sup |network(x) - f(Q(x))|` over `points`.
pub fn measure_sup_error(
    spec: &NetworkSpec,
    f: &TargetFunction,
    feature: &FeaturePolynomial,
    points: &[Vec<f64>],
) -> Result<f64> {
    points
        .par_iter()
        .map(|x| Ok((output(spec, x)? - f.eval(feature.eval(x))).abs()))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

pub fn rate_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let problem = Problem::new(cfg.kind, cfg.d, cfg.f, cfg.feature.as_ref())?;
    let results: Vec<std::result::Result<SweepRow, String>> = cfg
        .n_list
        .par_iter()
        .enumerate()
        .map(|(row, &n)| {
            let start = Instant::now();
            let run = || -> Result<SweepRow> {
                let spec = problem.build(cfg.d, cfg.s, n, cfg.seed, cfg.shift_rule)?;
                let f = problem.target_for(&spec)?;
                let mut rng = stream(cfg.seed, row as u64, PURPOSE_EVAL);
                let pts = test_points(cfg.d, cfg.samples, &mut rng);
                let measured = measure_sup_error(&spec, &f, &problem.feature, &pts)?;
                Ok(SweepRow {
                    n,
                    measured,
                    bound: approx_error_bound(approx_kind_for(&spec), f.alpha, f.seminorm, n),
                    params: count_free_parameters(&spec).total(),
                    param_bound: param_bound_for(&spec),
                    depth: spec.j2,
                    seconds: if cfg.timing {
                        start.elapsed().as_secs_f64()
                    } else {
                        0.0
                    },
                })
            };
            run().map_err(|e| format!("N={n}: {e}"))
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(e),
        }
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.measured).collect();
    Ok(SweepResult {
        slope: round_sig6(loglog_slope(&xs, &ys)),
        rows,
        failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// CSV with header `N,measured,bound,params,param_bound,depth,seconds`.
pub fn write_rows_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    if rows.is_empty() {
        return param("no rows to report");
    }
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn sweep_to_string(result: &SweepResult, format: Format) -> Result<String> {
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_rows_csv(&result.rows, &mut buf)?;
            Ok(String::from_utf8(buf).expect("csv is utf-8"))
        }
        Format::Json => {
            if result.rows.is_empty() {
                return param("no rows to report");
            }
            Ok(serde_json::to_string_pretty(result)? + "\n")
        }
    }
}

/// Writes a sweep report; CSV carries rows only.
pub fn report(result: &SweepResult, format: Format, path: &Path) -> Result<()> {
    std::fs::write(path, sweep_to_string(result, format)?)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErmConfig {
    #[serde(default = "radial_kind")]
    pub kind: NetworkKind,
    pub d: usize,
    pub s: usize,
    pub f: FunctionDescriptor,
    #[serde(default)]
    pub feature: Option<FeaturePolynomial>,
    /// Sample sizes.
    pub m: Vec<usize>,
    #[serde(rename = "N")]
    pub n_list: Vec<usize>,
    /// Standard deviation of the Gaussian response noise.
    pub noise: f64,
    /// Response clamp `M`.
    #[serde(rename = "M")]
    pub clamp: f64,
    #[serde(default)]
    pub seed: u64,
    /// Independent repetitions, seeded `seed, seed+1, ...`.
    #[serde(default = "one")]
    pub repeats: usize,
    #[serde(default = "default_test_points")]
    pub test_points: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn radial_kind() -> NetworkKind {
    NetworkKind::Radial
}

fn one() -> usize {
    1
}

fn default_test_points() -> usize {
    10_000
}

impl ErmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clamp > 0.0) {
            return param("response clamp M must be positive");
        }
        if !(self.noise >= 0.0) {
            return param("noise level must be nonnegative");
        }
        if self.s < 2 || self.s > self.d {
            return param(format!("need 2 <= s <= d, got s={}, d={}", self.s, self.d));
        }
        if self.m.is_empty() || self.n_list.is_empty() || self.repeats == 0 {
            return param("m list, N list and repeats must be nonempty");
        }
        if self.m.iter().any(|&m| m == 0) || self.n_list.iter().any(|&n| n == 0) {
            return param("m and N must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErmRow {
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub risk: f64,
    /// Normal equations needed the ridge fallback.
    pub ridge: bool,
    /// Some coefficient hit the `‖c‖_∞ <= NR` cap.
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErmCell {
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub median_risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErmResult {
    pub rows: Vec<ErmRow>,
    pub medians: Vec<ErmCell>,
}

impl ErmResult {
    /// Median risks over `N` (in config order) for sample size `m`.
    pub fn median_curve(&self, m: usize) -> Vec<(usize, f64)> {
        self.medians
            .iter()
            .filter(|c| c.m == m)
            .map(|c| (c.n, c.median_risk))
            .collect()
    }
}

/// Least squares fit of `c` with the ridge fallback, then the sup cap.
pub fn fit_coefficients(phi: &DMatrix<f64>, y: &DVector<f64>, cap: f64) -> (DVector<f64>, bool, bool) {
    let gram = phi.transpose() * phi;
    let rhs = phi.transpose() * y;
    let max_diag = gram.diagonal().amax().max(f64::MIN_POSITIVE);
    let well_posed = gram.clone().cholesky().filter(|ch| {
        let l = ch.l_dirty();
        let min_pivot = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        min_pivot > 1e-12 * max_diag
    });
    let (mut c, ridge) = match well_posed {
        Some(ch) => (ch.solve(&rhs), false),
        None => {
            let mut g = gram;
            for i in 0..g.nrows() {
                g[(i, i)] += 1e-10 * max_diag;
            }
            let c = match g.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => g.svd(true, true).solve(&rhs, 0.0).unwrap_or_else(|_| DVector::zeros(rhs.len())),
            };
            (c, true)
        }
    };
    let mut clipped = false;
    for v in c.iter_mut() {
        if v.abs() > cap {
            *v = v.clamp(-cap, cap);
            clipped = true;
        }
    }
    (c, ridge, clipped)
}

fn feature_matrix(spec: &NetworkSpec, xs: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = xs.par_iter().map(|x| features(spec, x)).collect::<Result<_>>()?;
    let p = spec.c.len();
    Ok(DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// For each `(m, N)` and repetition: draw `m` noisy samples, fit `c` on the
/// network features, and measure the squared `L²` risk of the truncated
/// fit against `f∘Q` on fresh test points.
pub fn erm_c_fit(cfg: &ErmConfig) -> Result<ErmResult> {
    cfg.validate()?;
    let problem = Problem::new(cfg.kind, cfg.d, cfg.f, cfg.feature.as_ref())?;
    let noise = Normal::new(0.0, cfg.noise).map_err(|e| Error::Parameter(e.to_string()))?;
    let mut rows = Vec::new();
    for &n in &cfg.n_list {
        let spec = problem.build(cfg.d, cfg.s, n, cfg.seed, ShiftRule::default())?;
        let f = problem.target_for(&spec)?;
        let cap = n as f64 * radius_for(&spec);
        // One test set per N, shared by all repetitions and disjoint in
        // stream from every training draw.
        let mut test_rng = stream(cfg.seed, 0, PURPOSE_TEST);
        let test_x: Vec<Vec<f64>> = (0..cfg.test_points)
            .map(|_| random_ball_point(&mut test_rng, cfg.d))
            .collect();
        let test_phi = feature_matrix(&spec, &test_x)?;
        let test_y: Vec<f64> = test_x.iter().map(|x| f.eval(problem.feature.eval(x))).collect();
        for rep in 0..cfg.repeats {
            let seed = cfg.seed + rep as u64;
            for (mi, &m) in cfg.m.iter().enumerate() {
                // Samples depend on (seed, m) only, so every N sees the same data.
                let mut rng = stream(seed, mi as u64 + 1, PURPOSE_TRAIN);
                let xs: Vec<Vec<f64>> = (0..m).map(|_| random_ball_point(&mut rng, cfg.d)).collect();
                let ys: Vec<f64> = xs
                    .iter()
                    .map(|x| truncate(f.eval(problem.feature.eval(x)) + noise.sample(&mut rng), cfg.clamp))
                    .collect();
                let phi = feature_matrix(&spec, &xs)?;
                let (c, ridge, clipped) = fit_coefficients(&phi, &DVector::from_vec(ys), cap);
                let pred = &test_phi * &c;
                let risk = pred
                    .iter()
                    .zip(&test_y)
                    .map(|(p, t)| (truncate(*p, cfg.clamp) - t).powi(2))
                    .sum::<f64>()
                    / cfg.test_points as f64;
                rows.push(ErmRow {
                    m,
                    n,
                    seed,
                    risk,
                    ridge,
                    clipped,
                });
            }
        }
    }
    let mut medians = Vec::new();
    for &m in &cfg.m {
        for &n in &cfg.n_list {
            let risks = rows.iter().filter(|r| r.m == m && r.n == n).map(|r| r.risk).collect();
            medians.push(ErmCell {
                m,
                n,
                median_risk: median(risks),
            });
        }
    }
    Ok(ErmResult { rows, medians })
}

/// Strictly U-shaped: the minimum sits at an interior index and both
/// endpoints are strictly larger than it.
pub fn is_u_shaped(values: &[f64]) -> bool {
    if values.len() < 3 {
        return false;
    }
    let (argmin, min) = values
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty");
    argmin > 0 && argmin + 1 < values.len() && values[0] > min && values[values.len() - 1] > min
}

pub fn erm_to_string(result: &ErmResult, format: Format) -> Result<String> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &result.rows {
                w.serialize(r)?;
            }
            let buf = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(buf).expect("csv is utf-8"))
        }
        Format::Json => Ok(serde_json::to_string_pretty(result)? + "\n"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ridge::dot;
    use rand::Rng;

    fn row(n: usize) -> SweepRow {
        SweepRow {
            n,
            measured: 0.123456789,
            bound: 1.0 / n as f64,
            params: 10 * n,
            param_bound: 20 * n,
            depth: 3 * n,
            seconds: 0.0,
        }
    }

    #[test]
    fn csv_single_row() {
        let mut buf = Vec::new();
        write_rows_csv(&[row(4)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "N,measured,bound,params,param_bound,depth,seconds");
        assert_eq!(read_rows_csv(text.as_bytes()).unwrap(), vec![row(4)]);
        assert!(write_rows_csv(&[], Vec::new()).is_err());
    }

    #[test]
    fn json_round_trip_and_slope_digits() {
        let res = SweepResult {
            rows: vec![row(4), row(8)],
            slope: round_sig6(-1.0123456789),
            failures: vec![],
        };
        let text = sweep_to_string(&res, Format::Json).unwrap();
        assert!(text.contains("\"slope\": -1.01235"));
        let back: SweepResult = serde_json::from_str(&text).unwrap();
        assert_eq!(back, res);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [4.0, 8.0, 16.0, 32.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.75)).collect();
        assert!((loglog_slope(&xs, &ys) + 0.75).abs() < 1e-12);
        assert_eq!(round_sig6(123456789.0), 123457000.0);
    }

    #[test]
    fn u_shape_detector() {
        assert!(is_u_shaped(&[3.0, 1.0, 2.0]));
        assert!(!is_u_shaped(&[1.0, 2.0, 3.0]));
        assert!(!is_u_shaped(&[3.0, 2.0, 1.0]));
        assert!(!is_u_shaped(&[1.0, 1.0, 2.0]));
    }

    #[test]
    fn config_validation() {
        let cfg: SweepConfig = serde_json::from_str(
            r#"{"kind":"radial","d":2,"s":2,"f":{"family":"identity"},"N":[2,4]}"#,
        )
        .unwrap();
        assert!(cfg.validate().is_ok());
        let mut bad = cfg.clone();
        bad.n_list = vec![4, 2];
        assert!(bad.validate().is_err());
        bad.n_list = vec![2, 4];
        bad.s = 3;
        assert!(bad.validate().is_err());
        assert!(serde_json::from_str::<SweepConfig>(r#"{"kind":"radial","d":2,"s":2,"f":{"family":"identity"},"N":[2],"bogus":1}"#).is_err());
    }

    #[test]
    fn streams_are_independent_and_stable() {
        let a: f64 = stream(1, 0, 1).random();
        let b: f64 = stream(1, 0, 1).random();
        let c: f64 = stream(1, 1, 1).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        // Mean of |x|² over the unit ball of R^3 is 3/5.
        let mut rng = stream(0, 7, PURPOSE_EVAL);
        let m = (0..20000).map(|_| { let x = random_ball_point(&mut rng, 3); dot(&x, &x) }).sum::<f64>() / 20000.0;
        assert!((m - 0.6).abs() < 0.01);
    }

    #[test]
    fn ridge_fallback_on_duplicate_columns() {
        let phi = DMatrix::from_fn(20, 3, |i, j| if j < 2 { i as f64 } else { 1.0 });
        let y = DVector::from_fn(20, |i, _| 2.0 * i as f64 + 1.0);
        let (c, ridge, clipped) = fit_coefficients(&phi, &y, 1e6);
        assert!(ridge);
        assert!(!clipped);
        let fit = &phi * &c;
        assert!((fit - y).amax() < 1e-6);
        let (c, _, clipped) = fit_coefficients(&phi, &DVector::from_element(20, 1e9), 5.0);
        assert!(clipped);
        assert!(c.amax() <= 5.0);
    }
}
