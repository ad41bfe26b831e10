//! Monte Carlo estimators with standard errors and the comparison records used
//! to check them against analytic targets.
//!
//! All sums use [`pairwise_sum`], so an estimate depends only on the samples
//! and their order.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flag::AreaVector;
use crate::spectral::FrequencyVector;

/// Default acceptance threshold on `|z|`.
pub const Z_THRESHOLD: f64 = 3.0;

/// Smallest sample count accepted by [`empirical_cf`].
pub const MIN_CF_SAMPLES: usize = 100;

/// Smallest path count accepted by [`mean_ode_check`].
pub const MIN_ODE_PATHS: usize = 1000;

/// Number of batches used by [`ergodic_check`].
pub const ERGODIC_BATCHES: usize = 20;

/// An estimate with per-entry standard errors. Matrix-valued estimates are
/// stored row-major with `shape = (rows, cols)`; vectors have `cols = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: Vec<f64>,
    pub std_error: Vec<f64>,
    pub shape: (usize, usize),
    pub n_samples: usize,
    pub excluded: usize,
}

impl McEstimate {
    fn vector(value: Vec<f64>, std_error: Vec<f64>, n_samples: usize) -> Self {
        let len = value.len();
        Self { value, std_error, shape: (len, 1), n_samples, excluded: 0 }
    }

    pub fn scalar(&self) -> f64 {
        self.value[0]
    }

    pub fn scalar_se(&self) -> f64 {
        self.std_error[0]
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.shape.0, self.shape.1, &self.value)
    }

    pub fn se_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.shape.0, self.shape.1, &self.std_error)
    }

    pub fn with_excluded(mut self, excluded: usize) -> Self {
        self.excluded = excluded;
        self
    }
}

/// Sum by recursive halving down to blocks of eight, summed left to right.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 8 {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

fn mean_and_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = pairwise_sum(x) / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = x.iter().map(|v| (v - mean) * (v - mean)).collect();
    (mean, pairwise_sum(&dev) / (n - 1.0))
}

/// Sample mean with standard error `s / sqrt(N)`.
pub fn mean_estimate(samples: &[f64]) -> Result<McEstimate> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: samples.len() });
    }
    let (m, v) = mean_and_var(samples);
    Ok(McEstimate::vector(vec![m], vec![(v / samples.len() as f64).sqrt()], samples.len()))
}

/// Entrywise sample mean of equal-length vectors.
pub fn mean_vector_estimate(samples: &[Vec<f64>]) -> Result<McEstimate> {
    let p = check_vectors(samples, 2)?;
    let n = samples.len();
    let mut value = Vec::with_capacity(p);
    let mut se = Vec::with_capacity(p);
    let mut col = vec![0.0; n];
    for a in 0..p {
        for (c, s) in col.iter_mut().zip(samples) {
            *c = s[a];
        }
        let (m, v) = mean_and_var(&col);
        value.push(m);
        se.push((v / n as f64).sqrt());
    }
    Ok(McEstimate::vector(value, se, n))
}

fn check_vectors(samples: &[Vec<f64>], needed: usize) -> Result<usize> {
    if samples.len() < needed {
        return Err(Error::TooFewSamples { needed, got: samples.len() });
    }
    let p = samples[0].len();
    if let Some(bad) = samples.iter().find(|s| s.len() != p) {
        return Err(Error::DimensionMismatch { expected: p, got: bad.len() });
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("samples"));
    }
    Ok(p)
}

/// Unbiased sample covariance with delete-one jackknife standard errors.
///
/// With `d_i = (x_i - xbar)(y_i - ybar)` the leave-one-out covariance is
/// `(S - N d_i / (N-1)) / (N-2)`, which gives the jackknife variance
/// `N / ((N-1)(N-2)^2) sum (d_i - dbar)^2` in closed form. Two samples give
/// an infinite standard error.
pub fn cov_estimate(samples: &[Vec<f64>]) -> Result<McEstimate> {
    let p = check_vectors(samples, 2)?;
    let n = samples.len();
    let nf = n as f64;
    let means = mean_vector_estimate(samples)?.value;
    let centred: Vec<Vec<f64>> = samples.iter().map(|s| s.iter().zip(&means).map(|(x, m)| x - m).collect()).collect();
    let mut value = vec![0.0; p * p];
    let mut se = vec![0.0; p * p];
    let mut d = vec![0.0; n];
    for a in 0..p {
        for b in a..p {
            for (di, c) in d.iter_mut().zip(&centred) {
                *di = c[a] * c[b];
            }
            let s = pairwise_sum(&d);
            let c = s / (nf - 1.0);
            let err = if n < 3 {
                f64::INFINITY
            } else {
                let dbar = s / nf;
                let dev: Vec<f64> = d.iter().map(|x| (x - dbar) * (x - dbar)).collect();
                (nf / ((nf - 1.0) * (nf - 2.0) * (nf - 2.0)) * pairwise_sum(&dev)).sqrt()
            };
            value[a * p + b] = c;
            value[b * p + a] = c;
            se[a * p + b] = err;
            se[b * p + a] = err;
        }
    }
    Ok(McEstimate { value, std_error: se, shape: (p, p), n_samples: n, excluded: 0 })
}

/// Empirical characteristic function of area samples at one frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCf {
    /// Mean of `cos(sum u.a)`.
    pub real: McEstimate,
    /// Mean of `sin(sum u.a)`, zero in law by the symmetry `a -> -a`.
    pub imag: McEstimate,
}

pub fn empirical_cf(samples: &[AreaVector], u: &FrequencyVector) -> Result<EmpiricalCf> {
    if samples.len() < MIN_CF_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_CF_SAMPLES, got: samples.len() });
    }
    let uf = u.flat();
    let mut cos = Vec::with_capacity(samples.len());
    let mut sin = Vec::with_capacity(samples.len());
    for s in samples {
        if s.dim() != u.n() {
            return Err(Error::DimensionMismatch { expected: u.n(), got: s.dim() });
        }
        let phase: f64 = s.flat().iter().zip(&uf).map(|(a, b)| a * b).sum();
        if !phase.is_finite() {
            return Err(Error::NonFinite("empirical_cf"));
        }
        cos.push(phase.cos());
        sin.push(phase.sin());
    }
    Ok(EmpiricalCf { real: mean_estimate(&cos)?, imag: mean_estimate(&sin)? })
}

/// Time averages of `(1 - lambda_j) / lambda_j` along one path, with
/// batch-means standard errors over [`ERGODIC_BATCHES`] contiguous batches.
///
/// `lambda_path` holds the states at the grid points after the start; steps
/// with a coordinate below `floor` are left out and counted in `excluded`.
pub fn ergodic_check(lambda_path: &[Vec<f64>], floor: f64) -> Result<McEstimate> {
    let n = check_vectors(lambda_path, ERGODIC_BATCHES)?;
    let kept: Vec<&Vec<f64>> = lambda_path.iter().filter(|l| l.iter().all(|&v| v >= floor)).collect();
    let excluded = lambda_path.len() - kept.len();
    if kept.len() < ERGODIC_BATCHES {
        return Err(Error::TooFewSamples { needed: ERGODIC_BATCHES, got: kept.len() });
    }
    let per_batch = kept.len() / ERGODIC_BATCHES;
    let used = &kept[..per_batch * ERGODIC_BATCHES];
    let mut value = Vec::with_capacity(n);
    let mut se = Vec::with_capacity(n);
    for j in 0..n {
        let f: Vec<f64> = used.iter().map(|l| (1.0 - l[j]) / l[j]).collect();
        let batches: Vec<f64> = f.chunks(per_batch).map(|c| pairwise_sum(c) / per_batch as f64).collect();
        let (m, v) = mean_and_var(&batches);
        value.push(m);
        se.push((v / ERGODIC_BATCHES as f64).sqrt());
    }
    Ok(McEstimate::vector(value, se, lambda_path.len()).with_excluded(excluded))
}

/// A single estimate measured against a target.
///
/// `allowance` is an absolute bias budget: only the part of `|estimate - target|`
/// exceeding it counts towards `z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub estimate: f64,
    pub se: f64,
    pub target: f64,
    pub allowance: f64,
    pub z: f64,
    pub pass: bool,
}

pub fn z_score(estimate: f64, se: f64, target: f64, allowance: f64) -> f64 {
    let d = estimate - target;
    let excess = (d.abs() - allowance).max(0.0);
    if excess == 0.0 {
        return 0.0;
    }
    d.signum() * excess / se
}

impl Comparison {
    pub fn new(estimate: f64, se: f64, target: f64, allowance: f64, threshold: f64) -> Self {
        let z = z_score(estimate, se, target, allowance);
        Self { estimate, se, target, allowance, z, pass: z.abs() <= threshold }
    }
}

/// Entrywise comparison of an estimate against a target of the same length.
pub fn compare_entries(est: &McEstimate, target: &[f64], allowance: f64, threshold: f64) -> Result<Vec<Comparison>> {
    if target.len() != est.value.len() {
        return Err(Error::DimensionMismatch { expected: est.value.len(), got: target.len() });
    }
    Ok(est
        .value
        .iter()
        .zip(&est.std_error)
        .zip(target)
        .map(|((&v, &s), &t)| Comparison::new(v, s, t, allowance, threshold))
        .collect())
}

pub fn max_abs_z(c: &[Comparison]) -> f64 {
    c.iter().map(|c| c.z.abs()).fold(0.0, f64::max)
}

/// Entrywise comparison of a covariance estimate with a target matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceComparison {
    pub estimate: DMatrix<f64>,
    pub std_error: DMatrix<f64>,
    pub target: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub allowance: f64,
    pub max_abs_z: f64,
    pub pass: bool,
}

impl CovarianceComparison {
    pub fn new(est: &McEstimate, target: &DMatrix<f64>, allowance: f64, threshold: f64) -> Result<Self> {
        if est.shape != target.shape() {
            return Err(Error::DimensionMismatch { expected: est.shape.0, got: target.nrows() });
        }
        let estimate = est.matrix();
        let std_error = est.se_matrix();
        let z = DMatrix::from_fn(target.nrows(), target.ncols(), |r, c| {
            z_score(estimate[(r, c)], std_error[(r, c)], target[(r, c)], allowance)
        });
        let max_abs_z = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(Self { estimate, std_error, target: target.clone(), z, allowance, max_abs_z, pass: max_abs_z <= threshold })
    }

    /// Largest `|z|` over the entries selected by `keep(row, col)`.
    pub fn max_abs_z_where<F: Fn(usize, usize) -> bool>(&self, keep: F) -> f64 {
        let mut m: f64 = 0.0;
        for r in 0..self.z.nrows() {
            for c in 0..self.z.ncols() {
                if keep(r, c) {
                    m = m.max(self.z[(r, c)].abs());
                }
            }
        }
        m
    }
}

/// `E[lambda_j(t)] = 1/n + (lambda_j(0) - 1/n) exp(-4nt)`.
pub fn mean_ode_target(lam0: &[f64], t: f64) -> Vec<f64> {
    let n = lam0.len() as f64;
    let decay = (-4.0 * n * t).exp();
    lam0.iter().map(|l| 1.0 / n + (l - 1.0 / n) * decay).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanOdeRow {
    pub time: f64,
    pub coordinate: usize,
    pub comparison: Comparison,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanOdeReport {
    pub rows: Vec<MeanOdeRow>,
    pub max_abs_z: f64,
    pub n_paths: usize,
    pub pass: bool,
}

/// Compare the mean of `lambda(t)` across paths with the mean ODE on the
/// sampled grid. `lambda_paths[p][k]` is the state of path `p` at `times[k]`.
pub fn mean_ode_check(
    lambda_paths: &[Vec<Vec<f64>>],
    times: &[f64],
    lam0: &[f64],
    allowance: f64,
    threshold: f64,
) -> Result<MeanOdeReport> {
    if lambda_paths.len() < MIN_ODE_PATHS {
        return Err(Error::TooFewSamples { needed: MIN_ODE_PATHS, got: lambda_paths.len() });
    }
    if let Some(bad) = lambda_paths.iter().find(|p| p.len() != times.len()) {
        return Err(Error::DimensionMismatch { expected: times.len(), got: bad.len() });
    }
    let mut rows = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let at: Vec<Vec<f64>> = lambda_paths.iter().map(|p| p[k].clone()).collect();
        if at[0].len() != lam0.len() {
            return Err(Error::DimensionMismatch { expected: lam0.len(), got: at[0].len() });
        }
        let est = mean_vector_estimate(&at)?;
        for (j, c) in compare_entries(&est, &mean_ode_target(lam0, t), allowance, threshold)?.into_iter().enumerate() {
            rows.push(MeanOdeRow { time: t, coordinate: j, comparison: c });
        }
    }
    let max = rows.iter().map(|r| r.comparison.z.abs()).fold(0.0, f64::max);
    Ok(MeanOdeReport { pass: rows.iter().all(|r| r.comparison.pass), rows, max_abs_z: max, n_paths: lambda_paths.len() })
}
