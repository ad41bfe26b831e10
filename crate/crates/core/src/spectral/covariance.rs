//! Limiting covariance matrices of the stochastic areas and windings.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `M (x) I_3`, matching the `(column, unit)` ordering of flattened area vectors.
pub fn kron_i3(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(3 * n, 3 * n, |r, c| if r % 3 == c % 3 { m[(r / 3, c / 3)] } else { 0.0 })
}

/// The `n x n` factor with `2n - 2` on the diagonal and `1` elsewhere.
pub fn limit_covariance_factor(n: usize) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::InvalidDimension("limit covariance needs n >= 2".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| if i == j { 2.0 * n as f64 - 2.0 } else { 1.0 }))
}

/// Covariance of `a(t)/sqrt(t)` as `t -> infinity`, as a `3n x 3n` matrix.
pub fn limit_covariance(n: usize) -> Result<DMatrix<f64>> {
    Ok(kron_i3(&limit_covariance_factor(n)?))
}

/// The two candidate limits for the winding covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindingCandidates {
    /// `Sigma + diag(mu_j I_3)`.
    pub linear: DMatrix<f64>,
    /// `Sigma + diag(mu_j^2 I_3)`.
    pub squared: DMatrix<f64>,
}

pub fn winding_covariance(n: usize, mu: &[f64]) -> Result<WindingCandidates> {
    if mu.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: mu.len() });
    }
    if mu.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::InvalidConfig("winding weights must be finite and non-negative".into()));
    }
    let base = limit_covariance_factor(n)?;
    let mut linear = base.clone();
    let mut squared = base;
    for (j, &m) in mu.iter().enumerate() {
        linear[(j, j)] += m;
        squared[(j, j)] += m * m;
    }
    Ok(WindingCandidates { linear: kron_i3(&linear), squared: kron_i3(&squared) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_dimensional_limit() {
        let s = limit_covariance(2).unwrap();
        assert_eq!(s[(0, 0)], 2.0);
        assert_eq!(s[(0, 3)], 1.0);
        assert_eq!(s[(0, 1)], 0.0);
        assert_eq!(s[(4, 1)], 1.0);
    }

    #[test]
    fn spectrum_of_factor() {
        for n in 2..=10 {
            let f = limit_covariance_factor(n).unwrap();
            let mut ev: Vec<f64> = f.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            let top = ev.pop().unwrap();
            assert!((top - (3 * n - 3) as f64).abs() < 1e-10);
            assert!(ev.iter().all(|e| (e - (2 * n - 3) as f64).abs() < 1e-10));
            assert!(ev.iter().all(|&e| e > 0.0));
            assert_eq!(f, f.transpose());
        }
    }

    #[test]
    fn winding_candidates() {
        let w = winding_covariance(2, &[0.0, 0.0]).unwrap();
        assert_eq!(w.linear, limit_covariance(2).unwrap());
        let w = winding_covariance(2, &[1.0, 1.0]).unwrap();
        assert_eq!(w.linear[(0, 0)], 3.0);
        assert_eq!(w.linear, w.squared);
        let w = winding_covariance(2, &[2.0, 1.0]).unwrap();
        assert_eq!((w.linear[(0, 0)], w.squared[(0, 0)]), (4.0, 6.0));
        assert_eq!((w.linear[(3, 3)], w.squared[(3, 3)]), (3.0, 3.0));
    }
}
