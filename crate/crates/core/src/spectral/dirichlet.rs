//! Jacobi indices and the Dirichlet weights they define on the simplex.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::hp::{self, Real};
use super::quadrature::{integrate_simplex, QuadratureResult};
use crate::error::{Error, Result};

/// Parameters `kappa = (kappa_1, ..., kappa_n)`, each `> -1/2`, of a Jacobi
/// operator on the simplex of dimension `n - 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobiIndex {
    kappa: Vec<f64>,
}

impl JacobiIndex {
    pub fn new(kappa: Vec<f64>) -> Result<Self> {
        if kappa.len() < 2 {
            return Err(Error::InvalidDimension("a Jacobi index needs n >= 2 entries".into()));
        }
        if let Some(k) = kappa.iter().find(|k| !(k.is_finite() && **k > -0.5)) {
            return Err(Error::InvalidConfig(format!("Jacobi index entries must exceed -1/2, got {k}")));
        }
        Ok(Self { kappa })
    }

    /// `(value, ..., value)` with `n` entries.
    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    /// `kappa + shift` entrywise.
    pub fn shifted(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.kappa.len() {
            return Err(Error::DimensionMismatch { expected: self.kappa.len(), got: shift.len() });
        }
        Self::new(self.kappa.iter().zip(shift).map(|(k, s)| k + s).collect())
    }

    pub fn n(&self) -> usize {
        self.kappa.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.kappa
    }

    /// `|kappa| = sum_j kappa_j`.
    pub fn total(&self) -> f64 {
        self.kappa.iter().sum()
    }

    /// `|kappa| + n/2`, the Dirichlet concentration.
    pub fn concentration(&self) -> f64 {
        self.total() + self.n() as f64 / 2.0
    }

    /// Eigenvalue `-m(m + |kappa| + (n-2)/2)` on polynomials of exact degree `m`.
    pub fn eigenvalue(&self, m: u32) -> f64 {
        let m = m as f64;
        -m * (m + self.total() + (self.n() as f64 - 2.0) / 2.0)
    }
}

/// Complete the free coordinates `x_1..x_{n-1}` with `x_n = 1 - sum`. A full
/// barycentric point of length `n` is accepted as is.
fn full_point(kappa: &JacobiIndex, x: &[f64]) -> Result<Vec<f64>> {
    let n = kappa.n();
    if x.len() == n {
        if x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || (x.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig("point lies outside the simplex".into()));
        }
        return Ok(x.to_vec());
    }
    if x.len() != n - 1 {
        return Err(Error::DimensionMismatch { expected: n - 1, got: x.len() });
    }
    let last = 1.0 - x.iter().sum::<f64>();
    let mut full = x.to_vec();
    full.push(last.max(0.0));
    if x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || last < -1e-12 {
        return Err(Error::InvalidConfig("point lies outside the simplex".into()));
    }
    Ok(full)
}

/// Log of the normalising constant `Gamma(|kappa| + n/2) / prod Gamma(kappa_j + 1/2)`.
pub fn log_normaliser(kappa: &JacobiIndex) -> f64 {
    ln_gamma(kappa.concentration()) - kappa.kappa.iter().map(|k| ln_gamma(k + 0.5)).sum::<f64>()
}

/// Dirichlet density `W^(kappa)` at the free coordinates `x_1..x_{n-1}` (or at
/// a full barycentric point of length `n`).
/// Boundary points give `0` or `+inf` according to the sign of the exponent.
pub fn dirichlet_density(kappa: &JacobiIndex, x: &[f64]) -> Result<f64> {
    let full = full_point(kappa, x)?;
    let mut log = log_normaliser(kappa);
    for (&k, &v) in kappa.kappa.iter().zip(&full) {
        let e = k - 0.5;
        if e != 0.0 {
            log += e * v.ln();
        }
    }
    Ok(log.exp())
}

/// `log W^(kappa)` at the free coordinates.
pub fn log_dirichlet_density(kappa: &JacobiIndex, x: &[f64]) -> Result<f64> {
    let full = full_point(kappa, x)?;
    Ok(log_normaliser(kappa)
        + kappa.kappa.iter().zip(&full).map(|(k, v)| if *k == 0.5 { 0.0 } else { (k - 0.5) * v.ln() }).sum::<f64>())
}

fn check_alpha(kappa: &JacobiIndex, alpha: &[u32]) -> Result<()> {
    let n = kappa.n();
    if alpha.len() != n - 1 && alpha.len() != n {
        return Err(Error::DimensionMismatch { expected: n - 1, got: alpha.len() });
    }
    Ok(())
}

/// `E[x^alpha]` under `W^(kappa)`. `alpha` has `n - 1` entries, or `n` if the
/// last coordinate is also raised to a power.
///
/// Evaluated as `prod_j (kappa_j + 1/2)_{alpha_j} / (|kappa| + n/2)_{|alpha|}`
/// with rising factorials, pairing numerator and denominator factors so that
/// no intermediate overflows.
pub fn dirichlet_moment(kappa: &JacobiIndex, alpha: &[u32]) -> Result<f64> {
    check_alpha(kappa, alpha)?;
    let c = kappa.concentration();
    let mut value = 1.0;
    let mut d = 0u32;
    for (&k, &a) in kappa.kappa.iter().zip(alpha) {
        for i in 0..a {
            value *= (k + 0.5 + i as f64) / (c + d as f64);
            d += 1;
        }
    }
    Ok(value)
}

/// `int (1 - l)/l pi(dl)` for the stationary law `pi(dl) = (2n-1)(2n-2) l (1-l)^(2n-3) dl`
/// of one squared modulus, by quadrature. The exact value is `2n - 2`.
pub fn stationary_inverse_ratio_mean(n: usize) -> Result<QuadratureResult> {
    if n < 2 {
        return Err(Error::InvalidDimension("the stationary marginal needs n >= 2".into()));
    }
    let c = ((2 * n - 1) * (2 * n - 2)) as f64;
    let p = 2 * n as i32 - 3;
    integrate_simplex(1, |x| (x[1] / x[0]) * c * x[0] * x[1].powi(p), 1e-12, 8, 4096)
}

/// Rising-factorial tables for computing many moments at high precision.
#[derive(Clone, Debug)]
pub(crate) struct MomentTable {
    /// `rising[j][a] = (kappa_j + 1/2)_a`.
    rising: Vec<Vec<Real>>,
    /// `inv_total[d] = 1 / (|kappa| + n/2)_d`.
    inv_total: Vec<Real>,
}

impl MomentTable {
    pub(crate) fn new(kappa: &JacobiIndex, max_total: u32, precision: usize) -> Self {
        let one = hp::int(1, precision);
        let rising = kappa
            .kappa
            .iter()
            .map(|&k| {
                let mut row = vec![one.clone()];
                for i in 0..max_total {
                    let f = hp::real(k + 0.5, precision) + hp::int(i as i64, precision);
                    let next = row.last().unwrap() * &f;
                    row.push(next);
                }
                row
            })
            .collect();
        let c = kappa.concentration();
        let mut inv_total = vec![one.clone()];
        for d in 0..max_total {
            let f = hp::real(c, precision) + hp::int(d as i64, precision);
            let next = inv_total.last().unwrap() / &f;
            inv_total.push(next);
        }
        Self { rising, inv_total }
    }

    /// Moment of the free coordinates raised to `alpha` (length `n - 1`).
    pub(crate) fn moment(&self, alpha: &[u32]) -> Real {
        let total: u32 = alpha.iter().sum();
        let mut v = self.inv_total[total as usize].clone();
        for (row, &a) in self.rising.iter().zip(alpha) {
            v = &v * &row[a as usize];
        }
        v
    }
}
