//! Orthonormal Jacobi polynomials on the simplex and the Jacobi generator.
//!
//! The polynomials are produced by Gram–Schmidt orthonormalisation of the
//! monomials, in graded-lexicographic order, against the Dirichlet weight. This
//! is carried out as a Cholesky factorisation of the moment matrix in
//! arbitrary-precision arithmetic: at degree 40 the moment matrix has a
//! condition number far beyond double precision while the orthonormal
//! polynomials themselves are of moderate size on the simplex.

use serde::{Deserialize, Serialize};

use super::dirichlet::{JacobiIndex, MomentTable};
use super::hp::{self, Real};
use super::poly::{MonomialBasis, Polynomial};
use crate::error::{Error, Result};

/// Working precision in bits used for a basis of the given maximal degree.
pub fn default_precision(max_degree: u32) -> usize {
    128 + 12 * max_degree as usize
}

/// A simplex Jacobi polynomial `P_tau` with double-precision coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexPolynomial {
    pub tau: Vec<u32>,
    pub kappa: Vec<f64>,
    pub poly: Polynomial,
}

impl SimplexPolynomial {
    pub fn degree(&self) -> u32 {
        self.tau.iter().sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.poly.eval(x)
    }
}

/// Orthonormal basis `{P_tau : |tau| <= max_degree}` held in high precision.
#[derive(Clone, Debug)]
pub struct JacobiBasis {
    kappa: JacobiIndex,
    max_degree: u32,
    precision: usize,
    monomials: MonomialBasis,
    /// Row `k` holds the coefficients of `P_k` on monomials `0..=k`.
    coeffs: Vec<Vec<Real>>,
}

impl JacobiBasis {
    pub fn new(kappa: &JacobiIndex, max_degree: u32) -> Result<Self> {
        Self::with_precision(kappa, max_degree, default_precision(max_degree))
    }

    pub fn with_precision(kappa: &JacobiIndex, max_degree: u32, precision: usize) -> Result<Self> {
        let nv = kappa.n() - 1;
        let monomials = MonomialBasis::new(nv, max_degree);
        let moments = MomentTable::new(kappa, 2 * max_degree, precision);
        let size = monomials.len();
        let gram = |a: usize, b: usize| -> Real {
            let e: Vec<u32> = monomials.exponents(a).iter().zip(monomials.exponents(b)).map(|(x, y)| x + y).collect();
            moments.moment(&e)
        };
        // Pivots below this fraction of the diagonal have lost all significant bits.
        let guard = hp::real(2f64.powi(-(precision as i32 - 48).max(8)), precision);
        let mut l: Vec<Vec<Real>> = Vec::with_capacity(size);
        for k in 0..size {
            let mut row: Vec<Real> = Vec::with_capacity(k + 1);
            for j in 0..=k {
                let mut s = gram(k, j);
                for i in 0..j {
                    let other = if j == k { &row[i] } else { &l[j][i] };
                    s = &s - &(&row[i] * other);
                }
                if j == k {
                    let diag = gram(k, k);
                    if s <= &diag * &guard {
                        let degree = monomials.degree(k) as usize;
                        return Err(Error::Conditioning { degree, max_safe_degree: degree.saturating_sub(1) });
                    }
                    row.push(s.sqrt());
                } else {
                    row.push(&s / &l[j][j]);
                }
            }
            l.push(row);
        }
        // C = L^{-1}, lower triangular.
        let mut coeffs: Vec<Vec<Real>> = Vec::with_capacity(size);
        for k in 0..size {
            let inv_diag = hp::int(1, precision) / &l[k][k];
            let mut row: Vec<Real> = vec![hp::zero(precision); k + 1];
            for j in 0..k {
                let mut s = hp::zero(precision);
                for i in j..k {
                    hp::fma(&mut s, &l[k][i], &coeffs[i][j]);
                }
                row[j] = -(&s * &inv_diag);
            }
            row[k] = inv_diag;
            coeffs.push(row);
        }
        Ok(Self { kappa: kappa.clone(), max_degree, precision, monomials, coeffs })
    }

    pub fn kappa(&self) -> &JacobiIndex {
        &self.kappa
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn precision(&self) -> usize {
        self.precision
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Multi-degree `tau` of the `k`-th polynomial.
    pub fn tau(&self, k: usize) -> &[u32] {
        self.monomials.exponents(k)
    }

    pub fn degree(&self, k: usize) -> u32 {
        self.monomials.degree(k)
    }

    /// Generator eigenvalue of the `k`-th polynomial.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.kappa.eigenvalue(self.degree(k))
    }

    /// All `P_k(x)` at the free coordinates `x`, evaluated in high precision and rounded.
    pub fn eval_all(&self, x: &[f64]) -> Result<Vec<f64>> {
        let nv = self.monomials.nvars();
        if x.len() != nv {
            return Err(Error::DimensionMismatch { expected: nv, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("JacobiBasis::eval_all"));
        }
        let p = self.precision;
        let xs: Vec<Real> = x.iter().map(|&v| hp::real(v, p)).collect();
        let mut mons: Vec<Real> = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let m = match self.monomials.parent(i) {
                None => hp::int(1, p),
                Some((parent, var)) => &mons[parent] * &xs[var],
            };
            mons.push(m);
        }
        Ok(self
            .coeffs
            .iter()
            .map(|row| {
                let mut s = hp::zero(p);
                for (c, m) in row.iter().zip(&mons) {
                    hp::fma(&mut s, c, m);
                }
                hp::to_f64(&s)
            })
            .collect())
    }

    /// The `k`-th polynomial with coefficients rounded to double precision.
    pub fn polynomial(&self, k: usize) -> SimplexPolynomial {
        let nv = self.monomials.nvars();
        let mut poly = Polynomial::zero(nv);
        for (i, c) in self.coeffs[k].iter().enumerate() {
            let v = hp::to_f64(c);
            if v != 0.0 {
                poly.add_term(self.monomials.exponents(i), v).expect("matching variable count");
            }
        }
        SimplexPolynomial { tau: self.tau(k).to_vec(), kappa: self.kappa.as_slice().to_vec(), poly }
    }

    pub fn polynomials(&self) -> Vec<SimplexPolynomial> {
        (0..self.len()).map(|k| self.polynomial(k)).collect()
    }

    /// `int P_a P_b W` computed from the high-precision coefficients and exact moments.
    pub fn gram_entry(&self, a: usize, b: usize) -> f64 {
        let moments = MomentTable::new(&self.kappa, 2 * self.max_degree, self.precision);
        let mut s = hp::zero(self.precision);
        for (i, ci) in self.coeffs[a].iter().enumerate() {
            for (j, cj) in self.coeffs[b].iter().enumerate() {
                let e: Vec<u32> = self
                    .monomials
                    .exponents(i)
                    .iter()
                    .zip(self.monomials.exponents(j))
                    .map(|(x, y)| x + y)
                    .collect();
                s = &s + &(&(ci * cj) * &moments.moment(&e));
            }
        }
        hp::to_f64(&s)
    }
}

/// Orthonormal Jacobi polynomials of total degree at most `max_total_degree`,
/// in graded-lexicographic order of their multi-degree, each with positive
/// leading coefficient.
pub fn jacobi_polynomials(kappa: &JacobiIndex, max_total_degree: u32) -> Result<Vec<SimplexPolynomial>> {
    Ok(JacobiBasis::new(kappa, max_total_degree)?.polynomials())
}

/// Shared term-by-term action of the Jacobi operator on monomials in `m`
/// variables with parameters `k_j + 1/2` and concentration `c`:
/// `sum_j x_j(1 - x_j) d_jj + sum_j (k_j + 1/2 - c x_j) d_j - sum_{j != l} x_j x_l d_jl`.
fn jacobi_operator(half_shifted: &[f64], c: f64, p: &Polynomial) -> Polynomial {
    let m = p.nvars();
    let mut out = Polynomial::zero(m);
    for (e, &coef) in p.terms() {
        let total: u32 = e.iter().sum();
        let sum_sq: u32 = e.iter().map(|a| a * a).sum();
        // Diagonal terms on x^alpha: -alpha_j(alpha_j - 1) - c alpha_j; cross terms -alpha_j alpha_l.
        let cross = (total * total - sum_sq) as f64;
        let same = -(sum_sq as f64 - total as f64) - c * total as f64 - cross;
        out.add_term(e, coef * same).expect("same variable count");
        for j in 0..m {
            let a = e[j];
            if a == 0 {
                continue;
            }
            let mut lower = e.clone();
            lower[j] -= 1;
            let w = a as f64 * (a as f64 - 1.0) + half_shifted[j] * a as f64;
            out.add_term(&lower, coef * w).expect("same variable count");
        }
    }
    out.prune(0.0);
    out
}

/// The Jacobi operator `G_kappa` on polynomials in the `n - 1` free coordinates.
pub fn apply_generator(kappa: &JacobiIndex, p: &Polynomial) -> Result<Polynomial> {
    let m = kappa.n() - 1;
    if p.nvars() != m {
        return Err(Error::DimensionMismatch { expected: m, got: p.nvars() });
    }
    let shifted: Vec<f64> = kappa.as_slice()[..m].iter().map(|k| k + 0.5).collect();
    Ok(jacobi_operator(&shifted, kappa.concentration(), p))
}

/// The lifted operator acting on polynomials in all `n` barycentric coordinates.
pub fn apply_lifted_generator(kappa: &JacobiIndex, p: &Polynomial) -> Result<Polynomial> {
    let n = kappa.n();
    if p.nvars() != n {
        return Err(Error::DimensionMismatch { expected: n, got: p.nvars() });
    }
    let shifted: Vec<f64> = kappa.as_slice().iter().map(|k| k + 0.5).collect();
    Ok(jacobi_operator(&shifted, kappa.concentration(), p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_polynomials_for_beta_two_two() {
        let k = JacobiIndex::uniform(2, 1.5).unwrap();
        let ps = jacobi_polynomials(&k, 1).unwrap();
        assert_eq!(ps.len(), 2);
        assert!((ps[0].poly.coeff(&[0]) - 1.0).abs() < 1e-15);
        let s5 = 5f64.sqrt();
        assert!((ps[1].poly.coeff(&[1]) - 2.0 * s5).abs() < 1e-14);
        assert!((ps[1].poly.coeff(&[0]) + s5).abs() < 1e-14);
    }

    #[test]
    fn generator_kills_constants_and_scales_linear_polynomial() {
        let k = JacobiIndex::uniform(2, 1.5).unwrap();
        assert!(apply_generator(&k, &Polynomial::constant(1, 3.0)).unwrap().is_zero());
        let ps = jacobi_polynomials(&k, 1).unwrap();
        let g = apply_generator(&k, &ps[1].poly).unwrap();
        let diff = g.sub(&ps[1].poly.scale(-4.0));
        assert!(diff.max_abs_coeff() < 1e-13);
    }

    #[test]
    fn starved_precision_reports_conditioning() {
        let k = JacobiIndex::uniform(2, 1.5).unwrap();
        match JacobiBasis::with_precision(&k, 40, 53) {
            Err(Error::Conditioning { degree, max_safe_degree }) => {
                assert!(max_safe_degree < 40);
                assert_eq!(max_safe_degree + 1, degree);
            }
            other => panic!("expected a conditioning error, got {other:?}"),
        }
    }

    #[test]
    fn degree_forty_basis_is_orthonormal_at_sampled_pairs() {
        let k = JacobiIndex::uniform(2, 1.5).unwrap();
        let b = JacobiBasis::new(&k, 40).unwrap();
        for &(i, j) in &[(40, 40), (40, 39), (17, 3), (25, 25), (0, 40)] {
            let g = b.gram_entry(i, j);
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((g - expect).abs() < 1e-12, "({i},{j}) -> {g}");
        }
    }
}
