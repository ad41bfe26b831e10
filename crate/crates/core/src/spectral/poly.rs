//! Sparse real polynomials in several variables and graded-lexicographic
//! monomial enumeration.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse polynomial keyed by exponent vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "PolynomialRepr", try_from = "PolynomialRepr")]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

#[derive(Serialize, Deserialize)]
struct PolynomialRepr {
    nvars: usize,
    terms: Vec<Term>,
}

#[derive(Serialize, Deserialize)]
struct Term {
    exponents: Vec<u32>,
    coeff: f64,
}

impl From<Polynomial> for PolynomialRepr {
    fn from(p: Polynomial) -> Self {
        let terms = p.terms.into_iter().map(|(exponents, coeff)| Term { exponents, coeff }).collect();
        Self { nvars: p.nvars, terms }
    }
}

impl TryFrom<PolynomialRepr> for Polynomial {
    type Error = Error;
    fn try_from(r: PolynomialRepr) -> Result<Self> {
        let mut p = Polynomial::zero(r.nvars);
        for t in r.terms {
            p.add_term(&t.exponents, t.coeff)?;
        }
        Ok(p)
    }
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.terms.insert(vec![0; nvars], c);
        p.prune(0.0);
        p
    }

    pub fn monomial(exponents: &[u32], c: f64) -> Self {
        let mut p = Self::zero(exponents.len());
        p.terms.insert(exponents.to_vec(), c);
        p.prune(0.0);
        p
    }

    /// The coordinate function `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Self::monomial(&e, 1.0)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &f64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, exponents: &[u32]) -> f64 {
        self.terms.get(exponents).copied().unwrap_or(0.0)
    }

    pub fn add_term(&mut self, exponents: &[u32], c: f64) -> Result<()> {
        if exponents.len() != self.nvars {
            return Err(Error::DimensionMismatch { expected: self.nvars, got: exponents.len() });
        }
        *self.terms.entry(exponents.to_vec()).or_insert(0.0) += c;
        Ok(())
    }

    fn add_term_unchecked(&mut self, exponents: Vec<u32>, c: f64) {
        *self.terms.entry(exponents).or_insert(0.0) += c;
    }

    /// Drop terms with `|c| <= tol`.
    pub fn prune(&mut self, tol: f64) {
        self.terms.retain(|_, c| c.abs() > tol);
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|&c| c == 0.0)
    }

    /// Largest absolute coefficient.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&k, &xi)| xi.powi(k as i32)).product::<f64>())
            .sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut p = self.clone();
        p.terms.values_mut().for_each(|c| *c *= s);
        p
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!(self.nvars, o.nvars, "polynomials in different numbers of variables");
        let mut p = self.clone();
        for (e, c) in &o.terms {
            p.add_term_unchecked(e.clone(), *c);
        }
        p
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(-1.0))
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.nvars, o.nvars, "polynomials in different numbers of variables");
        let mut p = Self::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                p.add_term_unchecked(e, c1 * c2);
            }
        }
        p
    }

    /// `d/dx_i`.
    pub fn derivative(&self, i: usize) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut d = e.clone();
                d[i] -= 1;
                p.add_term_unchecked(d, c * e[i] as f64);
            }
        }
        p
    }

    /// Substitute `x_last = 1 - sum_{i < last} x_i`, giving a polynomial in one fewer variable.
    pub fn restrict_to_simplex(&self) -> Self {
        let m = self.nvars - 1;
        let mut complement = Self::constant(m, 1.0);
        for i in 0..m {
            complement = complement.sub(&Self::var(m, i));
        }
        let mut out = Self::zero(m);
        let mut powers: Vec<Self> = vec![Self::constant(m, 1.0)];
        for (e, c) in &self.terms {
            let k = e[m] as usize;
            while powers.len() <= k {
                let next = powers.last().unwrap().mul(&complement);
                powers.push(next);
            }
            let head = Self::monomial(&e[..m], *c);
            out = out.add(&head.mul(&powers[k]));
        }
        out
    }
}

/// Exponent vectors of total degree at most `max_degree`, in graded
/// lexicographic order: by total degree, then lexicographically decreasing in
/// the exponent of the first variable, then the second, and so on.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    nvars: usize,
    exponents: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
    /// For each monomial other than 1: `(parent, var)` with `m = parent * x_var`.
    parent: Vec<Option<(usize, usize)>>,
}

impl MonomialBasis {
    pub fn new(nvars: usize, max_degree: u32) -> Self {
        let mut exponents = Vec::new();
        for d in 0..=max_degree {
            let mut cur = vec![0u32; nvars];
            compositions(d, 0, &mut cur, &mut exponents);
        }
        let index: HashMap<Vec<u32>, usize> = exponents.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect();
        let parent = exponents
            .iter()
            .map(|e| {
                let v = e.iter().position(|&k| k > 0)?;
                let mut p = e.clone();
                p[v] -= 1;
                Some((index[&p], v))
            })
            .collect();
        Self { nvars, exponents, index, parent }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn exponents(&self, i: usize) -> &[u32] {
        &self.exponents[i]
    }

    pub fn degree(&self, i: usize) -> u32 {
        self.exponents[i].iter().sum()
    }

    pub fn index_of(&self, e: &[u32]) -> Option<usize> {
        self.index.get(e).copied()
    }

    pub fn parent(&self, i: usize) -> Option<(usize, usize)> {
        self.parent[i]
    }
}

fn compositions(remaining: u32, pos: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    let n = cur.len();
    if n == 0 {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if pos == n - 1 {
        cur[pos] = remaining;
        out.push(cur.clone());
        return;
    }
    for k in (0..=remaining).rev() {
        cur[pos] = k;
        compositions(remaining - k, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_lex_order_in_two_variables() {
        let b = MonomialBasis::new(2, 2);
        let got: Vec<Vec<u32>> = (0..b.len()).map(|i| b.exponents(i).to_vec()).collect();
        assert_eq!(got, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(b.parent(4), Some((2, 0)));
    }

    #[test]
    fn basis_size_is_binomial() {
        // C(d + m, m) monomials of degree <= d in m variables.
        assert_eq!(MonomialBasis::new(2, 20).len(), 231);
        assert_eq!(MonomialBasis::new(1, 40).len(), 41);
        assert_eq!(MonomialBasis::new(3, 4).len(), 35);
    }

    #[test]
    fn restriction_substitutes_complement() {
        // x0 * x1 on the segment x0 + x1 = 1 becomes x0 - x0^2.
        let p = Polynomial::monomial(&[1, 1], 1.0);
        let r = p.restrict_to_simplex();
        assert_eq!(r.coeff(&[1]), 1.0);
        assert_eq!(r.coeff(&[2]), -1.0);
        assert_eq!(r.coeff(&[0]), 0.0);
    }

    #[test]
    fn derivative_and_product() {
        let x = Polynomial::var(2, 0);
        let y = Polynomial::var(2, 1);
        let p = x.mul(&x).mul(&y).add(&y.scale(3.0));
        let d = p.derivative(0);
        assert_eq!(d.coeff(&[1, 1]), 2.0);
        assert_eq!(d.terms().count(), 1);
        assert!((p.eval(&[2.0, 0.5]) - 3.5).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let p = Polynomial::monomial(&[2, 1], -1.5).add(&Polynomial::constant(2, 0.25));
        let s = serde_json::to_string(&p).unwrap();
        let back: Polynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(p, back);
    }
}
