//! Gauss–Legendre rules and adaptive integration over the simplex.
//!
//! The simplex `{x_i >= 0, sum x_i <= 1}` is reached from the unit cube by the
//! collapsed map `x_k = s_k prod_{i<k} (1 - s_i)`. Each cube coordinate is first
//! passed through the polynomial substitution `s = I_v(6, 6)` (regularised
//! incomplete beta), whose derivative `2772 v^5 (1-v)^5` absorbs the algebraic
//! endpoint behaviour of Dirichlet weights.

use crate::error::{Error, Result};

/// Nodes and weights of the `m`-point Gauss–Legendre rule on `[0, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        // Chebyshev-like initial guess for the i-th root of P_m on [-1, 1].
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[m - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[m - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// `P_m(x)` and `P_m'(x)` by the three-term recurrence.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `I_v(6, 6)`.
fn smooth_cdf(v: f64) -> f64 {
    const BINOM_11: [f64; 6] = [462.0, 330.0, 165.0, 55.0, 11.0, 1.0];
    let w = 1.0 - v;
    (6..=11).map(|j| BINOM_11[j - 6] * v.powi(j as i32) * w.powi(11 - j as i32)).sum()
}

/// The substituted coordinate, its complement (computed without cancellation) and the derivative.
fn smooth(v: f64) -> (f64, f64, f64) {
    let w = 1.0 - v;
    (smooth_cdf(v), smooth_cdf(w), 2772.0 * (v * w).powi(5))
}

#[derive(Clone, Copy, Debug)]
pub struct QuadratureResult {
    pub value: f64,
    /// Relative change between the last two refinements.
    pub rel_change: f64,
    /// Points per dimension of the accepted rule.
    pub order: usize,
}

/// Integral of `f` over the standard simplex of dimension `dim` with a tensor
/// rule of `m` points per dimension.
///
/// `f` receives the full barycentric point of length `dim + 1`; its last entry
/// `1 - sum x_i` is computed without cancellation.
pub fn simplex_rule<F: FnMut(&[f64]) -> f64>(dim: usize, m: usize, f: &mut F) -> f64 {
    let (nodes, weights) = gauss_legendre(m);
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim + 1];
    let mut total = 0.0;
    if dim == 0 {
        x[0] = 1.0;
        return f(&x);
    }
    loop {
        let mut remaining = 1.0;
        let mut jac = 1.0;
        for k in 0..dim {
            let (s, c, ds) = smooth(nodes[idx[k]]);
            x[k] = remaining * s;
            jac *= weights[idx[k]] * ds * remaining;
            remaining *= c;
        }
        x[dim] = remaining;
        if jac > 0.0 {
            total += jac * f(&x);
        }
        let mut k = dim;
        loop {
            if k == 0 {
                return total;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Adaptive integration over the simplex: the order per dimension doubles
/// from `start` until successive values agree to `rel_tol`.
pub fn integrate_simplex<F: FnMut(&[f64]) -> f64>(
    dim: usize,
    mut f: F,
    rel_tol: f64,
    start: usize,
    max_order: usize,
) -> Result<QuadratureResult> {
    let mut m = start.max(2);
    let mut prev = simplex_rule(dim, m, &mut f);
    loop {
        let next_m = 2 * m;
        if next_m > max_order {
            return Err(Error::Quadrature(format!(
                "no convergence to relative tolerance {rel_tol:e} with {m} points per dimension"
            )));
        }
        let cur = simplex_rule(dim, next_m, &mut f);
        if !cur.is_finite() {
            return Err(Error::Quadrature("non-finite integrand".into()));
        }
        let change = (cur - prev).abs() / cur.abs().max(1e-300);
        if change < rel_tol || (cur - prev).abs() < 1e-300 {
            return Ok(QuadratureResult { value: cur, rel_change: change, order: next_m });
        }
        prev = cur;
        m = next_m;
    }
}
