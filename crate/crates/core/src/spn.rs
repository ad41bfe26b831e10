//! Quaternionic matrices, the compact symplectic group Sp(n) and its Lie algebra.
//!
//! The Lie algebra sp(n) of skew-Hermitian quaternionic `n x n` matrices carries
//! the inner product `<X, Y> = 1/2 Re Tr(X* Y)`. The orthonormal basis used
//! throughout is ordered as
//!
//! * off-diagonal elements `E_jk e_a - E_kj conj(e_a)` for `j < k` in
//!   lexicographic order, with `a = 0..4` innermost (`e_0 = 1, e_1 = i, ...`),
//! * then diagonal elements `sqrt(2) E_jj e_a` for `j = 0..n`, `a = 1..4`.
//!
//! The dimension is `n(2n+1)`. Coordinates with respect to this basis are held in
//! [`TangentCoeffs`].

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::Quaternion;

/// Target unitarity defect of [`retract`].
pub const RETRACT_TOL: f64 = 1e-13;

/// Defects at or above this are treated as a diverged integrator.
pub const DIVERGENCE_DEFECT: f64 = 0.5;

const MAX_NEWTON_ITERS: usize = 20;

/// Truncation target for the Taylor part of [`expm`].
const EXPM_TAYLOR_TOL: f64 = 1e-17;

/// Dense row-major quaternionic square matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QMatrix {
    n: usize,
    data: Vec<Quaternion>,
}

impl QMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Quaternion::ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Quaternion::ONE;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Quaternion>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    /// Build from a real matrix given row by row.
    pub fn from_real(rows: &[Vec<f64>]) -> Result<Self> {
        let q: Vec<Vec<Quaternion>> =
            rows.iter().map(|r| r.iter().map(|&x| Quaternion::real(x)).collect()).collect();
        Self::from_rows(&q)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Quaternion {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Quaternion) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Quaternion] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[Quaternion] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<Quaternion>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.n);
        self.mul_into(other, &mut out);
        out
    }

    /// `out = self * other`; `out` must not alias either operand.
    pub fn mul_into(&self, other: &Self, out: &mut Self) {
        let n = self.n;
        debug_assert_eq!(other.n, n);
        debug_assert_eq!(out.n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = Quaternion::ZERO;
                for k in 0..n {
                    acc += self.data[i * n + k] * other.data[k * n + j];
                }
                out.data[i * n + j] = acc;
            }
        }
    }

    /// `out = self* * self`.
    pub fn gram_into(&self, out: &mut Self) {
        let n = self.n;
        for i in 0..n {
            for j in i..n {
                let mut acc = Quaternion::ZERO;
                for k in 0..n {
                    acc += self.data[k * n + i].conj_mul(self.data[k * n + j]);
                }
                out.data[i * n + j] = acc;
                out.data[j * n + i] = acc.conj();
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| *a + *b).collect();
        Self { n: self.n, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| *a - *b).collect();
        Self { n: self.n, data }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|a| *a * s).collect() }
    }

    pub fn trace(&self) -> Quaternion {
        (0..self.n).fold(Quaternion::ZERO, |acc, i| acc + self.get(i, i))
    }

    pub fn frobenius_sqr(&self) -> f64 {
        self.data.iter().map(|q| q.norm_sqr()).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sqr().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|q| q.is_finite())
    }

    /// Frobenius norm of `self* self - I`.
    pub fn unitarity_defect(&self) -> f64 {
        let mut g = Self::zeros(self.n);
        self.gram_into(&mut g);
        identity_distance(&g)
    }
}

fn identity_distance(g: &QMatrix) -> f64 {
    let n = g.n;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = if i == j { g.get(i, j) - Quaternion::ONE } else { g.get(i, j) };
            s += d.norm_sqr();
        }
    }
    s.sqrt()
}

/// An element of Sp(n): a quaternionic matrix with `U* U = I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpnMatrix(QMatrix);

impl SpnMatrix {
    pub fn identity(n: usize) -> Self {
        Self(QMatrix::identity(n))
    }

    /// Accept `m` if its unitarity defect is at most `tol`.
    pub fn from_matrix(m: QMatrix, tol: f64) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::NonFinite("SpnMatrix::from_matrix"));
        }
        let d = m.unitarity_defect();
        if d > tol {
            return Err(Error::InvalidConfig(format!("matrix is not in Sp(n): unitarity defect {d:.3e}")));
        }
        Ok(Self(m))
    }

    /// Wrap without checking; callers are responsible for unitarity.
    pub fn from_matrix_unchecked(m: QMatrix) -> Self {
        Self(m)
    }

    pub fn as_matrix(&self) -> &QMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> QMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.n
    }

    pub fn get(&self, i: usize, j: usize) -> Quaternion {
        self.0.get(i, j)
    }

    pub fn last_row(&self) -> &[Quaternion] {
        self.0.row(self.0.n - 1)
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.0.unitarity_defect()
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self(self.0.mul(&other.0))
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.adjoint())
    }
}

/// A skew-Hermitian quaternionic matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpnAlgebraElement(QMatrix);

impl SpnAlgebraElement {
    pub fn from_matrix(m: QMatrix, tol: f64) -> Result<Self> {
        let skew = m.add(&m.adjoint()).frobenius();
        if skew > tol {
            return Err(Error::InvalidConfig(format!("matrix is not skew-Hermitian: defect {skew:.3e}")));
        }
        Ok(Self(m))
    }

    pub fn as_matrix(&self) -> &QMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.n
    }
}

/// Coordinates of an sp(n) element in the orthonormal basis described in the module docs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentCoeffs {
    n: usize,
    values: Vec<f64>,
}

/// Number of unordered pairs `j < k` among `n` indices.
#[inline]
pub fn pair_count(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Index of the pair `(j, k)`, `j < k`, in lexicographic order.
#[inline]
pub fn pair_index(n: usize, j: usize, k: usize) -> usize {
    debug_assert!(j < k && k < n);
    j * (2 * n - j - 1) / 2 + (k - j - 1)
}

/// Dimension `n(2n+1)` of sp(n).
pub fn algebra_dim(n: usize) -> usize {
    n * (2 * n + 1)
}

impl TangentCoeffs {
    pub fn zeros(n: usize) -> Self {
        Self { n, values: vec![0.0; algebra_dim(n)] }
    }

    pub fn from_flat(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension("n must be positive".into()));
        }
        if values.len() != algebra_dim(n) {
            return Err(Error::DimensionMismatch { expected: algebra_dim(n), got: values.len() });
        }
        Ok(Self { n, values })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Number of off-diagonal coordinates, `4 * n(n-1)/2`.
    pub fn offdiag_len(&self) -> usize {
        4 * pair_count(self.n)
    }

    #[inline]
    pub fn offdiag_index(n: usize, j: usize, k: usize, a: usize) -> usize {
        4 * pair_index(n, j, k) + a
    }

    #[inline]
    pub fn diag_index(n: usize, j: usize, a: usize) -> usize {
        debug_assert!((1..4).contains(&a));
        4 * pair_count(n) + 3 * j + (a - 1)
    }

    pub fn offdiag(&self, j: usize, k: usize, a: usize) -> f64 {
        self.values[Self::offdiag_index(self.n, j, k, a)]
    }

    pub fn diag(&self, j: usize, a: usize) -> f64 {
        self.values[Self::diag_index(self.n, j, a)]
    }

    /// True when every vertical (diagonal) coordinate vanishes.
    pub fn is_horizontal(&self) -> bool {
        self.values[self.offdiag_len()..].iter().all(|&v| v == 0.0)
    }
}

/// The orthonormal basis of sp(n) in the documented order.
pub fn basis(n: usize) -> Result<Vec<SpnAlgebraElement>> {
    if n == 0 {
        return Err(Error::InvalidDimension("n must be positive".into()));
    }
    let d = algebra_dim(n);
    (0..d)
        .map(|p| {
            let mut c = TangentCoeffs::zeros(n);
            c.values[p] = 1.0;
            Ok(from_coeffs(&c))
        })
        .collect()
}

/// `1/2 Re Tr(X* Y)`.
pub fn hs_inner(x: &SpnAlgebraElement, y: &SpnAlgebraElement) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), got: y.dim() });
    }
    let s: f64 = x.0.data.iter().zip(&y.0.data).map(|(a, b)| a.inner(*b)).sum();
    Ok(0.5 * s)
}

/// The algebra element with the given basis coordinates.
pub fn from_coeffs(c: &TangentCoeffs) -> SpnAlgebraElement {
    let mut m = QMatrix::zeros(c.n);
    fill_from_coeffs(c.n, &c.values, &mut m);
    SpnAlgebraElement(m)
}

/// Write `sum_p c_p B_p` into `out` without allocating.
pub fn fill_from_coeffs(n: usize, c: &[f64], out: &mut QMatrix) {
    debug_assert_eq!(c.len(), algebra_dim(n));
    let mut p = 0;
    for j in 0..n {
        for k in (j + 1)..n {
            let q = Quaternion::new(c[p], c[p + 1], c[p + 2], c[p + 3]);
            out.data[j * n + k] = q;
            out.data[k * n + j] = -q.conj();
            p += 4;
        }
    }
    for j in 0..n {
        out.data[j * n + j] = Quaternion::new(0.0, c[p], c[p + 1], c[p + 2]) * SQRT_2;
        p += 3;
    }
}

/// Coordinates of a skew-Hermitian matrix in the orthonormal basis.
pub fn to_coeffs(x: &SpnAlgebraElement) -> TangentCoeffs {
    let n = x.dim();
    let mut c = TangentCoeffs::zeros(n);
    let mut p = 0;
    for j in 0..n {
        for k in (j + 1)..n {
            // Average the two entries so that a slightly non-skew input is projected.
            let q = (x.0.get(j, k) - x.0.get(k, j).conj()) * 0.5;
            c.values[p..p + 4].copy_from_slice(&q.to_array());
            p += 4;
        }
    }
    for j in 0..n {
        let q = x.0.get(j, j) * (1.0 / SQRT_2);
        c.values[p..p + 3].copy_from_slice(&[q.x, q.y, q.z]);
        p += 3;
    }
    c
}

/// Scratch space for [`expm_into`].
#[derive(Clone, Debug)]
pub struct ExpmWorkspace {
    x: QMatrix,
    x2: QMatrix,
    x3: QMatrix,
    acc: QMatrix,
    tmp: QMatrix,
}

impl ExpmWorkspace {
    pub fn new(n: usize) -> Self {
        let z = QMatrix::zeros(n);
        Self { x: z.clone(), x2: z.clone(), x3: z.clone(), acc: z.clone(), tmp: z }
    }
}

/// Matrix exponential of an algebra element.
pub fn expm(x: &SpnAlgebraElement) -> Result<SpnMatrix> {
    let n = x.dim();
    let mut ws = ExpmWorkspace::new(n);
    let mut out = QMatrix::zeros(n);
    expm_into(&x.0, &mut ws, &mut out)?;
    Ok(SpnMatrix(out))
}

/// Scaling and squaring around a Taylor polynomial evaluated by the
/// Paterson–Stockmeyer scheme in powers of `X^3`.
pub fn expm_into(x: &QMatrix, ws: &mut ExpmWorkspace, out: &mut QMatrix) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::NonFinite("expm"));
    }
    let n = x.n;
    let norm = x.frobenius();
    let mut squarings = 0u32;
    let mut theta = norm;
    while theta > 0.25 {
        theta *= 0.5;
        squarings += 1;
    }
    let scale = 0.5f64.powi(squarings as i32);

    // Smallest Taylor degree whose remainder bound falls below the target.
    let mut degree = 1usize;
    let mut term = theta;
    loop {
        term *= theta / (degree as f64 + 1.0);
        if term <= EXPM_TAYLOR_TOL || degree >= 12 {
            break;
        }
        degree += 1;
    }

    ws.x.data.iter_mut().zip(&x.data).for_each(|(d, s)| *d = *s * scale);
    ws.x.mul_into(&ws.x, &mut ws.x2);
    ws.x2.mul_into(&ws.x, &mut ws.x3);

    let mut coeff = vec![1.0f64; degree + 1];
    for k in 1..=degree {
        coeff[k] = coeff[k - 1] / k as f64;
    }
    let blocks = degree / 3;
    // acc = block(blocks); then acc = acc * X^3 + block(j) for j descending.
    write_block(&coeff, 3 * blocks, &ws.x, &ws.x2, &mut ws.acc);
    for b in (0..blocks).rev() {
        ws.acc.mul_into(&ws.x3, &mut ws.tmp);
        write_block(&coeff, 3 * b, &ws.x, &ws.x2, &mut ws.acc);
        ws.acc.data.iter_mut().zip(&ws.tmp.data).for_each(|(a, t)| *a += *t);
    }

    for _ in 0..squarings {
        ws.acc.mul_into(&ws.acc, &mut ws.tmp);
        std::mem::swap(&mut ws.acc, &mut ws.tmp);
    }
    out.data.copy_from_slice(&ws.acc.data);
    debug_assert_eq!(out.n, n);
    if !out.is_finite() {
        return Err(Error::NonFinite("expm"));
    }
    Ok(())
}

/// `out = c[k] I + c[k+1] X + c[k+2] X^2`, with missing coefficients treated as zero.
fn write_block(c: &[f64], k: usize, x: &QMatrix, x2: &QMatrix, out: &mut QMatrix) {
    let at = |i: usize| c.get(i).copied().unwrap_or(0.0);
    let (c0, c1, c2) = (at(k), at(k + 1), at(k + 2));
    let n = x.n;
    for idx in 0..n * n {
        out.data[idx] = x.data[idx] * c1 + x2.data[idx] * c2;
    }
    for i in 0..n {
        out.data[i * n + i].t += c0;
    }
}

/// Scratch space for [`retract_in_place`].
#[derive(Clone, Debug)]
pub struct RetractWorkspace {
    gram: QMatrix,
    tmp: QMatrix,
}

impl RetractWorkspace {
    pub fn new(n: usize) -> Self {
        Self { gram: QMatrix::zeros(n), tmp: QMatrix::zeros(n) }
    }
}

/// Project a nearly unitary matrix back onto Sp(n) by Newton–Schulz polar iteration.
pub fn retract(u: &QMatrix) -> Result<SpnMatrix> {
    let mut m = u.clone();
    let mut ws = RetractWorkspace::new(u.n);
    retract_in_place(&mut m, &mut ws)?;
    Ok(SpnMatrix(m))
}

/// In-place variant of [`retract`]; returns the defect measured before any correction.
pub fn retract_in_place(u: &mut QMatrix, ws: &mut RetractWorkspace) -> Result<f64> {
    if !u.is_finite() {
        return Err(Error::NonFinite("retract"));
    }
    let n = u.n;
    u.gram_into(&mut ws.gram);
    let initial = identity_distance(&ws.gram);
    let mut defect = initial;
    if defect >= DIVERGENCE_DEFECT {
        return Err(Error::Divergence { defect });
    }
    let mut iters = 0;
    while defect > RETRACT_TOL {
        if iters == MAX_NEWTON_ITERS {
            return Err(Error::Divergence { defect });
        }
        // U <- U (3I - U*U) / 2
        for idx in 0..n * n {
            ws.gram.data[idx] = ws.gram.data[idx] * -0.5;
        }
        for i in 0..n {
            ws.gram.data[i * n + i].t += 1.5;
        }
        u.mul_into(&ws.gram, &mut ws.tmp);
        std::mem::swap(&mut u.data, &mut ws.tmp.data);
        u.gram_into(&mut ws.gram);
        defect = identity_distance(&ws.gram);
        iters += 1;
    }
    Ok(initial)
}

/// Rate `c` in `E[U(t)] = exp(-c t) U(0)` for Brownian motion generated by
/// `1/2 sum_p B_p^2`. Computed from the basis rather than by formula.
pub fn casimir_rate(n: usize) -> Result<f64> {
    let b = basis(n)?;
    let mut sum = QMatrix::zeros(n);
    for e in &b {
        sum = sum.add(&e.0.mul(&e.0));
    }
    let c = -sum.get(0, 0).re();
    let scalar = sum.add(&QMatrix::identity(n).scale(c)).frobenius();
    if scalar > 1e-10 {
        return Err(Error::InvalidConfig("sum of squared basis elements is not scalar".into()));
    }
    Ok(0.5 * c)
}

/// Complete a unit quaternionic row vector to an element of Sp(n) having it as
/// its last row. Rows are orthonormalised by left-quaternionic Gram–Schmidt.
pub fn complete_to_spn(last_row: &[Quaternion]) -> Result<SpnMatrix> {
    let n = last_row.len();
    if n == 0 {
        return Err(Error::InvalidDimension("empty row".into()));
    }
    let norm: f64 = last_row.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidConfig(format!("last row must be a unit vector, has norm {norm}")));
    }
    let mut rows: Vec<Vec<Quaternion>> = vec![last_row.iter().map(|q| *q * (1.0 / norm)).collect()];
    let mut candidates: Vec<usize> = (0..n).collect();
    while rows.len() < n {
        // Pick the standard basis vector with the largest residual.
        let mut best: Option<(usize, Vec<Quaternion>, f64)> = None;
        for (ci, &m) in candidates.iter().enumerate() {
            let mut v = vec![Quaternion::ZERO; n];
            v[m] = Quaternion::ONE;
            for _ in 0..2 {
                for r in &rows {
                    let s = v.iter().zip(r).fold(Quaternion::ZERO, |acc, (a, b)| acc + a.mul_conj(*b));
                    for (vk, rk) in v.iter_mut().zip(r) {
                        *vk -= s * *rk;
                    }
                }
            }
            let len = v.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt();
            if best.as_ref().map_or(true, |b| len > b.2) {
                best = Some((ci, v, len));
            }
        }
        let (ci, v, len) = best.expect("candidate set cannot be empty before completion");
        candidates.remove(ci);
        rows.push(v.into_iter().map(|q| q * (1.0 / len)).collect());
    }
    rows.rotate_left(1);
    let m = QMatrix::from_rows(&rows)?;
    SpnMatrix::from_matrix(m, 1e-12)
}

/// A real orthogonal element of Sp(n) whose last row is `(1/sqrt n, ..., 1/sqrt n)`,
/// so that the squared moduli of the last row sit at the barycentre of the simplex.
pub fn barycentric_start(n: usize) -> Result<SpnMatrix> {
    let v = 1.0 / (n as f64).sqrt();
    complete_to_spn(&vec![Quaternion::real(v); n])
}

/// A real element of Sp(n) whose last row has squared moduli `lambda`.
pub fn start_with_last_row_moduli(lambda: &[f64]) -> Result<SpnMatrix> {
    if lambda.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::InvalidConfig("squared moduli must be non-negative".into()));
    }
    let row: Vec<Quaternion> = lambda.iter().map(|&l| Quaternion::real(l.sqrt())).collect();
    complete_to_spn(&row)
}
