//! Real quaternions `t + x i + y j + z k` with Hamilton's convention `ij = k`.

use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this norm `exp_imag` switches to its Taylor series.
const EXP_SERIES_CUTOFF: f64 = 1e-4;

/// `log_unit` refuses inputs whose real part is within this of -1.
pub const ANTIPODAL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// A purely imaginary quaternion, stored as its `(i, j, k)` coefficients.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImagQuaternion {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ZERO: Self = Self::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Self = Self::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Self = Self::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Self = Self::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Self = Self::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        Self { t, x, y, z }
    }

    pub const fn real(t: f64) -> Self {
        Self::new(t, 0.0, 0.0, 0.0)
    }

    /// The basis unit `e_a` for `a = 0..4` (`1, i, j, k`).
    pub fn unit(a: usize) -> Self {
        match a {
            0 => Self::ONE,
            1 => Self::I,
            2 => Self::J,
            3 => Self::K,
            _ => panic!("quaternion unit index {a} out of range"),
        }
    }

    pub fn from_array(c: [f64; 4]) -> Self {
        Self::new(c[0], c[1], c[2], c[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.t, self.x, self.y, self.z]
    }

    #[inline]
    pub fn conj(self) -> Self {
        Self::new(self.t, -self.x, -self.y, -self.z)
    }

    #[inline]
    pub fn norm_sqr(self) -> f64 {
        self.t * self.t + self.x * self.x + self.y * self.y + self.z * self.z
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    #[inline]
    pub fn re(self) -> f64 {
        self.t
    }

    #[inline]
    pub fn im(self) -> ImagQuaternion {
        ImagQuaternion::new(self.x, self.y, self.z)
    }

    /// Euclidean inner product on R^4, equal to `Re(p q̄)`.
    #[inline]
    pub fn inner(self, other: Self) -> f64 {
        self.t * other.t + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn inverse(self) -> Self {
        self.conj() * (1.0 / self.norm_sqr())
    }

    pub fn normalize(self) -> Self {
        self * (1.0 / self.norm())
    }

    pub fn is_finite(self) -> bool {
        self.t.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// `self * conj(other)`, fused to avoid the intermediate conjugate.
    #[inline]
    pub fn mul_conj(self, o: Self) -> Self {
        Self::new(
            self.t * o.t + self.x * o.x + self.y * o.y + self.z * o.z,
            -self.t * o.x + self.x * o.t - self.y * o.z + self.z * o.y,
            -self.t * o.y + self.x * o.z + self.y * o.t - self.z * o.x,
            -self.t * o.z - self.x * o.y + self.y * o.x + self.z * o.t,
        )
    }

    /// `conj(self) * other`.
    #[inline]
    pub fn conj_mul(self, o: Self) -> Self {
        Self::new(
            self.t * o.t + self.x * o.x + self.y * o.y + self.z * o.z,
            self.t * o.x - self.x * o.t - self.y * o.z + self.z * o.y,
            self.t * o.y + self.x * o.z - self.y * o.t - self.z * o.x,
            self.t * o.z - self.x * o.y + self.y * o.x - self.z * o.t,
        )
    }
}

impl ImagQuaternion {
    pub const ZERO: Self = Self::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(c: [f64; 3]) -> Self {
        Self::new(c[0], c[1], c[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn to_quaternion(self) -> Quaternion {
        Quaternion::new(0.0, self.x, self.y, self.z)
    }

    pub fn norm_sqr(self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// The commutator `pq - qp`, which is twice the cross product.
    pub fn commutator(self, o: Self) -> Self {
        Self::new(
            2.0 * (self.y * o.z - self.z * o.y),
            2.0 * (self.z * o.x - self.x * o.z),
            2.0 * (self.x * o.y - self.y * o.x),
        )
    }
}

/// `exp(v) = cos|v| + (v/|v|) sin|v|` for imaginary `v`.
pub fn exp_imag(v: ImagQuaternion) -> Quaternion {
    let r2 = v.norm_sqr();
    let r = r2.sqrt();
    let (c, s) = if r < EXP_SERIES_CUTOFF {
        // sin(r)/r and cos(r) to fourth order; the next terms are below 1e-20.
        (1.0 - r2 / 2.0 + r2 * r2 / 24.0, 1.0 - r2 / 6.0 + r2 * r2 / 120.0)
    } else {
        (r.cos(), r.sin() / r)
    };
    Quaternion::new(c, s * v.x, s * v.y, s * v.z)
}

/// Principal logarithm of a unit quaternion, returning an imaginary quaternion
/// of norm at most `pi`.
pub fn log_unit(q: Quaternion) -> Result<ImagQuaternion> {
    if !q.is_finite() {
        return Err(Error::NonFinite("log_unit"));
    }
    let n = q.norm();
    let q = q * (1.0 / n);
    if q.t <= -1.0 + ANTIPODAL_TOL {
        return Err(Error::Antipodal);
    }
    let v = q.im();
    let s = v.norm();
    if s == 0.0 {
        return Ok(ImagQuaternion::ZERO);
    }
    let theta = s.atan2(q.t);
    Ok(v * (theta / s))
}

impl Add for Quaternion {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.t + o.t, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Quaternion {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.t - o.t, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Quaternion {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.t, -self.x, -self.y, -self.z)
    }
}

impl Mul for Quaternion {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.t * o.t - self.x * o.x - self.y * o.y - self.z * o.z,
            self.t * o.x + self.x * o.t + self.y * o.z - self.z * o.y,
            self.t * o.y - self.x * o.z + self.y * o.t + self.z * o.x,
            self.t * o.z + self.x * o.y - self.y * o.x + self.z * o.t,
        )
    }
}

impl Mul<f64> for Quaternion {
    type Output = Self;
    #[inline]
    fn mul(self, s: f64) -> Self {
        Self::new(self.t * s, self.x * s, self.y * s, self.z * s)
    }
}

impl AddAssign for Quaternion {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl SubAssign for Quaternion {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl MulAssign<f64> for Quaternion {
    #[inline]
    fn mul_assign(&mut self, s: f64) {
        *self = *self * s;
    }
}

impl Add for ImagQuaternion {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for ImagQuaternion {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for ImagQuaternion {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for ImagQuaternion {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl AddAssign for ImagQuaternion {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}
