//! Arbitrary-precision binary floats for the polynomial layer.

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;

pub type Real = FBig<HalfEven, 2>;

/// Exact conversion of `x` followed by rounding to `precision` bits.
pub fn real(x: f64, precision: usize) -> Real {
    Real::try_from(x).expect("finite f64").with_precision(precision).value()
}

pub fn int(i: i64, precision: usize) -> Real {
    Real::from(i).with_precision(precision).value()
}

pub fn zero(precision: usize) -> Real {
    int(0, precision)
}

pub fn to_f64(x: &Real) -> f64 {
    x.to_f64().value()
}

/// `a += b * c`.
#[inline]
pub fn fma(a: &mut Real, b: &Real, c: &Real) {
    *a = &*a + &(b * c);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precision_survives_mixed_operations() {
        let p = 200;
        let third = int(1, p) / int(3, p);
        let back = &third * &int(3, p);
        assert!((to_f64(&back) - 1.0).abs() < 1e-300);
        // (1 + 2^-100) - 1 is representable only with more than 100 bits.
        let tiny = real(2f64.powi(-100), p);
        let diff = &(&int(1, p) + &tiny) - &int(1, p);
        assert_eq!(to_f64(&diff), 2f64.powi(-100));
    }
}
