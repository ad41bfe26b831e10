//! Heat kernel of the simplex Jacobi diffusion and the characteristic function
//! of the stochastic areas.

use serde::{Deserialize, Serialize};

use super::dirichlet::{log_dirichlet_density, JacobiIndex};
use super::jacobi::JacobiBasis;
use super::quadrature::integrate_simplex;
use crate::error::{Error, Result};
use crate::sde::SimplexState;

/// Relative size of the last retained shell above which a kernel value is flagged.
pub const KERNEL_TAIL_TOL: f64 = 1e-10;

/// Relative tolerance of the adaptive simplex quadrature.
pub const QUADRATURE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: f64,
    /// Magnitude of the highest retained degree shell.
    pub tail_bound: f64,
    /// `false` when the tail bound exceeds [`KERNEL_TAIL_TOL`] relative to the value.
    pub accurate: bool,
}

/// Truncated spectral series of the transition density with respect to `W^(kappa)`.
#[derive(Clone, Debug)]
pub struct HeatKernel {
    basis: JacobiBasis,
    eig: Vec<f64>,
}

impl HeatKernel {
    pub fn new(kappa: &JacobiIndex, max_degree: u32) -> Result<Self> {
        let basis = JacobiBasis::new(kappa, max_degree)?;
        let eig = (0..basis.len()).map(|k| basis.eigenvalue(k)).collect();
        Ok(Self { basis, eig })
    }

    pub fn basis(&self) -> &JacobiBasis {
        &self.basis
    }

    pub fn eval(&self, t: f64, x: &[f64], y: &[f64]) -> Result<KernelValue> {
        let px = self.basis.eval_all(x)?;
        let py = self.basis.eval_all(y)?;
        self.eval_values(t, &px, &py)
    }

    /// Series from precomputed basis values at the two points.
    pub fn eval_values(&self, t: f64, px: &[f64], py: &[f64]) -> Result<KernelValue> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidConfig(format!("heat kernel time must be positive, got {t}")));
        }
        let top = self.basis.max_degree();
        let mut value = 0.0;
        let mut tail = 0.0;
        for k in 0..self.eig.len() {
            let term = (self.eig[k] * t).exp() * px[k] * py[k];
            value += term;
            if self.basis.degree(k) == top {
                tail += term.abs();
            }
        }
        if !value.is_finite() {
            return Err(Error::NonFinite("heat kernel"));
        }
        let accurate = top == 0 || tail <= KERNEL_TAIL_TOL * value.abs().max(1.0);
        Ok(KernelValue { value, tail_bound: tail, accurate })
    }
}

/// `q_t^(kappa)(x, y)` truncated at total degree `max_degree`.
pub fn heat_kernel(kappa: &JacobiIndex, t: f64, x: &[f64], y: &[f64], max_degree: u32) -> Result<KernelValue> {
    HeatKernel::new(kappa, max_degree)?.eval(t, x, y)
}

/// Frequencies `u_j = (u_j^1, u_j^2, u_j^3)` paired with the areas of column `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyVector {
    u: Vec<[f64; 3]>,
}

impl FrequencyVector {
    pub fn new(u: Vec<[f64; 3]>) -> Result<Self> {
        if u.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("FrequencyVector"));
        }
        Ok(Self { u })
    }

    pub fn zero(n: usize) -> Self {
        Self { u: vec![[0.0; 3]; n] }
    }

    pub fn from_flat(n: usize, v: &[f64]) -> Result<Self> {
        if v.len() != 3 * n {
            return Err(Error::DimensionMismatch { expected: 3 * n, got: v.len() });
        }
        Self::new(v.chunks(3).map(|c| [c[0], c[1], c[2]]).collect())
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.u
    }

    pub fn flat(&self) -> Vec<f64> {
        self.u.iter().flatten().copied().collect()
    }

    /// `mu_j = sqrt(1 + |u_j|^2) - 1`, evaluated without cancellation.
    pub fn mu(&self) -> Vec<f64> {
        self.u
            .iter()
            .map(|r| {
                let s = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
                s / ((1.0 + s).sqrt() + 1.0)
            })
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.u.iter().flatten().all(|&x| x == 0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { u: self.u.iter().map(|r| [r[0] * s, r[1] * s, r[2] * s]).collect() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CfValue {
    pub value: f64,
    /// Largest kernel tail bound met during the evaluation.
    pub kernel_tail: f64,
    pub kernel_accurate: bool,
    /// Relative change at the last quadrature refinement (0 when no quadrature was needed).
    pub quadrature_rel_change: f64,
}

impl CfValue {
    fn exact_one() -> Self {
        Self { value: 1.0, kernel_tail: 0.0, kernel_accurate: true, quadrature_rel_change: 0.0 }
    }
}

/// Characteristic function of the stochastic areas for one frequency vector,
/// with the two kernels it needs built once.
///
/// The simplex process of squared moduli has generator twice the Jacobi
/// operator of index `(3/2, ..., 3/2)`, so kernels are evaluated at time `2t`.
#[derive(Clone, Debug)]
pub struct AreaCf {
    n: usize,
    u: FrequencyVector,
    mu: Vec<f64>,
    base: JacobiIndex,
    shifted: JacobiIndex,
    kernel: Option<HeatKernel>,
    base_kernel: Option<HeatKernel>,
}

impl AreaCf {
    pub fn new(u: &FrequencyVector, max_degree: u32) -> Result<Self> {
        let n = u.n();
        let base = JacobiIndex::uniform(n, 1.5)?;
        let mu = u.mu();
        let shifted = base.shifted(&mu)?;
        let (kernel, base_kernel) = if u.is_zero() {
            (None, None)
        } else {
            (Some(HeatKernel::new(&shifted, max_degree)?), Some(HeatKernel::new(&base, max_degree)?))
        };
        Ok(Self { n, u: u.clone(), mu, base, shifted, kernel, base_kernel })
    }

    /// The deterministic factor `exp(-(2n-2) sum mu_j t - 1/2 sum_{j != l} (u_j.u_l + mu_j mu_l) t)`.
    pub fn log_prefactor(&self, t: f64) -> f64 {
        let n = self.n;
        let rows = self.u.rows();
        let mut cross = 0.0;
        for j in 0..n {
            for l in 0..n {
                if j != l {
                    let dot: f64 = (0..3).map(|a| rows[j][a] * rows[l][a]).sum();
                    cross += dot + self.mu[j] * self.mu[l];
                }
            }
        }
        -(2.0 * n as f64 - 2.0) * self.mu.iter().sum::<f64>() * t - 0.5 * cross * t
    }

    fn check(&self, t: f64, s: &SimplexState) -> Result<()> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidConfig(format!("time must be positive, got {t}")));
        }
        if s.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: s.dim() });
        }
        if !s.is_interior() {
            return Err(Error::InvalidConfig("simplex point must be interior".into()));
        }
        Ok(())
    }

    /// `E[exp(i sum u.a(t)) | lambda(t) = lam]` for the process started at `lam0`.
    pub fn conditional(&self, t: f64, lam0: &SimplexState, lam: &SimplexState) -> Result<CfValue> {
        self.check(t, lam0)?;
        self.check(t, lam)?;
        let (Some(k), Some(kb)) = (&self.kernel, &self.base_kernel) else {
            return Ok(CfValue::exact_one());
        };
        let m = self.n - 1;
        let (x0, x) = (&lam0.as_slice()[..m], &lam.as_slice()[..m]);
        let q = k.eval(2.0 * t, x0, x)?;
        let qb = kb.eval(2.0 * t, x0, x)?;
        let log_ratio: f64 = self
            .mu
            .iter()
            .zip(lam0.as_slice().iter().zip(lam.as_slice()))
            .map(|(mu, (a, b))| 0.5 * mu * (a.ln() - b.ln()))
            .sum::<f64>()
            + log_dirichlet_density(&self.shifted, lam.as_slice())?
            - log_dirichlet_density(&self.base, lam.as_slice())?;
        let value = (self.log_prefactor(t) + log_ratio).exp() * q.value / qb.value;
        Ok(CfValue {
            value,
            kernel_tail: q.tail_bound.max(qb.tail_bound),
            kernel_accurate: q.accurate && qb.accurate,
            quadrature_rel_change: 0.0,
        })
    }

    /// `E[exp(i sum u.a(t))]` for the process started at `lam0`, integrating the
    /// conditional formula against the law of `lambda(t)`.
    pub fn unconditional(&self, t: f64, lam0: &SimplexState) -> Result<CfValue> {
        self.check(t, lam0)?;
        let Some(k) = &self.kernel else {
            return Ok(CfValue::exact_one());
        };
        let m = self.n - 1;
        let x0 = &lam0.as_slice()[..m];
        let p0 = k.basis().eval_all(x0)?;
        let log_start: f64 = self.mu.iter().zip(lam0.as_slice()).map(|(mu, a)| 0.5 * mu * a.ln()).sum();
        let mut worst_tail: f64 = 0.0;
        let mut accurate = true;
        let mut failure: Option<Error> = None;
        let integrand = |full: &[f64]| -> f64 {
            if full.iter().any(|&v| v <= 0.0) {
                return 0.0;
            }
            let mut eval = || -> Result<f64> {
                let px = k.basis().eval_all(&full[..m])?;
                let q = k.eval_values(2.0 * t, &p0, &px)?;
                worst_tail = worst_tail.max(q.tail_bound);
                accurate &= q.accurate;
                let mut log = log_start + log_dirichlet_density(&self.shifted, full)?;
                for (mu, lj) in self.mu.iter().zip(full) {
                    log -= 0.5 * mu * lj.ln();
                }
                Ok(log.exp() * q.value)
            };
            match eval() {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        };
        let max_order = if m == 1 { 2048 } else { 128 };
        let res = integrate_simplex(m, integrand, QUADRATURE_TOL, 16, max_order)?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(CfValue {
            value: self.log_prefactor(t).exp() * res.value,
            kernel_tail: worst_tail,
            kernel_accurate: accurate,
            quadrature_rel_change: res.rel_change,
        })
    }
}

pub fn cf_conditional(
    t: f64,
    lam0: &SimplexState,
    lam: &SimplexState,
    u: &FrequencyVector,
    max_degree: u32,
) -> Result<CfValue> {
    AreaCf::new(u, max_degree)?.conditional(t, lam0, lam)
}

pub fn cf_unconditional(t: f64, lam0: &SimplexState, u: &FrequencyVector, max_degree: u32) -> Result<CfValue> {
    AreaCf::new(u, max_degree)?.unconditional(t, lam0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_of_example_frequency() {
        let u = FrequencyVector::new(vec![[2.0, 1.0, 2.0], [0.0; 3]]).unwrap();
        let mu = u.mu();
        assert!((mu[0] - (10f64.sqrt() - 1.0)).abs() < 1e-15);
        assert_eq!(mu[1], 0.0);
    }

    #[test]
    fn zero_frequency_gives_exactly_one() {
        let lam0 = SimplexState::new(vec![0.3, 0.7]).unwrap();
        let lam = SimplexState::new(vec![0.6, 0.4]).unwrap();
        let u = FrequencyVector::zero(2);
        assert_eq!(cf_conditional(0.4, &lam0, &lam, &u, 40).unwrap().value, 1.0);
        assert_eq!(cf_unconditional(0.4, &lam0, &u, 40).unwrap().value, 1.0);
    }

    #[test]
    fn kernel_at_large_time_is_one() {
        let k = JacobiIndex::uniform(2, 1.5).unwrap();
        let v = heat_kernel(&k, 30.0, &[0.2], &[0.7], 10).unwrap();
        assert!((v.value - 1.0).abs() < 1e-12);
        assert!(v.accurate);
    }

    #[test]
    fn kernel_flags_small_times() {
        let k = JacobiIndex::uniform(2, 1.5).unwrap();
        let v = heat_kernel(&k, 1e-4, &[0.5], &[0.5], 10).unwrap();
        assert!(!v.accurate);
        assert!(heat_kernel(&k, 0.0, &[0.5], &[0.5], 10).is_err());
    }
}
