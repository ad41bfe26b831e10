//! Dirichlet weights, simplex Jacobi polynomials, the Jacobi heat kernel, the
//! characteristic function of the stochastic areas and limit covariances.

pub mod covariance;
pub mod dirichlet;
pub mod hp;
pub mod jacobi;
pub mod kernel;
pub mod poly;
pub mod quadrature;

pub use covariance::{kron_i3, limit_covariance, winding_covariance, WindingCandidates};
pub use dirichlet::{dirichlet_density, dirichlet_moment, stationary_inverse_ratio_mean, JacobiIndex};
pub use jacobi::{apply_generator, apply_lifted_generator, jacobi_polynomials, JacobiBasis, SimplexPolynomial};
pub use kernel::{cf_conditional, cf_unconditional, heat_kernel, AreaCf, CfValue, FrequencyVector, HeatKernel, KernelValue};
pub use poly::{MonomialBasis, Polynomial};
pub use quadrature::{gauss_legendre, integrate_simplex, simplex_rule, QuadratureResult};
