//! Path samplers: Brownian motion on Sp(n) and Sp(1)^n, on the unit sphere of
//! `H^n`, and the Jacobi diffusion on the simplex.
//!
//! Every path draws its noise from its own counter-based stream keyed by
//! `(seed, path_index, lane)`, so results do not depend on how paths are
//! distributed across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::{exp_imag, ImagQuaternion, Quaternion};
use crate::spn::{
    algebra_dim, complete_to_spn, expm_into, fill_from_coeffs, retract_in_place, ExpmWorkspace, QMatrix,
    RetractWorkspace, SpnMatrix, TangentCoeffs,
};

/// How [`sample_sphere_bm`] moves on the unit sphere of `H^n`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereScheme {
    /// Last row of a Brownian path on Sp(n).
    #[default]
    LastRow,
    /// Projected Euler steps on the round sphere `S^{4n-1}`.
    Intrinsic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub t_final: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub sphere_scheme: SphereScheme,
}

impl SimConfig {
    pub fn new(n: usize, t_final: f64, dt: f64, n_paths: usize, seed: u64) -> Self {
        Self { n, t_final, dt, n_paths, seed, sphere_scheme: SphereScheme::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidDimension("n must be at least 1".into()));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::InvalidConfig(format!("t_final must be non-negative, got {}", self.t_final)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if self.t_final > 0.0 && self.dt > self.t_final {
            return Err(Error::InvalidConfig("dt exceeds t_final".into()));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidConfig("n_paths must be positive".into()));
        }
        Ok(())
    }

    /// Number of steps; the grid is uniform with step `t_final / n_steps <= dt`.
    pub fn n_steps(&self) -> usize {
        if self.t_final == 0.0 {
            return 0;
        }
        ((self.t_final / self.dt - 1e-9).ceil() as usize).max(1)
    }

    /// The step actually used.
    pub fn step(&self) -> f64 {
        match self.n_steps() {
            0 => 0.0,
            k => self.t_final / k as f64,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        let h = self.step();
        (0..=self.n_steps()).map(|k| k as f64 * h).collect()
    }
}

/// Independent noise sources within one path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Lane {
    Group = 0,
    Fiber = 1,
    Simplex = 2,
    Sphere = 3,
}

/// Generator for one path and one noise lane.
pub fn path_rng(seed: u64, path_index: u64, lane: Lane) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((path_index << 4) | lane as u64);
    rng
}

#[inline]
pub fn normal<R: rand::Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Map `f` over path indices `0..n_paths` on a pool of `workers` threads,
/// returning results in path order.
pub fn run_paths<T, F>(workers: usize, n_paths: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..n_paths as u64).into_par_iter().map(&f).collect()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupPath {
    pub times: Vec<f64>,
    pub states: Vec<SpnMatrix>,
    /// Brownian increments of the driving noise in basis coordinates, one per step.
    pub increments: Vec<TangentCoeffs>,
}

/// Geodesic Euler stepper `U <- retract(U expm(sum_p dB_p B_p))`.
#[derive(Clone, Debug)]
pub struct GroupStepper {
    n: usize,
    u: QMatrix,
    horizontal: bool,
    sqrt_h: f64,
    coeffs: Vec<f64>,
    alg: QMatrix,
    exp: QMatrix,
    next: QMatrix,
    expm_ws: ExpmWorkspace,
    retract_ws: RetractWorkspace,
}

impl GroupStepper {
    /// With `horizontal` set, only the off-diagonal directions are driven.
    pub fn new(u0: &SpnMatrix, h: f64, horizontal: bool) -> Self {
        let n = u0.dim();
        Self {
            n,
            u: u0.as_matrix().clone(),
            horizontal,
            sqrt_h: h.sqrt(),
            coeffs: vec![0.0; algebra_dim(n)],
            alg: QMatrix::zeros(n),
            exp: QMatrix::zeros(n),
            next: QMatrix::zeros(n),
            expm_ws: ExpmWorkspace::new(n),
            retract_ws: RetractWorkspace::new(n),
        }
    }

    pub fn current(&self) -> &QMatrix {
        &self.u
    }

    /// Increments used by the most recent step.
    pub fn last_increments(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn state(&self) -> SpnMatrix {
        SpnMatrix::from_matrix_unchecked(self.u.clone())
    }

    /// Draw fresh increments and advance; returns the increments used.
    pub fn step<R: rand::Rng>(&mut self, rng: &mut R) -> Result<&[f64]> {
        let off = 4 * self.n * (self.n - 1) / 2;
        for (p, c) in self.coeffs.iter_mut().enumerate() {
            *c = if self.horizontal && p >= off { 0.0 } else { self.sqrt_h * normal(rng) };
        }
        self.advance()?;
        Ok(&self.coeffs)
    }

    /// Advance with prescribed increments.
    pub fn step_with(&mut self, increments: &[f64]) -> Result<()> {
        if increments.len() != self.coeffs.len() {
            return Err(Error::DimensionMismatch { expected: self.coeffs.len(), got: increments.len() });
        }
        self.coeffs.copy_from_slice(increments);
        self.advance()
    }

    fn advance(&mut self) -> Result<()> {
        fill_from_coeffs(self.n, &self.coeffs, &mut self.alg);
        expm_into(&self.alg, &mut self.expm_ws, &mut self.exp)?;
        self.u.mul_into(&self.exp, &mut self.next);
        std::mem::swap(&mut self.u, &mut self.next);
        retract_in_place(&mut self.u, &mut self.retract_ws)?;
        Ok(())
    }
}

fn check_dim(cfg: &SimConfig, got: usize) -> Result<()> {
    if got != cfg.n {
        return Err(Error::DimensionMismatch { expected: cfg.n, got });
    }
    Ok(())
}

fn sample_group(cfg: &SimConfig, u0: &SpnMatrix, path_index: u64, horizontal: bool) -> Result<GroupPath> {
    cfg.validate()?;
    check_dim(cfg, u0.dim())?;
    let steps = cfg.n_steps();
    let mut rng = path_rng(cfg.seed, path_index, Lane::Group);
    let mut stepper = GroupStepper::new(u0, cfg.step(), horizontal);
    let mut states = Vec::with_capacity(steps + 1);
    let mut increments = Vec::with_capacity(steps);
    states.push(u0.clone());
    for _ in 0..steps {
        let inc = stepper.step(&mut rng)?.to_vec();
        increments.push(TangentCoeffs::from_flat(cfg.n, inc)?);
        states.push(stepper.state());
    }
    Ok(GroupPath { times: cfg.times(), states, increments })
}

/// Brownian motion on Sp(n) with generator `1/2 sum_p B_p^2`, started at `u0`.
pub fn sample_spn_bm(cfg: &SimConfig, u0: &SpnMatrix, path_index: u64) -> Result<GroupPath> {
    sample_group(cfg, u0, path_index, false)
}

/// Horizontal Brownian motion: only the off-diagonal basis directions are driven.
pub fn sample_horizontal_bm(cfg: &SimConfig, u0: &SpnMatrix, path_index: u64) -> Result<GroupPath> {
    sample_group(cfg, u0, path_index, true)
}

/// Stepper for `n` independent Brownian motions on the unit quaternions.
///
/// Each factor moves by `beta_j <- beta_j exp(sqrt(s_j dt) g)` with `g` a standard
/// Gaussian in `R^3`, so that with `s_j = 1` the generator is half the Laplacian
/// of the unit 3-sphere.
#[derive(Clone, Debug)]
pub struct Sp1nStepper {
    beta: Vec<Quaternion>,
    sd: Vec<f64>,
    increments: Vec<ImagQuaternion>,
}

impl Sp1nStepper {
    pub fn new(beta0: &[Quaternion], variance_scales: &[f64], h: f64) -> Result<Self> {
        if beta0.len() != variance_scales.len() {
            return Err(Error::DimensionMismatch { expected: beta0.len(), got: variance_scales.len() });
        }
        if variance_scales.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig("variance scales must be finite and non-negative".into()));
        }
        Ok(Self {
            beta: beta0.to_vec(),
            sd: variance_scales.iter().map(|s| (s * h).sqrt()).collect(),
            increments: vec![ImagQuaternion::ZERO; beta0.len()],
        })
    }

    pub fn current(&self) -> &[Quaternion] {
        &self.beta
    }

    /// Advance and return the imaginary increments `sqrt(s_j dt) g_j`.
    pub fn step<R: rand::Rng>(&mut self, rng: &mut R) -> &[ImagQuaternion] {
        for ((b, &sd), inc) in self.beta.iter_mut().zip(&self.sd).zip(self.increments.iter_mut()) {
            let v = ImagQuaternion::new(sd * normal(rng), sd * normal(rng), sd * normal(rng));
            *b = (*b * exp_imag(v)).normalize();
            *inc = v;
        }
        &self.increments
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuaternionVectorPath {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Quaternion>>,
}

/// Brownian motion on Sp(1)^n with unit variance per factor.
pub fn sample_sp1n_bm(cfg: &SimConfig, beta0: &[Quaternion], path_index: u64) -> Result<QuaternionVectorPath> {
    sample_sp1n_bm_scaled(cfg, beta0, &vec![1.0; beta0.len()], path_index)
}

/// Brownian motion on Sp(1)^n whose `j`-th factor runs at speed `variance_scales[j]`.
pub fn sample_sp1n_bm_scaled(
    cfg: &SimConfig,
    beta0: &[Quaternion],
    variance_scales: &[f64],
    path_index: u64,
) -> Result<QuaternionVectorPath> {
    cfg.validate()?;
    check_dim(cfg, beta0.len())?;
    let mut rng = path_rng(cfg.seed, path_index, Lane::Fiber);
    let mut stepper = Sp1nStepper::new(beta0, variance_scales, cfg.step())?;
    let mut states = Vec::with_capacity(cfg.n_steps() + 1);
    states.push(beta0.to_vec());
    for _ in 0..cfg.n_steps() {
        stepper.step(&mut rng);
        states.push(stepper.current().to_vec());
    }
    Ok(QuaternionVectorPath { times: cfg.times(), states })
}

fn unit_vector_check(x0: &[Quaternion]) -> Result<()> {
    let norm = x0.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidConfig(format!("starting point must be a unit vector, has norm {norm}")));
    }
    Ok(())
}

/// Brownian motion on the unit sphere of `H^n` (as row vectors).
///
/// The two schemes in [`SphereScheme`] induce the same law on the squared
/// moduli `|x_j|^2`. They differ along the orbits `x -> q x` of the unit
/// quaternions, which the last-row scheme traverses at twice the speed.
pub fn sample_sphere_bm(cfg: &SimConfig, x0: &[Quaternion], path_index: u64) -> Result<QuaternionVectorPath> {
    cfg.validate()?;
    check_dim(cfg, x0.len())?;
    unit_vector_check(x0)?;
    let steps = cfg.n_steps();
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.to_vec());
    match cfg.sphere_scheme {
        SphereScheme::LastRow => {
            let u0 = complete_to_spn(x0)?;
            let mut rng = path_rng(cfg.seed, path_index, Lane::Group);
            let mut stepper = GroupStepper::new(&u0, cfg.step(), false);
            for _ in 0..steps {
                stepper.step(&mut rng)?;
                states.push(stepper.current().row(cfg.n - 1).to_vec());
            }
        }
        SphereScheme::Intrinsic => {
            let mut rng = path_rng(cfg.seed, path_index, Lane::Sphere);
            let sqrt_h = cfg.step().sqrt();
            let mut x = x0.to_vec();
            let mut g = vec![Quaternion::ZERO; cfg.n];
            for _ in 0..steps {
                for q in g.iter_mut() {
                    *q = Quaternion::new(normal(&mut rng), normal(&mut rng), normal(&mut rng), normal(&mut rng));
                }
                let radial: f64 = g.iter().zip(&x).map(|(a, b)| a.inner(*b)).sum();
                for (xi, gi) in x.iter_mut().zip(&g) {
                    *xi += (*gi - *xi * radial) * sqrt_h;
                }
                let norm = x.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt();
                if !norm.is_finite() {
                    return Err(Error::NonFinite("sample_sphere_bm"));
                }
                x.iter_mut().for_each(|q| *q *= 1.0 / norm);
                states.push(x.clone());
            }
        }
    }
    Ok(QuaternionVectorPath { times: cfg.times(), states })
}

/// A point of the closed simplex `{lambda_j >= 0, sum lambda_j = 1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexState {
    lambda: Vec<f64>,
}

impl SimplexState {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.len() < 2 {
            return Err(Error::InvalidDimension("simplex needs at least two coordinates".into()));
        }
        if lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidConfig("simplex coordinates must be finite and non-negative".into()));
        }
        let s: f64 = lambda.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("simplex coordinates sum to {s}, not 1")));
        }
        Ok(Self { lambda })
    }

    pub fn barycentre(n: usize) -> Self {
        Self { lambda: vec![1.0 / n as f64; n] }
    }

    /// Squared moduli of a unit vector in `H^n`.
    pub fn from_unit_vector(x: &[Quaternion]) -> Self {
        Self { lambda: x.iter().map(|q| q.norm_sqr()).collect() }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lambda
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_interior(&self) -> bool {
        self.lambda.iter().all(|&l| l > 0.0)
    }
}

/// Drift `2(2 - 2n lambda_j)` of the simplex diffusion.
pub fn jacobi_drift(lambda: &[f64]) -> Vec<f64> {
    let n = lambda.len() as f64;
    lambda.iter().map(|&l| 2.0 * (2.0 - 2.0 * n * l)).collect()
}

/// Euler stepper for
/// `d lambda_j = 2 sum_{l != j} sqrt(lambda_l lambda_j) d gamma_{lj} + 2(2 - 2n lambda_j) dt`
/// with `gamma` an antisymmetric matrix of independent Brownian motions.
/// Negative coordinates are truncated to zero and the point renormalised.
#[derive(Clone, Debug)]
pub struct SimplexStepper {
    lambda: Vec<f64>,
    h: f64,
    sqrt_h: f64,
    delta: Vec<f64>,
    truncations: usize,
}

impl SimplexStepper {
    pub fn new(lambda0: &SimplexState, h: f64) -> Self {
        let n = lambda0.dim();
        Self { lambda: lambda0.lambda.clone(), h, sqrt_h: h.sqrt(), delta: vec![0.0; n], truncations: 0 }
    }

    pub fn current(&self) -> &[f64] {
        &self.lambda
    }

    pub fn truncations(&self) -> usize {
        self.truncations
    }

    pub fn step<R: rand::Rng>(&mut self, rng: &mut R) -> Result<()> {
        let n = self.lambda.len();
        let nf = n as f64;
        for (d, &l) in self.delta.iter_mut().zip(&self.lambda) {
            *d = 2.0 * (2.0 - 2.0 * nf * l) * self.h;
        }
        for l in 0..n {
            for j in (l + 1)..n {
                let g = self.sqrt_h * normal(rng);
                let amp = 2.0 * (self.lambda[l] * self.lambda[j]).sqrt() * g;
                self.delta[j] += amp;
                self.delta[l] -= amp;
            }
        }
        let mut truncated = false;
        for (x, d) in self.lambda.iter_mut().zip(&self.delta) {
            *x += d;
            if *x < 0.0 {
                *x = 0.0;
                truncated = true;
            }
        }
        if truncated {
            self.truncations += 1;
        }
        let s: f64 = self.lambda.iter().sum();
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::NonFinite("simplex stepper"));
        }
        self.lambda.iter_mut().for_each(|x| *x /= s);
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimplexPath {
    pub times: Vec<f64>,
    pub states: Vec<SimplexState>,
    /// Number of steps at which a coordinate had to be truncated to zero.
    pub truncations: usize,
}

/// Euler scheme for the simplex diffusion started at an interior point.
pub fn sample_jacobi_simplex(cfg: &SimConfig, lambda0: &SimplexState, path_index: u64) -> Result<SimplexPath> {
    cfg.validate()?;
    check_dim(cfg, lambda0.dim())?;
    if !lambda0.is_interior() {
        return Err(Error::InvalidConfig("starting point must lie in the open simplex".into()));
    }
    let mut rng = path_rng(cfg.seed, path_index, Lane::Simplex);
    let mut stepper = SimplexStepper::new(lambda0, cfg.step());
    let mut states = Vec::with_capacity(cfg.n_steps() + 1);
    states.push(lambda0.clone());
    for _ in 0..cfg.n_steps() {
        stepper.step(&mut rng)?;
        states.push(SimplexState { lambda: stepper.current().to_vec() });
    }
    Ok(SimplexPath { times: cfg.times(), states, truncations: stepper.truncations() })
}
