//! The quaternionic flag manifold in affine coordinates, its stochastic area
//! processes and the fibre coordinates that rebuild Sp(n) paths from flag paths.
//!
//! For `U` with non-vanishing last row, column `j` is described by
//! `w_ij = q_ij q_nj^{-1}` (`i < n-1`) and `lambda_j = |q_nj|^2 = 1/(1 + |w_j|^2)`.
//! The stochastic area of column `j` is the line integral of
//! `Im(conj(w_j) dw_j) / (1 + |w_j|^2)`; the fibre coordinate
//! `Theta_j = q_nj / |q_nj|` of a horizontal path solves `dTheta = -(d a) Theta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::{exp_imag, ImagQuaternion, Quaternion};
use crate::sde::{normal, path_rng, run_paths, GroupPath, GroupStepper, Lane, SimConfig, SimplexState, Sp1nStepper};
use crate::spn::{QMatrix, SpnMatrix, TangentCoeffs};

/// Smallest admissible `|q_nj|` before a path is declared to have left the chart.
pub const DOMAIN_FLOOR: f64 = 1e-6;

/// Tolerance of the relation `1 + w_i* w_j = 0` checked by [`assemble`].
pub const ORTHOGONALITY_TOL: f64 = 1e-8;

/// Affine coordinates of a flag: `w[j]` is column `j`, of length `n - 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlagState {
    w: Vec<Vec<Quaternion>>,
    lambda: Vec<f64>,
}

impl FlagState {
    /// Build from columns; `lambda` is derived from `w`.
    pub fn new(w: Vec<Vec<Quaternion>>) -> Result<Self> {
        let n = w.len();
        if n < 2 {
            return Err(Error::InvalidDimension("flag coordinates need n >= 2".into()));
        }
        if let Some(c) = w.iter().find(|c| c.len() != n - 1) {
            return Err(Error::DimensionMismatch { expected: n - 1, got: c.len() });
        }
        if w.iter().flatten().any(|q| !q.is_finite()) {
            return Err(Error::NonFinite("FlagState::new"));
        }
        let lambda = w.iter().map(|c| 1.0 / (1.0 + col_norm_sqr(c))).collect();
        Ok(Self { w, lambda })
    }

    fn zeros(n: usize) -> Self {
        Self { w: vec![vec![Quaternion::ZERO; n - 1]; n], lambda: vec![1.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn column(&self, j: usize) -> &[Quaternion] {
        &self.w[j]
    }

    pub fn columns(&self) -> &[Vec<Quaternion>] {
        &self.w
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn simplex_state(&self) -> Result<SimplexState> {
        let s: f64 = self.lambda.iter().sum();
        SimplexState::new(self.lambda.iter().map(|l| l / s).collect())
    }

    /// `max_{i<j} |1 + w_i* w_j|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let s = self.w[i]
                    .iter()
                    .zip(&self.w[j])
                    .fold(Quaternion::ONE, |acc, (a, b)| acc + a.conj_mul(*b));
                worst = worst.max(s.norm());
            }
        }
        worst
    }

    /// `max_j |lambda_j - 1/(1 + |w_j|^2)|`.
    pub fn consistency_defect(&self) -> f64 {
        self.w
            .iter()
            .zip(&self.lambda)
            .map(|(c, l)| (l - 1.0 / (1.0 + col_norm_sqr(c))).abs())
            .fold(0.0, f64::max)
    }
}

#[inline]
fn col_norm_sqr(c: &[Quaternion]) -> f64 {
    c.iter().map(|q| q.norm_sqr()).sum()
}

/// Per-column imaginary quaternions stored as `n x 3` coefficients on `(i, j, k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaVector {
    a: Vec<[f64; 3]>,
}

impl AreaVector {
    pub fn zeros(n: usize) -> Self {
        Self { a: vec![[0.0; 3]; n] }
    }

    pub fn from_components(c: &[ImagQuaternion]) -> Self {
        Self { a: c.iter().map(|q| q.to_array()).collect() }
    }

    pub fn from_flat(n: usize, v: &[f64]) -> Result<Self> {
        if v.len() != 3 * n {
            return Err(Error::DimensionMismatch { expected: 3 * n, got: v.len() });
        }
        Ok(Self { a: v.chunks(3).map(|c| [c[0], c[1], c[2]]).collect() })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn component(&self, j: usize) -> ImagQuaternion {
        ImagQuaternion::from_array(self.a[j])
    }

    pub fn set_component(&mut self, j: usize, v: ImagQuaternion) {
        self.a[j] = v.to_array();
    }

    /// Coefficients ordered `(j, a)` with the imaginary unit index innermost.
    pub fn flat(&self) -> Vec<f64> {
        self.a.iter().flatten().copied().collect()
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.a
    }

    pub fn add_assign(&mut self, o: &Self) {
        for (x, y) in self.a.iter_mut().zip(&o.a) {
            for c in 0..3 {
                x[c] += y[c];
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { a: self.a.iter().map(|r| [r[0] * s, r[1] * s, r[2] * s]).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().flatten().all(|x| x.is_finite())
    }
}

/// Unit quaternions `Theta_j`, one per column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberState {
    theta: Vec<Quaternion>,
}

impl FiberState {
    pub fn new(theta: Vec<Quaternion>) -> Result<Self> {
        if let Some(q) = theta.iter().find(|q| (q.norm() - 1.0).abs() > 1e-12) {
            return Err(Error::InvalidConfig(format!("fibre coordinate has norm {}", q.norm())));
        }
        Ok(Self { theta })
    }

    pub fn identity(n: usize) -> Self {
        Self { theta: vec![Quaternion::ONE; n] }
    }

    pub fn as_slice(&self) -> &[Quaternion] {
        &self.theta
    }
}

/// Affine coordinates of `U` using the default [`DOMAIN_FLOOR`].
pub fn project_affine(u: &SpnMatrix) -> Result<FlagState> {
    project_affine_with_floor(u.as_matrix(), DOMAIN_FLOOR)
}

pub fn project_affine_with_floor(u: &QMatrix, floor: f64) -> Result<FlagState> {
    let n = u.dim();
    if n < 2 {
        return Err(Error::InvalidDimension("flag coordinates need n >= 2".into()));
    }
    let mut out = FlagState::zeros(n);
    project_into(u, floor, &mut out)?;
    Ok(out)
}

fn project_into(u: &QMatrix, floor: f64, out: &mut FlagState) -> Result<()> {
    let n = u.dim();
    for j in 0..n {
        let q = u.get(n - 1, j);
        let m2 = q.norm_sqr();
        let modulus = m2.sqrt();
        if !(modulus > floor) {
            return Err(Error::DomainExit { column: j, modulus });
        }
        let inv = q.conj() * (1.0 / m2);
        let col = &mut out.w[j];
        for (i, w) in col.iter_mut().enumerate() {
            *w = u.get(i, j) * inv;
        }
        out.lambda[j] = 1.0 / (1.0 + col_norm_sqr(col));
    }
    Ok(())
}

/// Stratonovich midpoint increment of the area one-form between two flags.
pub fn area_increment(prev: &FlagState, next: &FlagState) -> Result<AreaVector> {
    if prev.dim() != next.dim() {
        return Err(Error::DimensionMismatch { expected: prev.dim(), got: next.dim() });
    }
    let mut out = AreaVector::zeros(prev.dim());
    area_increment_into(prev, next, &mut out);
    if !out.is_finite() {
        return Err(Error::NonFinite("area_increment"));
    }
    Ok(out)
}

fn area_increment_into(prev: &FlagState, next: &FlagState, out: &mut AreaVector) {
    for (j, (c0, c1)) in prev.w.iter().zip(&next.w).enumerate() {
        let mut num = Quaternion::ZERO;
        let mut mid2 = 0.0;
        for (a, b) in c0.iter().zip(c1) {
            let mid = (*a + *b) * 0.5;
            num += mid.conj_mul(*b - *a);
            mid2 += mid.norm_sqr();
        }
        let s = 1.0 / (1.0 + mid2);
        out.a[j] = [num.x * s, num.y * s, num.z * s];
    }
}

/// Per-step area increments along a sampled flag path.
pub fn area_increments(path: &[FlagState]) -> Result<Vec<AreaVector>> {
    if path.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: path.len() });
    }
    path.windows(2).map(|w| area_increment(&w[0], &w[1])).collect()
}

/// Stochastic area accumulated along a sampled flag path.
pub fn integrate_area(path: &[FlagState]) -> Result<AreaVector> {
    let incs = area_increments(path)?;
    let mut total = AreaVector::zeros(path[0].dim());
    for d in &incs {
        total.add_assign(d);
    }
    Ok(total)
}

/// Midpoint increment of the connection form `eta_j = Im((U* dU)_jj)` along the
/// chord from `u` to `u_next`.
pub fn eval_eta_increment(u: &QMatrix, u_next: &QMatrix) -> Vec<ImagQuaternion> {
    let n = u.dim();
    (0..n)
        .map(|j| {
            let mut acc = Quaternion::ZERO;
            for k in 0..n {
                let a = u.get(k, j);
                let b = u_next.get(k, j);
                acc += ((a + b) * 0.5).conj_mul(b - a);
            }
            acc.im()
        })
        .collect()
}

/// Sum of [`eval_eta_increment`] along a sampled group path.
pub fn integrate_eta(states: &[SpnMatrix]) -> AreaVector {
    let n = states.first().map_or(0, |u| u.dim());
    let mut eta = AreaVector::zeros(n);
    for w in states.windows(2) {
        for (acc, d) in eta.a.iter_mut().zip(eval_eta_increment(w[0].as_matrix(), w[1].as_matrix())) {
            let d = d.to_array();
            for c in 0..3 {
                acc[c] += d[c];
            }
        }
    }
    eta
}

/// Express accumulated `eta` in the orthonormal vertical coordinates of sp(n),
/// in which the connection form of Brownian motion has unit covariance.
pub fn eta_basis_coords(eta: &AreaVector) -> AreaVector {
    eta.scaled(std::f64::consts::FRAC_1_SQRT_2)
}

/// `Theta <- exp(-d a) Theta` for every column.
pub fn step_theta(theta: &mut [Quaternion], da: &AreaVector) {
    for (t, d) in theta.iter_mut().zip(&da.a) {
        let r = exp_imag(ImagQuaternion::new(-d[0], -d[1], -d[2]));
        *t = (r * *t).normalize();
    }
}

/// Fibre path driven by a sequence of area increments.
pub fn evolve_theta(increments: &[AreaVector], theta0: &FiberState) -> Vec<FiberState> {
    let mut theta = theta0.theta.clone();
    let mut out = Vec::with_capacity(increments.len() + 1);
    out.push(theta0.clone());
    for d in increments {
        step_theta(&mut theta, d);
        out.push(FiberState { theta: theta.clone() });
    }
    out
}

/// `Theta_j = q_nj / |q_nj|`.
pub fn theta_of(u: &SpnMatrix) -> FiberState {
    let n = u.dim();
    FiberState { theta: u.last_row().iter().take(n).map(|q| q.normalize()).collect() }
}

/// Rebuild the group element with fibre coordinates `theta` over the flag `w`:
/// column `j` is `(w_j, 1) Theta_j / sqrt(1 + |w_j|^2)`.
pub fn assemble(theta: &FiberState, w: &FlagState) -> Result<SpnMatrix> {
    let n = w.dim();
    if theta.theta.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: theta.theta.len() });
    }
    let defect = w.orthogonality_defect();
    if !(defect <= ORTHOGONALITY_TOL) {
        return Err(Error::AssemblyInvariant(format!("orthogonality defect {defect:.3e}")));
    }
    let mut m = QMatrix::zeros(n);
    assemble_into(&theta.theta, w, &mut m);
    let d = m.unitarity_defect();
    if !(d <= 1e-8) {
        return Err(Error::AssemblyInvariant(format!("unitarity defect {d:.3e}")));
    }
    Ok(SpnMatrix::from_matrix_unchecked(m))
}

fn assemble_into(theta: &[Quaternion], w: &FlagState, out: &mut QMatrix) {
    let n = w.dim();
    for j in 0..n {
        let q = theta[j] * w.lambda[j].sqrt();
        for i in 0..n - 1 {
            out.set(i, j, w.w[j][i] * q);
        }
        out.set(n - 1, j, q);
    }
}

/// Streaming simulation of the flag Brownian motion together with its area
/// and the horizontal fibre coordinate.
///
/// The flag path is the affine projection of a horizontal Brownian motion on
/// Sp(n); its law is that of the projection of the full Brownian motion.
#[derive(Clone, Debug)]
pub struct FlagStepper {
    group: GroupStepper,
    floor: f64,
    prev: FlagState,
    next: FlagState,
    theta: Vec<Quaternion>,
    area: AreaVector,
    last: AreaVector,
    steps: usize,
}

impl FlagStepper {
    pub fn new(u0: &SpnMatrix, h: f64, floor: f64) -> Result<Self> {
        let n = u0.dim();
        if n < 2 {
            return Err(Error::InvalidDimension("flag coordinates need n >= 2".into()));
        }
        let prev = project_affine_with_floor(u0.as_matrix(), floor)?;
        Ok(Self {
            group: GroupStepper::new(u0, h, true),
            floor,
            next: prev.clone(),
            prev,
            theta: theta_of(u0).theta,
            area: AreaVector::zeros(n),
            last: AreaVector::zeros(n),
            steps: 0,
        })
    }

    /// Advance one step; returns the area increment of the step.
    pub fn step<R: rand::Rng>(&mut self, rng: &mut R) -> Result<&AreaVector> {
        self.group.step(rng)?;
        self.absorb()
    }

    /// Advance with prescribed horizontal increments.
    pub fn step_with(&mut self, increments: &[f64]) -> Result<&AreaVector> {
        self.group.step_with(increments)?;
        self.absorb()
    }

    fn absorb(&mut self) -> Result<&AreaVector> {
        self.steps += 1;
        project_into(self.group.current(), self.floor, &mut self.next)?;
        area_increment_into(&self.prev, &self.next, &mut self.last);
        if !self.last.is_finite() {
            return Err(Error::NonFinite("area increment"));
        }
        self.area.add_assign(&self.last);
        step_theta(&mut self.theta, &self.last);
        std::mem::swap(&mut self.prev, &mut self.next);
        Ok(&self.last)
    }

    pub fn flag(&self) -> &FlagState {
        &self.prev
    }

    pub fn lambda(&self) -> &[f64] {
        &self.prev.lambda
    }

    pub fn area(&self) -> &AreaVector {
        &self.area
    }

    pub fn theta(&self) -> &[Quaternion] {
        &self.theta
    }

    /// The horizontal group path driving the flag.
    pub fn driver(&self) -> &QMatrix {
        self.group.current()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `Psi(Theta beta, w)` written into `out`.
    pub fn assemble_with_fiber(&self, beta: Option<&[Quaternion]>, out: &mut QMatrix) {
        match beta {
            None => assemble_into(&self.theta, &self.prev, out),
            Some(b) => {
                let tb: Vec<Quaternion> = self.theta.iter().zip(b).map(|(t, b)| *t * *b).collect();
                assemble_into(&tb, &self.prev, out)
            }
        }
    }
}

/// Per-coefficient variance rate of the fibre Brownian motions that makes the
/// skew product a Brownian motion on Sp(n).
pub const FIBER_VARIANCE: f64 = 2.0;

/// Brownian motion on Sp(n) built as `Psi(Theta beta, w)` from a flag Brownian
/// motion `w`, its horizontal fibre coordinate `Theta` and an independent
/// Brownian motion `beta` on Sp(1)^n.
///
/// The recorded increments carry the horizontal driving noise in the
/// off-diagonal slots and the fibre noise, in orthonormal coordinates, in the
/// diagonal slots.
pub fn skew_product_bm(cfg: &SimConfig, u0: &SpnMatrix, path_index: u64) -> Result<GroupPath> {
    cfg.validate()?;
    if u0.dim() != cfg.n {
        return Err(Error::DimensionMismatch { expected: cfg.n, got: u0.dim() });
    }
    let n = cfg.n;
    let h = cfg.step();
    let mut flag = FlagStepper::new(u0, h, DOMAIN_FLOOR)?;
    let mut beta = Sp1nStepper::new(&vec![Quaternion::ONE; n], &vec![FIBER_VARIANCE; n], h)?;
    let mut rng_w = path_rng(cfg.seed, path_index, Lane::Group);
    let mut rng_b = path_rng(cfg.seed, path_index, Lane::Fiber);
    let mut states = vec![u0.clone()];
    let mut increments = Vec::with_capacity(cfg.n_steps());
    let mut m = QMatrix::zeros(n);
    for _ in 0..cfg.n_steps() {
        let mut inc = TangentCoeffs::zeros(n);
        flag.group.step(&mut rng_w)?;
        inc.as_mut_slice().copy_from_slice(&flag.group_coeffs());
        flag.absorb()?;
        let db = beta.step(&mut rng_b);
        for (j, v) in db.iter().enumerate() {
            for (a, x) in v.to_array().into_iter().enumerate() {
                inc.as_mut_slice()[TangentCoeffs::diag_index(n, j, a + 1)] = x / FIBER_VARIANCE.sqrt();
            }
        }
        flag.assemble_with_fiber(Some(beta.current()), &mut m);
        states.push(SpnMatrix::from_matrix_unchecked(m.clone()));
        increments.push(inc);
    }
    Ok(GroupPath { times: cfg.times(), states, increments })
}

/// Terminal values of one flag Brownian path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlagEndpoint {
    pub area: AreaVector,
    pub lambda: Vec<f64>,
}

/// Run the flag Brownian motion from `u0` to `t_final`, keeping only the
/// terminal area and squared moduli.
pub fn sample_flag_area(cfg: &SimConfig, u0: &SpnMatrix, path_index: u64) -> Result<FlagEndpoint> {
    cfg.validate()?;
    if u0.dim() != cfg.n {
        return Err(Error::DimensionMismatch { expected: cfg.n, got: u0.dim() });
    }
    let mut flag = FlagStepper::new(u0, cfg.step(), DOMAIN_FLOOR)?;
    let mut rng = path_rng(cfg.seed, path_index, Lane::Group);
    for _ in 0..cfg.n_steps() {
        flag.step(&mut rng)?;
    }
    Ok(FlagEndpoint { area: flag.area().clone(), lambda: flag.lambda().to_vec() })
}

/// Draw `steps` horizontal Brownian increments of step `h` in basis coordinates.
pub fn horizontal_increments<R: rand::Rng>(n: usize, h: f64, steps: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let off = 4 * n * (n - 1) / 2;
    let sd = h.sqrt();
    (0..steps)
        .map(|_| {
            let mut c = vec![0.0; crate::spn::algebra_dim(n)];
            c[..off].iter_mut().for_each(|x| *x = sd * normal(rng));
            c
        })
        .collect()
}

/// Sum consecutive groups of `factor` increments: the same Brownian driver on a coarser grid.
pub fn coarsen(increments: &[Vec<f64>], factor: usize) -> Result<Vec<Vec<f64>>> {
    if factor == 0 || increments.len() % factor != 0 {
        return Err(Error::InvalidConfig(format!("{} increments do not split into groups of {factor}", increments.len())));
    }
    Ok(increments
        .chunks(factor)
        .map(|g| {
            let mut s = vec![0.0; g[0].len()];
            for inc in g {
                s.iter_mut().zip(inc).for_each(|(a, b)| *a += b);
            }
            s
        })
        .collect())
}

/// `int eta` along the assembled path `Psi(Theta, w)` of the flag Brownian
/// motion driven by the given horizontal increments. It vanishes in the
/// continuum limit; on a grid it measures the discretisation defect.
pub fn assembled_eta(u0: &SpnMatrix, h: f64, increments: &[Vec<f64>]) -> Result<AreaVector> {
    let n = u0.dim();
    let mut flag = FlagStepper::new(u0, h, DOMAIN_FLOOR)?;
    let mut prev = u0.as_matrix().clone();
    let mut next = QMatrix::zeros(n);
    let mut eta = AreaVector::zeros(n);
    for inc in increments {
        flag.step_with(inc)?;
        flag.assemble_with_fiber(None, &mut next);
        for (acc, d) in eta.a.iter_mut().zip(eval_eta_increment(&prev, &next)) {
            let d = d.to_array();
            for c in 0..3 {
                acc[c] += d[c];
            }
        }
        std::mem::swap(&mut prev, &mut next);
    }
    Ok(eta)
}

/// Root-mean-square size of [`assembled_eta`] over paths, on a grid and on its
/// `refine`-fold refinement driven by the same noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizontalityReport {
    pub coarse_dt: f64,
    pub fine_dt: f64,
    pub rms_coarse: f64,
    pub rms_fine: f64,
    pub ratio: f64,
    pub n_paths: usize,
}

/// `cfg.dt` is the fine step; the coarse grid uses `refine` times larger steps.
pub fn horizontality_check(cfg: &SimConfig, u0: &SpnMatrix, refine: usize, workers: usize) -> Result<HorizontalityReport> {
    cfg.validate()?;
    if u0.dim() != cfg.n {
        return Err(Error::DimensionMismatch { expected: cfg.n, got: u0.dim() });
    }
    if refine < 2 {
        return Err(Error::InvalidConfig("refinement factor must be at least 2".into()));
    }
    let coarse_steps = (cfg.t_final / (cfg.dt * refine as f64) - 1e-9).ceil().max(1.0) as usize;
    let coarse_h = cfg.t_final / coarse_steps as f64;
    let fine_h = coarse_h / refine as f64;
    let per_path = run_paths(workers, cfg.n_paths, |i| -> Result<(f64, f64)> {
        let mut rng = path_rng(cfg.seed, i, Lane::Group);
        let fine = horizontal_increments(cfg.n, fine_h, coarse_steps * refine, &mut rng);
        let coarse = coarsen(&fine, refine)?;
        let sq = |e: AreaVector| e.flat().iter().map(|x| x * x).sum::<f64>();
        let c = sq(assembled_eta(u0, coarse_h, &coarse).map_err(|e| e.at_path(i))?);
        let f = sq(assembled_eta(u0, fine_h, &fine).map_err(|e| e.at_path(i))?);
        Ok((c, f))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let k = per_path.len() as f64;
    let rms_coarse = (per_path.iter().map(|p| p.0).sum::<f64>() / k).sqrt();
    let rms_fine = (per_path.iter().map(|p| p.1).sum::<f64>() / k).sqrt();
    Ok(HorizontalityReport {
        coarse_dt: coarse_h,
        fine_dt: fine_h,
        rms_coarse,
        rms_fine,
        ratio: rms_coarse / rms_fine,
        n_paths: cfg.n_paths,
    })
}

impl FlagStepper {
    fn group_coeffs(&self) -> Vec<f64> {
        self.group.last_increments().to_vec()
    }
}
