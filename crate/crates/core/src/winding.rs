//! Brownian motion on the unit sphere of `H^n` under the canonical variation
//! of the round metric, and the quaternionic winding of its components.
//!
//! A point `x` is written in polar form `x_j = rho_j Xi_j` with `|Xi_j| = 1`.
//! The sampler uses the skew product `X_j = Theta_j beta_j sqrt(lambda_j)`
//! where `(w, Theta)` is the flag Brownian motion with its horizontal fibre
//! coordinate and `beta_j` is an independent Brownian motion on the unit
//! quaternions run at speed `mu_j^2`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flag::{AreaVector, FlagStepper, DOMAIN_FLOOR};
use crate::quat::{log_unit, ImagQuaternion, Quaternion};
use crate::sde::{path_rng, run_paths, Lane, QuaternionVectorPath, SimConfig, Sp1nStepper};
use crate::spectral::winding_covariance;
use crate::spn::complete_to_spn;
use crate::stats::{cov_estimate, CovarianceComparison};

/// Paths below this count make the winding experiment underpowered.
pub const MIN_WINDING_PATHS: usize = 10_000;

/// Horizon below which the O(1/t) bias of the winding covariance is not controlled.
pub const MIN_WINDING_HORIZON: f64 = 20.0;

/// `|z|` beyond which a candidate covariance counts as rejected.
pub const DECISIVE_Z: f64 = 5.0;

/// Vertical weights `mu_j > 0` of the canonical variation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalVariation {
    mu_weights: Vec<f64>,
}

impl CanonicalVariation {
    pub fn new(mu_weights: Vec<f64>) -> Result<Self> {
        if mu_weights.is_empty() {
            return Err(Error::InvalidDimension("at least one weight is needed".into()));
        }
        if mu_weights.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::InvalidConfig(format!("weights must be positive, got {mu_weights:?}")));
        }
        Ok(Self { mu_weights })
    }

    /// The round metric.
    pub fn round(n: usize) -> Self {
        Self { mu_weights: vec![1.0; n] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.mu_weights
    }

    pub fn n(&self) -> usize {
        self.mu_weights.len()
    }

    /// Speeds `mu_j^2` of the fibre Brownian motions.
    pub fn fibre_speeds(&self) -> Vec<f64> {
        self.mu_weights.iter().map(|m| m * m).collect()
    }
}

/// Split `x` into unit quaternions `Xi_j` and moduli `rho_j`.
pub fn polar(x: &[Quaternion]) -> Result<(Vec<Quaternion>, Vec<f64>)> {
    let mut xi = Vec::with_capacity(x.len());
    let mut rho = Vec::with_capacity(x.len());
    for (j, q) in x.iter().enumerate() {
        let r = q.norm();
        if !r.is_finite() {
            return Err(Error::NonFinite("polar"));
        }
        if r < DOMAIN_FLOOR {
            return Err(Error::DomainExit { column: j, modulus: r });
        }
        xi.push(*q * (1.0 / r));
        rho.push(r);
    }
    Ok((xi, rho))
}

/// Polar form of a point of the sphere together with its accumulated winding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindingState {
    pub xi: Vec<Quaternion>,
    pub rho: Vec<f64>,
    pub eta: AreaVector,
}

impl WindingState {
    pub fn from_point(x: &[Quaternion]) -> Result<Self> {
        let (xi, rho) = polar(x)?;
        Ok(Self { eta: AreaVector::zeros(xi.len()), xi, rho })
    }

    /// Largest violation of `|Xi_j| = 1`, `rho_j >= 0` and `sum rho_j^2 = 1`.
    pub fn invariant_defect(&self) -> f64 {
        let unit = self.xi.iter().map(|q| (q.norm() - 1.0).abs()).fold(0.0, f64::max);
        let neg = self.rho.iter().map(|r| (-r).max(0.0)).fold(0.0, f64::max);
        let sphere = (self.rho.iter().map(|r| r * r).sum::<f64>() - 1.0).abs();
        unit.max(neg).max(sphere)
    }
}

/// `log(Xi_next Xi_prev^{-1})` per component.
pub fn winding_increment(prev: &[Quaternion], next: &[Quaternion]) -> Result<AreaVector> {
    if prev.len() != next.len() {
        return Err(Error::DimensionMismatch { expected: prev.len(), got: next.len() });
    }
    let inc: Vec<ImagQuaternion> =
        prev.iter().zip(next).map(|(p, q)| log_unit(q.mul_conj(*p))).collect::<Result<_>>()?;
    Ok(AreaVector::from_components(&inc))
}

/// Winding accumulated along a discrete path of points of `H^n`.
pub fn accumulate_winding(path: &[Vec<Quaternion>]) -> Result<AreaVector> {
    let Some(first) = path.first() else {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    };
    let mut eta = AreaVector::zeros(first.len());
    let mut prev = polar(first)?.0;
    for x in &path[1..] {
        let next = polar(x)?.0;
        eta.add_assign(&winding_increment(&prev, &next)?);
        prev = next;
    }
    Ok(eta)
}

/// Streaming sampler of the sphere Brownian motion under a canonical
/// variation, tracking the flag area and the winding.
#[derive(Clone, Debug)]
pub struct VariationStepper {
    flag: FlagStepper,
    beta: Sp1nStepper,
    xi: Vec<Quaternion>,
    next: Vec<Quaternion>,
    eta: AreaVector,
}

impl VariationStepper {
    /// Start at the unit vector `x0`; every component must be non-zero.
    pub fn new(x0: &[Quaternion], mu: &CanonicalVariation, h: f64) -> Result<Self> {
        if x0.len() != mu.n() {
            return Err(Error::DimensionMismatch { expected: mu.n(), got: x0.len() });
        }
        let (xi, _) = polar(x0)?;
        let u0 = complete_to_spn(x0)?;
        let n = x0.len();
        Ok(Self {
            flag: FlagStepper::new(&u0, h, DOMAIN_FLOOR)?,
            beta: Sp1nStepper::new(&vec![Quaternion::ONE; n], &mu.fibre_speeds(), h)?,
            next: xi.clone(),
            xi,
            eta: AreaVector::zeros(n),
        })
    }

    pub fn step<R: rand::Rng>(&mut self, rng_flag: &mut R, rng_fibre: &mut R) -> Result<()> {
        self.flag.step(rng_flag)?;
        self.beta.step(rng_fibre);
        for ((x, t), b) in self.next.iter_mut().zip(self.flag.theta()).zip(self.beta.current()) {
            *x = (*t * *b).normalize();
        }
        self.eta.add_assign(&winding_increment(&self.xi, &self.next)?);
        std::mem::swap(&mut self.xi, &mut self.next);
        Ok(())
    }

    /// Current point `X_j = Xi_j sqrt(lambda_j)`.
    pub fn point(&self) -> Vec<Quaternion> {
        self.xi.iter().zip(self.flag.lambda()).map(|(x, l)| *x * l.sqrt()).collect()
    }

    pub fn state(&self) -> WindingState {
        WindingState { xi: self.xi.clone(), rho: self.flag.lambda().iter().map(|l| l.sqrt()).collect(), eta: self.eta.clone() }
    }

    pub fn eta(&self) -> &AreaVector {
        &self.eta
    }

    pub fn area(&self) -> &AreaVector {
        self.flag.area()
    }

    pub fn lambda(&self) -> &[f64] {
        self.flag.lambda()
    }
}

/// Path of the sphere Brownian motion for the metric `g_mu`.
pub fn sample_variation_bm(
    cfg: &SimConfig,
    mu: &CanonicalVariation,
    x0: &[Quaternion],
    path_index: u64,
) -> Result<QuaternionVectorPath> {
    cfg.validate()?;
    if mu.n() != cfg.n {
        return Err(Error::DimensionMismatch { expected: cfg.n, got: mu.n() });
    }
    let mut s = VariationStepper::new(x0, mu, cfg.step())?;
    let mut rng_w = path_rng(cfg.seed, path_index, Lane::Group);
    let mut rng_b = path_rng(cfg.seed, path_index, Lane::Fiber);
    let mut states = Vec::with_capacity(cfg.n_steps() + 1);
    states.push(x0.to_vec());
    for _ in 0..cfg.n_steps() {
        s.step(&mut rng_w, &mut rng_b)?;
        states.push(s.point());
    }
    Ok(QuaternionVectorPath { times: cfg.times(), states })
}

/// Terminal area, winding and squared moduli of one path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaWindingSample {
    pub area: AreaVector,
    pub eta: AreaVector,
    pub lambda: Vec<f64>,
}

/// Run one path to `t_final` keeping only terminal values. The area uses the
/// same noise as [`crate::flag::sample_flag_area`] for the same seed and index.
pub fn sample_area_winding(
    cfg: &SimConfig,
    mu: &CanonicalVariation,
    x0: &[Quaternion],
    path_index: u64,
) -> Result<AreaWindingSample> {
    cfg.validate()?;
    if mu.n() != cfg.n {
        return Err(Error::DimensionMismatch { expected: cfg.n, got: mu.n() });
    }
    let mut s = VariationStepper::new(x0, mu, cfg.step())?;
    let mut rng_w = path_rng(cfg.seed, path_index, Lane::Group);
    let mut rng_b = path_rng(cfg.seed, path_index, Lane::Fiber);
    for _ in 0..cfg.n_steps() {
        s.step(&mut rng_w, &mut rng_b)?;
    }
    Ok(AreaWindingSample { area: s.area().clone(), eta: s.eta().clone(), lambda: s.lambda().to_vec() })
}

/// Simulate `cfg.n_paths` paths in parallel. Paths leaving the chart are
/// returned as `None` together with their indices; other failures abort.
pub fn sample_area_winding_paths(
    cfg: &SimConfig,
    mu: &CanonicalVariation,
    x0: &[Quaternion],
    workers: usize,
) -> Result<(Vec<Option<AreaWindingSample>>, Vec<u64>)> {
    cfg.validate()?;
    let raw = run_paths(workers, cfg.n_paths, |i| sample_area_winding(cfg, mu, x0, i).map_err(|e| e.at_path(i)))?;
    let mut out = Vec::with_capacity(raw.len());
    let mut excluded = Vec::new();
    for (i, r) in raw.into_iter().enumerate() {
        match r {
            Ok(s) => out.push(Some(s)),
            Err(e) if e.is_domain_exit() => {
                excluded.push(i as u64);
                out.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    Ok((out, excluded))
}

/// Which candidate limit the data supports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindingVerdict {
    /// `Sigma + diag(mu_j I_3)`.
    Linear,
    /// `Sigma + diag(mu_j^2 I_3)`.
    Squared,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindingCltReport {
    pub config: SimConfig,
    pub mu: Vec<f64>,
    pub empirical_cov: DMatrix<f64>,
    pub std_error: DMatrix<f64>,
    pub candidate_a: DMatrix<f64>,
    pub candidate_b: DMatrix<f64>,
    /// Per-entry z-scores against each candidate.
    pub per_entry_z_scores: [DMatrix<f64>; 2],
    pub max_abs_z: [f64; 2],
    /// Largest `|z|` over the off-diagonal blocks, where both candidates agree.
    pub off_diagonal_max_abs_z: f64,
    pub allowance: f64,
    pub excluded_paths: Vec<u64>,
    pub verdict: WindingVerdict,
    pub warnings: Vec<String>,
}

impl WindingCltReport {
    /// Decisive verdict with matching off-diagonal blocks.
    pub fn pass(&self, threshold: f64) -> bool {
        self.verdict != WindingVerdict::Inconclusive && self.off_diagonal_max_abs_z <= threshold
    }
}

/// Compare the covariance of `eta(t)/sqrt(t)` with both candidate limits.
///
/// `allowance` is an absolute bias budget applied to every entry.
pub fn winding_clt_report(
    cfg: &SimConfig,
    mu: &CanonicalVariation,
    samples: &[Option<AreaWindingSample>],
    excluded_paths: Vec<u64>,
    allowance: f64,
    threshold: f64,
) -> Result<WindingCltReport> {
    let n = cfg.n;
    let scale = 1.0 / cfg.t_final.sqrt();
    let scaled: Vec<Vec<f64>> = samples.iter().flatten().map(|s| s.eta.flat().iter().map(|v| v * scale).collect()).collect();
    let est = cov_estimate(&scaled)?.with_excluded(excluded_paths.len());
    let cands = winding_covariance(n, mu.weights())?;
    let a = CovarianceComparison::new(&est, &cands.linear, allowance, threshold)?;
    let b = CovarianceComparison::new(&est, &cands.squared, allowance, threshold)?;
    let off_diagonal_max_abs_z = a.max_abs_z_where(|r, c| r / 3 != c / 3);
    let verdict = if a.pass && b.max_abs_z > DECISIVE_Z {
        WindingVerdict::Linear
    } else if b.pass && a.max_abs_z > DECISIVE_Z {
        WindingVerdict::Squared
    } else {
        WindingVerdict::Inconclusive
    };
    let mut warnings = Vec::new();
    if scaled.len() < MIN_WINDING_PATHS {
        warnings.push(format!("underpowered: {} paths, at least {MIN_WINDING_PATHS} recommended", scaled.len()));
    }
    if cfg.t_final < MIN_WINDING_HORIZON {
        warnings.push(format!("horizon {} below {MIN_WINDING_HORIZON}; O(1/t) bias is not controlled", cfg.t_final));
    }
    Ok(WindingCltReport {
        config: cfg.clone(),
        mu: mu.weights().to_vec(),
        empirical_cov: a.estimate.clone(),
        std_error: a.std_error.clone(),
        candidate_a: cands.linear,
        candidate_b: cands.squared,
        max_abs_z: [a.max_abs_z, b.max_abs_z],
        per_entry_z_scores: [a.z, b.z],
        off_diagonal_max_abs_z,
        allowance,
        excluded_paths,
        verdict,
        warnings,
    })
}

/// Simulate and report the winding covariance against both candidates.
pub fn winding_clt_experiment(
    cfg: &SimConfig,
    mu: &CanonicalVariation,
    x0: &[Quaternion],
    workers: usize,
    allowance: f64,
    threshold: f64,
) -> Result<WindingCltReport> {
    let (samples, excluded) = sample_area_winding_paths(cfg, mu, x0, workers)?;
    winding_clt_report(cfg, mu, &samples, excluded, allowance, threshold)
}
