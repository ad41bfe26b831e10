//! Experiment configuration: a single JSON document with a schema version.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use quatflag::sde::SimConfig;
use quatflag::stats::MIN_ODE_PATHS;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "QUATFLAG_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ExperimentKind {
    SpnBm,
    FlagArea,
    CfCompare,
    CltArea,
    WindingClt,
    JacobiChecks,
    SpectralChecks,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        Self::SpnBm,
        Self::FlagArea,
        Self::CfCompare,
        Self::CltArea,
        Self::WindingClt,
        Self::JacobiChecks,
        Self::SpectralChecks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::SpnBm => "spn_bm",
            Self::FlagArea => "flag_area",
            Self::CfCompare => "cf_compare",
            Self::CltArea => "clt_area",
            Self::WindingClt => "winding_clt",
            Self::JacobiChecks => "jacobi_checks",
            Self::SpectralChecks => "spectral_checks",
        }
    }

    /// Checks this kind can run, in execution order.
    pub fn available_checks(self) -> &'static [&'static str] {
        match self {
            Self::SpnBm => &["algebra_basis", "mean_decay", "radial_law", "mean_ode", "skew_product"],
            Self::FlagArea => &["area_symmetry", "horizontality", "ergodic"],
            Self::CfCompare => &["cf"],
            Self::CltArea => &["area_covariance"],
            Self::WindingClt => &["winding_covariance"],
            Self::JacobiChecks => &["eigenfunctions", "orthonormality"],
            Self::SpectralChecks => &["eigenfunctions", "moments", "density_mass", "kernel", "semigroup", "stationary"],
        }
    }

    /// Checks run when the configuration does not list any.
    pub fn default_checks(self) -> &'static [&'static str] {
        match self {
            Self::FlagArea => &["area_symmetry"],
            other => other.available_checks(),
        }
    }

    /// Whether the kind simulates paths (and so has nothing to check when `t_final = 0`).
    pub fn simulates(self) -> bool {
        !matches!(self, Self::JacobiChecks | Self::SpectralChecks)
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Model parameters; which ones are used depends on the experiment kind.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Subset of [`ExperimentKind::available_checks`] to run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<String>>,
    /// Starting squared moduli of the last row; defaults to the barycentre.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<Vec<f64>>,
    /// Checkpoint times for `spn_bm`; defaults to the quarter points of `[0, t_final]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    /// Canonical-variation weights (`winding_clt`) or index shift (`jacobi_checks`, `spectral_checks`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    /// Frequency vectors of length `3n` for `cf_compare`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_grid: Option<Vec<Vec<f64>>>,
    /// Polynomial truncation degree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_degree: Option<u32>,
    /// Grid refinement factor of the horizontality check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<usize>,
    /// Acceptance threshold on `|z|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Absolute bias allowance of the mean ODE (`spn_bm`) or the covariance
    /// checks (`clt_area`, `winding_clt`); each has its own default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowance: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Output directory; the command-line `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Also write per-path samples as JSON lines.
    #[serde(default)]
    pub jsonl: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub sim: SimConfig,
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentSpec {
    /// A small runnable configuration for `kind`.
    pub fn template(kind: ExperimentKind) -> Self {
        let (sim, model) = match kind {
            ExperimentKind::SpnBm => (
                SimConfig::new(2, 0.5, 1e-3, 2000, 1),
                ModelParams { lambda0: Some(vec![0.9, 0.1]), times: Some(vec![0.25, 0.5]), ..Default::default() },
            ),
            ExperimentKind::FlagArea => (SimConfig::new(2, 1.0, 1e-3, 1000, 1), ModelParams::default()),
            ExperimentKind::CfCompare => (
                SimConfig::new(2, 0.5, 1e-3, 5000, 1),
                ModelParams { u_grid: Some(default_u_grid(2)), max_degree: Some(40), ..Default::default() },
            ),
            ExperimentKind::CltArea => (SimConfig::new(2, 10.0, 2e-3, 1000, 1), ModelParams::default()),
            ExperimentKind::WindingClt => (
                SimConfig::new(2, 20.0, 2e-3, 1000, 1),
                ModelParams { mu: Some(vec![2.0, 1.0]), ..Default::default() },
            ),
            ExperimentKind::JacobiChecks => (SimConfig::new(2, 0.0, 1.0, 1, 1), ModelParams::default()),
            ExperimentKind::SpectralChecks => (SimConfig::new(2, 0.0, 1.0, 1, 1), ModelParams::default()),
        };
        Self { schema_version: SCHEMA_VERSION, kind, sim, model, output: OutputSpec::default() }
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        Self::from_json(&text)
    }

    pub fn threshold(&self) -> f64 {
        self.model.threshold.unwrap_or(quatflag::stats::Z_THRESHOLD)
    }

    pub fn checks(&self) -> Vec<&str> {
        match &self.model.checks {
            Some(c) => {
                self.kind.available_checks().iter().copied().filter(|a| c.iter().any(|x| x == a)).collect()
            }
            None => self.kind.default_checks().to_vec(),
        }
    }

    pub fn runs(&self, check: &str) -> bool {
        self.checks().contains(&check)
    }

    pub fn lambda0(&self) -> Vec<f64> {
        self.model.lambda0.clone().unwrap_or_else(|| vec![1.0 / self.sim.n as f64; self.sim.n])
    }

    /// Check that every parameter the kind needs is present and consistent.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}, expected {SCHEMA_VERSION}", self.schema_version));
        }
        self.sim.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let n = self.sim.n;
        let kind = self.kind;
        if let Some(c) = &self.model.checks {
            if c.is_empty() {
                return bad("model.checks is empty".into());
            }
            for name in c {
                if !kind.available_checks().contains(&name.as_str()) {
                    return bad(format!("{kind} has no check named {name:?}; available: {:?}", kind.available_checks()));
                }
            }
        }
        if kind != ExperimentKind::SpnBm && n < 2 {
            return bad(format!("{kind} needs n >= 2"));
        }
        if n < 2 && self.checks().iter().any(|c| !matches!(*c, "algebra_basis" | "mean_decay")) {
            return bad(format!("the checks {:?} need n >= 2", self.checks()));
        }
        if let Some(l) = &self.model.lambda0 {
            if l.len() != n {
                return bad(format!("model.lambda0 has length {}, expected {n}", l.len()));
            }
            if l.iter().any(|x| !(x.is_finite() && *x > 0.0)) || (l.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return bad("model.lambda0 must be positive and sum to 1".into());
            }
        }
        if let Some(t) = &self.model.times {
            if t.is_empty() || t.iter().any(|&x| !(x > 0.0 && x <= self.sim.t_final)) {
                return bad("model.times must be non-empty and lie in (0, t_final]".into());
            }
        }
        if let Some(t) = self.model.threshold {
            if !(t.is_finite() && t > 0.0) {
                return bad("model.threshold must be positive".into());
            }
        }
        if let Some(a) = self.model.allowance {
            if !(a.is_finite() && a >= 0.0) {
                return bad("model.allowance must be non-negative".into());
            }
        }
        match kind {
            ExperimentKind::WindingClt => match &self.model.mu {
                None => return bad("winding_clt requires model.mu".into()),
                Some(mu) if mu.len() != n || mu.iter().any(|m| !(m.is_finite() && *m > 0.0)) => {
                    return bad(format!("model.mu must hold {n} positive weights"));
                }
                _ => {}
            },
            ExperimentKind::CfCompare => match &self.model.u_grid {
                None => return bad("cf_compare requires model.u_grid".into()),
                Some(g) if g.is_empty() || g.iter().any(|u| u.len() != 3 * n || u.iter().any(|x| !x.is_finite())) => {
                    return bad(format!("every model.u_grid entry must hold {} finite numbers", 3 * n));
                }
                _ => {}
            },
            ExperimentKind::JacobiChecks | ExperimentKind::SpectralChecks => {
                if let Some(mu) = &self.model.mu {
                    if mu.len() != n || mu.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
                        return bad(format!("model.mu must hold {n} non-negative shifts"));
                    }
                }
            }
            ExperimentKind::SpnBm => {
                if self.runs("mean_ode") && self.sim.t_final > 0.0 && self.sim.n_paths < MIN_ODE_PATHS {
                    return bad(format!("the mean_ode check needs n_paths >= {MIN_ODE_PATHS}"));
                }
            }
            ExperimentKind::FlagArea => {
                if self.runs("ergodic") && self.sim.t_final > 0.0 && self.sim.t_final < 20.0 {
                    return bad("the ergodic check needs t_final >= 20".into());
                }
                if let Some(r) = self.model.refine {
                    if r < 2 {
                        return bad("model.refine must be at least 2".into());
                    }
                }
            }
            _ => {}
        }
        if kind == ExperimentKind::JacobiChecks && n > 4 {
            return bad(format!("{kind} supports n <= 4"));
        }
        if kind == ExperimentKind::SpectralChecks && n > 3 {
            return bad(format!("{kind} supports n <= 3"));
        }
        Ok(())
    }
}

/// Five frequency vectors along a fixed direction with `|u|` from 0.3 to 1.5.
pub fn default_u_grid(n: usize) -> Vec<Vec<f64>> {
    let dir: Vec<f64> = (0..3 * n).map(|k| if k % 3 == 0 { 1.0 } else if k % 3 == 1 { -0.5 } else { 0.25 }).collect();
    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    (1..=5).map(|s| dir.iter().map(|x| x / norm * 0.3 * s as f64).collect()).collect()
}

/// Seed precedence: command line, then environment, then configuration.
pub fn resolve_seed(spec_seed: u64, cli_seed: Option<u64>, env_seed: Option<&str>) -> CliResult<u64> {
    if let Some(s) = cli_seed {
        return Ok(s);
    }
    match env_seed {
        Some(v) => v.trim().parse().map_err(|_| CliError::Config(format!("{SEED_ENV}={v:?} is not a u64"))),
        None => Ok(spec_seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_validate_and_round_trip() {
        for kind in ExperimentKind::ALL {
            let t = ExperimentSpec::template(kind);
            t.validate().unwrap();
            let back = ExperimentSpec::from_json(&serde_json::to_string_pretty(&t).unwrap()).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn missing_kind_parameters_are_rejected() {
        let mut w = ExperimentSpec::template(ExperimentKind::WindingClt);
        w.model.mu = None;
        assert!(w.validate().is_err());
        let mut c = ExperimentSpec::template(ExperimentKind::CfCompare);
        c.model.u_grid = Some(vec![vec![0.0; 5]]);
        assert!(c.validate().is_err());
        let mut f = ExperimentSpec::template(ExperimentKind::FlagArea);
        f.model.checks = Some(vec!["ergodic".into()]);
        assert!(f.validate().is_err());
        f.model.checks = Some(vec!["nonsense".into()]);
        assert!(f.validate().is_err());
    }

    #[test]
    fn unknown_fields_and_versions_fail() {
        let mut v = serde_json::to_value(ExperimentSpec::template(ExperimentKind::CltArea)).unwrap();
        v["schema_version"] = 2.into();
        assert!(ExperimentSpec::from_json(&v.to_string()).is_err());
        v["schema_version"] = 1.into();
        v["model"]["bogus"] = 1.into();
        assert!(ExperimentSpec::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(1, Some(2), Some("3")).unwrap(), 2);
        assert_eq!(resolve_seed(1, None, Some("3")).unwrap(), 3);
        assert_eq!(resolve_seed(1, None, None).unwrap(), 1);
        assert!(resolve_seed(1, None, Some("x")).is_err());
    }

    #[test]
    fn default_grid_is_bounded() {
        let g = default_u_grid(2);
        assert_eq!(g.len(), 5);
        let top = g.last().unwrap().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((top - 1.5).abs() < 1e-12);
    }
}
