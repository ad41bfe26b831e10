//! Experiment runners. Each returns an [`Outcome`] built only from the
//! configuration and the simulated paths, so reruns are byte-identical.

mod analytic;
mod flag;
mod group;
mod winding;

use quatflag::flag::AreaVector;
use nalgebra::DMatrix;
use quatflag::stats::{Comparison, CovarianceComparison, McEstimate};

use crate::config::{ExperimentKind, ExperimentSpec};
use crate::error::CliResult;
use crate::report::{Check, Outcome, Report};

pub use flag::clt_area_outcome;
pub use winding::{winding_outcome, x0_from_lambda};

/// Run the experiment described by `spec` on `workers` threads.
pub fn run_experiment(spec: &ExperimentSpec, workers: usize) -> CliResult<Outcome> {
    spec.validate()?;
    // The algebra checks of spn_bm need no paths and still run.
    if spec.kind.simulates() && spec.sim.t_final == 0.0 && spec.kind != ExperimentKind::SpnBm {
        let mut report = Report::new(spec.kind, &spec.sim, &spec.model);
        report.note("t_final = 0: nothing to simulate");
        return Ok(Outcome { report: report.finish(), samples: None });
    }
    match spec.kind {
        ExperimentKind::SpnBm => group::spn_bm(spec, workers),
        ExperimentKind::FlagArea => flag::flag_area(spec, workers),
        ExperimentKind::CfCompare => flag::cf_compare(spec, workers),
        ExperimentKind::CltArea => flag::clt_area(spec, workers),
        ExperimentKind::WindingClt => winding::winding_clt(spec, workers),
        ExperimentKind::JacobiChecks => analytic::jacobi_checks(spec),
        ExperimentKind::SpectralChecks => analytic::spectral_checks(spec),
    }
}

/// Split per-path results into retained samples and excluded path indices.
/// Paths that left the chart are excluded; any other failure aborts the run
/// and carries its path index.
fn sort_paths<T>(raw: Vec<quatflag::Result<T>>) -> CliResult<(Vec<(u64, T)>, Vec<u64>)> {
    let mut kept = Vec::with_capacity(raw.len());
    let mut excluded = Vec::new();
    for (i, r) in raw.into_iter().enumerate() {
        let i = i as u64;
        match r {
            Ok(v) => kept.push((i, v)),
            Err(e) if e.is_domain_exit() => excluded.push(i),
            Err(e) => return Err(e.at_path(i).into()),
        }
    }
    Ok((kept, excluded))
}

fn note_excluded(report: &mut Report, excluded: &[u64], total: usize) {
    if !excluded.is_empty() {
        let shown: Vec<String> = excluded.iter().take(10).map(|i| i.to_string()).collect();
        let more = if excluded.len() > 10 { ", ..." } else { "" };
        report.note(format!(
            "{} of {total} paths left the coordinate chart and were excluded (paths {}{more})",
            excluded.len(),
            shown.join(", ")
        ));
    }
}

fn component_label(k: usize) -> String {
    format!("{}{}", k / 3 + 1, ["i", "j", "k"][k % 3])
}

/// Row and column labels of a `3n x 3n` matrix indexed by area components.
fn matrix_label(r: usize, c: usize) -> String {
    format!("({},{})", component_label(r), component_label(c))
}

/// Two-sample comparison of independent estimates.
fn two_sample(a: f64, sa: f64, b: f64, sb: f64, threshold: f64) -> Comparison {
    Comparison::new(a, (sa * sa + sb * sb).sqrt(), b, 0.0, threshold)
}

fn flat_rows(v: &[(u64, AreaVector)], scale: f64) -> Vec<Vec<f64>> {
    v.iter().map(|(_, a)| a.flat().iter().map(|x| x * scale).collect()).collect()
}

fn z_checks(name: &str, labels: impl IntoIterator<Item = String>, cmp: &[Comparison]) -> Vec<Check> {
    labels.into_iter().zip(cmp).map(|(l, c)| Check::z(name, l, c)).collect()
}

/// One z-check per entry of a `3n x 3n` covariance estimate.
fn cov_checks(
    name: &str,
    est: &McEstimate,
    target: &DMatrix<f64>,
    allowance: f64,
    threshold: f64,
    report: &mut Report,
) -> CliResult<CovarianceComparison> {
    let cmp = CovarianceComparison::new(est, target, allowance, threshold)?;
    for r in 0..target.nrows() {
        for c in 0..target.ncols() {
            let entry = Comparison::new(cmp.estimate[(r, c)], cmp.std_error[(r, c)], target[(r, c)], allowance, threshold);
            report.push(Check::z(name, matrix_label(r, c), &entry));
        }
    }
    Ok(cmp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_name_column_and_unit() {
        assert_eq!(component_label(0), "1i");
        assert_eq!(component_label(5), "2k");
        assert_eq!(matrix_label(1, 3), "(1j,2i)");
    }

    #[test]
    fn domain_exits_are_excluded() {
        let raw: Vec<quatflag::Result<u8>> = vec![
            Ok(1),
            Err(quatflag::Error::DomainExit { column: 0, modulus: 1e-9 }),
            Ok(2),
        ];
        let (kept, excluded) = sort_paths(raw).unwrap();
        assert_eq!(kept, vec![(0, 1), (2, 2)]);
        assert_eq!(excluded, vec![1]);
        let bad: Vec<quatflag::Result<u8>> = vec![Ok(1), Err(quatflag::Error::NonFinite("x"))];
        let msg = sort_paths(bad).unwrap_err().to_string();
        assert!(msg.contains("path 1"), "{msg}");
    }
}
