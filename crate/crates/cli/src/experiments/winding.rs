//! Winding of the sphere Brownian motion under a canonical variation, with
//! the covariance compared against both candidate limits.

use quatflag::quat::Quaternion;
use quatflag::stats::Comparison;
use quatflag::winding::{sample_area_winding_paths, winding_clt_report, AreaWindingSample, CanonicalVariation, WindingVerdict, DECISIVE_Z};

use super::{matrix_label, note_excluded};
use crate::config::ExperimentSpec;
use crate::error::CliResult;
use crate::report::{Check, Outcome, Report, SampleTable};

/// The real unit vector with squared moduli `lambda`.
pub fn x0_from_lambda(lambda: &[f64]) -> Vec<Quaternion> {
    lambda.iter().map(|l| Quaternion::real(l.sqrt())).collect()
}

pub(super) fn winding_clt(spec: &ExperimentSpec, workers: usize) -> CliResult<Outcome> {
    let mu = CanonicalVariation::new(spec.model.mu.clone().unwrap_or_default())?;
    let x0 = x0_from_lambda(&spec.lambda0());
    let (samples, excluded) = sample_area_winding_paths(&spec.sim, &mu, &x0, workers)?;
    winding_outcome(spec, &samples, excluded)
}

/// Build the winding report from simulated paths (`None` marks an excluded path).
pub fn winding_outcome(spec: &ExperimentSpec, samples: &[Option<AreaWindingSample>], excluded: Vec<u64>) -> CliResult<Outcome> {
    let cfg = &spec.sim;
    let n = cfg.n;
    let threshold = spec.threshold();
    let mu = CanonicalVariation::new(spec.model.mu.clone().unwrap_or_default())?;
    let allowance = spec.model.allowance.unwrap_or(5.0 / cfg.t_final);
    let mut report = Report::new(spec.kind, cfg, &spec.model);
    note_excluded(&mut report, &excluded, cfg.n_paths);
    let w = winding_clt_report(cfg, &mu, samples, excluded, allowance, threshold)?;
    for warning in &w.warnings {
        report.note(warning.clone());
    }
    let d = 3 * n;
    for (name, target, z) in [
        ("winding_cov_linear", &w.candidate_a, &w.per_entry_z_scores[0]),
        ("winding_cov_squared", &w.candidate_b, &w.per_entry_z_scores[1]),
    ] {
        for r in 0..d {
            for c in 0..d {
                let entry = Comparison {
                    estimate: w.empirical_cov[(r, c)],
                    se: w.std_error[(r, c)],
                    target: target[(r, c)],
                    allowance,
                    z: z[(r, c)],
                    pass: z[(r, c)].abs() <= threshold,
                };
                report.push(Check::z(name, matrix_label(r, c), &entry).informational());
            }
        }
    }
    let names = ["linear", "squared"];
    let (accepted, rejected) = match w.verdict {
        WindingVerdict::Linear => (0, 1),
        WindingVerdict::Squared => (1, 0),
        WindingVerdict::Inconclusive if w.max_abs_z[0] <= w.max_abs_z[1] => (0, 1),
        WindingVerdict::Inconclusive => (1, 0),
    };
    report.push(Check::at_most("accepted_max_abs_z", names[accepted], w.max_abs_z[accepted], threshold));
    report.push(Check::at_least("rejected_max_abs_z", names[rejected], w.max_abs_z[rejected], DECISIVE_Z));
    report.push(Check::at_most("off_diagonal_max_abs_z", "blocks j != l", w.off_diagonal_max_abs_z, threshold));
    report.detail("verdict", &w.verdict)?;
    report.detail("allowance", &allowance)?;
    let mut columns = SampleTable::quaternion_columns("a", n);
    columns.extend(SampleTable::quaternion_columns("eta", n));
    let rows = samples
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.as_ref().map(|s| (i as u64, s.area.flat().into_iter().chain(s.eta.flat()).collect())))
        .collect();
    Ok(Outcome { report: report.finish(), samples: Some(SampleTable { columns, rows }) })
}
