//! Experiments on the flag Brownian motion and its stochastic areas.

use quatflag::flag::{horizontality_check, sample_flag_area, AreaVector, FlagStepper, DOMAIN_FLOOR};
use quatflag::sde::{path_rng, run_paths, Lane, SimplexState};
use quatflag::spectral::{limit_covariance, stationary_inverse_ratio_mean, AreaCf, FrequencyVector};
use quatflag::spn::start_with_last_row_moduli;
use quatflag::stats::{compare_entries, cov_estimate, empirical_cf, ergodic_check, mean_vector_estimate, Comparison};

use super::{component_label, cov_checks, flat_rows, note_excluded, sort_paths, z_checks};
use crate::config::ExperimentSpec;
use crate::error::CliResult;
use crate::report::{Check, Outcome, Report, SampleTable};

/// Default refinement factor of the horizontality check.
pub const DEFAULT_REFINE: usize = 4;

/// Largest accepted RMS of `int eta` on the fine grid.
pub const HORIZONTALITY_RMS: f64 = 0.02;

/// Smallest accepted ratio of coarse to fine RMS.
pub const HORIZONTALITY_RATIO: f64 = 1.8;

/// Tolerance on the stationary integral of `(1 - lambda_j) / lambda_j`.
pub const STATIONARY_TOL: f64 = 1e-8;

/// Default truncation degree of the characteristic-function kernels.
pub const DEFAULT_CF_DEGREE: u32 = 40;

/// Terminal areas of all paths, with chart exits excluded.
fn simulate_areas(spec: &ExperimentSpec, workers: usize) -> CliResult<(Vec<(u64, AreaVector)>, Vec<u64>)> {
    let cfg = &spec.sim;
    let u0 = start_with_last_row_moduli(&spec.lambda0())?;
    let raw = run_paths(workers, cfg.n_paths, |i| sample_flag_area(cfg, &u0, i).map(|e| e.area))?;
    sort_paths(raw)
}

fn area_table(n: usize, areas: &[(u64, AreaVector)]) -> SampleTable {
    SampleTable {
        columns: SampleTable::quaternion_columns("a", n),
        rows: areas.iter().map(|(i, a)| (*i, a.flat())).collect(),
    }
}

pub(super) fn flag_area(spec: &ExperimentSpec, workers: usize) -> CliResult<Outcome> {
    let cfg = &spec.sim;
    let n = cfg.n;
    let threshold = spec.threshold();
    let mut report = Report::new(spec.kind, cfg, &spec.model);
    let mut samples = None;
    if spec.runs("area_symmetry") {
        let (areas, excluded) = simulate_areas(spec, workers)?;
        note_excluded(&mut report, &excluded, cfg.n_paths);
        let est = mean_vector_estimate(&flat_rows(&areas, 1.0))?.with_excluded(excluded.len());
        let cmp = compare_entries(&est, &vec![0.0; 3 * n], 0.0, threshold)?;
        report.extend(z_checks("area_mean", (0..3 * n).map(component_label), &cmp));
        samples = Some(area_table(n, &areas));
    }
    if spec.runs("horizontality") {
        let u0 = start_with_last_row_moduli(&spec.lambda0())?;
        let refine = spec.model.refine.unwrap_or(DEFAULT_REFINE);
        let h = horizontality_check(cfg, &u0, refine, workers)?;
        report.push(Check::at_most("horizontality_rms", format!("dt={:e}", h.fine_dt), h.rms_fine, HORIZONTALITY_RMS));
        report.push(
            Check::at_most("horizontality_rms_coarse", format!("dt={:e}", h.coarse_dt), h.rms_coarse, f64::INFINITY)
                .informational(),
        );
        report.push(Check::at_least("horizontality_ratio", format!("refine={refine}"), h.ratio, HORIZONTALITY_RATIO));
        report.detail("horizontality", &h)?;
    }
    if spec.runs("ergodic") {
        ergodic_checks(spec, threshold, &mut report)?;
    }
    Ok(Outcome { report: report.finish(), samples })
}

/// Time averages of `(1 - lambda_j) / lambda_j` along path 0 against `2n - 2`.
fn ergodic_checks(spec: &ExperimentSpec, threshold: f64, report: &mut Report) -> CliResult<()> {
    let cfg = &spec.sim;
    let n = cfg.n;
    let target = (2 * n - 2) as f64;
    let u0 = start_with_last_row_moduli(&spec.lambda0())?;
    let mut flag = FlagStepper::new(&u0, cfg.step(), DOMAIN_FLOOR)?;
    let mut rng = path_rng(cfg.seed, 0, Lane::Group);
    let mut path = Vec::with_capacity(cfg.n_steps());
    for _ in 0..cfg.n_steps() {
        flag.step(&mut rng).map_err(|e| e.at_path(0))?;
        path.push(flag.lambda().to_vec());
    }
    let est = ergodic_check(&path, 0.0)?;
    let cmp = compare_entries(&est, &vec![target; n], 0.0, threshold)?;
    report.extend(z_checks("ergodic_average", (1..=n).map(|j| format!("l{j}")), &cmp));
    let q = stationary_inverse_ratio_mean(n)?;
    report.push(Check::within("stationary_integral", format!("n={n}"), q.value, target, STATIONARY_TOL));
    Ok(())
}

/// Empirical characteristic function of the areas against the spectral formula.
pub(super) fn cf_compare(spec: &ExperimentSpec, workers: usize) -> CliResult<Outcome> {
    let cfg = &spec.sim;
    let n = cfg.n;
    let threshold = spec.threshold();
    let degree = spec.model.max_degree.unwrap_or(DEFAULT_CF_DEGREE);
    let lam0 = SimplexState::new(spec.lambda0())?;
    let mut report = Report::new(spec.kind, cfg, &spec.model);
    let (areas, excluded) = simulate_areas(spec, workers)?;
    note_excluded(&mut report, &excluded, cfg.n_paths);
    let samples: Vec<AreaVector> = areas.iter().map(|(_, a)| a.clone()).collect();
    let grid = spec.model.u_grid.clone().unwrap_or_default();
    let mut analytic = Vec::new();
    for (k, u) in grid.iter().enumerate() {
        let u = FrequencyVector::from_flat(n, u)?;
        let exact = AreaCf::new(&u, degree)?.unconditional(cfg.t_final, &lam0)?;
        if !exact.kernel_accurate {
            report.note(format!("u[{k}]: kernel tail {:.2e} exceeds its tolerance at degree {degree}", exact.kernel_tail));
        }
        let mc = empirical_cf(&samples, &u)?;
        let re = Comparison::new(mc.real.scalar(), mc.real.scalar_se(), exact.value, 0.0, threshold);
        let im = Comparison::new(mc.imag.scalar(), mc.imag.scalar_se(), 0.0, 0.0, threshold);
        report.push(Check::z("cf_real", format!("u[{k}]"), &re));
        report.push(Check::z("cf_imag", format!("u[{k}]"), &im));
        analytic.push(exact);
    }
    report.detail("analytic", &analytic)?;
    Ok(Outcome { report: report.finish(), samples: Some(area_table(n, &areas)) })
}

pub(super) fn clt_area(spec: &ExperimentSpec, workers: usize) -> CliResult<Outcome> {
    let (areas, excluded) = simulate_areas(spec, workers)?;
    clt_area_outcome(spec, &areas, &excluded)
}

/// Covariance of `a(t) / sqrt t` against its limit, from precomputed areas.
pub fn clt_area_outcome(spec: &ExperimentSpec, areas: &[(u64, AreaVector)], excluded: &[u64]) -> CliResult<Outcome> {
    let cfg = &spec.sim;
    let n = cfg.n;
    let mut report = Report::new(spec.kind, cfg, &spec.model);
    note_excluded(&mut report, excluded, cfg.n_paths);
    let allowance = spec.model.allowance.unwrap_or(5.0 / cfg.t_final);
    let est = cov_estimate(&flat_rows(areas, 1.0 / cfg.t_final.sqrt()))?.with_excluded(excluded.len());
    let cmp = cov_checks("area_covariance", &est, &limit_covariance(n)?, allowance, spec.threshold(), &mut report)?;
    report.detail("max_abs_z", &cmp.max_abs_z)?;
    report.detail("allowance", &allowance)?;
    Ok(Outcome { report: report.finish(), samples: Some(area_table(n, areas)) })
}
