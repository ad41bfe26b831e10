//! Brownian motion on Sp(n): basis checks, mean decay, the radial law of the
//! last row, the simplex mean ODE and the skew-product construction.

use nalgebra::DMatrix;
use quatflag::flag::{eta_basis_coords, integrate_eta, skew_product_bm};
use quatflag::sde::{path_rng, run_paths, sample_jacobi_simplex, GroupStepper, Lane, SimConfig, SimplexState};
use quatflag::spn::{basis, casimir_rate, hs_inner, start_with_last_row_moduli, SpnMatrix};
use quatflag::stats::{compare_entries, cov_estimate, mean_ode_check, mean_vector_estimate, McEstimate};

use super::{cov_checks, note_excluded, sort_paths, two_sample, z_checks};
use crate::config::ExperimentSpec;
use crate::error::CliResult;
use crate::report::{Check, Outcome, Report, SampleTable};

/// Offset applied to the root seed for the skew-product sampler, so that it
/// is independent of the direct sampler it is compared with.
pub const SKEW_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Tolerance on the orthonormality of the algebra basis.
pub const BASIS_TOL: f64 = 1e-13;

/// Grid steps and times at which paths are recorded.
fn checkpoints(spec: &ExperimentSpec) -> Vec<(usize, f64)> {
    let cfg = &spec.sim;
    let h = cfg.step();
    let times = spec.model.times.clone().unwrap_or_else(|| (1..=4).map(|k| cfg.t_final * k as f64 / 4.0).collect());
    let mut steps: Vec<usize> = times.iter().map(|t| ((t / h).round() as usize).clamp(1, cfg.n_steps())).collect();
    steps.sort_unstable();
    steps.dedup();
    steps.into_iter().map(|k| (k, k as f64 * h)).collect()
}

fn entries(u: &SpnMatrix) -> Vec<f64> {
    let n = u.dim();
    (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).flat_map(|(r, c)| u.get(r, c).to_array()).collect()
}

fn entry_labels(n: usize, t: f64) -> Vec<String> {
    (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .flat_map(|(r, c)| ["1", "i", "j", "k"].map(move |a| format!("t={t} U{}{}.{a}", r + 1, c + 1)))
        .collect()
}

fn last_row_lambda(u: &SpnMatrix) -> Vec<f64> {
    u.last_row().iter().map(|q| q.norm_sqr()).collect()
}

/// `lambda_j` followed by `lambda_j^2`.
fn moments(l: &[f64]) -> Vec<f64> {
    l.iter().copied().chain(l.iter().map(|x| x * x)).collect()
}

fn moment_labels(n: usize, t: f64) -> Vec<String> {
    (1..=n).map(|j| format!("t={t} E[l{j}]")).chain((1..=n).map(|j| format!("t={t} E[l{j}^2]"))).collect()
}

/// Matrix entries and last-row moduli at the checkpoints.
struct GroupRecord {
    entries: Vec<Vec<f64>>,
    lambda: Vec<Vec<f64>>,
}

fn record_group(cfg: &SimConfig, u0: &SpnMatrix, index: u64, marks: &[(usize, f64)]) -> quatflag::Result<GroupRecord> {
    let mut stepper = GroupStepper::new(u0, cfg.step(), false);
    let mut rng = path_rng(cfg.seed, index, Lane::Group);
    let mut rec = GroupRecord { entries: Vec::new(), lambda: Vec::new() };
    let mut next = marks.iter().peekable();
    for k in 1..=cfg.n_steps() {
        stepper.step(&mut rng)?;
        if next.peek().is_some_and(|m| m.0 == k) {
            next.next();
            let u = stepper.state();
            rec.entries.push(entries(&u));
            rec.lambda.push(last_row_lambda(&u));
        }
    }
    Ok(rec)
}

fn column(samples: &[Vec<Vec<f64>>], k: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<Vec<f64>> {
    samples.iter().map(|p| f(&p[k])).collect()
}

fn two_sample_checks(name: &str, labels: Vec<String>, a: &McEstimate, b: &McEstimate, threshold: f64) -> Vec<Check> {
    let cmp: Vec<_> = (0..a.value.len())
        .map(|i| two_sample(a.value[i], a.std_error[i], b.value[i], b.std_error[i], threshold))
        .collect();
    z_checks(name, labels, &cmp)
}

fn algebra_checks(n: usize, report: &mut Report) -> CliResult<()> {
    let b = basis(n)?;
    report.push(Check::within("basis_size", format!("n={n}"), b.len() as f64, (n * (2 * n + 1)) as f64, 0.0));
    let mut worst: f64 = 0.0;
    for i in 0..b.len() {
        for j in 0..=i {
            let e = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((hs_inner(&b[i], &b[j])? - e).abs());
        }
    }
    report.push(Check::at_most("basis_orthonormality", format!("n={n}"), worst, BASIS_TOL));
    report.push(Check::within("casimir_rate", format!("n={n}"), casimir_rate(n)?, (2 * n + 1) as f64, 1e-12));
    Ok(())
}

pub(super) fn spn_bm(spec: &ExperimentSpec, workers: usize) -> CliResult<Outcome> {
    let cfg = &spec.sim;
    let n = cfg.n;
    let threshold = spec.threshold();
    let mut report = Report::new(spec.kind, cfg, &spec.model);
    if spec.runs("algebra_basis") {
        algebra_checks(n, &mut report)?;
    }
    let simulate = ["mean_decay", "radial_law", "mean_ode", "skew_product"].iter().any(|c| spec.runs(c));
    if !simulate || cfg.t_final == 0.0 {
        if simulate {
            report.note("t_final = 0: nothing to simulate");
        }
        return Ok(Outcome { report: report.finish(), samples: None });
    }
    let lam0 = spec.lambda0();
    let u0 = start_with_last_row_moduli(&lam0)?;
    let marks = checkpoints(spec);
    let raw = run_paths(workers, cfg.n_paths, |i| record_group(cfg, &u0, i, &marks))?;
    let (group, excluded) = sort_paths(raw)?;
    note_excluded(&mut report, &excluded, cfg.n_paths);
    let g_entries: Vec<Vec<Vec<f64>>> = group.iter().map(|(_, r)| r.entries.clone()).collect();
    let g_lambda: Vec<Vec<Vec<f64>>> = group.iter().map(|(_, r)| r.lambda.clone()).collect();

    if spec.runs("mean_decay") {
        let c = casimir_rate(n)?;
        let start = entries(&u0);
        for (k, &(_, t)) in marks.iter().enumerate() {
            let est = mean_vector_estimate(&column(&g_entries, k, |x| x.to_vec()))?;
            let target: Vec<f64> = start.iter().map(|x| x * (-c * t).exp()).collect();
            let cmp = compare_entries(&est, &target, 0.0, threshold)?;
            report.extend(z_checks("mean_decay", entry_labels(n, t), &cmp));
        }
    }

    let simplex = if spec.runs("radial_law") || spec.runs("mean_ode") {
        let s0 = SimplexState::new(lam0.clone())?;
        let raw = run_paths(workers, cfg.n_paths, |i| {
            sample_jacobi_simplex(cfg, &s0, i).map(|p| marks.iter().map(|&(k, _)| p.states[k].as_slice().to_vec()).collect::<Vec<_>>())
        })?;
        sort_paths(raw)?.0.into_iter().map(|(_, v)| v).collect::<Vec<_>>()
    } else {
        Vec::new()
    };

    if spec.runs("radial_law") {
        for (k, &(_, t)) in marks.iter().enumerate() {
            let a = mean_vector_estimate(&column(&g_lambda, k, moments))?;
            let b = mean_vector_estimate(&column(&simplex, k, moments))?;
            report.extend(two_sample_checks("radial_law", moment_labels(n, t), &a, &b, threshold));
        }
    }

    if spec.runs("mean_ode") {
        let allowance = spec.model.allowance.unwrap_or(2.0 * cfg.step());
        let times: Vec<f64> = marks.iter().map(|m| m.1).collect();
        for (name, paths) in [("mean_ode_group", &g_lambda), ("mean_ode_simplex", &simplex)] {
            let r = mean_ode_check(paths, &times, &lam0, allowance, threshold)?;
            for row in &r.rows {
                report.push(Check::z(name, format!("t={} l{}", row.time, row.coordinate + 1), &row.comparison));
            }
        }
    }

    if spec.runs("skew_product") {
        skew_product_checks(spec, &u0, &marks, &g_lambda, workers, &mut report)?;
    }

    let samples = SampleTable {
        columns: (1..=n).map(|j| format!("lambda{j}")).collect(),
        rows: group.iter().map(|(i, r)| (*i, r.lambda.last().cloned().unwrap_or_default())).collect(),
    };
    Ok(Outcome { report: report.finish(), samples: Some(samples) })
}

fn skew_product_checks(
    spec: &ExperimentSpec,
    u0: &SpnMatrix,
    marks: &[(usize, f64)],
    direct: &[Vec<Vec<f64>>],
    workers: usize,
    report: &mut Report,
) -> CliResult<()> {
    let n = spec.sim.n;
    let threshold = spec.threshold();
    let cfg = SimConfig { seed: spec.sim.seed.wrapping_add(SKEW_SEED_OFFSET), ..spec.sim.clone() };
    let scale = 1.0 / cfg.t_final.sqrt();
    let raw = run_paths(workers, cfg.n_paths, |i| {
        skew_product_bm(&cfg, u0, i).map(|p| {
            let lam: Vec<Vec<f64>> = marks.iter().map(|&(k, _)| last_row_lambda(&p.states[k])).collect();
            let eta: Vec<f64> = eta_basis_coords(&integrate_eta(&p.states)).flat().iter().map(|x| x * scale).collect();
            (lam, eta)
        })
    })?;
    let (skew, excluded) = sort_paths(raw)?;
    if !excluded.is_empty() {
        report.note(format!("skew product: {} paths left the coordinate chart and were excluded", excluded.len()));
    }
    let skew_lambda: Vec<Vec<Vec<f64>>> = skew.iter().map(|(_, v)| v.0.clone()).collect();
    for (k, &(_, t)) in marks.iter().enumerate() {
        let a = mean_vector_estimate(&column(&skew_lambda, k, moments))?;
        let b = mean_vector_estimate(&column(direct, k, moments))?;
        report.extend(two_sample_checks("skew_product_law", moment_labels(n, t), &a, &b, threshold));
    }
    let eta: Vec<Vec<f64>> = skew.into_iter().map(|(_, v)| v.1).collect();
    let est = cov_estimate(&eta)?.with_excluded(excluded.len());
    let d = 3 * n;
    let cmp = cov_checks("skew_product_eta_cov", &est, &DMatrix::identity(d, d), 0.0, threshold, report)?;
    report.detail("skew_product_eta_max_abs_z", &cmp.max_abs_z)?;
    Ok(())
}
