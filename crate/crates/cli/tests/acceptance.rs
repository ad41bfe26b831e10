//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Statistical criteria use fixed seeds, so every run reproduces the same numbers.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use quatflag::sde::SimConfig;
use quatflag::winding::{sample_area_winding_paths, AreaWindingSample, CanonicalVariation};
use quatflag_cli::config::{default_u_grid, ExperimentKind, ExperimentSpec, ModelParams, OutputSpec, SCHEMA_VERSION};
use quatflag_cli::experiments::{clt_area_outcome, run_experiment, winding_outcome, x0_from_lambda};
use quatflag_cli::report::{Check, CheckKind, Report};
use quatflag_cli::run;

type Verdict = Result<(bool, String), String>;

struct Line {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
    budget: Duration,
}

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn spec(kind: ExperimentKind, sim: SimConfig, model: ModelParams) -> ExperimentSpec {
    ExperimentSpec { schema_version: SCHEMA_VERSION, kind, sim, model, output: OutputSpec::default() }
}

fn checks(names: &[&str]) -> Option<Vec<String>> {
    Some(names.iter().map(|s| s.to_string()).collect())
}

/// Largest `|z|` among enforced z-checks, and the number of enforced checks.
fn summary(r: &Report) -> String {
    let enforced: Vec<&Check> = r.checks.iter().filter(|c| c.enforced).collect();
    let max_z = enforced.iter().filter_map(|c| c.z).fold(0.0f64, |m, z| m.max(z.abs()));
    let failed: Vec<String> = r.failures().take(3).map(|c| format!("{} {}", c.name, c.index)).collect();
    let mut s = format!("{} checks", enforced.len());
    if enforced.iter().any(|c| c.kind == CheckKind::ZScore) {
        s += &format!(", max |z| {max_z:.2}");
    }
    if !failed.is_empty() {
        s += &format!(", failing: {}", failed.join("; "));
    }
    s
}

fn worst_bound(r: &Report, name: &str) -> f64 {
    r.checks.iter().filter(|c| c.name == name).map(|c| c.estimate).fold(0.0, f64::max)
}

fn run_spec(s: &ExperimentSpec) -> Result<Report, String> {
    run_experiment(s, workers()).map(|o| o.report).map_err(|e| e.to_string())
}

fn c1() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for n in [2, 3, 4] {
        let r = run_spec(&spec(
            ExperimentKind::SpnBm,
            SimConfig::new(n, 0.0, 1.0, 1, 0),
            ModelParams { checks: checks(&["algebra_basis"]), ..Default::default() },
        ))?;
        pass &= r.pass;
        parts.push(format!("n={n}: {} elements, defect {:.1e}", r.checks[0].estimate, r.checks[1].estimate));
    }
    Ok((pass, parts.join("; ")))
}

fn c2() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for n in [2, 3] {
        let r = run_spec(&spec(
            ExperimentKind::JacobiChecks,
            SimConfig::new(n, 0.0, 1.0, 1, 0),
            ModelParams { checks: checks(&["eigenfunctions"]), max_degree: Some(5), ..Default::default() },
        ))?;
        pass &= r.pass;
        parts.push(format!("n={n}: worst relative defect {:.1e} over both indices", worst_bound(&r, "eigen_identity")));
    }
    Ok((pass, parts.join("; ")))
}

fn c3() -> Verdict {
    let r = run_spec(&spec(
        ExperimentKind::SpnBm,
        SimConfig::new(2, 0.5, 1e-3, 20_000, 2003),
        ModelParams {
            checks: checks(&["mean_decay"]),
            lambda0: Some(vec![0.3, 0.7]),
            times: Some(vec![0.5]),
            ..Default::default()
        },
    ))?;
    Ok((r.pass, format!("16 entries at t=0.5: {}", summary(&r))))
}

fn c4() -> Verdict {
    let r = run_spec(&spec(
        ExperimentKind::SpnBm,
        SimConfig::new(2, 1.0, 1e-3, 20_000, 2004),
        ModelParams {
            checks: checks(&["radial_law"]),
            lambda0: Some(vec![0.8, 0.2]),
            times: Some(vec![0.2, 1.0]),
            ..Default::default()
        },
    ))?;
    Ok((r.pass, format!("first and second moments at t=0.2, 1.0: {}", summary(&r))))
}

fn c5() -> Verdict {
    let r = run_spec(&spec(
        ExperimentKind::SpnBm,
        SimConfig::new(2, 0.25, 5e-4, 20_000, 2005),
        ModelParams {
            checks: checks(&["mean_ode"]),
            lambda0: Some(vec![0.9, 0.1]),
            times: Some(vec![0.05, 0.1, 0.15, 0.2, 0.25]),
            ..Default::default()
        },
    ))?;
    Ok((r.pass, format!("group and simplex samplers, bias budget 2dt: {}", summary(&r))))
}

fn c6() -> Verdict {
    let r = run_spec(&spec(
        ExperimentKind::FlagArea,
        SimConfig::new(2, 1.0, 1e-4, 200, 2006),
        ModelParams { checks: checks(&["horizontality"]), refine: Some(4), ..Default::default() },
    ))?;
    let get = |name: &str| r.checks.iter().find(|c| c.name == name).map(|c| c.estimate).unwrap_or(f64::NAN);
    Ok((
        r.pass,
        format!(
            "rms {:.4} at dt=4e-4, {:.4} at dt=1e-4, ratio {:.2} (need rms <= 0.02, ratio >= 1.8)",
            get("horizontality_rms_coarse"),
            get("horizontality_rms"),
            get("horizontality_ratio")
        ),
    ))
}

fn c7() -> Verdict {
    let r = run_spec(&spec(
        ExperimentKind::SpnBm,
        SimConfig::new(2, 5.0, 2e-3, 4000, 2007),
        ModelParams {
            checks: checks(&["skew_product"]),
            lambda0: Some(vec![0.6, 0.4]),
            times: Some(vec![0.5, 5.0]),
            ..Default::default()
        },
    ))?;
    let part = |prefix: &str| {
        r.checks.iter().filter(|c| c.name.starts_with(prefix)).filter_map(|c| c.z).fold(0.0f64, |m, z| m.max(z.abs()))
    };
    Ok((
        r.pass,
        format!(
            "lambda moments max |z| {:.2}; Cov(int eta)/t vs I_6 max |z| {:.2}",
            part("skew_product_law"),
            part("skew_product_eta_cov")
        ),
    ))
}

fn c8() -> Verdict {
    let r = run_spec(&spec(
        ExperimentKind::CfCompare,
        SimConfig::new(2, 0.5, 1e-3, 50_000, 2008),
        ModelParams { u_grid: Some(default_u_grid(2)), max_degree: Some(40), ..Default::default() },
    ))?;
    let accurate = r.notes.iter().all(|n| !n.contains("kernel tail"));
    Ok((r.pass && accurate, format!("5 frequencies, real and imaginary parts: {}", summary(&r))))
}

struct Shared {
    cfg: SimConfig,
    samples: Vec<Option<AreaWindingSample>>,
    excluded: Vec<u64>,
    elapsed: Duration,
}

const MU: [f64; 2] = [2.0, 1.0];

fn shared_simulation() -> Result<Shared, String> {
    let start = Instant::now();
    let cfg = SimConfig::new(2, 50.0, 2e-3, 10_000, 2009);
    let mu = CanonicalVariation::new(MU.to_vec()).map_err(|e| e.to_string())?;
    let (samples, excluded) =
        sample_area_winding_paths(&cfg, &mu, &x0_from_lambda(&[0.5, 0.5]), workers()).map_err(|e| e.to_string())?;
    Ok(Shared { cfg, samples, excluded, elapsed: start.elapsed() })
}

fn c9(shared: &Shared) -> Verdict {
    let s2 = spec(ExperimentKind::CltArea, shared.cfg.clone(), ModelParams::default());
    let areas: Vec<_> =
        shared.samples.iter().enumerate().filter_map(|(i, s)| s.as_ref().map(|s| (i as u64, s.area.clone()))).collect();
    let r2 = clt_area_outcome(&s2, &areas, &shared.excluded).map_err(|e| e.to_string())?.report;
    let r3 = run_spec(&spec(ExperimentKind::CltArea, SimConfig::new(3, 50.0, 2e-3, 10_000, 2019), ModelParams::default()))?;
    Ok((r2.pass && r3.pass, format!("n=2: {}; n=3: {}", summary(&r2), summary(&r3))))
}

fn c10() -> Verdict {
    let r = run_spec(&spec(
        ExperimentKind::FlagArea,
        SimConfig::new(2, 100.0, 1e-3, 1, 2010),
        ModelParams { checks: checks(&["ergodic"]), ..Default::default() },
    ))?;
    let avg: Vec<String> = r
        .checks
        .iter()
        .filter(|c| c.name == "ergodic_average")
        .map(|c| format!("{:.3} +- {:.3}", c.estimate, c.se.unwrap_or(f64::NAN)))
        .collect();
    let q = r.checks.iter().find(|c| c.name == "stationary_integral").map(|c| (c.estimate - c.target).abs());
    Ok((r.pass, format!("time averages [{}] vs 2; quadrature error {:.1e}", avg.join(", "), q.unwrap_or(f64::NAN))))
}

fn c11(shared: &Shared) -> Verdict {
    let s = spec(
        ExperimentKind::WindingClt,
        shared.cfg.clone(),
        ModelParams { mu: Some(MU.to_vec()), ..Default::default() },
    );
    let r = winding_outcome(&s, &shared.samples, shared.excluded.clone()).map_err(|e| e.to_string())?.report;
    let verdict = r.details.get("verdict").and_then(|v| v.as_str()).unwrap_or("?").to_string();
    let get = |name: &str| r.checks.iter().find(|c| c.name == name).map(|c| (c.index.clone(), c.estimate));
    let (acc, acc_z) = get("accepted_max_abs_z").unwrap_or_default();
    let (rej, rej_z) = get("rejected_max_abs_z").unwrap_or_default();
    let off = get("off_diagonal_max_abs_z").map(|c| c.1).unwrap_or(f64::NAN);
    Ok((
        r.pass,
        format!(
            "verdict {verdict}: {acc} max |z| {acc_z:.2}, {rej} max |z| {rej_z:.2}, off-diagonal max |z| {off:.2}{}",
            if r.notes.is_empty() { String::new() } else { format!(" ({})", r.notes.join("; ")) }
        ),
    ))
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map(|it| {
            it.filter_map(|e| e.ok())
                .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap_or_default()))
                .collect()
        })
        .unwrap_or_default();
    files.sort();
    files
}

fn c12() -> Verdict {
    let mut cases = vec![
        spec(ExperimentKind::CltArea, SimConfig::new(2, 2.0, 2e-3, 200, 2012), ModelParams::default()),
        spec(
            ExperimentKind::WindingClt,
            SimConfig::new(2, 2.0, 2e-3, 200, 2012),
            ModelParams { mu: Some(MU.to_vec()), ..Default::default() },
        ),
        spec(
            ExperimentKind::SpnBm,
            SimConfig::new(2, 0.2, 2e-3, 1000, 2012),
            ModelParams { lambda0: Some(vec![0.7, 0.3]), ..Default::default() },
        ),
        spec(
            ExperimentKind::CfCompare,
            SimConfig::new(2, 0.3, 2e-3, 300, 2012),
            ModelParams { u_grid: Some(default_u_grid(2)[..2].to_vec()), max_degree: Some(20), ..Default::default() },
        ),
    ];
    for c in &mut cases {
        c.output.jsonl = true;
    }
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut pass = true;
    for (k, c) in cases.iter().enumerate() {
        let mut outputs = Vec::new();
        for (rep, w) in [1usize, 4, 8, 4].into_iter().enumerate() {
            let dir = root.path().join(format!("{k}-{rep}"));
            run(c, w, &dir).map_err(|e| e.to_string())?;
            outputs.push(read_dir_bytes(&dir));
        }
        let same = outputs.iter().all(|o| *o == outputs[0]) && !outputs[0].is_empty();
        pass &= same;
        parts.push(format!("{} ({} files) {}", c.kind, outputs[0].len(), if same { "identical" } else { "DIFFER" }));
    }
    Ok((pass, format!("workers 1, 4, 8 and a rerun: {}", parts.join(", "))))
}

fn timed(id: u32, title: &'static str, budget_s: u64, f: impl FnOnce() -> Verdict) -> Line {
    let start = Instant::now();
    let (pass, detail) = match f() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    let line = Line { id, title, pass, detail, elapsed: start.elapsed(), budget: Duration::from_secs(budget_s) };
    print_line(&line);
    line
}

fn print_line(l: &Line) {
    let over = if l.elapsed > l.budget { " OVER BUDGET" } else { "" };
    println!(
        "criterion {:>2} {} {}: {} [{:.1} s, budget {} s{over}]",
        l.id,
        if l.pass { "PASS" } else { "FAIL" },
        l.title,
        l.detail,
        l.elapsed.as_secs_f64(),
        l.budget.as_secs()
    );
}

fn main() -> ExitCode {
    // The test runner passes libtest flags; listing requests get an empty list.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    println!("acceptance suite on {} worker(s)", workers());
    let mut lines = vec![
        timed(1, "algebra basis orthonormality", 1, c1),
        timed(2, "generator eigenvalues", 10, c2),
        timed(3, "group mean decay", 120, c3),
        timed(4, "radial law of the last row", 120, c4),
        timed(5, "simplex mean ODE", 60, c5),
        timed(6, "horizontality of assembled paths", 120, c6),
        timed(7, "skew-product equivalence", 180, c7),
        timed(8, "area characteristic function", 600, c8),
    ];
    match shared_simulation() {
        Ok(shared) => {
            println!(
                "shared n=2 area and winding simulation: {:.1} s, {} paths excluded",
                shared.elapsed.as_secs_f64(),
                shared.excluded.len()
            );
            lines.push(timed(9, "area covariance limit", 600, || c9(&shared)));
            lines.push(timed(10, "ergodic average", 120, c10));
            lines.push(timed(11, "winding covariance", 600, || c11(&shared)));
        }
        Err(e) => {
            for (id, title) in [(9, "area covariance limit"), (11, "winding covariance")] {
                let l = Line { id, title, pass: false, detail: format!("error: {e}"), elapsed: Duration::ZERO, budget: Duration::ZERO };
                print_line(&l);
                lines.push(l);
            }
            lines.push(timed(10, "ergodic average", 120, c10));
        }
    }
    lines.push(timed(12, "reproducibility across workers", 300, c12));
    lines.sort_by_key(|l| l.id);
    let failed: Vec<u32> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    println!("\nsummary");
    for l in &lines {
        println!("  {:>2} {}", l.id, if l.pass { "PASS" } else { "FAIL" });
    }
    if failed.is_empty() {
        println!("all {} criteria passed", lines.len());
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
