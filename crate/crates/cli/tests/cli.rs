use std::path::Path;
use std::process::Command;

use quatflag_cli::config::{ExperimentKind, ExperimentSpec, ModelParams};
use quatflag_cli::experiments::run_experiment;
use quatflag_cli::report::{PLOT_FILE, REPORT_FILE, SAMPLES_FILE};
use quatflag_cli::run;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_quatflag"));
    c.env_remove("QUATFLAG_SEED");
    c
}

fn write_config(dir: &Path, spec: &ExperimentSpec) -> std::path::PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(spec).unwrap()).unwrap();
    p
}

fn small_clt() -> ExperimentSpec {
    let mut s = ExperimentSpec::template(ExperimentKind::CltArea);
    s.sim.t_final = 0.5;
    s.sim.n_paths = 40;
    s.sim.dt = 5e-3;
    s
}

#[test]
fn empty_horizon_passes_trivially() {
    for kind in ExperimentKind::ALL.into_iter().filter(|k| k.simulates()) {
        let mut spec = ExperimentSpec::template(kind);
        spec.sim.t_final = 0.0;
        spec.model.times = None;
        let out = run_experiment(&spec, 1).unwrap();
        assert!(out.report.pass, "{kind}");
        assert!(out.report.checks.iter().all(|c| c.z.is_none()), "{kind}");
        assert!(out.report.notes.iter().any(|n| n.contains("nothing to simulate")));
        assert!(out.samples.is_none());
    }
}

#[test]
fn outputs_are_byte_identical_across_workers() {
    let spec = small_clt();
    let dirs: Vec<_> = [1, 3, 8]
        .into_iter()
        .map(|w| {
            let d = tempfile::tempdir().unwrap();
            run(&spec, w, d.path()).unwrap();
            d
        })
        .collect();
    for f in [REPORT_FILE, PLOT_FILE, SAMPLES_FILE] {
        let first = std::fs::read(dirs[0].path().join(f)).unwrap();
        for d in &dirs[1..] {
            assert_eq!(first, std::fs::read(d.path().join(f)).unwrap(), "{f}");
        }
    }
}

#[test]
fn covariance_report_has_one_plot_row_per_entry() {
    let d = tempfile::tempdir().unwrap();
    let mut spec = small_clt();
    spec.sim.n = 3;
    run(&spec, 2, d.path()).unwrap();
    let text = std::fs::read_to_string(d.path().join(PLOT_FILE)).unwrap();
    assert_eq!(text.lines().count(), 1 + 81);
}

#[test]
fn report_echoes_the_configuration() {
    let spec = small_clt();
    let out = run_experiment(&spec, 1).unwrap();
    let json = serde_json::to_value(&out.report).unwrap();
    assert_eq!(json["kind"], "clt_area");
    assert_eq!(json["sim"]["n_paths"], 40);
    assert_eq!(json["schema_version"], 1);
    assert!(json["checks"][0]["z"].is_number());
}

#[test]
fn template_round_trips_through_the_binary() {
    let out = bin().args(["template", "winding_clt"]).output().unwrap();
    assert!(out.status.success());
    let spec = ExperimentSpec::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(spec, ExperimentSpec::template(ExperimentKind::WindingClt));
}

#[test]
fn exit_codes_reflect_outcome() {
    let d = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::template(ExperimentKind::SpnBm);
    spec.model = ModelParams { checks: Some(vec!["algebra_basis".into()]), ..Default::default() };
    let cfg = write_config(d.path(), &spec);
    let out = d.path().join("out");
    let ok = bin().arg("spn_bm").arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(out.join(REPORT_FILE).exists());

    // A threshold no estimate can meet makes the run fail.
    let mut strict = small_clt();
    strict.model.threshold = Some(1e-300);
    strict.model.allowance = Some(0.0);
    let cfg = write_config(d.path(), &strict);
    let fail = bin().arg("clt_area").arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(fail.status.code(), Some(1));

    let bad = bin().arg("clt_area").arg("--config").arg(d.path().join("missing.json")).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let wrong = bin().arg("flag_area").arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn seed_flag_beats_environment() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), &small_clt());
    let read = |args: &[&str], env: Option<&str>| {
        let out = d.path().join("o");
        let mut c = bin();
        c.arg("clt_area").arg("--config").arg(&cfg).arg("--out").arg(&out).args(args);
        if let Some(v) = env {
            c.env("QUATFLAG_SEED", v);
        }
        assert!(c.output().unwrap().status.code().unwrap() < 2);
        let r: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join(REPORT_FILE)).unwrap()).unwrap();
        r["sim"]["seed"].as_u64().unwrap()
    };
    assert_eq!(read(&[], None), 1);
    assert_eq!(read(&[], Some("17")), 17);
    assert_eq!(read(&["--seed", "5"], Some("17")), 5);
}
