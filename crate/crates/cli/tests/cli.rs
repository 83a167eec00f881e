use std::path::{Path, PathBuf};
use std::process::Command;

use geomflow::Executor;
use geomflow_cli::run::{csv_text, execute};
use geomflow_cli::{ExperimentSpec, SpecError, CSV_HEADER};

const SPHERE: &str = "\
experiment = sphere-me
manifold = sphere:2:1
estimator = moment_exponent
estimator.x = 0,0,1
estimator.target = 1,0,0
estimator.method = lognormal
estimator.window = all
t = 0.5:4:0.5
flow.dt = 0.01
n_paths = 4000
seed = 11
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_geomflow"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn err(text: &str) -> SpecError {
    ExperimentSpec::parse(text).unwrap_err()
}

fn with(text: &str, extra: &str) -> String {
    format!("{text}{extra}\n")
}

#[test]
fn sphere_spec_gives_slope_near_minus_half() {
    let spec = ExperimentSpec::parse(SPHERE).unwrap();
    let ex = execute(&spec, Executor::global());
    assert!(ex.failure.is_none());
    assert_eq!(ex.rows.len(), 9);
    let slope = ex.rows.last().unwrap();
    assert_eq!(slope.estimator, "moment_exponent");
    assert!((slope.value + 0.5).abs() < 0.05, "{}", slope.value);
    let csv = csv_text(&spec.experiment, &ex.rows);
    assert!(csv.starts_with(&format!("{CSV_HEADER}\n")));
    // 17 significant digits: d.dddddddddddddddde±x
    let t = csv.lines().nth(1).unwrap().split(',').nth(3).unwrap();
    assert_eq!(t.split('e').next().unwrap().len(), 18, "{t}");
}

#[test]
fn missing_field_is_named() {
    let e = err(&SPHERE.replace("sphere:2:1", "sphere:2"));
    assert_eq!(e.field.as_deref(), Some("manifold"));
    assert_eq!(e.line, Some(2));
    assert!(e.message.contains("`r`"), "{e}");
    let e = err(&SPHERE.replace("estimator.x = 0,0,1\n", ""));
    assert_eq!(e.field.as_deref(), Some("estimator.x"));
}

#[test]
fn unknown_ids_list_the_options() {
    let e = err(&SPHERE.replace("sphere:2:1", "klein-bottle"));
    assert!(e.message.contains("sphere:n:r") && e.message.contains("langevin:c:gamma:n"), "{e}");
    let e = err(&SPHERE.replace("estimator = moment_exponent", "estimator = magic"));
    assert!(e.message.contains("bismut_gradient"), "{e}");
    let e = err(&with(SPHERE, "estimator.f = coord:1"));
    assert_eq!(e.line, Some(12));
    assert!(e.message.contains("valid keys"), "{e}");
    let e = err(&with(&SPHERE.replace(" = moment_exponent", " = semigroup").replace("estimator.target = 1,0,0\n", "").replace("estimator.method = lognormal\nestimator.window = all\n", ""), "estimator.f = wave:2"));
    assert!(e.message.contains("coord:i"), "{e}");
    let e = err(&SPHERE.replace("manifold = sphere:2:1", "manifold = sphere:2:1\ndrift = banana"));
    assert_eq!(e.field.as_deref(), Some("drift"));
}

#[test]
fn malformed_specs_report_lines() {
    let e = err("experiment = a\nthis line has no equals\n");
    assert_eq!(e.line, Some(2));
    let e = err(&with(SPHERE, "seed = 3"));
    assert_eq!((e.line, e.field.as_deref()), (Some(12), Some("seed")));
    assert!(e.message.contains("line 11"), "{e}");
    let e = err(&SPHERE.replace("flow.dt = 0.01", "flow.dt = 0.3"));
    assert_eq!(e.field.as_deref(), Some("t"));
    let e = err(&SPHERE.replace("estimator.x = 0,0,1", "estimator.x = 0,0,2"));
    assert_eq!(e.field.as_deref(), Some("estimator.x"));
    let e = err(&SPHERE.replace("estimator.target = 1,0,0", "estimator.target = 0,0,1"));
    assert!(e.message.contains("not tangent"), "{e}");
    let e = err(&SPHERE.replace("experiment = sphere-me", "experiment = ../escape"));
    assert_eq!(e.field.as_deref(), Some("experiment"));
    let e = err(&with(SPHERE, "check.target = 1"));
    assert_eq!(e.field.as_deref(), Some("check.tolerance"));
}

#[test]
fn chart_points_and_time_ranges() {
    let text = "experiment = tor\nmanifold = flat-torus:1:1\nestimator = semigroup\nestimator.f = coord:1\nestimator.x = chart:0,0\nt = 0.1:0.3:0.1\nflow.dt = 0.01\nn_paths = 10\n";
    let s = ExperimentSpec::parse(text).unwrap();
    assert_eq!(s.times.len(), 3);
    assert_eq!(s.values["flow.t_max"], format!("{:?}", s.times[2]));
    assert!(s.resolved_text().contains("drift = none\n"));
}

#[test]
fn tables_are_byte_identical_and_manifest_replays() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "s.spec", SPHERE);
    let run = |out: &Path, threads: &str, spec: &Path| {
        let o = bin().arg("run").arg(spec).arg("--out").arg(out).args(["--threads", threads]).output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out.join("sphere-me.csv")).unwrap()
    };
    let a = run(&dir.path().join("a"), "1", &spec);
    let b = run(&dir.path().join("b"), "3", &spec);
    assert_eq!(a, b);
    let manifest = dir.path().join("a").join("sphere-me.manifest");
    let text = std::fs::read_to_string(&manifest).unwrap();
    for k in ["# code_version = geomflow-cli", "# wall_time_s = ", "# status = complete", "seed = 11\n", "flow.t_max = 4.0\n"] {
        assert!(text.contains(k), "{k} missing from\n{text}");
    }
    let c = run(&dir.path().join("c"), "2", &manifest);
    assert_eq!(a, c);
}

#[test]
fn outputs_are_write_once() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "s.spec", &SPHERE.replace("n_paths = 4000", "n_paths = 20"));
    let go = || bin().arg("run").arg(&spec).arg("--out").arg(dir.path()).output().unwrap();
    assert!(go().status.success());
    let before = std::fs::read(dir.path().join("sphere-me.csv")).unwrap();
    let o = go();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("write-once"));
    assert_eq!(std::fs::read(dir.path().join("sphere-me.csv")).unwrap(), before);
}

#[test]
fn seed_flag_overrides_and_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "s.spec", &SPHERE.replace("n_paths = 4000", "n_paths = 50"));
    let o = bin().arg("run").arg(&spec).arg("--out").arg(dir.path().join("x")).args(["--seed", "99"]).output().unwrap();
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("x/sphere-me.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",50,99")));
    let m = std::fs::read_to_string(dir.path().join("x/sphere-me.manifest")).unwrap();
    assert!(m.contains("seed = 99\n"));
}

#[test]
fn numerical_failure_keeps_a_failed_row() {
    // every path leaves the explosion radius before the fit window
    let text = "experiment = boom\nmanifold = constant-drift:1,0\nestimator = moment_exponent\nestimator.x = 0,0\nt = 1,2,3\nflow.dt = 0.01\nflow.explosion_radius = 0.5\nn_paths = 10\n";
    let spec = ExperimentSpec::parse(text).unwrap();
    let ex = execute(&spec, Executor::serial());
    assert!(ex.failure.is_some());
    let last = ex.rows.last().unwrap();
    assert_eq!(last.estimator, "failed:moment_exponent");
    assert!(last.value.is_nan());
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "boom.spec", text);
    let o = bin().arg("run").arg(&p).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    let csv = std::fs::read_to_string(dir.path().join("boom.csv")).unwrap();
    assert!(csv.contains("failed:moment_exponent"));
    let m = std::fs::read_to_string(dir.path().join("boom.manifest")).unwrap();
    assert!(m.contains("# status = failed: "));
}

#[test]
fn check_flag_sets_the_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let base = SPHERE.replace("n_paths = 4000", "n_paths = 400");
    let good = write(dir.path(), "g.spec", &with(&base.replace("sphere-me", "good"), "check.row = moment_exponent\ncheck.target = -0.5\ncheck.tolerance = 0.2"));
    let bad = write(dir.path(), "b.spec", &with(&base.replace("sphere-me", "bad"), "check.target = 3\ncheck.tolerance = 0.01"));
    let run = |p: &Path, check: bool| {
        let mut c = bin();
        c.arg("run").arg(p).arg("--out").arg(dir.path().join(if check { "c" } else { "n" }));
        if check {
            c.arg("--check");
        }
        c.output().unwrap()
    };
    assert!(run(&good, true).status.success());
    let o = run(&bad, true);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    assert!(run(&bad, false).status.success());
}

#[test]
fn suite_commands() {
    let o = bin().args(["suite", "nonsense"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let e = String::from_utf8_lossy(&o.stderr);
    assert!(e.contains("paper-examples") && e.contains("invariants"), "{e}");
    let o = bin().args(["suite", "invariants", "--quick"]).output().unwrap();
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{out}");
    let verdicts = out.lines().filter(|l| l.ends_with("PASS") || l.ends_with("FAIL")).count();
    assert!(verdicts >= 8, "{out}");
    assert!(out.lines().next().unwrap().starts_with("criterion"));
}

#[test]
fn thread_env_var_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "s.spec", &SPHERE.replace("n_paths = 4000", "n_paths = 5"));
    let o = bin().arg("run").arg(&spec).arg("--out").arg(dir.path()).env("GEOMFLOW_THREADS", "many").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("GEOMFLOW_THREADS"));
    let o = bin().arg("run").arg(&spec).arg("--out").arg(dir.path()).env("GEOMFLOW_THREADS", "2").output().unwrap();
    assert!(o.status.success());
}

#[test]
fn every_bundled_spec_resolves() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "spec") {
            let text = std::fs::read_to_string(&p).unwrap();
            ExperimentSpec::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 5);
}
