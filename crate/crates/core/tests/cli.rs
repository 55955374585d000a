use std::path::Path;
use std::process::{Command, Output};

fn ecmle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecmle")).args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn estimate_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("est.csv");
    let o = ecmle(&["estimate", "--model", "gaussian", "--T", "2000", "--reps", "2", "--seed", "5", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().clone();
    assert_eq!(&header[0], "model");
    let rows: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    let status = header.iter().position(|h| h == "status").unwrap();
    assert!(rows.iter().all(|r| &r[status] == "ok"));
}

#[test]
fn bad_configuration_exits_with_2() {
    let o = ecmle(&["estimate", "--model", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
    let o = ecmle(&["estimate", "--method", "NOT_A_METHOD"]);
    assert_eq!(o.status.code(), Some(2));
    let o = ecmle(&["estimate", "--alpha", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = ecmle(&["estimate", "--config", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[run]\nunknown_key = 1\n").unwrap();
    let o = ecmle(&["estimate", "--config", path_str(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn estimator_failure_exits_with_3() {
    // the Σ̂ ellipsoid of a 5-d banana is far too large to hit its HPD set
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fail.csv");
    let o = ecmle(&[
        "estimate", "--model", "rosenbrock", "--d", "5", "--method", "MIX_THAMES", "--T", "2000", "--reps", "1", "--out",
        path_str(&out),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&out).unwrap().contains("MIX_THAMES"));
}

#[test]
fn compare_is_byte_identical_across_runs_and_thread_modes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let base = ["compare", "--model", "mixture", "--T", "2000", "--reps", "3", "--seed", "9"];
    let o = ecmle(&[&base[..], &["--out", path_str(&a)]].concat());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = ecmle(&[&base[..], &["--out", path_str(&b), "--sequential"]].concat());
    assert!(o.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    for suffix in [".timing.csv", ".summary.csv"] {
        let mut s = a.as_os_str().to_owned();
        s.push(suffix);
        assert!(Path::new(&s).exists(), "{suffix}");
    }
}

#[test]
fn config_file_and_flags_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[run]\nmethods = [\"ECMLE\", \"THAMES\"]\nT = 1500\nreps = 2\nseed = 3\n\n[model]\nname = \"gaussian\"\n")
        .unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(ecmle(&["compare", "--config", path_str(&cfg), "--out", path_str(&a)]).status.success());
    let o = ecmle(&[
        "compare", "--model", "gaussian", "--method", "ECMLE,THAMES", "--T", "1500", "--reps", "2", "--seed", "3", "--out",
        path_str(&b),
    ]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn sweep_and_variance_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep.csv");
    let o = ecmle(&["sweep-alpha", "--T", "1500", "--reps", "2", "--alphas", "0.5,0.8", "--out", path_str(&sweep)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&sweep).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("gaussian,")).count(), 4);

    let var = dir.path().join("var.csv");
    let o = ecmle(&["variance", "--model", "mixture", "--T", "1500", "--reps", "1", "--alphas", "0.5,0.9", "--out", path_str(&var)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&var).unwrap().lines().count() >= 3);
}

#[test]
fn export_regions_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("regions");
    let o = ecmle(&["export-regions", "--model", "mixture", "--T", "4000", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let union = ecmle::harness::read_union(&out.join("union.json")).unwrap();
    assert!(union.len() >= 2);
    assert!(union.disjointness_certificate());
    let thames = ecmle::harness::read_thames(&out.join("thames.json")).unwrap();
    assert_eq!(thames.d, 2);
    let draws = std::fs::read_to_string(out.join("draws.csv")).unwrap();
    assert!(draws.lines().next().unwrap().starts_with("theta_1,theta_2,log_unnorm_posterior"));
}
