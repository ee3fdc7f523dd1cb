use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn soupsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soupsim")).args(args).output().expect("binary runs")
}

fn soupsim_out(args: &[&str], out: &Path) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.extend(["--out", out.to_str().unwrap()]);
    soupsim(&all)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn empty_soup_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = soupsim_out(&["soup-sample", "--dim", "2", "--lambda", "0", "--dia-min", "0.05", "--dia-max", "0.5"], dir.path());
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(dir.path().join("shapes.csv")).unwrap(), "kind,dim,center_0,center_1,scale\n");
    assert_eq!(fs::read_to_string(dir.path().join("shapes.json")).unwrap().trim(), "[]");
    assert!(dir.path().join("config.json").exists());
}

#[test]
fn zero_cutoff_is_a_usage_error() {
    let o = soupsim(&["soup-sample", "--dia-min", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cutoff"));
}

#[test]
fn unknown_flag_and_config_key_exit_2() {
    assert_eq!(soupsim(&["crossing", "--bogus"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"lambda": 1.0, "colour": "red"}"#).unwrap();
    assert_eq!(soupsim(&["crossing", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    fs::write(&file, "x").unwrap();
    let o = soupsim_out(&["soup-sample", "--lambda", "0"], &file.join("sub"));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["soup-sample", "--lambda", "3", "--dia-min", "0.05", "--dia-max", "0.5", "--seed", "11", "--svg"];
    assert!(soupsim_out(&args, a.path()).status.success());
    assert!(soupsim_out(&args, b.path()).status.success());
    for f in ["shapes.csv", "shapes.json", "scene.svg", "config.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn resolved_config_reproduces_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let o = soupsim_out(&["crossing", "--lambda", "1.5", "--trials", "100", "--seed", "5"], a.path());
    assert!(o.status.success());
    let cfg = a.path().join("config.json");
    let o = soupsim_out(&["crossing", "--config", cfg.to_str().unwrap()], b.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["estimate.json", "config.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn empty_soup_always_crosses() {
    let o = soupsim(&["crossing", "--lambda", "0", "--trials", "50"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["p_hat"], 1.0);
    assert_eq!(v["wall_time_s"], serde_json::Value::Null);
}

#[test]
fn full_fractal_always_crosses() {
    let o = soupsim(&["crossing", "--model", "fractal", "--p", "1", "--depth", "3", "--event", "box", "--trials", "50"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["p_hat"], 1.0);
}

#[test]
fn fractal_crossing_matches_exact_value() {
    let o = soupsim(&[
        "crossing", "--model", "fractal", "--n-sub", "2", "--dim", "2", "--depth", "1", "--p", "0.5", "--adjacency",
        "face", "--event", "box", "--trials", "10000", "--level", "0.99",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let (lo, hi) = (v["ci"][0].as_f64().unwrap(), v["ci"][1].as_f64().unwrap());
    assert!(lo <= 0.4375 && 0.4375 <= hi, "[{lo}, {hi}]");
}

#[test]
fn fractal_exact_prints_value() {
    let o = soupsim(&["fractal-exact", "--n-sub", "2", "--dim", "2", "--depth", "1", "--p", "0.5", "--adjacency", "vertex"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "0.5625");
}

#[test]
fn coupled_sweep_is_sorted() {
    let o = soupsim(&[
        "sweep", "--model", "fractal", "--n-sub", "3", "--depth", "3", "--grid", "0.5,0.6,0.7,0.8,0.9", "--trials",
        "300",
    ]);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("param,p_hat,ci_lo,ci_hi,n"));
    let p: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(p.len(), 5);
    assert!(p.windows(2).all(|w| w[0] <= w[1]), "{p:?}");
}

#[test]
fn degenerate_bisect_range() {
    let o = soupsim(&["bisect", "--range", "0.7,0.7", "--trials", "10"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["param_lo"], v["param_hi"]);
    assert_eq!(v["status"], "degenerate");
}

#[test]
fn timing_flag_fills_wall_time() {
    let o = soupsim(&["crossing", "--lambda", "0", "--trials", "5", "--timing"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["wall_time_s"].as_f64().is_some());
}

#[test]
fn epsilon_curves_and_renorm_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = soupsim_out(
        &["epsilon-scan", "--lambda", "1", "--dia-min", "0.05", "--eps", "0.2,0.1,0.05", "--grid", "0.5,1,2", "--trials", "50", "--svg"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["epsilon_curves.csv", "brackets.csv", "epsilon_curves.svg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let r = tempfile::tempdir().unwrap();
    let o = soupsim_out(&["renorm", "--lambda", "0", "--dia-min", "0.05", "--fields", "20"], r.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["site_marginals"].as_array().unwrap().iter().all(|m| m == 1.0));
    assert_eq!(fs::read_to_string(r.path().join("x_field_0.csv")).unwrap(), "1,1,1,1,1,1,1,1,1\n");
}
