use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tautweight"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("TAUTWEIGHT_OUT")
        .output()
        .unwrap()
}

fn files_with(dir: &Path, suffix: &str) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(suffix))
        .collect();
    v.sort();
    v
}

fn result_json(dir: &Path, command: &str) -> Value {
    let p = files_with(dir, ".json")
        .into_iter()
        .find(|p| {
            let n = p.file_name().unwrap().to_string_lossy().to_string();
            n.starts_with(command) && !n.ends_with(".manifest.json")
        })
        .unwrap();
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn radial_reports_breakpoint() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["radial", "--d", "3", "--alpha", "0.25"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let j = result_json(d.path(), "radial");
    let c = j["c"].as_f64().unwrap();
    assert!((c - 0.34).abs() < 5e-3, "{c}");
    let csv = fs::read_to_string(&files_with(d.path(), ".csv")[0]).unwrap();
    assert!(csv.starts_with("r,u,f\n"));
}

#[test]
fn denoise_step_gives_two_levels() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["denoise", "--weight", "unit", "--alpha", "0.1", "--data", "builtin:step"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let j = result_json(d.path(), "denoise");
    let u: Vec<f64> = j["solution"]["u"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let knots = j["solution"]["knots"].as_array().unwrap();
    for (i, v) in u.iter().enumerate() {
        let x = knots[i].as_f64().unwrap();
        let want = if x < 0.5 { 0.8 } else { 0.2 };
        assert!((v - want).abs() < 1e-8, "{x} {v}");
    }
    let csvs = files_with(d.path(), ".csv");
    let heads: Vec<String> = csvs
        .iter()
        .map(|p| fs::read_to_string(p).unwrap().lines().next().unwrap().to_string())
        .collect();
    assert!(heads.contains(&"r,f,u,U,xi".to_string()));
    assert!(heads.contains(&"t,value,lower,upper,contact".to_string()));
}

#[test]
fn alpha_outside_domain_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["radial", "--alpha", "0.6"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(err["kind"], "domain");
    assert!(fs::read_dir(d.path()).unwrap().next().is_none());
}

#[test]
fn unknown_flag_prints_usage() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["denoise", "--nope"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("Usage"));
    assert!(err.lines().last().unwrap().contains("\"kind\":\"usage\""));
    assert_eq!(run(d.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(run(d.path(), &["--version"]).status.code(), Some(0));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["denoise", "--weight", "power:d=3", "--alpha", "0.25", "--data", "builtin:power:beta=1", "--grid", "log", "--n", "256"];
    assert_eq!(run(a.path(), &args).status.code(), Some(0));
    assert_eq!(run(b.path(), &args).status.code(), Some(0));
    let fa = files_with(a.path(), "");
    let fb = files_with(b.path(), "");
    assert_eq!(fa.len(), 4);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
    let name = fa[0].file_name().unwrap().to_string_lossy().to_string();
    let hash = name.trim_start_matches("denoise-").split('.').next().unwrap();
    assert_eq!(hash.len(), 12);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));

    let m: Value = serde_json::from_str(&fs::read_to_string(&files_with(a.path(), ".manifest.json")[0]).unwrap()).unwrap();
    assert_eq!(m["schema_version"], 1);
    assert_eq!(m["command"], "denoise");
    assert_eq!(m["params"]["alpha"], 0.25);
    assert!(m["tolerances"].is_object());
    assert_eq!(m["pass"], true);
}

#[test]
fn diagnose_reads_denoise_output() {
    let d = tempfile::tempdir().unwrap();
    let args = ["denoise", "--weight", "power:d=3", "--alpha", "0.25", "--data", "builtin:power:beta=1", "--grid", "log", "--n", "1024"];
    assert_eq!(run(d.path(), &args).status.code(), Some(0));
    let sol = files_with(d.path(), ".json").into_iter().find(|p| !p.to_string_lossy().ends_with("manifest.json")).unwrap();
    let o = run(d.path(), &["diagnose", "--solution", sol.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let reports = result_json(d.path(), "diagnose");
    let arr = reports.as_array().unwrap();
    assert!(arr.len() >= 15);
    assert!(arr.iter().all(|r| r["s"].is_number() && r["perimeter"].is_number() && r["identity_residual"].is_number()));

    // unit weights have no radial meaning
    let e = tempfile::tempdir().unwrap();
    assert_eq!(run(e.path(), &["denoise", "--alpha", "0.1", "--data", "builtin:step"]).status.code(), Some(0));
    let sol = files_with(e.path(), ".json").into_iter().find(|p| !p.to_string_lossy().ends_with("manifest.json")).unwrap();
    assert_eq!(run(e.path(), &["diagnose", "--solution", sol.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn diagnose_flags_a_non_minimizer() {
    let d = tempfile::tempdir().unwrap();
    let path = d.path().join("bad.json");
    // a constant is not the minimizer for 1/r data
    let n = 64;
    let knots: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let sol = serde_json::json!({
        "data": "builtin:power:beta=1", "alpha": 0.25, "d": 3,
        "knots": knots, "u": vec![1.0; n], "f_bar": vec![1.5; n],
    });
    fs::write(&path, sol.to_string()).unwrap();
    let o = run(d.path(), &["diagnose", "--solution", path.to_str().unwrap(), "--levels", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!files_with(d.path(), ".manifest.json").is_empty());
}

#[test]
fn ictv_and_counterexample_outputs() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["ictv", "--alpha", "0.05", "--gamma", "0.1", "--data", "builtin:spike", "--n", "256"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let j = result_json(d.path(), "ictv");
    assert_eq!(j["certified"], true);
    assert!(j["gap"].as_f64().unwrap() <= 1e-6);
    let csv = fs::read_to_string(&files_with(d.path(), ".csv")[0]).unwrap();
    assert!(csv.starts_with("x,f,u,g,u_minus_g\n"));
    assert_eq!(csv.lines().count(), 257);

    // an iteration budget of one cannot certify
    let e = tempfile::tempdir().unwrap();
    let o = run(e.path(), &["ictv", "--alpha", "0.05", "--gamma", "0.1", "--n", "256", "--max-iter", "1"]);
    assert_eq!(o.status.code(), Some(2));

    let c = tempfile::tempdir().unwrap();
    let o = run(c.path(), &["counterexample", "--profile", "hat", "--n-max", "8"]);
    assert_eq!(o.status.code(), Some(0));
    let j = result_json(c.path(), "counterexample");
    let t = j["table"].as_array().unwrap();
    assert_eq!(t.len(), 9);
    assert!((t[2]["quotient"].as_f64().unwrap() + 6.928).abs() < 1e-3);
    assert_eq!(run(c.path(), &["counterexample", "--profile", "hat", "--cells", "12"]).status.code(), Some(1));
    assert_eq!(run(c.path(), &["counterexample", "--profile", "wave"]).status.code(), Some(1));
}

#[test]
fn sweeps() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["sweep", "--kind", "alpha", "--values", ""]);
    assert_eq!(o.status.code(), Some(0));
    assert!(fs::read_dir(d.path()).unwrap().next().is_none());

    let o = run(d.path(), &["sweep", "--kind", "alpha", "--values", "0.25,0.3,0.35,0.4,0.45", "--n", "512"]);
    assert_eq!(o.status.code(), Some(0));
    let j = result_json(d.path(), "sweep");
    assert_eq!(j["rows"].as_array().unwrap().len(), 5);
    assert_eq!(j["regression"]["value"], 1.0);

    // one bad tuple is recorded and fails the run without stopping it
    let e = tempfile::tempdir().unwrap();
    let o = run(e.path(), &["sweep", "--kind", "alpha", "--values", "0.3,0.7", "--n", "256"]);
    assert_eq!(o.status.code(), Some(2));
    let j = result_json(e.path(), "sweep");
    assert!(j["rows"][0]["result"].is_object());
    assert!(j["rows"][1]["error"].is_string());

    let s = tempfile::tempdir().unwrap();
    let p = tempfile::tempdir().unwrap();
    let args = ["sweep", "--kind", "n", "--values", "256,512,1024"];
    assert_eq!(run(p.path(), &args).status.code(), Some(0));
    let mut seq = args.to_vec();
    seq.push("--sequential");
    assert_eq!(run(s.path(), &seq).status.code(), Some(0));
    let a = fs::read(&files_with(p.path(), ".json")[0]).unwrap();
    let b = fs::read(&files_with(s.path(), ".json")[0]).unwrap();
    assert_eq!(a, b);
    let j = result_json(p.path(), "sweep");
    assert!(j["regression"]["value"].as_f64().unwrap() > 0.99);

    assert_eq!(run(d.path(), &["sweep", "--kind", "gamma", "--values", "1"]).status.code(), Some(1));
}

#[test]
fn out_directory_from_environment() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_tautweight"))
        .args(["classify", "--beta", "0.5", "--d", "3"])
        .env("TAUTWEIGHT_OUT", d.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let j = result_json(d.path(), "classify");
    assert_eq!(j["verdict"]["verdict"], "bounded");
}
