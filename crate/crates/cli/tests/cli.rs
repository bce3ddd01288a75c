use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn czsob(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_czsob")).args(args).env("CZSOB_THREADS", "1").output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json_file(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn unknown_config_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "p = 2.0\nbogus = 3\n[domain]\nkind = \"disk\"\ncenter = [0.0, 0.0]\nradius = 1.0\n").unwrap();
    let o = czsob(&["verify", "--only", "trees", "--domain", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let msg = stderr(&o);
    assert!(msg.contains("bogus") && msg.contains("line 2"), "{msg}");
}

#[test]
fn out_of_range_value_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "n = 9\n[domain]\nkind = \"disk\"\ncenter = [0.0, 0.0]\nradius = 1.0\n").unwrap();
    let o = czsob(&["whitney", "--domain", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`n`"), "{}", stderr(&o));
}

#[test]
fn bad_flags_exit_with_usage_code() {
    assert_eq!(czsob(&["carleson", "--p", "0.5"]).status.code(), Some(2));
    assert_eq!(czsob(&["carleson", "--expect", "maybe"]).status.code(), Some(2));
    assert_eq!(czsob(&["verify", "--only", "nothing"]).status.code(), Some(2));
    assert_eq!(czsob(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn expected_failure_at_large_exponent_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("carleson.json");
    let o = czsob(&["carleson", "--p", "2.5", "--domain", "square", "--expect", "fails", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json_file(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["command"], "carleson");
    assert_eq!(r["data"]["verdict"], "fails");
    let sup = r["data"]["sup_constants"].as_array().unwrap();
    assert_eq!(sup.len(), 3);
}

#[test]
fn transform_writes_versioned_csv() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("pts.csv");
    let out = dir.path().join("t.csv");
    fs::write(&pts, "x,y\n0.1,0.2\n-0.3,0.0\n").unwrap();
    for method in ["pv", "contour"] {
        let o = czsob(&["transform", "--poly", "z", "--points", pts.to_str().unwrap(), "--method", method, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let text = fs::read_to_string(&out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# schema_version=1 config_hash="));
        assert_eq!(lines[1], "x,y,value_re,value_im,error_estimate");
        assert_eq!(lines.len(), 4);
        if method == "contour" {
            assert!(lines[2].ends_with(",exact"));
        }
    }
}

#[test]
fn transform_paths_agree() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("pts.csv");
    fs::write(&pts, "0.2,0.1\n0.5,0.5\n").unwrap();
    let values = |method: &str| -> Vec<(f64, f64)> {
        let out = dir.path().join(format!("{method}.csv"));
        let o = czsob(&["transform", "--domain", "square", "--poly", "zbar", "--points", pts.to_str().unwrap(), "--method", method, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(&out).unwrap();
        rdr.records().map(|r| {
            let r = r.unwrap();
            (r[2].parse().unwrap(), r[3].parse().unwrap())
        }).collect()
    };
    for ((a, b), (c, d)) in values("pv").into_iter().zip(values("contour")) {
        assert!((a - c).hypot(b - d) < 1e-6 * c.hypot(d).max(1.0));
    }
}

#[test]
fn polynomial_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let poly = dir.path().join("p.txt");
    let pts = dir.path().join("pts.csv");
    fs::write(&poly, "center 0 0\n0,0: 1.0\n").unwrap();
    fs::write(&pts, "0.0,0.0\n").unwrap();
    let o = czsob(&["transform", "--poly", poly.to_str().unwrap(), "--points", pts.to_str().unwrap(), "--method", "contour"]);
    assert!(o.status.success(), "{}", stderr(&o));
    // B of the disk indicator vanishes inside the disk.
    let text = String::from_utf8(o.stdout).unwrap();
    let row: Vec<f64> = text.lines().nth(2).unwrap().split(',').take(4).map(|t| t.parse().unwrap()).collect();
    assert!(row[2].hypot(row[3]) < 1e-12, "{text}");
}

#[test]
fn covering_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("cov.txt");
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let csv = dir.path().join("cubes.csv");
    let common = ["whitney", "--domain", "square", "--min-side", "2^-5"];
    let o = czsob(&[&common[..], &["--dump", dump.to_str().unwrap(), "--json", a.to_str().unwrap(), "--report", csv.to_str().unwrap()]].concat());
    assert_ne!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = czsob(&[&common[..], &["--load", dump.to_str().unwrap(), "--json", b.to_str().unwrap()]].concat());
    assert_ne!(o.status.code(), Some(2), "{}", stderr(&o));
    let (a, b) = (json_file(&a), json_file(&b));
    assert_eq!(a["data"], b["data"]);
    let cubes = a["data"]["cubes"].as_u64().unwrap() as usize;
    let rows = fs::read_to_string(&csv).unwrap().lines().count();
    assert_eq!(rows, cubes + 2);
}

#[test]
fn corrupt_dump_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("cov.txt");
    fs::write(&dump, "this is not a covering\n").unwrap();
    let o = czsob(&["whitney", "--domain", "square", "--load", dump.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        czsob(&["verify", "--only", "projection,trees", "--seed", "7", "--out", out.to_str().unwrap()]);
        fs::read(out).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn invalid_thread_count() {
    let o = Command::new(env!("CARGO_BIN_EXE_czsob")).args(["verify", "--only", "trees"]).env("CZSOB_THREADS", "lots").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
