use std::path::Path;
use std::process::{Command, Output};

fn gperm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gperm")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

#[test]
fn sample_text_is_reproducible() {
    let args = ["sample", "--model", "kcm", "--k", "3", "--n", "50", "--replicas", "3", "--seed", "7"];
    let a = gperm(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, gperm(&args).stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    for line in lines {
        let mut v: Vec<u32> = line.split(' ').map(|t| t.parse().unwrap()).collect();
        v.sort_unstable();
        assert_eq!(v, (1..=50).collect::<Vec<_>>());
    }
    let other = gperm(&["sample", "--model", "kcm", "--k", "3", "--n", "50", "--replicas", "3", "--seed", "8"]);
    assert_ne!(text.as_bytes(), other.stdout);
}

#[test]
fn sample_binary_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.bin");
    let out_s = out.to_str().unwrap();
    let args = ["sample", "--model", "mallows", "--beta", "-2", "--n", "10", "--replicas", "4", "--format", "binary", "--out", out_s];
    assert!(gperm(&args).status.success());
    let bytes = std::fs::read(&out).unwrap();
    assert_eq!(&bytes[..4], b"PRM1");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 10);
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 4);
    assert_eq!(bytes.len(), 12 + 4 * 40);
    let sidecar: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("s.bin.json")).unwrap()).unwrap();
    assert_eq!(sidecar["config"]["seed"], 0);
    assert_eq!(sidecar["config"]["command"]["Sample"]["model"]["beta"], -2.0);

    assert!(gperm(&args).status.success());
    assert_eq!(bytes, std::fs::read(&out).unwrap());
}

#[test]
fn oracle_samplers() {
    for args in [
        ["sample", "--model", "mallows", "--beta", "3", "--n", "20", "--oracle"],
        ["sample", "--model", "kcm", "--k", "4", "--n", "20", "--oracle"],
    ] {
        assert!(gperm(&args).status.success(), "{args:?}");
    }
    assert_eq!(gperm(&["sample", "--model", "uniform", "--n", "5", "--oracle"]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["sample", "--model", "mallows", "--n", "5"],
        vec!["sample", "--model", "kcm", "--n", "5"],
        vec!["sample", "--model", "kcm", "--k", "0", "--n", "5"],
        vec!["sample", "--model", "nope", "--n", "5"],
        vec!["verify", "--model", "uniform", "--n", "12"],
        vec!["bogus"],
        vec![],
    ] {
        assert_eq!(gperm(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn show_defaults() {
    let out = gperm(&["--show-defaults"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("lln.replicas") && text.contains("band.ks_kcm"));
    let table = json(&gperm(&["--show-defaults", "--format", "json"]));
    assert!(table.as_array().unwrap().iter().any(|e| e["key"] == "seed"));
}

#[test]
fn verify_reports_the_three_checks() {
    let out = gperm(&["verify", "--model", "kcm", "--k", "2", "--n", "4", "--samples", "200000"]);
    assert!(out.status.success());
    let v = json(&out);
    assert!(v["sum_check"].as_f64().unwrap() < 1e-12);
    assert!(v["symmetry_max"].as_f64().unwrap() < 1e-13);
    assert!(v["tv_distance"].as_f64().unwrap() < 0.02);
    assert!(v["config"]["command"]["Verify"].is_object());
}

#[test]
fn matrix_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("m");
    let p = prefix.to_str().unwrap();
    let run = || gperm(&["matrix", "--model", "uniform", "--n", "64", "--bins", "8", "--force-identity", "--out", p]);
    assert!(run().status.success());
    let pgm = std::fs::read_to_string(dir.path().join("m.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n") && pgm.contains("# config "));
    let rows: Vec<&str> = pgm.lines().filter(|l| !l.starts_with('#')).skip(3).collect();
    assert_eq!(rows.first(), Some(&"0 0 0 0 0 0 0 255"));
    assert_eq!(rows.last(), Some(&"255 0 0 0 0 0 0 0"));
    let csv = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 8);
    let before = std::fs::read(dir.path().join("m.pgm")).unwrap();
    assert!(run().status.success());
    assert_eq!(before, std::fs::read(dir.path().join("m.pgm")).unwrap());
    assert!(Path::new(&format!("{p}.profile.json")).exists());
}

#[test]
fn permuton_table() {
    let out = gperm(&["permuton", "--model", "kcm", "--k", "5", "--grid", "4", "--format", "json"]);
    assert!(out.status.success());
    let v = json(&out);
    let table = v["table"].as_array().unwrap();
    assert_eq!(table.len(), 16);
    assert!(v["closed_form_u_rel_err"].as_f64().unwrap() < 1e-6);
    let csv = String::from_utf8(gperm(&["permuton", "--model", "uniform", "--grid", "1"]).stdout).unwrap();
    let last = csv.lines().last().unwrap();
    assert!(last.starts_with("0.5,0.5,0.75,0.25,"), "{last}");
}

#[test]
fn pattern_modes() {
    let exact = json(&gperm(&["pattern", "--model", "uniform", "--n", "400", "--tau", "2,1", "--exact"]));
    let d = exact["result"]["density"].as_f64().unwrap();
    assert!((d - 0.5).abs() < 0.05);
    let mc = json(&gperm(&["pattern", "--model", "kcm", "--k", "3", "--n", "2000", "--mc", "20000"]));
    assert!((mc["result"]["estimate"].as_f64().unwrap() - 0.25).abs() < 0.03);
    let lim = json(&gperm(&["pattern", "--model", "kcm", "--k", "3", "--permuton", "--mc", "20000"]));
    assert!((lim["result"]["estimate"].as_f64().unwrap() - 0.25).abs() < 0.02);
    assert_eq!(gperm(&["pattern", "--model", "uniform", "--tau", "1,1"]).status.code(), Some(2));
}

#[test]
fn lln_medians_decrease() {
    let out = gperm(&["lln", "--model", "kcm", "--k", "2", "--ns", "1000,10000,100000", "--replicas", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["rows"].as_array().unwrap().len(), 15);
    let row = &v["rows"][0];
    assert!(row["n"].is_u64() && row["replica"].is_u64() && row["distance"].is_f64());
}

#[test]
fn band_outputs() {
    let hist = gperm(&["band", "--family", "mallows", "--empirical", "--n", "100000", "--alpha", "100", "--bins", "20"]);
    assert!(hist.status.code().is_some());
    let text = String::from_utf8(hist.stdout).unwrap();
    assert!(text.starts_with("# config "));
    assert!(text.contains("bin_left,bin_right,count,density,logistic_pdf_at_midpoint"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 21);

    let sweep = gperm(&["band", "--family", "kcm", "--alphas", "40,80", "--format", "json"]);
    assert_eq!(sweep.status.code(), Some(0));
    assert_eq!(json(&sweep)["errors"].as_array().unwrap().len(), 2);
    // with the default grid, alpha 20 pushes s - t/alpha below 0
    assert_eq!(gperm(&["band", "--family", "kcm", "--alphas", "20"]).status.code(), Some(2));
    let csv = gperm(&["band", "--family", "kcm", "--alphas", "40", "--format", "csv"]);
    assert!(String::from_utf8(csv.stdout).unwrap().lines().nth(1) == Some("alpha,s,t,h,limit"));
}

#[test]
fn suite_subset() {
    let out = gperm(&["suite", "--only", "1,3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["experiments"].as_array().unwrap().len(), 2);
    assert_eq!(gperm(&["suite", "--only", "99"]).status.code(), Some(2));
}
