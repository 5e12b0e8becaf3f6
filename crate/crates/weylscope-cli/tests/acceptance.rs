//! CLI-level acceptance: byte-identical sweep output (criterion 10) plus the
//! exit-code contract and report plumbing.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_weylscope")
}

fn work_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("weylscope-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_measure(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

#[test]
fn criterion_10_asym_output_is_byte_identical() {
    let dir = work_dir("det");
    let measure = write_measure(
        &dir,
        "mixed.json",
        r#"{"atoms": [[0.3, 1.5]], "density": [{"from": 0.0, "to": 1.0, "coeffs": [1.0, -0.5]}], "domain_end": "inf"}"#,
    );
    let out1 = dir.join("run1.csv");
    let out2 = dir.join("run2.csv");
    for out in [&out1, &out2] {
        let res = run(&[
            "asym",
            "--measure",
            measure.to_str().unwrap(),
            "--rmin",
            "100",
            "--rmax",
            "1e5",
            "--points-per-decade",
            "2",
            "--output",
            out.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let a = std::fs::read(&out1).unwrap();
    let b = std::fs::read(&out2).unwrap();
    let pass = a == b && !a.is_empty();
    println!(
        "criterion 10 {}: identical asym scenarios produce byte-identical CSV",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = work_dir("exit");

    // missing measure file -> 1
    let res = run(&["solve", "--measure", "/nonexistent/m.json", "--z", "1i", "--xmax", "1"]);
    assert_eq!(res.status.code(), Some(1));

    // malformed measure file -> 1 with a line in the message
    let bad = write_measure(&dir, "bad.json", "{\n \"atoms\": [[0.5, 1.0],\n  [0.1, 1.0]]\n}");
    let res = run(&["solve", "--measure", bad.to_str().unwrap(), "--z", "1i", "--xmax", "1"]);
    assert_eq!(res.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&res.stderr);
    assert!(msg.contains("line"), "{msg}");
    assert!(msg.contains("strictly increasing"), "{msg}");

    // invalid ray spec -> 1
    let free = write_measure(&dir, "free.json", r#"{"atoms": [], "domain_end": "inf"}"#);
    let res = run(&[
        "asym", "--measure", free.to_str().unwrap(),
        "--rmin", "100", "--rmax", "10", // rmax < rmin
    ]);
    assert_eq!(res.status.code(), Some(1));

    // healthy run -> 0
    let res = run(&["solve", "--measure", free.to_str().unwrap(), "--z", "0+1i", "--xmax", "1"]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.starts_with("x,re_c,im_c,"), "missing header: {text}");
}

#[test]
fn solve_reports_the_atom_shifted_solution() {
    let dir = work_dir("solve");
    let delta0 = write_measure(
        &dir,
        "delta0.json",
        r#"{"atoms": [[0.0, 2.0]], "domain_end": "inf"}"#,
    );
    let res = run(&["solve", "--measure", delta0.to_str().unwrap(), "--z", "-1", "--xmax", "1"]);
    assert!(res.status.success());
    let text = String::from_utf8_lossy(&res.stdout);
    let last = text.lines().last().unwrap();
    let fields: Vec<f64> = last.split(',').map(|f| f.parse().unwrap()).collect();
    assert!((fields[0] - 1.0).abs() < 1e-12);
    // c(1) = cosh 1 + 2 sinh 1
    assert!((fields[1] - 3.8934830221028465).abs() < 1e-9, "{last}");
}

#[test]
fn weyl_reports_band_containing_the_example_value() {
    let dir = work_dir("weyl");
    let delta0 = write_measure(
        &dir,
        "delta0.json",
        r#"{"atoms": [[0.0, 2.0]], "domain_end": "inf"}"#,
    );
    let res = run(&[
        "weyl", "--measure", delta0.to_str().unwrap(),
        "--z", "1e4i", "--x0", "1", "--format", "json",
    ]);
    assert!(res.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    let m = &doc[0]["m"];
    // -sqrt(-1e4 i) - 2 = -(70.710678... + 2) + 70.710678... i
    assert!((m[0].as_f64().unwrap() + 72.71067811865476).abs() < 1e-9);
    assert!((m[1].as_f64().unwrap() - 70.71067811865476).abs() < 1e-9);
}

#[test]
fn no_partial_files_on_failure() {
    let dir = work_dir("atomic");
    let bad = write_measure(&dir, "bad.json", "{");
    let out = dir.join("never.csv");
    let res = run(&[
        "asym", "--measure", bad.to_str().unwrap(),
        "--rmin", "100", "--rmax", "1e4",
        "--output", out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(!out.exists(), "partial output file left behind");
    assert!(!out.with_extension("csv.tmp").exists());
}

#[test]
fn check_passes_on_reference_measure_and_env_jobs_is_accepted() {
    let dir = work_dir("check");
    let mixed = write_measure(
        &dir,
        "mixed.json",
        r#"{"atoms": [[0.0, 1.0], [0.3, -2.0]], "density": [{"from": 0.1, "to": 0.9, "coeffs": [1.0, 0.5, 0.0, -0.3]}], "domain_end": "inf"}"#,
    );
    let res = Command::new(bin())
        .args(["check", "--measure", mixed.to_str().unwrap()])
        .env("WEYLSCOPE_JOBS", "2")
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.contains("all checks passed"), "{text}");
}
