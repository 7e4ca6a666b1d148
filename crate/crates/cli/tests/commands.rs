use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_floquet");

const FREE: &str = "n = 3\nm = 2\n";

const IDENTITY_P2: &str = r#"
n = 3
m = 2

[[coefficients]]
v = 2

[[coefficients.entries]]
i = 1
j = 1
harmonics = [{ c = 0, re = 1.0, im = 0.0 }]

[[coefficients.entries]]
i = 2
j = 2
harmonics = [{ c = 0, re = 1.0, im = 0.0 }]
"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json_stdout(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn norm_of_free_and_identity_specs() {
    let dir = tempfile::tempdir().unwrap();
    let free = write(dir.path(), "free.toml", FREE);
    let out = run(&["norm", "--spec", free.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let v = json_stdout(&out);
    assert_eq!(v["m_value"].as_f64(), Some(0.0));
    assert_eq!(v["threshold"].as_u64(), Some(1));

    let id = write(dir.path(), "id.toml", IDENTITY_P2);
    let v = json_stdout(&run(&["norm", "--spec", id.to_str().unwrap()]));
    assert!((v["m_value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn missing_or_malformed_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["norm"])), 2);
    assert_eq!(code(&run(&["norm", "--spec", "/nonexistent/spec.toml"])), 2);
    let cfg = write(dir.path(), "run.toml", "spec_path = \"free.toml\"\ntrunction = 12\n");
    write(dir.path(), "free.toml", FREE);
    let out = run(&["bands", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("trunction"));
    let cfg = write(
        dir.path(),
        "bad_grid.toml",
        "spec_path = \"free.toml\"\nt_grid = [0.0, 1.5]\n",
    );
    assert_eq!(code(&run(&["bands", "--config", cfg.to_str().unwrap()])), 2);
    let cfg = write(
        dir.path(),
        "bad_tol.toml",
        "spec_path = \"free.toml\"\n[tolerances]\node_abs = -1e-3\n",
    );
    assert_eq!(code(&run(&["bands", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn free_band_table_matches_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "free.toml", FREE);
    let cfg = write(
        dir.path(),
        "run.toml",
        "spec_path = \"free.toml\"\noutput_dir = \"out\"\nt_grid = [-0.5, 0.25, 1.0]\n",
    );
    let out = run(&["bands", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/bands.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "t");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4, "left limit plus three grid points");
    for row in &rows {
        let t = row[0];
        let mut expected: Vec<f64> = (-20i64..=20)
            .flat_map(|k| {
                let w = (2.0 * PI * k as f64 + PI * t).powi(3);
                [w, w]
            })
            .collect();
        expected.sort_by(f64::total_cmp);
        for v in &row[1..] {
            let nearest = expected
                .iter()
                .map(|e| (e - v).abs() / e.abs().max(1.0))
                .fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-10, "t={t}: {v} is not a free eigenvalue");
        }
    }
    let gaps: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/gaps.json")).unwrap()).unwrap();
    assert_eq!(gaps["gaps"].as_array().unwrap().len(), 0);
    assert!(dir.path().join("out/effective_config.toml").exists());
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "free.toml", FREE);
    let read = |sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = run(&[
            "bands",
            "--spec",
            spec.to_str().unwrap(),
            "--t-count",
            "6",
            "--output-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
        (
            std::fs::read(out_dir.join("bands.csv")).unwrap(),
            std::fs::read(out_dir.join("gaps.json")).unwrap(),
        )
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "free.toml", FREE);
    let cfg = write(
        dir.path(),
        "run.toml",
        "spec_path = \"free.toml\"\noutput_dir = \"out\"\ntruncation = 30\nt_grid = [0.5]\n",
    );
    let out = run(&[
        "localize",
        "--config",
        cfg.to_str().unwrap(),
        "--truncation",
        "14",
        "--t-points=-0.5,0.5",
    ]);
    assert_eq!(code(&out), 0);
    let echo = std::fs::read_to_string(dir.path().join("out/effective_config.toml")).unwrap();
    assert!(echo.contains("truncation = 14"), "{echo}");
    let plans: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/plans.json")).unwrap()).unwrap();
    let plans = plans.as_array().unwrap();
    assert_eq!(plans.len(), 2);
    assert!(plans.iter().all(|p| p["overlap"].is_null()));
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let free = write(dir.path(), "free.toml", FREE);
    let out_dir = dir.path().join("free_out");
    let out = run(&[
        "verify",
        "--spec",
        free.to_str().unwrap(),
        "--t-count",
        "4",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS ")).count(), 11);
    assert!(out_dir.join("verification.json").exists());

    let id = write(dir.path(), "id.toml", IDENTITY_P2);
    let out = run(&[
        "verify",
        "--spec",
        id.to_str().unwrap(),
        "--t-count",
        "4",
        "--output-dir",
        dir.path().join("id_out").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL hermitian_fiber"));
}

#[test]
fn free_determinant_dips_at_the_root() {
    let dir = tempfile::tempdir().unwrap();
    let free = write(dir.path(), "free.toml", FREE);
    let t = 0.5;
    let root = (2.0 * PI + PI * t).powi(3);
    let out_dir = dir.path().join("out");
    let lo = format!("--lambda-lo={}", root - 200.0);
    let hi = format!("--lambda-hi={}", root + 200.0);
    let out = run(&[
        "determinant",
        "--spec",
        free.to_str().unwrap(),
        &lo,
        &hi,
        "--samples",
        "81",
        "--t-values",
        "0.5",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("determinant.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 81);
    assert!(rows.iter().all(|r| r[5] == "ok"));
    let mid: f64 = rows[40][2].parse().unwrap();
    assert!(mid < 1e-8, "normalized |Delta| at the root is {mid}");
    let edge: f64 = rows[0][2].parse().unwrap();
    assert!(edge > 1e-3);
}

#[test]
fn determinant_outside_window_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let free = write(dir.path(), "free.toml", FREE);
    let out = run(&[
        "determinant",
        "--spec",
        free.to_str().unwrap(),
        "--lambda-lo=0",
        "--lambda-hi=1e9",
        "--output-dir",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("monodromy window"));
}
