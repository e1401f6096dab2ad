use std::path::Path;
use std::process::{Command, Output};

use diffamp::table::read_table;

fn diffamp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diffamp"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn spectrum_reports_canonical_critical_coupling() {
    let dir = tempfile::tempdir().unwrap();
    let out = diffamp(&["spectrum", "--out", "o"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let spectrum = read_json(&dir.path().join("o/spectrum.json"));
    assert!((spectrum["lambda_bar_c"].as_f64().unwrap() - 1.25).abs() < 1e-14);
    assert_eq!(spectrum["k"], 1);
    assert!((spectrum["alpha_m"].as_f64().unwrap() - 0.6).abs() < 1e-14);
    let stdout: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stdout["command"], "spectrum");
    for f in [
        "integrated_gamma.csv",
        "diagonalizer.csv",
        "config.toml",
        "resolved.toml",
        "version.txt",
    ] {
        assert!(dir.path().join("o").join(f).exists(), "{f}");
    }
}

#[test]
fn mgf_at_zero_coupling_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = diffamp(
        &[
            "mgf",
            "--seed",
            "5",
            "--lambda-grid",
            "0:0.5:2",
            "--samples",
            "1000",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let t = read_table(&dir.path().join("o/mgf.csv")).unwrap();
    assert_eq!(
        t.header,
        ["lambda", "exact", "mc_mean", "mc_stderr", "flag"]
    );
    assert_eq!(t.reals("exact").unwrap()[0], 1.0);
    assert_eq!(t.reals("mc_mean").unwrap()[0], 1.0);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("s.toml"),
        "seed = 42\n[solver]\nn_x = 32\nn_t = 64\n[sweep]\nlambda_grid = \"0:0.5:3\"\nsamples = 200\n",
    )
    .unwrap();
    for o in ["a", "b"] {
        let out = diffamp(&["sweep", "--config", "s.toml", "--out", o], dir.path());
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for f in ["sweep.csv", "summary.json", "config.toml", "resolved.toml"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let echoed = std::fs::read_to_string(dir.path().join("a/config.toml")).unwrap();
    assert!(echoed.starts_with("seed = 42\n"));
}

#[test]
fn simulate_writes_field_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let out = diffamp(
        &["simulate", "--seed", "1", "--lambda", "0.5", "--out", "o"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let field = read_table(&dir.path().join("o/field.csv")).unwrap();
    assert_eq!(field.rows.len(), 256);
    let cps = read_table(&dir.path().join("o/checkpoints.csv")).unwrap();
    assert_eq!(cps.rows.len(), 17);
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.toml"),
        "seed = 1\n[weights]\nn_max = 1\neps = [[0, 0.5], [1, 0.4]]\n",
    )
    .unwrap();
    let out = diffamp(&["mgf", "--config", "bad.toml", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("weights"));

    std::fs::write(
        dir.path().join("bad2.toml"),
        "seed = 1\n[solver]\nn_x = 100\n",
    )
    .unwrap();
    let out = diffamp(
        &["sweep", "--config", "bad2.toml", "--out", "o"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("solver"));

    std::fs::write(dir.path().join("bad3.toml"), "seed = 1\nlambda = 2\n").unwrap();
    let out = diffamp(
        &["sweep", "--config", "bad3.toml", "--out", "o"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda"));
}

#[test]
fn stochastic_commands_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = diffamp(&["sweep", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn unknown_command_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = diffamp(&["frobnicate"], dir.path());
    assert!(!out.status.success());
}

#[test]
fn covariance_and_lemma1_commands_run() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("s.toml"),
        "seed = 3\n[solver]\nn_x = 32\nn_t = 64\n\
         [covariance]\ndx_grid = \"0:0.5:2\"\ndt_grid = \"0:0.5:2\"\nsamples = 2000\n\
         [lemma1]\nsamples = 200\n",
    )
    .unwrap();
    let out = diffamp(
        &["covariance-check", "--config", "s.toml", "--out", "c"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        read_table(&dir.path().join("c/covariance.csv"))
            .unwrap()
            .rows
            .len(),
        4
    );
    let out = diffamp(&["lemma1", "--config", "s.toml", "--out", "l"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("l/lemma1.csv").exists());
}
