use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_survfclt"));
    c.env_remove("SURVFCLT_OUTPUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_MODEL: &str = r#"
lifetime = { family = "exponential", rate = 1.0 }
censor = { family = "exponential", rate = 0.5 }
dependence = { variant = "iid" }
"#;

#[test]
fn estimate_hand_sample() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "s.csv", "time,event\n1,1\n2,0\n3,1\n");
    let o = run(&[
        "estimate",
        input.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let na = std::fs::read_to_string(dir.path().join("nelson_aalen.csv")).unwrap();
    let rows: Vec<Vec<f64>> = na
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("jump_time"))
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    let value_at = |t: f64| {
        rows.iter()
            .find(|r| r[0] == t)
            .map(|r| *r.last().unwrap())
            .unwrap()
    };
    assert!((value_at(1.0) - 1.0 / 3.0).abs() < 1e-15);
    assert!((value_at(3.0) - 4.0 / 3.0).abs() < 1e-15);
    let km = std::fs::read_to_string(dir.path().join("kaplan_meier.csv")).unwrap();
    assert!(km.lines().count() >= 3);
}

#[test]
fn estimate_empty_csv_reports_zero_observations() {
    let dir = tempfile::tempdir().unwrap();
    for text in ["", "time,event\n"] {
        let input = write(dir.path(), "empty.csv", text);
        let o = run(&[
            "estimate",
            input.to_str().unwrap(),
            "--out-dir",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(1));
        assert!(stderr(&o).contains("n = 0"), "{}", stderr(&o));
    }
}

#[test]
fn malformed_csv_names_file_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "bad.csv", "time,event\n1,1\nabc,0\n");
    let o = run(&[
        "estimate",
        input.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(
        msg.contains("bad.csv") && msg.contains(":3:") && msg.contains("`time`"),
        "{msg}"
    );
}

#[test]
fn malformed_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "n = 10\nreplications = \"x\"\n");
    let o = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(
        msg.contains("bad.toml") && msg.contains("replications"),
        "{msg}"
    );
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "model.toml", SMALL_MODEL);
    let args = [
        "generate",
        "--config",
        model.to_str().unwrap(),
        "--n",
        "50",
        "--seed",
        "9",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().count(), 51);
    assert!(text.starts_with("time,event"));
}

#[test]
fn hermite_writes_expansion_and_rank() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "hermite",
        "--config",
        config("lrd.toml").to_str().unwrap(),
        "--grid-points",
        "8",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("hermite_summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["rank"], 1);
    assert!(dir.path().join("hermite_any.csv").exists());
    assert!(dir.path().join("hermite_event.csv").exists());
}

#[test]
fn limits_writes_sample_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "model.toml", SMALL_MODEL);
    let o = run(&[
        "limits",
        "--config",
        model.to_str().unwrap(),
        "--replications",
        "40",
        "--grid",
        "0.2,0.5",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("limit_nelson_aalen.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 40 * 2);
    let meta: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("limit_kaplan_meier.json")).unwrap(),
    )
    .unwrap();
    assert!(meta.is_object());
}

#[test]
fn verify_iid_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "verify",
        "--config",
        config("iid.toml").to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["report.json", "deviations.csv", "plot_data.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn verify_failure_exits_two_and_seed_flag_applies() {
    // σ² = 4 shrinks the deviations by half, so the variance verdict fails.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "off.toml",
        &format!(
            "n = 400\nreplications = 200\nregime = \"weak\"\nsigma2 = 4.0\n[model]\n{SMALL_MODEL}"
        ),
    );
    let out = dir.path().join("out");
    let o = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "5",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 5);
    assert_eq!(report["pass"], false);
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "s.csv", "time,event\n1,1\n2,0\n");
    let target = dir.path().join("env_out");
    let o = bin()
        .env("SURVFCLT_OUTPUT_DIR", &target)
        .args(["estimate", input.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(target.join("nelson_aalen.csv").exists());
}
