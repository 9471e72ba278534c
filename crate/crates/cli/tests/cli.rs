use std::fs;
use std::process::Command;

fn banditpd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_banditpd"))
}

#[test]
fn small_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = banditpd()
        .args([
            "--preset",
            "desk-convex-c05",
            "--horizon",
            "200",
            "--seed-list",
            "1,2",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in ["seed-1.csv", "seed-2.csv", "mean.csv", "report.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("mean net CCV"), "{stdout}");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "preset = \"desk-strongly-convex-t4\"\nhorizon = 50\nseeds = [9]\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = banditpd()
        .arg("--config")
        .arg(&cfg)
        .args([
            "--no-regret",
            "--variant",
            "clipped-primal",
            "--check-invariants",
            "off",
            "--out",
        ])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: String = fs::read_to_string(out_dir.join("report.json")).unwrap();
    assert!(report.contains("\"variant\": \"clipped-primal\""));
    assert!(report.contains("\"regret\": false"));
    assert!(report.contains("\"horizon\": 50"));
    assert!(out_dir.join("seed-9.csv").exists());
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "preset = \"desk-convex-c05\"\n[schedule]\nc = 1.5\n").unwrap();
    let out = banditpd().arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schedule"));

    let out = banditpd().args(["--preset", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = banditpd()
        .args(["--preset", "paper-sec4", "--horizon", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = banditpd()
        .arg("--config")
        .arg(dir.path().join("missing.toml"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_cleanly() {
    let out = banditpd().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("--seed-list"));
}
