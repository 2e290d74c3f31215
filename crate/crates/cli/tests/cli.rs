use std::path::Path;
use std::process::Command;

fn flexmarl(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_flexmarl"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("config.toml");
    std::fs::write(
        &path,
        "agents = [5]\nstrategies = [\"TE\"]\nfinal_epochs = 2\n\n[learning]\nepochs = 3\nrepetitions = 2\n",
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn identical_invocations_write_identical_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = flexmarl(&[
            "run",
            "--config",
            &cfg,
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
            "--strategies",
            "TE,MO",
            "--agents",
            "1,2",
            "--workers",
            "1",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        files.push(std::fs::read(out.join("results.csv")).unwrap());
        assert!(out.join("aggregates.csv").exists());
        assert!(out.join("policies/TE_n2_r1_table0.csv").exists());
        assert!(out.join("schedules").is_dir());
    }
    assert_eq!(files[0], files[1]);
    let text = String::from_utf8(files[0].clone()).unwrap();
    // 2 strategies, 2 agent counts, 2 repetitions, 3 epochs
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2 * 3);
    assert!(text.lines().skip(1).all(|l| l.starts_with("TE,") || l.starts_with("MO,")));
}

#[test]
fn validate_config_prints_defaults_and_rejects_typos() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let o = flexmarl(&["validate-config", "--config", &cfg]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("qp_backend = \"clarabel\""));
    assert!(text.contains("[battery]"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[learning]\ngama = 0.9\n").unwrap();
    let o = flexmarl(&["validate-config", "--config", bad.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn dump_schedule_writes_one_row_per_household_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let o = flexmarl(&["dump-schedule", "--config", &cfg, "--agents", "2", "--day", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 24);
    assert!(text.starts_with("agent,step,energy"));
    let o = flexmarl(&["dump-schedule", "--config", &cfg, "--day", "3"]);
    assert!(!o.status.success());
}
