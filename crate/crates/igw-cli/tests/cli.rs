use std::process::Command;

fn igw(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_igw")).args(args).output().expect("binary runs")
}

#[test]
fn sample_is_reproducible() {
    let a = igw(&["sample", "--dist", "igw:0.6", "--lambda", "1", "--count", "5", "--seed", "7"]);
    let b = igw(&["sample", "--dist", "igw:0.6", "--lambda", "1", "--count", "5", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(String::from_utf8_lossy(&a.stdout).lines().count(), 5);
}

#[test]
fn config_run_writes_outputs() {
    let dir = std::path::PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli_gf");
    let config = dir.with_extension("toml");
    std::fs::create_dir_all(dir.parent().unwrap()).unwrap();
    std::fs::write(&config, "name = \"gf\"\ndist = \"zipf:1.5\"\np_grid = [0.1, 0.001]\n").unwrap();
    let out = igw(&["attractor", "gf", "--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["gf.json", "gf_checks.csv", "gf_pushforward.csv", "gf_pushforward.dat"] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    let summary = igw(&["report", dir.to_str().unwrap()]);
    assert!(summary.status.success());
    assert!(String::from_utf8_lossy(&summary.stdout).contains("PASS gf: g0_limit"));
}

#[test]
fn failing_verdict_sets_exit_code() {
    let dir = std::path::PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli_fail");
    let out = igw(&[
        "attractor", "gf", "--dist", "zipf:1.5", "--p-grid", "0.5", "--tolerance", "0.001", "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_input_is_an_error() {
    let out = igw(&["dist", "--dist", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}
