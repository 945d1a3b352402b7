use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_star-rsma"));
    c.env("STAR_RSMA_WORKERS", "1");
    c
}

#[test]
fn validate_stats_exit_codes() {
    let ok = bin().args(["validate-stats", "--samples", "100000", "--instances", "1"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let bad = bin()
        .args(["validate-stats", "--samples", "100000", "--instances", "1", "--tamper-off-diagonal", "0.5"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL cross_moment"));
    let single = bin().args(["validate-stats", "--samples", "100000", "--instances", "1", "--set", "N=1"]).output().unwrap();
    assert_eq!(single.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&single.stdout).contains("SKIP cross_moment"));
}

#[test]
fn invalid_scenario_is_rejected() {
    let out = bin().args(["run", "--set", "k0=4"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k0 < K"));
}

#[test]
fn dump_channels_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ch.bin");
    let out = bin().args(["dump-channels", "--set", "seed=5", "--out"]).arg(&path).output().unwrap();
    assert!(out.status.success());
    let ch = star_rsma::channel::read_channels(std::fs::File::open(&path).unwrap()).unwrap();
    let cfg = star_rsma::scenario::ScenarioConfig { seed: 5, ..Default::default() };
    let (_, want) = star_rsma::channel::draw_channels(&cfg).unwrap();
    assert_eq!(ch.h, want.h);
    assert_eq!(ch.bs_ris, want.bs_ris);
}

#[test]
fn run_and_small_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let small = ["--set", "M=2", "--set", "N=2", "--set", "K=2", "--set", "k0=1"];
    let out = bin().arg("run").args(small).arg("--trace").arg(&trace).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("sum_rate_bps_hz"));
    assert!(std::fs::read_to_string(&trace).unwrap().starts_with("iteration,"));

    let csv = dir.path().join("s.csv");
    let svg = dir.path().join("s.svg");
    let out = bin()
        .args(["sweep", "--axis", "power", "--values", "1,5", "--schemes", "rsma_star_robust,rsma_ris_robust", "--draws", "1"])
        .args(small)
        .arg("--csv")
        .arg(&csv)
        .arg("--svg")
        .arg(&svg)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 5);
    assert!(std::fs::read_to_string(&svg).unwrap().contains("rsma_ris_robust"));
}
