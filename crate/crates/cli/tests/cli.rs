use std::path::Path;
use std::process::{Command, Output};

fn teflow(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_teflow"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const SMALL_SYNTH: &str = r#"
seed = 11
output_dir = "out"
n_surrogates = 100
n_boot = 100
lag_grid = [1, 3]
rolling_window = 150
rolling_step = 150
fm_min_stocks = 5

[synthetic]
n_stocks = 8
n_periods = 300
seed = 2
planted_edges = [{ source = 0, target = 4, coupling = 0.9 }]
"#;

const HEADER: &str = "date,ticker,investor_type,net_buy_volume,close,market_cap,trading_volume,s_mc,s_tv\n";

#[test]
fn missing_input_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = teflow(&[], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("configuration error"));
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "input = \"p.csv\"\nnot_a_key = 1\n").unwrap();
    assert_eq!(code(&teflow(&["-c", "c.toml"], dir.path())), 2);
}

#[test]
fn invalid_alpha_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "input = \"p.csv\"\nalpha_grid = [0.05, 1.5]\n").unwrap();
    assert_eq!(code(&teflow(&["-c", "c.toml"], dir.path())), 2);
}

#[test]
fn missing_column_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.csv"), "date,ticker\n2024-01-02,AAA\n").unwrap();
    let o = teflow(&["--input", "p.csv", "--out", "out", "ingest"], dir.path());
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn malformed_row_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{HEADER}2024-01-02,AAA,foreign,10,not-a-price,1000,50,0.1,0.2\n");
    std::fs::write(dir.path().join("p.csv"), body).unwrap();
    let o = teflow(&["--input", "p.csv", "--out", "out"], dir.path());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let marker = std::fs::read_to_string(dir.path().join("out/FAILED")).unwrap();
    assert!(marker.starts_with("ingest: "));
}

#[test]
fn stage_without_upstream_is_a_stage_failure() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), SMALL_SYNTH).unwrap();
    let o = teflow(&["-c", "c.toml", "bounds"], dir.path());
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing upstream"));
    assert!(dir.path().join("out/FAILED").is_file());
    assert!(dir.path().join("out/manifest.json").is_file());
}

#[test]
fn conflicting_stage_selection_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), SMALL_SYNTH).unwrap();
    assert_eq!(code(&teflow(&["-c", "c.toml", "--stage", "report", "bounds"], dir.path())), 2);
}

#[test]
fn print_config_echoes_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), SMALL_SYNTH).unwrap();
    let o = teflow(&["-c", "c.toml", "--seed", "99", "--print-config"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("seed = 99"));
}

#[test]
fn synthetic_run_then_single_stage_rerun() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), SMALL_SYNTH).unwrap();
    let o = teflow(&["-c", "c.toml", "-j", "2"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    for f in [
        "manifest.json",
        "config.toml",
        "networks/foreign/edges.csv",
        "networks/network_stats.csv",
        "higher_order/ii_summary.csv",
        "higher_order/directionality.json",
        "bounds/bounds.csv",
        "cross_section/fama_macbeth.csv",
        "robustness/threshold.csv",
        "figures/fig9_robustness.csv",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let before = std::fs::read(out.join("figures/fig7_lag_profile.csv")).unwrap();
    std::fs::remove_dir_all(out.join("figures")).unwrap();
    let o = teflow(&["-c", "c.toml", "report"], dir.path());
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(out.join("figures/fig7_lag_profile.csv")).unwrap(), before);

    let lag = String::from_utf8(before).unwrap();
    assert_eq!(lag.lines().count(), 1 + 3 * 2, "one row per investor and lag");
}
