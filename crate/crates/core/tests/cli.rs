use std::path::Path;
use std::process::{Command, Output};

fn herald(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_herald")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const PROBE2: &str = "seed = 11\n[experiment]\nkind = \"probe2\"\nn_shots = 300\nchain_length = 7\n";

#[test]
fn simulate_output_is_worker_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.toml", PROBE2);
    let runs: Vec<Vec<u8>> = ["1", "4", "16", "1"]
        .iter()
        .map(|w| {
            let o = herald(&["simulate", "probe2", "--config", &cfg, "--workers", w]);
            assert!(o.status.success());
            o.stdout
        })
        .collect();
    assert!(runs.windows(2).all(|w| w[0] == w[1]));
    let text = String::from_utf8(runs[0].clone()).unwrap();
    assert!(text.starts_with("# herald-record\n# schema_version: 1\n# kind: probe2\n# seed: 11\n"));
    assert!(text.contains("# rows: 300\n"));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.toml", PROBE2);
    let a = herald(&["simulate", "probe2", "--config", &cfg]).stdout;
    let b = herald(&["simulate", "probe2", "--config", &cfg, "--seed", "12"]).stdout;
    assert_ne!(a, b);
    assert!(String::from_utf8(b).unwrap().contains("# seed: 12\n"));
}

#[test]
fn record_round_trips_through_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.toml", PROBE2);
    let rec = dir.path().join("r.csv");
    let o = herald(&["simulate", "probe2", "--config", &cfg, "--out", rec.to_str().unwrap()]);
    assert!(o.status.success() && o.stdout.is_empty());
    let o = herald(&["analyze", "stats", rec.to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("# kind: stats:probe2"));
    assert!(text.contains("p_first_ge_100"));
}

#[test]
fn corrupted_record_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.toml", PROBE2);
    let rec = dir.path().join("r.csv");
    herald(&["simulate", "probe2", "--config", &cfg, "--out", rec.to_str().unwrap()]);
    let text = std::fs::read_to_string(&rec).unwrap();
    let truncated: String = text.lines().take(text.lines().count() - 3).map(|l| format!("{l}\n")).collect();
    std::fs::write(&rec, truncated).unwrap();
    let out = dir.path().join("summary.csv");
    let o = herald(&["analyze", "stats", rec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rows"));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "[experiment]\nkind = \"g2\"\ndrive_powr = 3\n");
    let o = herald(&["simulate", "g2", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("drive_powr"));
    assert!(o.stdout.is_empty());

    let o = herald(&["simulate", "probe2", "--c-pass", "5", "--c-repump", "10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("c_repump"));

    let cfg = write_config(dir.path(), "kind.toml", PROBE2);
    let o = herald(&["simulate", "g2", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(herald(&["simulate", "nonsense"]).status.code(), Some(2));
    assert_eq!(herald(&["report", "figure", "9z"]).status.code(), Some(2));
    assert_eq!(herald(&[]).status.code(), Some(2));
}

#[test]
fn fit_of_pair_record_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.toml", PROBE2);
    let rec = dir.path().join("r.csv");
    herald(&["simulate", "probe2", "--config", &cfg, "--out", rec.to_str().unwrap()]);
    let o = herald(&["analyze", "fit", rec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_leaves_nothing_behind() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("missing").join("r.csv");
    let o = herald(&["simulate", "probe2", "--out", target.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!target.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}
