use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cogmac(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cogmac"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

const SMALL_DP: [&str; 8] = [
    "--set",
    "dp_levels=2",
    "--set",
    "dp_battery_levels=3",
    "--set",
    "dp_power_levels=3",
    "--set",
    "dp_tau_levels=3",
];

#[test]
fn emitted_config_reloads_to_the_same_text() {
    let dir = tempfile::tempdir().unwrap();
    let first = cogmac(dir.path(), &["emit-default-config", "--seed", "9", "--set", "M=4"]);
    assert_eq!(code(&first), 0);
    fs::write(dir.path().join("run.cfg"), &first.stdout).unwrap();
    let second = cogmac(dir.path(), &["emit-default-config", "--config", "run.cfg"]);
    assert_eq!(code(&second), 0);
    assert_eq!(first.stdout, second.stdout);
    let text = String::from_utf8(first.stdout).unwrap();
    assert!(text.contains("seed = 9") && text.contains("M = 4"));
}

#[test]
fn sweep_csv_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "sweep",
        "--trials",
        "4",
        "--seed",
        "11",
        "--mode",
        "noncausal-exhaustive,noncausal-heuristic,causal-dp-heuristic",
        "--set",
        "sweep=M",
        "--set",
        "sweep_values=1,2",
    ];
    args.extend_from_slice(&SMALL_DP);
    let mut with_out = args.clone();
    with_out.extend_from_slice(&["--out", "a.csv", "--trials-out", "a_trials.csv"]);
    assert_eq!(code(&cogmac(dir.path(), &with_out)), 0);
    let again = cogmac(dir.path(), &args);
    assert_eq!(code(&again), 0);

    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, again.stdout);
    let text = String::from_utf8(a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "#cogmac-csv v1 seed=11 trials=4 rng=chacha8-v1");
    assert!(lines[1].starts_with("sweep_var,sweep_value,mode,M,"));
    assert_eq!(lines.len(), 2 + 2 * 3);
    assert!(lines[2..].iter().all(|l| l.starts_with("M,")));

    let trials = fs::read_to_string(dir.path().join("a_trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 1 + 2 * 3 * 4);
}

#[test]
fn trained_table_can_be_simulated() {
    let dir = tempfile::tempdir().unwrap();
    let mut train = vec!["train-dp", "--mode", "causal-dp-exhaustive", "--lambda", "0.3", "--table-out", "p.tbl"];
    train.extend_from_slice(&SMALL_DP);
    assert_eq!(code(&cogmac(dir.path(), &train)), 0);
    let table = fs::read_to_string(dir.path().join("p.tbl")).unwrap();
    assert!(table.starts_with("cogmac-dp v1"));

    let sim = cogmac(dir.path(), &["simulate", "--table", "p.tbl", "--trials", "10"]);
    assert_eq!(code(&sim), 0, "{}", String::from_utf8_lossy(&sim.stderr));
    let csv = String::from_utf8(sim.stdout).unwrap();
    let row: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(row[2], "causal-dp-exhaustive");
    assert_eq!(row[4], "10");
    assert_eq!(row[13].parse::<f64>().unwrap(), 0.3);

    let mismatch = cogmac(dir.path(), &["simulate", "--table", "p.tbl", "--set", "M=3"]);
    assert_eq!(code(&mismatch), 2);
}

#[test]
fn bisection_training_reports_the_multiplier() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["train-dp", "--bisect-eps", "1e-3", "--set", "Q=0.02", "--out", "b.tbl"];
    args.extend_from_slice(&SMALL_DP);
    let out = cogmac(dir.path(), &args);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda = "));
    assert!(dir.path().join("b.tbl").exists());
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "N = 2\nthis line is wrong\n").unwrap();
    let cases: [&[&str]; 6] = [
        &["sweep", "--config", "bad.cfg"],
        &["sweep", "--config", "missing.cfg"],
        &["sweep", "--mode", "fastest"],
        &["solve-noncausal", "--mode", "causal-dp-heuristic"],
        &["train-dp", "--lambda", "1", "--bisect-eps", "0.1"],
        &["simulate", "--table", "missing.tbl"],
    ];
    for args in cases {
        let out = cogmac(dir.path(), args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = cogmac(dir.path(), &["sweep", "--config", "bad.cfg"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}
