mod common;

use std::fs;
use std::path::Path;

use cbf_trigger::cli::commands::{EXIT_CONFIG, EXIT_CONTROLLER_FAILURE, EXIT_OK, EXIT_VIOLATION};
use cbf_trigger::cli::config::{self, SimMode};
use cbf_trigger::cli::main_with_args;
use cbf_trigger::cli::output::{read_trace_csv, trace_rows, write_trace_csv};
use common::*;

fn cli(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("cbf-trigger").chain(args.iter().copied()))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_csv(p: &Path) -> Vec<Vec<String>> {
    csv::Reader::from_path(p)
        .unwrap()
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn run_writes_files_and_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_eq!(cli(&["run", "--out", path(&out)]), EXIT_OK);
    for f in ["trace.csv", "updates.csv", "summary.txt", "x1.svg", "x2.svg", "u.svg", "interval.svg"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let header = fs::read_to_string(out.join("trace.csv")).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "t,x1,x2,u,h1,h2,h3,h4,V,is_update,tau_cbf,tau_clf,tau,limiting");
    let updates = read_csv(&out.join("updates.csv"));
    assert_eq!(updates.len(), reference_run().updates.len());
}

#[test]
fn trace_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let trace = reference_run();
    let file = dir.path().join("trace.csv");
    write_trace_csv(&file, &trace).unwrap();
    assert_eq!(read_trace_csv(&file).unwrap(), trace_rows(&trace));
}

#[test]
fn periodic_violation_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("per");
    let code = cli(&["run", "--set", "sim.mode=\"periodic\"", "--set", "sim.t_p=0.75", "--out", path(&out)]);
    assert_eq!(code, EXIT_VIOLATION);
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("violated        true"));
    assert!(summary.contains("INFEASIBLE_QP"));
    let rows = read_csv(&out.join("trace.csv"));
    assert!(rows.iter().filter(|r| r[9] == "1").all(|r| r[13] == "PERIODIC" && r[12] == "0.75"));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    assert_eq!(cli(&["run", "--set", "plant.epsilon=-1", "--out", path(&out)]), EXIT_CONFIG);
    assert!(!out.exists());

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[plant]\nepsilon = 0.8\nno_such_key = 1\n").unwrap();
    assert_eq!(cli(&["run", "--config", path(&cfg), "--out", path(&out)]), EXIT_CONFIG);
    assert_eq!(cli(&["run", "--config", path(&dir.path().join("missing.toml"))]), EXIT_CONFIG);
    assert_eq!(cli(&["compare", "--t-p=", "--out", path(&out)]), EXIT_CONFIG);
    assert_eq!(cli(&["compare", "--t-p", "-1", "--out", path(&out)]), EXIT_CONFIG);
    assert_eq!(cli(&["no-such-command"]), EXIT_CONFIG);
    assert_eq!(cli(&["--help"]), EXIT_OK);
}

#[test]
fn validation_messages_name_the_key_and_its_origin() {
    let check = |text: &str, overrides: &[&str]| {
        let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        config::parse(text, "cfg.toml", &overrides).and_then(|l| l.validate())
    };
    let err = check("[plant]\n", &["plant.epsilon=-1"]).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("plant.epsilon") && msg.contains("--set"), "{msg}");

    let err = check("[plant]\nepsilon = -2.0\n", &[]).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("cfg.toml:2"), "{msg}");

    let err = check("[sim]\nmode = \"sometimes\"\n", &[]).unwrap_err();
    assert!(err.to_string().contains("cfg.toml"));
}

#[test]
fn compare_writes_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    assert_eq!(cli(&["compare", "--t-p", "0.75", "--out", path(&out)]), EXIT_OK);
    let rows = read_csv(&out.join("comparison.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "self_triggered");
    assert_eq!(rows[0][4], "false");
    assert_eq!((rows[1][0].as_str(), rows[1][1].as_str()), ("periodic", "0.75"));
    assert_eq!(rows[1][4], "true");
    assert!(out.join("self_triggered/trace.csv").is_file());
    assert!(out.join("periodic_0.75/trace.csv").is_file());
}

#[test]
fn summary_is_a_config_that_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    assert_eq!(cli(&["run", "--set", "sim.t_end=3.0", "--seed", "9", "--out", path(&first)]), EXIT_OK);
    let summary = first.join("summary.txt");
    let loaded = config::load(Some(&summary), &[]).unwrap();
    assert_eq!(loaded.config.sim.t_end, 3.0);
    assert_eq!(loaded.config.output.seed, 9);
    assert_eq!(loaded.config.sim.mode, SimMode::SelfTriggered);

    let second = dir.path().join("second");
    assert_eq!(cli(&["run", "--config", path(&summary), "--out", path(&second)]), EXIT_OK);
    assert_eq!(
        fs::read(first.join("trace.csv")).unwrap(),
        fs::read(second.join("trace.csv")).unwrap()
    );
    assert_eq!(
        fs::read(first.join("updates.csv")).unwrap(),
        fs::read(second.join("updates.csv")).unwrap()
    );
}

#[test]
fn narrow_input_bounds_are_a_controller_failure() {
    // |u| ≤ 0.1 cannot brake from x2 = −9.9 before the position limit
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("neg");
    let code = cli(&[
        "run",
        "--set",
        "plant.x0=[0.0, -9.9]",
        "--set",
        "plant.u_min=-0.1",
        "--set",
        "plant.u_max=0.1",
        "--out",
        path(&out),
    ]);
    assert_eq!(code, EXIT_CONTROLLER_FAILURE);
}

#[test]
fn estimate_lipschitz_reports_the_declared_constant() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lip");
    assert_eq!(cli(&["estimate-lipschitz", "--out", path(&out)]), EXIT_OK);
    let text = fs::read_to_string(out.join("lipschitz.txt")).unwrap();
    assert!(text.contains("declared"), "{text}");
}
