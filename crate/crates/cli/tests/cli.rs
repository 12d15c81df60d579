//! End-to-end tests driving the `flowmatch` binary.

use std::path::Path;
use std::process::{Command, Output};

fn flowmatch(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowmatch"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).to_string()
}

#[test]
fn gen_solve_settle_export_happy_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = flowmatch(
        &[
            "gen", "--case", "case9", "--seed", "0", "--alpha", "100", "--out", "inst.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("inst.json").exists());

    let out = flowmatch(
        &[
            "solve",
            "--in",
            "inst.json",
            "--solver",
            "exact",
            "--out",
            "result.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let result: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("result.json")).unwrap())
            .unwrap();
    assert_eq!(result["proven_optimal"], serde_json::Value::Bool(true));
    assert_eq!(result["best"]["x"].as_str().unwrap().len(), 20);
    assert!(result["best"]["cost_ct"].as_f64().unwrap() >= 0.0);

    let out = flowmatch(
        &[
            "settle",
            "--in",
            "inst.json",
            "--assignment",
            "result.json",
            "--out",
            "settlement.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let settlement: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("settlement.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(settlement["peers"].as_array().unwrap().len(), 9);
    let csv = std::fs::read_to_string(dir.path().join("settlement.csv")).unwrap();
    assert!(csv.starts_with("peer,role,"));
    assert_eq!(csv.lines().count(), 10);

    let out = flowmatch(
        &["export", "qubo", "--in", "inst.json", "--out", "model.qubo"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let qubo = std::fs::read_to_string(dir.path().join("model.qubo")).unwrap();
    assert!(qubo.starts_with("qubo 20 "));
    assert!(qubo.lines().nth(1).unwrap().starts_with("offset "));

    let out = flowmatch(
        &["export", "ising", "--in", "inst.json", "--out", "model.ising"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let ising = std::fs::read_to_string(dir.path().join("model.ising")).unwrap();
    assert!(ising.starts_with("ising 20 "));
}

#[test]
fn unknown_case_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = flowmatch(
        &["gen", "--case", "case99", "--out", "x.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error[usage]:"), "{}", stderr(&out));
}

#[test]
fn corrupt_instance_is_a_data_error_with_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("broken.json"), "{\n  \"grid\": [,\n").unwrap();
    let out = flowmatch(
        &[
            "solve",
            "--in",
            "broken.json",
            "--solver",
            "sa",
            "--out",
            "r.json",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let message = stderr(&out);
    assert!(message.starts_with("error[data]:"), "{message}");
    assert!(message.contains("broken.json:2"), "{message}");
}

#[test]
fn deterministic_solves_are_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let out = flowmatch(
        &["gen", "--case", "case9", "--seed", "3", "--out", "inst.json"],
        dir.path(),
    );
    assert!(out.status.success());
    for name in ["a.json", "b.json"] {
        let out = flowmatch(
            &[
                "solve",
                "--in",
                "inst.json",
                "--solver",
                "sa",
                "--sweeps",
                "50",
                "--reads",
                "5",
                "--seed",
                "7",
                "--deterministic",
                "--out",
                name,
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let parse = |name: &str| -> Vec<(String, f64)> {
        let value: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(name)).unwrap())
                .unwrap();
        value["samples"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| {
                (
                    s["x"].as_str().unwrap().to_string(),
                    s["cost_ct"].as_f64().unwrap(),
                )
            })
            .collect()
    };
    assert_eq!(parse("a.json"), parse("b.json"));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("flowmatch.toml"), "alpha = 7.5\n").unwrap();
    let out = flowmatch(
        &["gen", "--case", "case9", "--out", "from_config.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("from_config.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["alpha_ct_per_kwh2"].as_f64().unwrap(), 7.5);

    let out = flowmatch(
        &[
            "gen", "--case", "case9", "--alpha", "42", "--out", "from_flag.json",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("from_flag.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["alpha_ct_per_kwh2"].as_f64().unwrap(), 42.0);
}

#[test]
fn bench_timeout_writes_records_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = flowmatch(
        &[
            "bench",
            "timeout",
            "--cases",
            "case9",
            "--solvers",
            "sa,exact",
            "--seeds",
            "0..2",
            "--deterministic",
            "--det-reads",
            "3",
            "--out",
            "runs",
            "--plot",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let runs = dir.path().join("runs");
    assert!(runs.join("summary.csv").exists());
    assert!(runs.join("aggregates.csv").exists());
    assert!(runs.join("timeout_epsilon.svg").exists());
    let record_count = std::fs::read_dir(&runs)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| {
            e.file_name()
                .to_string_lossy()
                .starts_with("case9-s")
        })
        .count();
    assert_eq!(record_count, 6); // 3 seeds x 2 solvers

    let summary = std::fs::read_to_string(runs.join("summary.csv")).unwrap();
    assert!(summary.starts_with("case,solver,seed,metric,value\n"));
    assert_eq!(summary.lines().count(), 7);

    // Re-running deterministically reproduces the summary byte for byte.
    let out = flowmatch(
        &[
            "bench",
            "timeout",
            "--cases",
            "case9",
            "--solvers",
            "sa,exact",
            "--seeds",
            "0..2",
            "--deterministic",
            "--det-reads",
            "3",
            "--out",
            "runs2",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let summary2 = std::fs::read_to_string(dir.path().join("runs2/summary.csv")).unwrap();
    assert_eq!(summary, summary2);

    // The report subcommand re-derives identical aggregates from records.
    let out = flowmatch(
        &[
            "report",
            "--in",
            "runs",
            "--out-dir",
            "reports",
            "--format",
            "csv,json,svg",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let direct = std::fs::read_to_string(runs.join("aggregates.csv")).unwrap();
    let reported =
        std::fs::read_to_string(dir.path().join("reports/aggregates.csv")).unwrap();
    assert_eq!(direct, reported);
    let svg = std::fs::read_to_string(dir.path().join("reports/timeout_epsilon.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
}

#[test]
fn report_on_empty_directory_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("empty")).unwrap();
    let out = flowmatch(
        &["report", "--in", "empty", "--out-dir", "reports"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error[data]:"));
}

#[test]
fn sweep_rho_emits_table_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = flowmatch(
        &[
            "sweep",
            "rho",
            "--case",
            "case9",
            "--alphas",
            "100",
            "--rho",
            "0,20",
            "--seeds",
            "0..0",
            "--budget",
            "30",
            "--target-fraction",
            "0.8",
            "--out",
            "sweep",
            "--plot",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("sweep/rho_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3); // header + 2 grid points
    assert!(dir.path().join("sweep/rho_fees.svg").exists());
    assert!(dir.path().join("sweep/rho_tariffs.svg").exists());
    // p2p fees at rho = 0 are zero.
    let first = csv.lines().nth(1).unwrap();
    let fields: Vec<&str> = first.split(',').collect();
    assert_eq!(fields[2], "0");
    assert_eq!(fields[4], "0");
}

#[test]
fn sweep_sa_emits_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = flowmatch(
        &[
            "sweep",
            "sa",
            "--case",
            "case9",
            "--seeds",
            "0..1",
            "--sweeps",
            "30,100",
            "--schedules",
            "0.2:1000",
            "--deterministic",
            "--det-draws",
            "40",
            "--out",
            "sasweep",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("sasweep/sa_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4); // header + 2 sweep rows + 1 schedule row
}
