//! Smoke tests for the command-line interface.

use std::process::Command;

fn malleon() -> Command {
    Command::new(env!("CARGO_BIN_EXE_malleon"))
}

#[test]
fn gen_writes_workload_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("esp.json");
    let status = malleon()
        .args(["gen", "esp", "--seed", "3", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("\"system_nodes\": 32"));
}

#[test]
fn run_produces_trace_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("power.toml");
    std::fs::write(&scenario, "workload = \"power\"\nstrategy = \"power-aware\"\n").unwrap();
    let status = malleon().arg("run").arg(&scenario).status().unwrap();
    assert!(status.success());
    for suffix in ["trace.jsonl", "report.json", "report.txt", "power.csv"] {
        let path = dir.path().join(format!("power-aware.{suffix}"));
        assert!(path.exists(), "missing {suffix}");
    }
    let csv = std::fs::read_to_string(dir.path().join("power-aware.power.csv")).unwrap();
    assert!(csv.starts_with("time,watts,lower,upper\n"));
}

#[test]
fn unknown_scenario_key_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("bad.toml");
    std::fs::write(
        &scenario,
        "workload = \"power\"\nstrategy = \"power-aware\"\nbogus_key = 1\n",
    )
    .unwrap();
    let status = malleon().arg("run").arg(&scenario).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn unschedulable_job_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    // take the 32-node esp workload and shrink the cluster underneath it
    let workload = dir.path().join("esp.json");
    let status = malleon()
        .args(["gen", "esp", "--out"])
        .arg(&workload)
        .status()
        .unwrap();
    assert!(status.success());
    let shrunk = std::fs::read_to_string(&workload)
        .unwrap()
        .replace("\"system_nodes\": 32", "\"system_nodes\": 16");
    std::fs::write(&workload, shrunk).unwrap();
    let scenario = dir.path().join("tiny.toml");
    std::fs::write(
        &scenario,
        "workload = \"esp.json\"\nstrategy = \"backfill\"\n",
    )
    .unwrap();
    let status = malleon().arg("run").arg(&scenario).status().unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn compare_rejects_reports_from_different_workloads() {
    let dir = tempfile::tempdir().unwrap();
    let esp = dir.path().join("esp.toml");
    let power = dir.path().join("power.toml");
    std::fs::write(&esp, "workload = \"esp\"\nstrategy = \"backfill\"\n").unwrap();
    std::fs::write(&power, "workload = \"power\"\nstrategy = \"backfill\"\n").unwrap();
    let esp_dir = dir.path().join("esp_out");
    let power_dir = dir.path().join("power_out");
    for (scenario, out) in [(&esp, &esp_dir), (&power, &power_dir)] {
        let status = malleon()
            .arg("run")
            .arg(scenario)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let status = malleon()
        .arg("compare")
        .arg(esp_dir.join("backfill.report.json"))
        .arg(power_dir.join("backfill.report.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));

    let ok = malleon()
        .arg("compare")
        .arg(esp_dir.join("backfill.report.json"))
        .arg(esp_dir.join("backfill.report.json"))
        .output()
        .unwrap();
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("backfill"));
}
