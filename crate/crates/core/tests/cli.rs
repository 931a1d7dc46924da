use std::path::Path;
use std::process::{Command, Output};

fn bench(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_judge-bench"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn generate_validate_judge_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let out = bench(d, &["generate", "--seed", "2024", "--out", "d.jsonl"]);
    assert!(out.status.success(), "{out:?}");
    assert_eq!(std::fs::read_to_string(d.join("d.jsonl")).unwrap().lines().count(), 600);

    let out = bench(d, &["validate", "--dataset", "d.jsonl"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("0 label disagreements"));

    let out = bench(d, &["judge", "--dataset", "d.jsonl", "--provider", "oracle-mock", "--run-id", "r", "--strategy", "cot3"]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(stdout(&out).contains("600/600"));

    let out = bench(d, &["report", "--run", "runs/r", "--by-category"]);
    let csv = stdout(&out);
    assert_eq!(csv.lines().next().unwrap(), "strategy,models,positive,location,time,cuisine,cost,rating");
    assert_eq!(csv.lines().nth(1).unwrap(), "cot3,oracle-mock,1.000,1.000,1.000,1.000,1.000,1.000");

    let out = bench(d, &["report", "--records", "runs/r/records.jsonl", "--json"]);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["groups"][0]["metrics"]["f1"], 1.0);
}

#[test]
fn same_seed_same_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(bench(d, &["generate", "--out", "a.jsonl"]).status.success());
    assert!(bench(d, &["generate", "--out", "b.jsonl", "--seed", "2024"]).status.success());
    assert_eq!(std::fs::read(d.join("a.jsonl")).unwrap(), std::fs::read(d.join("b.jsonl")).unwrap());
}

#[test]
fn validation_failure_exits_2_and_exports_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(bench(d, &["generate", "--out", "d.jsonl"]).status.success());
    let text = std::fs::read_to_string(d.join("d.jsonl")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // relabel the cost-error pair of the first user as a cuisine error
    assert!(lines[4].contains(r#""pair_id":"u000-cost""#));
    lines[4] = lines[4].replace(r#""error":"cost""#, r#""error":"cuisine""#);
    std::fs::write(d.join("d.jsonl"), lines.join("\n") + "\n").unwrap();

    let out = bench(d, &["validate", "--dataset", "d.jsonl", "--flagged", "flagged.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("u000-cost: labelled cuisine, oracle found [cost]"), "{}", stdout(&out));
    let flagged = std::fs::read_to_string(d.join("flagged.jsonl")).unwrap();
    assert_eq!(flagged.lines().count(), 1);

    let out = bench(d, &["judge", "--dataset", "d.jsonl", "--provider", "oracle-mock"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(bench(d, &["generate", "--out", "d.jsonl"]).status.success());
    let config = serde_json::json!({
        "dataset": "d.jsonl",
        "strategy": "ar-cot5",
        "providers": [
            {"kind": "oracle_mock", "model_id": "a"},
            {"kind": "oracle_mock", "model_id": "b"},
            {"kind": "oracle_mock", "model_id": "c"}
        ],
        "concurrency": 4,
        "run_id": "from-file"
    });
    std::fs::write(d.join("run.json"), config.to_string()).unwrap();

    let out = bench(d, &["judge", "--config", "run.json", "--run-id", "from-flag", "--max-pairs", "60", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let summary: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["run_id"], "from-flag");
    assert_eq!(summary["strategy"], "ar-cot5");
    assert_eq!(summary["records"], 60);
    assert!(d.join("runs/from-flag/manifest.json").is_file());

    // resuming picks up the remaining pairs
    let out = bench(d, &["judge", "--config", "run.json", "--run-id", "from-flag", "--resume", "--json"]);
    let summary: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["judged_now"], 540);
    assert_eq!(summary["complete"], true);
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = bench(d, &["judge", "--dataset", "missing.jsonl", "--provider", "oracle-mock"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));
    let out = bench(d, &["judge", "--strategy", "cot4"]);
    assert!(!out.status.success());
    let out = bench(d, &["report"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unreachable_provider_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(bench(d, &["generate", "--out", "d.jsonl"]).status.success());
    let provider = serde_json::json!({
        "kind": "http",
        "endpoint": "http://127.0.0.1:9/v1/chat/completions",
        "model_id": "gpt-4-turbo",
        "api_key_env": "JUDGE_BENCH_TEST_KEY_UNSET",
        "timeout_s": 2.0
    })
    .to_string();
    let config = serde_json::json!({"retry": {"max_attempts": 1}}).to_string();
    std::fs::write(d.join("run.json"), config).unwrap();
    let out = bench(
        d,
        &["judge", "--config", "run.json", "--dataset", "d.jsonl", "--provider", &provider, "--max-pairs", "3", "--run-id", "x"],
    );
    assert_eq!(out.status.code(), Some(3), "{out:?}");
}
