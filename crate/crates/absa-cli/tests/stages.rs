//! Stage-level behavior of the CLI binary: exit codes, resume semantics,
//! and graceful degradation.

use std::path::Path;
use std::process::Output;

fn absa(dir: &Path, args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_absa"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_reviews(path: &Path, count: usize) {
    use std::io::Write;
    let mut file = std::fs::File::create(path).unwrap();
    for i in 0..count {
        let line = serde_json::json!({
            "review_id": format!("r{i:04}"),
            "user_id": format!("u{i:04}"),
            "business_id": format!("b{:02}", i % 5),
            "stars": i % 5 + 1,
            "text": format!("Review number {i} with a few words about the dishes."),
            "date": format!("2022-{:02}-{:02}", i % 12 + 1, i % 28 + 1),
        });
        writeln!(file, "{line}").unwrap();
    }
}

fn write_config(dir: &Path, n: usize, extra_backend: serde_json::Value) -> std::path::PathBuf {
    let config = serde_json::json!({
        "backend": extra_backend,
        "corpus": {"reviews_file": dir.join("reviews.jsonl")},
        "sample": {"n": n, "seed": 5},
        "output_dir": dir.join("out"),
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

fn mock_backend() -> serde_json::Value {
    serde_json::json!({"kind": "mock"})
}

#[test]
fn missing_config_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = absa(dir.path(), &["ingest"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--config"));
}

#[test]
fn oversampling_exits_with_insufficient_users_message() {
    let dir = tempfile::tempdir().unwrap();
    write_reviews(&dir.path().join("reviews.jsonl"), 3);
    let config = write_config(dir.path(), 10, mock_backend());
    let out = absa(
        dir.path(),
        &["--config", config.to_str().unwrap(), "ingest"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("requested 10 users"));
}

#[test]
fn ingest_rerun_with_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write_reviews(&dir.path().join("reviews.jsonl"), 20);
    let config = write_config(dir.path(), 8, mock_backend());
    let run = || {
        let out = absa(
            dir.path(),
            &["--config", config.to_str().unwrap(), "ingest"],
        );
        assert!(out.status.success());
        std::fs::read(dir.path().join("out/sampled.jsonl")).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn annotate_resumes_where_it_stopped() {
    let dir = tempfile::tempdir().unwrap();
    write_reviews(&dir.path().join("reviews.jsonl"), 10);
    let config = write_config(dir.path(), 10, mock_backend());
    let config = config.to_str().unwrap();

    let out = absa(dir.path(), &["--config", config, "ingest"]);
    assert!(out.status.success());

    // Simulate an interrupted run: keep only the first six sampled reviews,
    // annotate, then restore the full sample and annotate again.
    let sampled_path = dir.path().join("out/sampled.jsonl");
    let full = std::fs::read_to_string(&sampled_path).unwrap();
    let first_six: String = full.lines().take(6).map(|l| format!("{l}\n")).collect();
    std::fs::write(&sampled_path, first_six).unwrap();

    let out = absa(dir.path(), &["--config", config, "annotate"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("6 reviews processed (0 skipped as done)"));

    std::fs::write(&sampled_path, full).unwrap();
    let out = absa(dir.path(), &["--config", config, "annotate"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("4 reviews processed (6 skipped as done)"));

    // A third run has nothing left to do.
    let out = absa(dir.path(), &["--config", config, "annotate"]);
    assert!(stdout(&out).contains("0 reviews processed (10 skipped as done)"));
}

#[test]
fn all_workers_failing_emits_failure_records_but_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    write_reviews(&dir.path().join("reviews.jsonl"), 5);
    let backend = serde_json::json!({"kind": "mock", "mock": {"empty_rate": 1.0}});
    let config = write_config(dir.path(), 5, backend);
    let config = config.to_str().unwrap();

    assert!(absa(dir.path(), &["--config", config, "ingest"])
        .status
        .success());
    let out = absa(dir.path(), &["--config", config, "annotate"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));

    let failures = std::fs::read_to_string(dir.path().join("out/failures.jsonl")).unwrap();
    assert_eq!(failures.lines().count(), 5);
    assert!(failures.contains("all-workers-failed"));

    // Voting over the empty annotations file warns and writes empty outputs.
    let out = absa(dir.path(), &["--config", config, "vote"]);
    assert!(out.status.success());
    let voted = std::fs::read_to_string(dir.path().join("out/voted.jsonl")).unwrap();
    assert!(voted.is_empty());
}

#[test]
fn unreachable_http_backend_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    write_reviews(&dir.path().join("reviews.jsonl"), 2);
    let backend = serde_json::json!({
        "kind": "http",
        "endpoint": "http://127.0.0.1:9/v1/chat/completions",
        "max_attempts": 1,
        "timeout_secs": 2,
    });
    let config = write_config(dir.path(), 2, backend);
    let config = config.to_str().unwrap();

    assert!(absa(dir.path(), &["--config", config, "ingest"])
        .status
        .success());
    let out = absa(dir.path(), &["--config", config, "annotate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("backend unreachable"));
}

#[test]
fn vote_before_annotate_names_the_missing_stage() {
    let dir = tempfile::tempdir().unwrap();
    write_reviews(&dir.path().join("reviews.jsonl"), 2);
    let config = write_config(dir.path(), 2, mock_backend());
    std::fs::create_dir_all(dir.path().join("out")).unwrap();
    let out = absa(dir.path(), &["--config", config.to_str().unwrap(), "vote"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("annotate"));
}

/// The documented five-worker worked example, pushed through the real
/// annotations-file -> `vote` -> voted-file path.
#[test]
fn vote_subcommand_reproduces_the_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    write_reviews(&dir.path().join("reviews.jsonl"), 1);

    let names = [
        "rating",
        "price",
        "menu",
        "dishes",
        "dessert",
        "clean",
        "atmosphere",
        "congestion",
        "noise",
        "enjoyment",
        "attitude",
        "child",
        "couple",
        "access",
    ];
    let aspects = serde_json::json!({
        "aspects": names
            .iter()
            .map(|n| serde_json::json!({"name": n, "description": format!("{n} of the visit")}))
            .collect::<Vec<_>>(),
        "overall_index": 0
    });
    let aspects_path = dir.path().join("aspects.json");
    std::fs::write(&aspects_path, aspects.to_string()).unwrap();

    let config = serde_json::json!({
        "backend": mock_backend(),
        "aspects_file": aspects_path,
        "corpus": {"reviews_file": dir.path().join("reviews.jsonl")},
        "sample": {"n": 1, "seed": 5},
        "output_dir": dir.path().join("out"),
    });
    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, config.to_string()).unwrap();

    let worker_rows: [[u8; 14]; 5] = [
        [4, 0, 2, 3, 0, 0, 4, 0, 0, 0, 5, 0, 0, 1],
        [4, 0, 3, 3, 0, 0, 4, 0, 0, 4, 5, 2, 3, 1],
        [4, 0, 3, 3, 0, 0, 4, 0, 0, 4, 5, 2, 3, 1],
        [4, 0, 3, 3, 0, 0, 4, 1, 1, 4, 5, 2, 4, 5],
        [4, 0, 3, 3, 0, 0, 4, 0, 0, 4, 5, 0, 0, 1],
    ];
    std::fs::create_dir_all(dir.path().join("out")).unwrap();
    let annotations: String = worker_rows
        .iter()
        .enumerate()
        .map(|(w, values)| {
            serde_json::json!({
                "review_id": "rev1",
                "worker_index": w + 1,
                "seed": w + 1,
                "values": values.to_vec(),
                "status": "parsed",
                "defects": [],
            })
            .to_string()
                + "\n"
        })
        .collect();
    std::fs::write(dir.path().join("out/annotations.jsonl"), annotations).unwrap();

    let out = absa(
        dir.path(),
        &["--config", config_path.to_str().unwrap(), "vote"],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));

    let voted = std::fs::read_to_string(dir.path().join("out/voted.jsonl")).unwrap();
    let record: serde_json::Value = serde_json::from_str(voted.lines().next().unwrap()).unwrap();
    assert_eq!(record["review_id"], "rev1");
    assert_eq!(
        record["mention"],
        serde_json::json!([1, 0, 1, 1, 0, 0, 1, 0, 0, 1, 1, 1, 1, 1])
    );
    assert_eq!(
        record["value"],
        serde_json::json!([4, 0, 3, 3, 0, 0, 4, 1, 1, 4, 5, 2, 3, 1])
    );
    assert_eq!(
        record["sentiment"],
        serde_json::json!([4, 0, 3, 3, 0, 0, 4, 0, 0, 4, 5, 2, 3, 1])
    );
    assert_eq!(record["worker_count_used"], 5);

    let csv = std::fs::read_to_string(dir.path().join("out/voted.csv")).unwrap();
    assert_eq!(
        csv.lines().nth(1).unwrap(),
        "rev1,4,0,3,3,0,0,4,0,0,4,5,2,3,1"
    );
}

/// Review-level parallelism must not change the written artifacts.
#[test]
fn parallel_annotate_matches_serial_output() {
    let dir = tempfile::tempdir().unwrap();
    write_reviews(&dir.path().join("reviews.jsonl"), 24);
    let config = write_config(dir.path(), 24, mock_backend());
    let config = config.to_str().unwrap();

    let run = |out_dir: &str, jobs: &str| {
        for stage in ["ingest", "annotate", "vote"] {
            let out = absa(
                dir.path(),
                &[
                    "--config",
                    config,
                    "--output-dir",
                    out_dir,
                    "--jobs",
                    jobs,
                    stage,
                ],
            );
            assert!(out.status.success(), "stderr: {}", stderr(&out));
        }
    };
    run("serial", "1");
    run("parallel", "4");

    for artifact in [
        "annotations.jsonl",
        "failures.jsonl",
        "voted.jsonl",
        "voted.csv",
    ] {
        let a = std::fs::read(dir.path().join("serial").join(artifact)).unwrap();
        let b = std::fs::read(dir.path().join("parallel").join(artifact)).unwrap();
        assert_eq!(a, b, "{artifact} differs under --jobs 4");
    }
}

#[test]
fn backend_url_env_var_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    write_reviews(&dir.path().join("reviews.jsonl"), 2);
    let backend = serde_json::json!({
        "kind": "http",
        "endpoint": "http://127.0.0.1:9/v1/chat/completions",
        "max_attempts": 1,
        "timeout_secs": 2,
    });
    let config = write_config(dir.path(), 2, backend);
    let config = config.to_str().unwrap();
    assert!(absa(dir.path(), &["--config", config, "ingest"])
        .status
        .success());

    // Point the env override at a second dead port; the error must mention
    // the overridden endpoint, not the configured one.
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_absa"))
        .current_dir(dir.path())
        .env(
            "ABSA_BACKEND_URL",
            "http://127.0.0.1:19/v1/chat/completions",
        )
        .args(["--config", config, "annotate"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("127.0.0.1:19"));
}
