use std::path::Path;
use std::process::Command;

fn iati(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_iati"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout_json(out: &std::process::Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn capacity_reports_bits_and_nats() {
    let v = stdout_json(&iati(&["capacity", "--channel", "bsc:0.11"]));
    assert!((v["capacity_bits"].as_f64().unwrap() - 0.500084041835472).abs() < 1e-12);
    assert!(v["separation_nats"].as_f64().unwrap() > 0.0);

    let v = stdout_json(&iati(&["capacity", "--channel", "bsc:0.5"]));
    assert_eq!(v["capacity_bits"].as_f64().unwrap(), 0.0);
    assert!(v["separation_nats"].is_null());

    assert!(!iati(&["capacity", "--channel", "bsc:0.7"]).status.success());
}

#[test]
fn simulate_writes_csv_summary_and_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rows.csv");
    let summary = dir.path().join("summary.json");
    let transcripts = dir.path().join("transcripts");
    let config = write_config(
        dir.path(),
        &format!(
            r#"{{"n": 1024, "k": 4, "channel": "bsc:0.05", "trials": 3, "seed": 5,
               "output": {{"csv": {:?}, "summary": {:?}, "transcripts": {:?}}}}}"#,
            csv, summary, transcripts
        ),
    );
    let printed = stdout_json(&iati(&["simulate", "--config", &config]));
    assert_eq!(printed["trials"], 3);

    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with(
        "trial,n,k,channel,tests_isolation,tests_identification,tests_verify,tests_total,rounds,failed,fp,fn\n"
    ));
    assert_eq!(text.lines().count(), 4);
    let saved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(saved, printed);

    // decoding a dumped transcript reproduces the trial's estimate
    let t = transcripts.join("trial_1.jsonl");
    let decoded = stdout_json(&iati(&["decode", "--transcript", t.to_str().unwrap()]));
    let loaded = iati::ExperimentConfig::load(Path::new(&config)).unwrap();
    let seed = iati_core::seeding::trial_seed(loaded.seed, 1);
    let (r, _) =
        iati_core::run_scheme(loaded.n, loaded.k, &loaded.channel, &loaded.scheme(), seed).unwrap();
    assert_eq!(decoded["estimate"], serde_json::json!(r.estimate));

    // --seed overrides the config seed
    let other = stdout_json(&iati(&["simulate", "--config", &config, "--seed", "6"]));
    let again = stdout_json(&iati(&["simulate", "--config", &config, "--seed", "6"]));
    assert_eq!(other, again);
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#"{"n": 10, "k": 20, "channel": "bsc:0.05"}"#);
    let out = iati(&["simulate", "--config", &config]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("k"));
}

#[test]
fn sweep_prints_combined_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"n": 512, "k": 4, "channel": "bsc:0.05", "trials": 2}"#,
    );
    let out = iati(&[
        "sweep",
        "--config",
        &config,
        "--axis",
        "epsilon",
        "--values",
        "0.1,0.5,1.0",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("axis,axis_value,trial,"));
    assert_eq!(lines.count(), 6);

    let out = iati(&[
        "sweep",
        "--config",
        &config,
        "--axis",
        "schedule",
        "--values",
        "constant;custom:2,3",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    assert!(
        !iati(&["sweep", "--config", &config, "--axis", "colour", "--values", "1"])
            .status
            .success()
    );
    assert!(
        !iati(&["sweep", "--config", &config, "--axis", "p", "--values", ""])
            .status
            .success()
    );
}

#[test]
fn classify_bench_lists_three_hypotheses() {
    let v = stdout_json(&iati(&[
        "classify-bench",
        "--channel",
        "bsc:0.1",
        "--s",
        "100",
        "--trials",
        "500",
    ]));
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert!(row["exact"].as_f64().unwrap() <= row["hoeffding"].as_f64().unwrap());
    }
    let v = stdout_json(&iati(&[
        "classify-bench",
        "--channel",
        "awgn:1",
        "--s",
        "50",
        "--trials",
        "100",
    ]));
    assert!(v[0]["exact"].is_null());
}
