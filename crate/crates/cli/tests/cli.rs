use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn opsforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opsforge"))
        .args(args)
        .output()
        .unwrap()
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data/scenarios")
        .join(format!("{name}.json"))
        .to_string_lossy()
        .into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_writes_six_files() {
    let tmp = tempfile::tempdir().unwrap();
    let o = opsforge(&[
        "simulate",
        "--scenario",
        &scenario("resilience_chain"),
        "--seed",
        "7",
        "--out",
        p(tmp.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut names: Vec<String> = std::fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "alerts.jsonl",
            "groundtruth.json",
            "logs.jsonl",
            "metrics.jsonl",
            "tickets.jsonl",
            "traces.jsonl"
        ]
    );
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = opsforge(&["simulate", "--seed", "7", "--out", p(tmp.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--scenario"), "{}", stderr(&o));

    let o = opsforge(&["simulate", "--scenario", "/no/such/file.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--scenario"));

    assert_eq!(opsforge(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(opsforge(&["simulate", "--frobnicate"]).status.code(), Some(2));
    assert_eq!(opsforge(&[]).status.code(), Some(2));
    assert_eq!(opsforge(&["--help"]).status.code(), Some(0));

    let o = opsforge(&[
        "resilience",
        "test",
        "--scenario",
        &scenario("resilience_chain"),
        "--target",
        "catalog",
        "--fault-type",
        "melt",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--fault-type"));

    let o = opsforge(&["sketch", "train", "--metrics", "/no/metrics.jsonl"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--metrics"));
}

#[test]
fn config_rejects_unknown_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"sketch": {"window": 12, "tehta": 2.0}}"#).unwrap();
    let o = opsforge(&[
        "simulate",
        "--config",
        p(&cfg),
        "--scenario",
        &scenario("resilience_chain"),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("tehta"), "{}", stderr(&o));

    std::fs::write(&cfg, r#"{"bogus": 1}"#).unwrap();
    assert_eq!(opsforge(&["simulate", "--config", p(&cfg)]).status.code(), Some(1));
}

fn series_windows(dir: &Path) -> u64 {
    let text = std::fs::read_to_string(dir.join("patterns.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v[0]["patterns"]["w"].as_u64().unwrap()
}

#[test]
fn flag_beats_config_beats_default() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let o = opsforge(&[
        "simulate",
        "--scenario",
        &scenario("resilience_chain"),
        "--out",
        p(&run),
        "-q",
    ]);
    assert!(o.status.success());
    // Relative paths in the config resolve against the config's directory.
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"inputs": {"metrics": "run/metrics.jsonl"}, "sketch": {"window": 8}, "out": "from_cfg"}"#,
    )
    .unwrap();
    let train = |extra: &[&str]| {
        let mut args = vec![
            "sketch",
            "train",
            "--service",
            "catalog",
            "--metric",
            "error_rate",
            "-q",
        ];
        args.extend_from_slice(extra);
        let o = opsforge(&args);
        assert!(o.status.success(), "{}", stderr(&o));
    };

    let default_out = tmp.path().join("d");
    train(&["--metrics", p(&run.join("metrics.jsonl")), "--out", p(&default_out)]);
    assert_eq!(series_windows(&default_out), 12);

    train(&["--config", p(&cfg)]);
    assert_eq!(series_windows(&tmp.path().join("from_cfg")), 8);

    let flagged = tmp.path().join("f");
    train(&["--config", p(&cfg), "--window", "5", "--out", p(&flagged)]);
    assert_eq!(series_windows(&flagged), 5);
}

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out: Vec<(PathBuf, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.clone(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn reruns_overwrite_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let out = tmp.path().join("out");
    let sc = scenario("fig2");
    assert!(
        opsforge(&["simulate", "--scenario", &sc, "--seed", "3", "--out", p(&run), "-q"])
            .status
            .success()
    );
    let (alerts, tickets) = (run.join("alerts.jsonl"), run.join("tickets.jsonl"));
    let args = [
        "tickets",
        "aggregate",
        "--alerts",
        p(&alerts),
        "--tickets",
        p(&tickets),
        "--scenario",
        &sc,
        "--out",
        p(&out),
        "-q",
    ];
    assert!(opsforge(&args).status.success());
    let first = snapshot(&out);
    assert!(opsforge(&args).status.success());
    assert_eq!(first, snapshot(&out));
    assert_eq!(first.len(), 4);
}

#[test]
fn log_pipeline_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let d = |x: &str| tmp.path().join(x);
    assert!(opsforge(&[
        "simulate",
        "--sessions",
        "200",
        "--seed",
        "2",
        "--out",
        p(&d("s")),
        "-q"
    ])
    .status
    .success());
    assert!(
        opsforge(&["parse", "--logs", p(&d("s/logs.jsonl")), "--out", p(&d("p")), "-q"])
            .status
            .success()
    );
    assert!(d("p/knowledge.json").exists());
    let o = opsforge(&[
        "logdetect",
        "train",
        "--parsed",
        p(&d("p/parsed.jsonl")),
        "--labels",
        p(&d("s/labels.json")),
        "--out",
        p(&d("m")),
        "-q",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for sub in ["detect", "identify"] {
        let o = opsforge(&[
            "logdetect",
            sub,
            "--parsed",
            p(&d("p/parsed.jsonl")),
            "--model",
            p(&d("m/model.json")),
            "--out",
            p(&d("m")),
            "-q",
        ]);
        assert!(o.status.success(), "{sub}: {}", stderr(&o));
    }
    let text = std::fs::read_to_string(d("m/detections.json")).unwrap();
    let detections: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(detections.as_array().unwrap().len(), 200);
}

#[test]
fn rca_and_deps_emit_json() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    assert!(
        opsforge(&["simulate", "--scenario", &scenario("rca_seed0"), "--out", p(&run), "-q"])
            .status
            .success()
    );
    let o = opsforge(&[
        "deps",
        "intensity",
        "--traces",
        p(&run.join("traces.jsonl")),
        "--out",
        p(tmp.path()),
        "-q",
    ]);
    assert!(o.status.success());
    let o = opsforge(&[
        "rca",
        "localize",
        "--traces",
        p(&run.join("traces.jsonl")),
        "--metrics",
        p(&run.join("metrics.jsonl")),
        "--logs",
        p(&run.join("logs.jsonl")),
        "--out",
        p(tmp.path()),
        "-q",
    ]);
    assert!(o.status.success());
    let rca: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("rca.json")).unwrap()).unwrap();
    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("groundtruth.json")).unwrap()).unwrap();
    assert_eq!(rca["ranking"]["ranking"][0], truth["culprit"]);
}

#[test]
fn quiet_suppresses_progress() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = scenario("resilience_chain");
    let loud = opsforge(&["simulate", "--scenario", &sc, "--out", p(tmp.path())]);
    assert!(!loud.stderr.is_empty());
    let quiet = opsforge(&["simulate", "--scenario", &sc, "--out", p(tmp.path()), "--quiet"]);
    assert!(quiet.stderr.is_empty());
}
