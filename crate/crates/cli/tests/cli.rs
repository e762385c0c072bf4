use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use boostfhe::dataset::Dataset;
use boostfhe::forest::ModelKind;
use boostfhe::synth::{
    random_forest, random_row, synthetic_dataset, train_boosted, BoostParams, DatasetShape, ForestShape,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::Value;

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, "slot_count = 4096\nbitwidth = 8\nseed = 5\n").unwrap();
    path
}

fn json_lines(bytes: &[u8]) -> Vec<Value> {
    String::from_utf8_lossy(bytes)
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn run(bin: &str, args: &[&str]) -> Vec<Value> {
    let out = Command::new(bin).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{bin} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    json_lines(&out.stdout)
}

#[test]
fn optimize_zero_intensity_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let data = synthetic_dataset(
        &DatasetShape {
            rows: 300,
            features: 3,
            classes: 2,
            noise: 0.05,
        },
        &mut rng,
    );
    let model = train_boosted(
        &data,
        &BoostParams {
            rounds: 15,
            ..Default::default()
        },
        &mut rng,
    );
    let model_path = dir.path().join("model.json");
    // deliberately not the canonical formatting, to catch re-serialization
    std::fs::write(&model_path, serde_json::to_string(&model).unwrap()).unwrap();
    let csv = dir.path().join("val.csv");
    data.save(&csv).unwrap();
    let out = dir.path().join("out.json");

    let exe = env!("CARGO_BIN_EXE_optimize");
    let reports = run(
        exe,
        &[
            "--model",
            model_path.to_str().unwrap(),
            "--validation",
            csv.to_str().unwrap(),
            "--intensity",
            "0",
            "--output",
            out.to_str().unwrap(),
        ],
    );
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&model_path).unwrap());
    assert_eq!(reports[0]["committed"], 0);

    let reports = run(
        exe,
        &[
            "--model",
            model_path.to_str().unwrap(),
            "--validation",
            csv.to_str().unwrap(),
            "--output",
            out.to_str().unwrap(),
        ],
    );
    let r = &reports[0];
    assert!(r["accuracy_after"].as_f64().unwrap() >= r["accuracy_before"].as_f64().unwrap());
    assert!(r["plan_size_after"].as_u64().unwrap() <= r["plan_size_before"].as_u64().unwrap());
}

#[test]
fn tcp_client_matches_in_process() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let model = random_forest(
        &ForestShape {
            trees: 5,
            max_depth: 3,
            features: 3,
            classes: 3,
            kind: ModelKind::Xgboost,
            ..Default::default()
        },
        &mut rng,
    );
    let model_path = dir.path().join("model.json");
    model.save(&model_path).unwrap();
    let queries = Dataset {
        feature_names: model.feature_names(),
        rows: (0..4).map(|_| random_row(&model, &mut rng)).collect(),
        labels: vec![0; 4],
    };
    let csv = dir.path().join("q.csv");
    queries.save(&csv).unwrap();

    let mut server = Command::new(env!("CARGO_BIN_EXE_server"))
        .args([
            "--model",
            model_path.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
            "--listen",
            "127.0.0.1:0",
            "--max-connections",
            "1",
        ])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(server.stdout.take().unwrap()).lines();
    let first: Value = serde_json::from_str(&lines.next().unwrap().unwrap()).unwrap();
    let addr = first["addr"].as_str().unwrap().to_string();

    let client = env!("CARGO_BIN_EXE_client");
    let common = ["--query", csv.to_str().unwrap(), "--config", config.to_str().unwrap()];
    let mut tcp_args = common.to_vec();
    tcp_args.extend(["--connect", &addr]);
    let over_tcp = run(client, &tcp_args);
    let mut local_args = common.to_vec();
    local_args.extend(["--model", model_path.to_str().unwrap()]);
    let local = run(client, &local_args);
    assert!(server.wait().unwrap().success());
    let stopped: Value = serde_json::from_str(&lines.next().unwrap().unwrap()).unwrap();
    assert_eq!(stopped["ledger"]["decryptions"], 0);

    assert_eq!(over_tcp.len(), 4);
    let q = boostfhe::forest::quantize(&model, 8).unwrap();
    for ((a, b), row) in over_tcp.iter().zip(&local).zip(&queries.rows) {
        assert_eq!(a["class"], b["class"]);
        assert_eq!(a["scores"], b["scores"]);
        assert_eq!(a["exchanges"], 3);
        assert_eq!(
            a["class"].as_u64().unwrap() as usize,
            q.predict(&q.quantize_row(row).unwrap())
        );
    }
}

#[test]
fn bench_reports_compression_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let doc = r#"{"model_kind": "xgboost", "num_classes": 2,
        "features": [{"name": "age", "min": 0, "max": 100}, {"name": "sleep", "min": 0, "max": 24}],
        "trees": [
          {"nodes": [{"feature": "age", "threshold": 45, "left": {"leaf": 0}, "right": {"node": 1}},
                     {"feature": "sleep", "threshold": 8, "left": {"leaf": 1}, "right": {"leaf": 2}}],
           "leaves": [{"score": "-1"}, {"score": "0.5"}, {"score": "1"}]},
          {"nodes": [{"feature": "age", "threshold": 30, "left": {"leaf": 0}, "right": {"node": 1}},
                     {"feature": "age", "threshold": 60, "left": {"leaf": 1}, "right": {"leaf": 2}}],
           "leaves": [{"score": "-0.5"}, {"score": "0.25"}, {"score": "0.75"}]},
          {"nodes": [{"feature": "sleep", "threshold": 6, "left": {"leaf": 0}, "right": {"leaf": 1}}],
           "leaves": [{"score": "-0.25"}, {"score": "0.25"}]}
        ]}"#;
    let model_path = dir.path().join("model.json");
    std::fs::write(&model_path, doc).unwrap();
    let csv = dir.path().join("q.csv");
    std::fs::write(&csv, "age,sleep\n50,9\n20,3\n70,7\n").unwrap();
    let lines = run(
        env!("CARGO_BIN_EXE_bench"),
        &[
            "--model",
            model_path.to_str().unwrap(),
            "--queries",
            csv.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
        ],
    );
    let summary = lines.last().unwrap();
    assert_eq!(summary["kind"], "summary");
    assert_eq!(summary["repetition"], 3);
    let ideal = summary["compressed_count"].as_f64().unwrap() / summary["plane_count"].as_f64().unwrap();
    let ratio = summary["compression_ratio"].as_f64().unwrap();
    assert!((ratio - ideal).abs() < 0.01, "ratio {ratio}, ideal {ideal}");
    assert_eq!(summary["server_decryptions"], 0);
    assert_eq!(lines.iter().filter(|l| l["kind"] == "query").count(), 3);
}
