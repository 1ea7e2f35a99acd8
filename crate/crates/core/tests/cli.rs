use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

/// Runs `everest` with a whitespace-separated argument line.
fn everest(line: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_everest"))
        .args(line.split_whitespace())
        .output()
        .unwrap()
}

fn ok(line: &str) -> String {
    let out = everest(line);
    assert!(out.status.success(), "{line}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(line: &str) -> Value {
    serde_json::from_str(&ok(line)).unwrap()
}

fn gen(dir: &Path) -> String {
    let data = dir.display().to_string();
    ok(&format!(
        "gen-synthetic --seed 3 --widths 16,24 --inputs 400 --out {data}/activations.actv"
    ));
    data
}

#[test]
fn query_index_and_status() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path());
    let q = format!("query --data {data} --layer 1 --target 9 --neurons 2,5,7 --k 4");
    let first = json(&q);
    let second = json(&q);
    assert_eq!(first["entries"], second["entries"]);
    assert_eq!(first["entries"][0]["inputId"], 9);
    // the index built by the first run saves work in the second
    assert!(second["stats"]["inputsRun"].as_u64() < first["stats"]["inputsRun"].as_u64());

    let status = json(&format!("index-status --data {data}"));
    assert_eq!(status["layers"][1]["state"], "built");
    assert_eq!(status["layers"][0]["state"], "absent");
    let status = json(&format!("index --data {data} --layer 0"));
    assert_eq!(status["layers"][0]["state"], "built");
}

#[test]
fn streamed_query_ends_with_the_result() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path());
    ok(&format!("index --data {data} --layer 0"));
    let out = ok(&format!(
        "query --data {data} --layer 0 --neurons 1,3 --k 3 --mode highest --dist l1 --stream"
    ));
    let lines: Vec<Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(lines.len() >= 2);
    assert!(lines[0].get("round").is_some());
    assert_eq!(lines.last().unwrap()["entries"].as_array().unwrap().len(), 3);
}

#[test]
fn verify_and_bench() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path());
    let report = json(&format!("verify --data {data} --queries 40 --seed 1"));
    assert_eq!(report["failures"].as_array().unwrap().len(), 0);
    assert!(report["maxSlack"].as_i64().unwrap() >= 0);

    ok(&format!(
        "bench --data {data} --strategy reprocess --strategy everest --workload w2 --queries 5 --out {data}/out.csv"
    ));
    let text = std::fs::read_to_string(dir.path().join("out.csv")).unwrap();
    let mut lines = text.lines();
    let header = "queryIdx,strategy,inferenceUnits,bytesRead,bytesStored,cumulativeUnits";
    assert_eq!(lines.next(), Some(header));
    assert_eq!(lines.count(), 10);
}

#[test]
fn import_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().display();
    std::fs::write(dir.path().join("a.csv"), "1,2\n3,4\n5,0\n").unwrap();
    std::fs::write(
        dir.path().join("b.json"),
        "[[[0.5], [1.5], [2.5]], [[1, 1, 1], [0, 0, 0], [2, 2, 2]]]",
    )
    .unwrap();
    ok(&format!(
        "import-activations --in {d}/a.csv --in {d}/b.json --out {d}/all.actv"
    ));
    let layers = everest::source::read_activation_file(dir.path().join("all.actv")).unwrap();
    assert_eq!(layers.len(), 3);
    assert_eq!(layers[0].row(2), &[5.0, 0.0]);
    assert_eq!(layers[2].n_neurons(), 3);
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path());
    for line in [
        format!("query --data {data} --layer 7 --neurons 1"),
        format!("query --data {data} --layer 0 --neurons 1 --dist cosine"),
        "query --data /nonexistent --layer 0 --neurons 1".to_string(),
        format!("gen-synthetic --widths 0 --inputs 3 --out {data}/never.actv"),
        format!("bench --data {data} --strategy fastest"),
    ] {
        let out = everest(&line);
        assert!(!out.status.success(), "{line}");
        assert!(!out.stderr.is_empty());
    }
}
