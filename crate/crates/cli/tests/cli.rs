use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn cwr(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cwr"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(args: &[&str], dir: &Path) -> String {
    let o = cwr(args, dir);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn error_json(o: &Output) -> Value {
    assert!(!o.status.success());
    let text = String::from_utf8_lossy(&o.stderr);
    let last = text.lines().last().unwrap();
    serde_json::from_str(last).unwrap()
}

fn synth(dir: &Path, regime: &str, n: &str) -> PathBuf {
    ok(&["synth", "--regime", regime, "--n", n, "--sigma", "150", "--seed", "4", "--out", "d.csv"], dir);
    dir.join("d.csv")
}

const FAST: [&str; 6] = ["--r", "0.5", "--bandwidth", "0.25", "--covariates", "floor_area,house_age"];

#[test]
fn synth_writes_data_schema_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(
        &["synth", "--regime", "geo", "--n", "40", "--seed", "1", "--out", "x/d.csv", "--truth-out", "x/t.csv"],
        dir.path(),
    );
    let summary: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(summary["records"], 40);
    assert!(dir.path().join("x/d.schema.json").exists());
    let truth = std::fs::read_to_string(dir.path().join("x/t.csv")).unwrap();
    assert!(truth.starts_with("id,intercept,floor_area,house_age,signal,cluster"));
    assert_eq!(truth.lines().count(), 41);
}

#[test]
fn synth_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"regime": "mixed", "n": 30, "sigma": 10.0, "seed": 2, "poi_count": 0, "land_use": false}"#,
    )
    .unwrap();
    ok(&["synth", "--config", "cfg.json", "--out", "d.csv"], dir.path());
    let header = std::fs::read_to_string(dir.path().join("d.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap(), "id,u,v,price,floor_area,house_age");
}

#[test]
fn compare_is_deterministic_and_exports_residuals() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "attr", "80");
    let mut args = vec!["compare", "--data", "d.csv", "--schema", "d.schema.json", "--stages", "20"];
    args.extend(FAST);
    let a = ok(&args, dir.path());
    let b = ok(&args, dir.path());
    assert_eq!(a, b);
    let report: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(report["models"].as_array().unwrap().len(), 4);
    assert!(report["models"][0].get("runtime_ms").is_none());

    args.extend(["--residuals-dir", "res", "--timings", "--out", "r.json"]);
    ok(&args, dir.path());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert!(report["models"][0]["runtime_ms"].is_number());
    let res = std::fs::read_to_string(dir.path().join("res/residuals_cwr.csv")).unwrap();
    assert!(res.starts_with("id,u,v,actual,predicted,residual"));
    assert_eq!(res.lines().count(), 16 + 1);
}

#[test]
fn fit_predict_and_map() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "geo", "60");
    let mut args = vec!["fit", "--data", "d.csv", "--schema", "d.schema.json", "--model", "gwr", "--out", "m.json"];
    args.extend(FAST);
    let summary: Value = serde_json::from_str(&ok(&args, dir.path())).unwrap();
    assert_eq!(summary["bandwidth"], 0.25);
    let model: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(model["format"], "cwr-model");
    assert_eq!(model["version"], 1);

    // A query file without the response column.
    std::fs::write(dir.path().join("q.csv"), "id,u,v,floor_area,house_age\nq1,5000,5000,90,12\n").unwrap();
    let mut schema: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("d.schema.json")).unwrap()).unwrap();
    schema["columns"]
        .as_array_mut()
        .unwrap()
        .retain(|c| !c["name"].as_str().unwrap().starts_with("dist_") && c["name"] != "land_use");
    std::fs::write(dir.path().join("q.schema.json"), schema.to_string()).unwrap();
    let out = ok(&["predict", "--model-file", "m.json", "--data", "q.csv", "--schema", "q.schema.json"], dir.path());
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "id,u,v,predicted");
    assert!(lines.next().unwrap().starts_with("q1,5000,5000,"));

    let map = ok(
        &["map", "--data", "d.csv", "--schema", "d.schema.json", "--model-file", "m.json", "--grid", "2x2", "--out", "maps"],
        dir.path(),
    );
    let map: Value = serde_json::from_str(&map).unwrap();
    assert_eq!(map["grid_rows"], 4);
    assert_eq!(map["residual_rows"], 12);
    let grid = std::fs::read_to_string(dir.path().join("maps/grid.csv")).unwrap();
    assert_eq!(grid.lines().next().unwrap(), "u,v,floor_area,house_age,predicted");
    assert_eq!(grid.lines().count(), 5);

    let mut args = vec!["map", "--data", "d.csv", "--schema", "d.schema.json", "--model", "ols", "--grid", "3x1"];
    args.extend(["--covariates", "floor_area,house_age", "--query", "floor_area=100,house_age=10", "--out", "m2"]);
    ok(&args, dir.path());
    let grid = std::fs::read_to_string(dir.path().join("m2/grid.csv")).unwrap();
    assert!(grid.lines().skip(1).all(|l| l.contains(",100,10,")));
}

#[test]
fn importance_csv() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "attr", "80");
    let out = ok(
        &["importance", "--data", "d.csv", "--schema", "d.schema.json", "--stages", "30", "--out", "imp.csv"],
        dir.path(),
    );
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["selected"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(dir.path().join("imp.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "predictor,raw_reduction,normalized,rank");
}

#[test]
fn batch_manifest_summary() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "attr", "70");
    std::fs::write(
        dir.path().join("manifest.json"),
        r#"{"defaults": {"models": ["ols", "cwr"], "rate": 0.4, "bandwidth": 0.3,
                         "covariates": ["floor_area", "house_age"]},
            "cases": [{"name": "north", "data": "d.csv", "schema": "d.schema.json"},
                      {"name": "south", "data": "d.csv", "schema": "d.schema.json", "config": {"seed": 8}},
                      {"name": "missing", "data": "nope.csv", "schema": "d.schema.json"}]}"#,
    )
    .unwrap();
    let out = ok(&["compare", "--manifest", "manifest.json", "--summary-csv", "summary.csv"], dir.path());
    let v: Value = serde_json::from_str(&out).unwrap();
    let rows = v["summary"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["cwr_rate"], 0.4);
    assert!(rows[0]["gwr"].is_null());
    assert_eq!(rows[2]["error"]["kind"], "io");
    let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(csv.starts_with("case,records,ols,gwr,cwr,lsboost,cwr_vs_ols,cwr_vs_gwr,cwr_vs_lsboost,cwr_rate,error"));

    // Flags override manifest defaults.
    let out = ok(&["compare", "--manifest", "manifest.json", "--r", "0.2"], dir.path());
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["summary"][0]["cwr_rate"], 0.2);
}

#[test]
fn errors_are_json_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "geo", "30");
    let e = error_json(&cwr(&["fit", "--data", "none.csv", "--schema", "d.schema.json", "--model", "ols", "--out", "m.json"], dir.path()));
    assert_eq!(e["error"]["kind"], "io");
    assert!(e["error"]["message"].as_str().unwrap().contains("none.csv"));

    let e = error_json(&cwr(&["fit", "--data", "d.csv", "--schema", "d.schema.json", "--model", "svm", "--out", "m.json"], dir.path()));
    assert_eq!(e["error"]["kind"], "parameter");

    let e = error_json(&cwr(
        &["fit", "--data", "d.csv", "--schema", "d.schema.json", "--model", "cwr", "--r", "often", "--out", "m.json"],
        dir.path(),
    ));
    assert_eq!(e["error"]["kind"], "parameter");

    let e = error_json(&cwr(&["compare", "--data", "d.csv", "--schema", "d.schema.json", "--train-frac", "1.5"], dir.path()));
    assert_eq!(e["error"]["kind"], "parameter");

    let o = cwr(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["kind"], "usage");

    std::fs::write(dir.path().join("bad.json"), "{\"version\": 1, \"columns\": []}").unwrap();
    let e = error_json(&cwr(&["compare", "--data", "d.csv", "--schema", "bad.json"], dir.path()));
    assert_eq!(e["error"]["kind"], "schema");
}
