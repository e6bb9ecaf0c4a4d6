use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use viewclean::view::ViewResult;
use viewclean_harness::experiment::read_metrics;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn viewclean(args: &[&str], data: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_viewclean"))
        .arg("--configs")
        .arg(configs())
        .arg("--data-dir")
        .arg(data)
        .args(args)
        .env_remove("VIEWCLEAN_DATA")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = viewclean(&["blocking-report", "--dataset", "restaurants"], dir.path());
    assert_eq!(missing.status.code(), Some(3));
    let err = String::from_utf8_lossy(&missing.stderr);
    assert!(err.contains("restaurants/data.csv") && err.contains("restaurants/matches.csv"), "{err}");

    let unknown = viewclean(&["blocking-report", "--dataset", "nope"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));

    let bad_view = viewclean(&["impact", "--dataset", "synthetic", "--view", "Nope"], dir.path());
    assert_eq!(bad_view.status.code(), Some(2));

    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"dataset": "synthetic", "views": ["Top3"], "strategies": [], "repetitions": 1}"#)
        .unwrap();
    let empty = viewclean(&["experiment", cfg.to_str().unwrap()], dir.path());
    assert_eq!(empty.status.code(), Some(2));
    std::fs::write(&cfg, "{").unwrap();
    let malformed = viewclean(&["experiment", cfg.to_str().unwrap()], dir.path());
    assert_eq!(malformed.status.code(), Some(2));

    assert_eq!(viewclean(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(viewclean(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn synth_output_loads_as_a_file_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("toy");
    let o = viewclean(
        &["synth", "--n", "120", "--dup-rate", "0.2", "--noise", "0", "--seed", "5", "--out", out.to_str().unwrap()],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("144 records, 24 planted pairs"), "{}", stdout(&o));

    // Same rows and matches through the generic CSV path.
    let cfg_dir = dir.path().join("configs");
    std::fs::create_dir(&cfg_dir).unwrap();
    let mut cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(configs().join("synthetic.json")).unwrap()).unwrap();
    cfg["name"] = "toy".into();
    cfg["source"] = serde_json::json!({
        "type": "files", "data": "toy/data.csv", "matches": "toy/matches.csv", "key_column": "id"
    });
    cfg["schema"] = serde_json::to_value(viewclean::synth::schema()).unwrap();
    std::fs::write(cfg_dir.join("toy.json"), cfg.to_string()).unwrap();
    let report = Command::new(env!("CARGO_BIN_EXE_viewclean"))
        .args(["--configs", cfg_dir.to_str().unwrap(), "--data-dir", dir.path().to_str().unwrap()])
        .args(["blocking-report", "--dataset", "toy", "--json"])
        .output()
        .unwrap();
    assert!(report.status.success(), "{}", String::from_utf8_lossy(&report.stderr));
    let r: serde_json::Value = serde_json::from_slice(&report.stdout).unwrap();
    assert_eq!(r["stages"][0]["rows"], 144);
    assert_eq!(r["stages"][0]["pairs"], 144 * 143 / 2);
    assert_eq!(r["stages"][0]["positives"], 24);
    assert_eq!(r["stages"][0]["ordered_positives"], 48);
    // exact copies always survive blocking
    assert_eq!(r["stages"][1]["positives"], 24);
}

#[test]
fn blocking_report_stages() {
    let dir = tempfile::tempdir().unwrap();
    let o = viewclean(&["blocking-report", "--dataset", "synthetic", "--view", "Top3", "--json"], dir.path());
    assert!(o.status.success());
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let stages = r["stages"].as_array().unwrap();
    let names: Vec<&str> = stages.iter().map(|s| s["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["base", "view", "view+features"]);
    let n = stages[1]["rows"].as_u64().unwrap();
    assert_eq!(stages[1]["pairs"].as_u64().unwrap(), n * (n - 1) / 2);
    assert_eq!(stages[1]["ordered_pairs"].as_u64().unwrap(), n * (n - 1));
    let pairs: Vec<u64> = stages.iter().map(|s| s["pairs"].as_u64().unwrap()).collect();
    assert!(pairs[0] > pairs[1] && pairs[1] > pairs[2]);
}

#[test]
fn emd_between_stored_views() {
    let dir = tempfile::tempdir().unwrap();
    let view = |rows: &[(&str, f64)]| {
        serde_json::json!({
            "schema": [{"name": "cuisine", "type": "text"}, {"name": "count", "type": "number"}],
            "rows": rows.iter().map(|(c, n)| serde_json::json!([c, n])).collect::<Vec<_>>(),
        })
    };
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    std::fs::write(&a, view(&[("American", 23.0), ("French", 18.0), ("Asian", 18.0)]).to_string()).unwrap();
    std::fs::write(&b, view(&[("American", 23.0), ("French", 18.0), ("Asian", 17.0)]).to_string()).unwrap();
    let _: ViewResult = serde_json::from_str(&std::fs::read_to_string(&a).unwrap()).unwrap();
    let o = viewclean(&["emd", a.to_str().unwrap(), b.to_str().unwrap(), "--flows"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    let d: f64 = lines.next().unwrap().parse().unwrap();
    assert!((d - 1.0 / 69.0).abs() < 1e-12);
    let flows: Vec<&str> = lines.collect();
    assert_eq!(flows.len(), 3);
    assert!(flows.iter().all(|l| {
        let f: Vec<&str> = l.split(' ').collect();
        f[0] == f[1]
    }));

    std::fs::write(&b, "[]").unwrap();
    let bad = viewclean(&["emd", a.to_str().unwrap(), b.to_str().unwrap()], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn impact_lists_highest_first() {
    let dir = tempfile::tempdir().unwrap();
    let o = viewclean(&["impact", "--dataset", "synthetic", "--view", "Top3", "--top", "5"], dir.path());
    assert!(o.status.success());
    let mut r = csv::Reader::from_reader(o.stdout.as_slice());
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["id", "impact", "name", "category", "city", "price"]
    );
    let scores: Vec<f64> = r.records().map(|x| x.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(scores.len(), 5);
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn experiment_writes_one_row_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    std::fs::write(
        &cfg,
        r#"{"dataset": "synthetic", "views": ["Count*"], "strategies": ["view_impact", "random"],
            "repetitions": 2, "base": {"budget": 53, "window": 1000},
            "grid": {"batch": [10, 20]}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = viewclean(
        &["experiment", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "2"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_metrics(&out.join("metrics.csv")).unwrap();
    let runs: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.run.as_str()).collect();
    assert_eq!(runs.len(), 8);
    // (53 - 13) / 10 = 4 and (53 - 13) / 20 = 2 batches after the first
    let per_run = |b: usize| rows.iter().filter(|r| r.batch == b).count() / 4;
    assert_eq!(per_run(10), 6);
    assert_eq!(per_run(20), 4);
    for run in &runs {
        let rs: Vec<_> = rows.iter().filter(|r| r.run == *run).collect();
        assert_eq!(rs[0].iteration, 0);
        assert_eq!(rs[0].labels_used, 0);
        assert!(rs[..rs.len() - 1].iter().all(|r| r.stopped.is_none()));
        assert_eq!(rs.last().unwrap().stopped.as_deref(), Some("budget"));
    }
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("Count* | view_impact | l=53 b=10"));
    assert!(summary.contains("Count* | random | l=53 b=20"));
}
