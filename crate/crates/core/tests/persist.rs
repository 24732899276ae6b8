use anderson_lab::experiments::{
    config_digest, edge_bound_census, load_report, persist, EdgeReport, RunManifest, Table,
};
use anderson_lab::measures::{BaseMeasure, ProductLaw};
use anderson_lab::RngStream;
use serde_json::json;

fn report() -> EdgeReport {
    let law = ProductLaw::exact(BaseMeasure::pareto(1.0, 1.5, true, 1.0).unwrap());
    edge_bound_census(&law, 1.0, 1.0, &[2.0], &[4, 8], 500, RngStream::new(5, 0)).unwrap()
}

#[test]
fn round_trip_preserves_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let r = report();
    let manifest = RunManifest::start(&json!({ "seed": 5 }), 5, 2);
    let paths = persist(dir.path(), "edge", &r.table(), &r, &manifest).unwrap();
    assert_eq!(paths.len(), 3);
    let (back, m): (EdgeReport, RunManifest) = load_report(&dir.path().join("edge.json")).unwrap();
    assert_eq!(back, r);
    assert_eq!(m, manifest);
    let csv = std::fs::read_to_string(dir.path().join("edge.csv")).unwrap();
    assert_eq!(Table::from_csv(&csv).unwrap(), r.table());
}

#[test]
fn empty_report_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let t = Table::new(&EdgeReport::COLUMNS);
    let manifest = RunManifest::start(&json!({}), 1, 1);
    persist(dir.path(), "empty", &t, &json!({ "rows": [] }), &manifest).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("empty.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(dir.path().join("manifest.json").is_file());
}

#[test]
fn same_seed_gives_identical_csv_for_any_worker_count() {
    let one = anderson_lab::parallel::with_workers(1, || report().table().to_csv().unwrap());
    let four = anderson_lab::parallel::with_workers(4, || report().table().to_csv().unwrap());
    assert_eq!(one, four);
}

#[test]
fn digest_ignores_key_order() {
    let a = json!({ "b": 1, "a": { "y": [1, 2], "x": null } });
    let b = json!({ "a": { "x": null, "y": [1, 2] }, "b": 1 });
    assert_eq!(config_digest(&a), config_digest(&b));
    assert_ne!(config_digest(&a), config_digest(&json!({ "b": 2 })));
}

#[test]
fn unwritable_path_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("blocker");
    std::fs::write(&file, "").unwrap();
    let t = Table::new(&["x"]);
    let err = persist(&file.join("sub"), "x", &t, &json!({}), &RunManifest::start(&json!({}), 1, 1)).unwrap_err();
    assert!(err.to_string().contains("blocker"), "{err}");
}
