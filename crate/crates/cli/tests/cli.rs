use std::path::{Path, PathBuf};
use std::process::{Command as Proc, Output};

use serde_json::{json, Value};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn bin(args: &[&str], env_workers: Option<&str>) -> Output {
    let mut c = Proc::new(env!("CARGO_BIN_EXE_anderson-lab"));
    c.args(args).env_remove("ANDERSON_LAB_WORKERS");
    if let Some(w) = env_workers {
        c.env("ANDERSON_LAB_WORKERS", w);
    }
    c.output().expect("binary runs")
}

fn scenario(name: &str) -> Value {
    let text = std::fs::read_to_string(scenarios().join(name)).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// A shrunken copy of a shipped scenario written to `dir`.
fn small(dir: &Path, name: &str, patch: impl FnOnce(&mut Value)) -> String {
    let mut v = scenario(name);
    if let Some(e) = v["experiment"].get_mut("expect") {
        if let Some(o) = e.as_object_mut() {
            o.remove("pinned");
        }
    }
    patch(&mut v);
    let p = dir.join(name);
    std::fs::write(&p, v.to_string()).unwrap();
    p.to_string_lossy().into_owned()
}

fn header(out: &Output) -> Vec<String> {
    let s = String::from_utf8(out.stdout.clone()).unwrap();
    s.lines().next().unwrap_or("").split(',').map(String::from).collect()
}

#[test]
fn unknown_subcommand_and_flag_exit_1_with_usage() {
    for args in [vec!["frobnicate"], vec!["lyapunov", "--bogus"], vec![]] {
        let o = bin(&args, None);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(o.stdout.is_empty());
        assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"), "{args:?}");
    }
}

#[test]
fn help_exits_0() {
    let o = bin(&["--help"], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("craig-simon"));
}

#[test]
fn invalid_configs_exit_1_and_name_the_path() {
    let cases = [
        ("single_atom.json", "measure.atoms: measure: non-trivial support required"),
        ("weights.json", "measure.atoms"),
        ("pareto_moment.json", "moment condition unsatisfiable"),
        ("unknown_key.json", "sampling.sampels"),
    ];
    for (file, needle) in cases {
        let p = scenarios().join("invalid").join(file);
        let o = bin(&["lyapunov", "--config", p.to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(1), "{file}");
        assert!(o.stdout.is_empty());
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(needle), "{file}: {err}");
    }
}

#[test]
fn missing_config_exits_1() {
    let o = bin(&["lyapunov"], None);
    assert_eq!(o.status.code(), Some(1));
    let o = bin(&["lyapunov", "--config", "/nonexistent/x.json"], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn constant_potential_prints_closed_form() {
    let p = scenarios().join("constant.json");
    let o = bin(&["lyapunov", "--config", p.to_str().unwrap(), "--assert"], None);
    assert_eq!(o.status.code(), Some(0));
    let s = String::from_utf8(o.stdout).unwrap();
    let row = s.lines().nth(1).unwrap();
    assert!(row.contains(",9.6242365011920"), "{row}");
}

#[test]
fn bump_conditions_print_verdicts() {
    let p = scenarios().join("bumps.json");
    let o = bin(&["conditions", "--config", p.to_str().unwrap(), "--assert"], None);
    assert_eq!(o.status.code(), Some(0));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("logmom=holds"));
    assert!(err.contains("logsum=violated"));
}

#[test]
fn failed_expectation_is_a_warning_without_assert() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), "constant.json", |v| v["experiment"]["expect"] = json!({ "closed_form": 0.5 }));
    let o = bin(&["lyapunov", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let o = bin(&["lyapunov", "--config", &cfg, "--assert"], None);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn runtime_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), "constant.json", |_| {});
    let o = bin(&["lyapunov", "--config", &cfg, "--out", "/proc/forbidden/dir"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn pinned_seed_mismatch_fails_under_assert() {
    let p = scenarios().join("bernoulli_gamma.json");
    let o = bin(&["lyapunov", "--config", p.to_str().unwrap(), "--seed", "12", "--assert"], None);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn every_subcommand_emits_its_documented_header() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let few = |v: &mut Value| v["sampling"]["samples"] = json!(200);
    let cases: Vec<(&str, String, &[&str])> = vec![
        (
            "lyapunov",
            small(d, "constant.json", |_| {}),
            &["scenario_id", "seed", "law_tag", "energy_re", "energy_im", "n", "samples", "mean", "stderr"],
        ),
        (
            "lde",
            small(d, "bernoulli_lde.json", |v| {
                few(v);
                v["experiment"]["expect"] = json!({});
            }),
            &[
                "scenario_id", "seed", "law_tag", "statistic", "energy_re", "energy_im", "epsilon_eff", "gamma_hat", "n",
                "samples", "count", "p_hat", "p_stderr", "eta", "eta_stderr", "fit_kind",
            ],
        ),
        (
            "lift-check",
            small(d, "logsum.json", |v| {
                few(v);
                v["experiment"]["energies"] = json!([0.0]);
                v["experiment"]["expect"] = json!({});
            }),
            &[
                "scenario_id", "seed", "energy_re", "energy_im", "statistic", "n", "log_bound", "p0", "p0_stderr", "p1",
                "p1_stderr", "bounded", "eta_p0", "eta_p1", "eta0_max", "rate_holds",
            ],
        ),
        (
            "conditions",
            small(d, "bumps.json", |v| v["grids"]["condition_n_max"] = json!(500)),
            &["scenario_id", "condition", "verdict", "value_at_max", "slope"],
        ),
        (
            "localize",
            small(d, "localize_p1.json", |v| v["grids"]["n"] = json!([5, 10])),
            &[
                "scenario_id", "seed", "law_tag", "box_lo", "box_hi", "j", "eigenvalue", "gamma_hat", "gamma_stderr",
                "decay_rate", "center", "pass",
            ],
        ),
        (
            "census",
            small(d, "census_p1.json", |v| v["grids"]["n"] = json!([5, 10])),
            &["scenario_id", "seed", "law_tag", "n", "site", "verdict"],
        ),
        (
            "edge-census",
            small(d, "pareto_edge.json", |v| {
                few(v);
                v["experiment"]["expect"] = json!({});
            }),
            &[
                "n", "r", "threshold", "zone_sites", "trials", "violations", "frequency", "predicted", "chebyshev_bound",
                "within_tolerance", "summable",
            ],
        ),
        (
            "craig-simon",
            small(d, "craig_simon.json", |v| {
                v["grids"]["n"] = json!([50, 100]);
                v["sampling"]["gamma_n"] = json!(100);
            }),
            &["scenario_id", "seed", "law_tag", "n", "family", "max_excess", "argmax_energy"],
        ),
        (
            "spectrum",
            small(d, "spectrum.json", |_| {}),
            &[
                "scenario_id", "seed", "law_tag", "box_lo", "box_hi", "j", "eigenvalue", "residual", "center", "decay_rate",
            ],
        ),
    ];
    for (cmd, cfg, cols) in cases {
        let o = bin(&[cmd, "--config", &cfg, "--format", "csv"], None);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(header(&o), cols, "{cmd}");
        let rows = String::from_utf8(o.stdout).unwrap().lines().count();
        assert!(rows > 1, "{cmd} produced no rows");
    }
}

#[test]
fn json_format_carries_report_and_manifest() {
    let p = scenarios().join("constant.json");
    let o = bin(&["lyapunov", "--config", p.to_str().unwrap(), "--format", "json"], None);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["manifest"]["seed"], json!(1));
    assert_eq!(v["manifest"]["config_digest"].as_str().unwrap().len(), 64);
    assert!(v["report"]["observables"]["gamma(E=3,n=10)"]["value"].is_number());
}

#[test]
fn out_dir_receives_csv_json_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), "constant.json", |_| {});
    let out = dir.path().join("run");
    let o = bin(&["lyapunov", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    for f in ["lyapunov.csv", "lyapunov.json", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), "bernoulli_gamma.json", |v| {
        v["grids"]["n"] = json!([100]);
        v["sampling"]["samples"] = json!(50);
    });
    let a = bin(&["lyapunov", "--config", &cfg, "--seed", "1"], None);
    let b = bin(&["lyapunov", "--config", &cfg, "--seed", "2"], None);
    assert_ne!(a.stdout, b.stdout);
    assert!(String::from_utf8_lossy(&a.stdout).contains(",1,P1,"));
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), "logsum.json", |v| {
        v["sampling"]["samples"] = json!(3000);
        v["experiment"]["energies"] = json!([0.0, { "re": 0.5, "im": 0.1 }]);
    });
    let one = bin(&["lift-check", "--config", &cfg, "--workers", "1"], None);
    let eight = bin(&["lift-check", "--config", &cfg, "--workers", "8"], None);
    let env = bin(&["lift-check", "--config", &cfg], Some("3"));
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, eight.stdout);
    assert_eq!(one.stdout, env.stdout);
}
