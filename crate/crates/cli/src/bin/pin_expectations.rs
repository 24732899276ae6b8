//! Regenerate the pinned values in an expectations file.
//!
//! Usage: `pin-expectations [scenarios/expectations.json]`
//!
//! Every entry is re-run from its config. Entries naming an oracle get their
//! values from that independent computation instead.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anderson_lab::measures::ProductLaw;
use anderson_lab::stats::mean_stderr;
use anderson_lab::RngStream;
use anderson_lab_cli::expect::{load_expectations, Observable, PinEntry, Pinned};
use anderson_lab_cli::{execute, Command, Config};

const TRAJECTORY_STEPS: usize = 10_000_000;
const TRAJECTORY_BATCHES: usize = 100;

/// `gamma(E)` from one long trajectory of `psi_{n+1} = (E - V_n) psi_n - psi_{n-1}`,
/// renormalised every step, with batch-means standard error.
fn single_trajectory(law: &ProductLaw, energy: f64, seed: u64) -> Observable {
    let mut rng = RngStream::new(seed, 0xACE).rng_for(0);
    let batch = TRAJECTORY_STEPS / TRAJECTORY_BATCHES;
    let mut v = vec![0.0; batch];
    let (mut a, mut b) = (1.0f64, 0.0f64);
    let mut means = Vec::with_capacity(TRAJECTORY_BATCHES);
    for k in 0..TRAJECTORY_BATCHES {
        law.fill_sites((k * batch) as i64, &mut v, &mut rng).expect("sampling");
        let mut log = 0.0;
        for &x in &v {
            let next = (energy - x) * a - b;
            b = a;
            a = next;
            let r = a.hypot(b);
            log += r.ln();
            a /= r;
            b /= r;
        }
        means.push(log / batch as f64);
    }
    let (value, stderr) = mean_stderr(&means);
    Observable { value, stderr }
}

fn pin(o: &Observable) -> Pinned {
    Pinned {
        value: o.value,
        stderr: o.stderr,
        tolerance: if o.stderr == 0.0 { 1e-9 * o.value.abs().max(1.0) } else { 0.0 },
    }
}

fn refresh(dir: &Path, key: &str, entry: &mut PinEntry) -> Result<(), String> {
    let command = Command::from_name(&entry.command).ok_or_else(|| format!("{key}: unknown command {}", entry.command))?;
    let config = dir.join(&entry.config);
    let seed = entry.seed;
    let values: BTreeMap<String, Observable> = match entry.oracle.as_deref() {
        None => {
            let run = execute(&config, command, seed, None).map_err(|e| format!("{key}: {e:?}"))?;
            run.outcome.observables
        }
        Some("single_trajectory") => {
            let (cfg, _): (Config, _) =
                anderson_lab_cli::load(&config, command, seed).map_err(|e| format!("{key}: {e:?}"))?;
            let mut out = BTreeMap::new();
            for e in cfg.energies() {
                let o = single_trajectory(&cfg.law(), e.re, cfg.seed());
                for &n in &cfg.grids.n {
                    out.insert(format!("gamma(E={},n={n})", anderson_lab_cli::commands::energy_label(e)), o);
                }
            }
            out
        }
        Some(other) => return Err(format!("{key}: unknown oracle {other}")),
    };
    entry.values = values.iter().map(|(k, o)| (k.clone(), pin(o))).collect();
    Ok(())
}

fn main() -> ExitCode {
    let path = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("scenarios/expectations.json"));
    let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut all = match load_expectations(&path) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for (key, entry) in all.iter_mut() {
        eprintln!("pinning {key}");
        if let Err(e) = refresh(&dir, key, entry) {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let body = serde_json::to_string_pretty(&all).expect("serializable") + "\n";
    if let Err(e) = std::fs::write(&path, body) {
        eprintln!("error: {}: {e}", path.display());
        return ExitCode::from(2);
    }
    eprintln!("wrote {}", path.display());
    ExitCode::SUCCESS
}
