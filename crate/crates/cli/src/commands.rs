//! One function per subcommand. Each returns the CSV table, the JSON
//! report, named observables for pinning and the scenario's checks.

use std::collections::BTreeMap;

use anderson_lab::estimators::{
    craig_simon_scan, lde_curve, lift_check, lyapunov_closed_form, lyapunov_mc, lyapunov_mc_with, Estimate, FitKind,
    LdeOptions, LiftOptions,
};
use anderson_lab::experiments::{
    edge_bound_census, fit_decay, format_float, run_localization, singularity_census, Scenario, Table,
};
use anderson_lab::measures::{condition_report, sample_window, ProductLaw};
use anderson_lab::spectral::{eigenpairs_in, TridiagonalBox};
use anderson_lab::stats::TailEstimate;
use anderson_lab::transfer::Energy;
use anderson_lab::{Result, RngStream};
use serde::Serialize;
use serde_json::Value;

use crate::config::Config;
use crate::expect::{Check, Expect, Observable};
use crate::Command;

/// Stream ids per subcommand, so different analyses of one seed never share
/// randomness.
mod stream_ids {
    pub const LYAPUNOV: u64 = 1;
    pub const LDE: u64 = 2;
    pub const LIFT: u64 = 3;
    pub const CRAIG_SIMON: u64 = 5;
    pub const EDGE: u64 = 6;
    pub const SPECTRUM: u64 = 7;
    /// Child tag of the reference exponent inside a per-energy stream.
    pub const GAMMA: u64 = 100;
}

pub struct Outcome {
    pub table: Table,
    pub report: Value,
    pub observables: BTreeMap<String, Observable>,
    pub checks: Vec<Check>,
}

impl Outcome {
    fn new(table: Table, report: &impl Serialize) -> Self {
        Self {
            table,
            report: serde_json::to_value(report).expect("reports serialize"),
            observables: BTreeMap::new(),
            checks: Vec::new(),
        }
    }

    fn observe(&mut self, name: String, o: Observable) {
        self.observables.insert(name, o);
    }
}

fn progress(cmd: Command, msg: impl std::fmt::Display) {
    eprintln!("[{}] {msg}", cmd.name());
}

/// `0`, `-0.5`, `0.5+0.1i`.
pub fn energy_label(e: Energy) -> String {
    if e.is_real() {
        format!("{}", e.re)
    } else {
        format!("{}{:+}i", e.re, e.im)
    }
}

fn expect(cfg: &Config) -> Expect {
    cfg.experiment.expect.clone().unwrap_or_default()
}

pub fn execute(cmd: Command, cfg: &Config) -> Result<Outcome> {
    match cmd {
        Command::Lyapunov => lyapunov(cfg),
        Command::Lde => lde(cfg),
        Command::LiftCheck => lift(cfg),
        Command::Conditions => conditions(cfg),
        Command::Localize => localize(cfg),
        Command::Census => census(cfg),
        Command::EdgeCensus => edge(cfg),
        Command::CraigSimon => craig_simon(cfg),
        Command::Spectrum => spectrum(cfg),
    }
}

#[derive(Serialize)]
struct LyapunovRow {
    energy: Energy,
    n: u64,
    samples: u64,
    estimate: Estimate,
}

fn lyapunov(cfg: &Config) -> Result<Outcome> {
    let law = cfg.law();
    let stream = RngStream::new(cfg.seed(), stream_ids::LYAPUNOV);
    let s = &cfg.sampling;
    let mut t = Table::new(&[
        "scenario_id",
        "seed",
        "law_tag",
        "energy_re",
        "energy_im",
        "n",
        "samples",
        "mean",
        "stderr",
    ]);
    let mut rows = Vec::new();
    for e in cfg.energies() {
        for &n in &cfg.grids.n {
            let est = lyapunov_mc_with(&law, e, n, s.samples, stream, s.burn_in, false)?;
            progress(Command::Lyapunov, format!("E={} n={n}: {:.6} +- {:.2e}", energy_label(e), est.mean, est.stderr));
            t.push(vec![
                cfg.experiment.id.clone(),
                cfg.seed().to_string(),
                law.tag().as_str().into(),
                format_float(e.re),
                format_float(e.im),
                n.to_string(),
                s.samples.to_string(),
                format_float(est.mean),
                format_float(est.stderr),
            ]);
            rows.push(LyapunovRow {
                energy: e,
                n,
                samples: s.samples,
                estimate: Estimate::from(&est),
            });
        }
    }
    let mut out = Outcome::new(t, &rows);
    let ex = expect(cfg);
    for r in &rows {
        out.observe(
            format!("gamma(E={},n={})", energy_label(r.energy), r.n),
            Observable {
                value: r.estimate.value,
                stderr: r.estimate.stderr,
            },
        );
        if let Some(c) = ex.closed_form {
            let want = lyapunov_closed_form(c, r.energy);
            let tol = ex.tolerance.unwrap_or(1e-10);
            let diff = (r.estimate.value - want).abs();
            out.checks.push(Check::new(
                format!("closed form E={} n={}", energy_label(r.energy), r.n),
                diff <= tol,
                format!("|{} - {want}| = {diff:.3e}, tolerance {tol:.1e}", r.estimate.value),
            ));
        }
    }
    Ok(out)
}

fn epsilon_for(cfg: &Config, gamma: &Estimate) -> f64 {
    match (cfg.experiment.epsilon, cfg.experiment.epsilon_fraction) {
        (Some(e), _) => e,
        (None, Some(f)) => f * gamma.value,
        (None, None) => unreachable!("validated"),
    }
}

fn lde(cfg: &Config) -> Result<Outcome> {
    let law = cfg.law();
    let grid = &cfg.grids.n;
    let n_max = *grid.last().expect("validated");
    let stream = RngStream::new(cfg.seed(), stream_ids::LDE);
    let s = &cfg.sampling;
    let mut t = Table::new(&[
        "scenario_id",
        "seed",
        "law_tag",
        "statistic",
        "energy_re",
        "energy_im",
        "epsilon_eff",
        "gamma_hat",
        "n",
        "samples",
        "count",
        "p_hat",
        "p_stderr",
        "eta",
        "eta_stderr",
        "fit_kind",
    ]);
    let mut curves = Vec::new();
    for (k, e) in cfg.energies().into_iter().enumerate() {
        let sub = stream.child(k as u64);
        let gamma = Estimate::from(&lyapunov_mc(&law.stationary(), e, n_max, s.gamma_samples, sub.child(stream_ids::GAMMA))?);
        let eps = epsilon_for(cfg, &gamma);
        let options = LdeOptions {
            rate_exponent: cfg.experiment.rate_exponent,
            gamma: Some(gamma),
            gamma_samples: s.gamma_samples,
        };
        let c = lde_curve(&law, e, eps, grid, s.samples, sub, cfg.experiment.statistic, options)?;
        progress(Command::Lde, format!("E={}: eta = {:.4e} +- {:.2e} ({:?})", energy_label(e), c.fit.eta, c.fit.stderr, c.fit.kind));
        for (i, &n) in c.n_grid.iter().enumerate() {
            let tail = c.tail(i);
            t.push(vec![
                cfg.experiment.id.clone(),
                cfg.seed().to_string(),
                c.law_tag.as_str().into(),
                c.statistic.name(),
                format_float(e.re),
                format_float(e.im),
                format_float(c.epsilon_eff),
                format_float(c.gamma.value),
                n.to_string(),
                c.samples.to_string(),
                c.counts[i].to_string(),
                format_float(tail.p()),
                format_float(tail.stderr()),
                format_float(c.fit.eta),
                format_float(c.fit.stderr),
                serde_json::to_value(c.fit.kind).expect("enum").as_str().unwrap_or_default().into(),
            ]);
        }
        curves.push(c);
    }
    let mut out = Outcome::new(t, &curves);
    let ex = expect(cfg);
    for c in &curves {
        out.observe(
            format!("eta(E={})", energy_label(c.energy)),
            Observable {
                value: c.fit.eta,
                stderr: c.fit.stderr,
            },
        );
        if ex.eta_positive == Some(true) {
            let ok = c.fit.kind == FitKind::Fitted && c.fit.eta - c.fit.ci() > 0.0;
            out.checks.push(Check::new(
                format!("eta positive E={}", energy_label(c.energy)),
                ok,
                format!("eta = {} +- {} ({:?})", c.fit.eta, c.fit.ci(), c.fit.kind),
            ));
        }
    }
    Ok(out)
}

fn lift(cfg: &Config) -> Result<Outcome> {
    let base = cfg.base();
    let dens = cfg.densities();
    let p1 = ProductLaw::exact(base.clone());
    let grid = &cfg.grids.n;
    let n_max = *grid.last().expect("validated");
    let stream = RngStream::new(cfg.seed(), stream_ids::LIFT);
    let s = &cfg.sampling;
    let families = cfg
        .experiment
        .families
        .clone()
        .unwrap_or_else(|| LiftOptions::default().families);
    let mut t = Table::new(&[
        "scenario_id",
        "seed",
        "energy_re",
        "energy_im",
        "statistic",
        "n",
        "log_bound",
        "p0",
        "p0_stderr",
        "p1",
        "p1_stderr",
        "bounded",
        "eta_p0",
        "eta_p1",
        "eta0_max",
        "rate_holds",
    ]);
    let mut reports = Vec::new();
    for (k, e) in cfg.energies().into_iter().enumerate() {
        let sub = stream.child(k as u64);
        let gamma = Estimate::from(&lyapunov_mc(&p1, e, 2 * n_max + 1, s.gamma_samples, sub.child(stream_ids::GAMMA))?);
        let eps = epsilon_for(cfg, &gamma);
        let options = LiftOptions {
            families: families.clone(),
            lde: LdeOptions {
                rate_exponent: cfg.experiment.rate_exponent,
                gamma: Some(gamma),
                gamma_samples: s.gamma_samples,
            },
        };
        let r = lift_check(&dens, &base, e, eps, grid, s.samples, sub, &options)?;
        progress(
            Command::LiftCheck,
            format!("E={}: {} violation(s), eta0(n_max) = {:.4}", energy_label(e), r.violations.len(), r.eta0_max()),
        );
        for (f, fam) in r.families.iter().enumerate() {
            let name = fam.statistic.name();
            for (i, &n) in r.n_grid.iter().enumerate() {
                let (t0, t1) = r.tails(f, i);
                let bounded = !r.violations.iter().any(|v| v.statistic == name && v.n == n);
                t.push(vec![
                    cfg.experiment.id.clone(),
                    cfg.seed().to_string(),
                    format_float(e.re),
                    format_float(e.im),
                    name.clone(),
                    n.to_string(),
                    format_float(r.log_bound[i]),
                    format_float(t0.p()),
                    format_float(t0.stderr()),
                    format_float(t1.p()),
                    format_float(t1.stderr()),
                    bounded.to_string(),
                    format_float(fam.fit_p0.eta),
                    format_float(fam.fit_p1.eta),
                    format_float(r.eta0_max()),
                    fam.rate_check.holds.map_or("na".into(), |h| h.to_string()),
                ]);
            }
        }
        reports.push(r);
    }
    let mut out = Outcome::new(t, &reports);
    let ex = expect(cfg);
    for r in &reports {
        let label = energy_label(r.energy);
        out.observe(format!("violations(E={label})"), Observable::exact(r.violations.len() as f64));
        for fam in &r.families {
            let name = fam.statistic.name();
            out.observe(
                format!("eta_p0(E={label},{name})"),
                Observable {
                    value: fam.fit_p0.eta,
                    stderr: fam.fit_p0.stderr,
                },
            );
            out.observe(
                format!("eta_p1(E={label},{name})"),
                Observable {
                    value: fam.fit_p1.eta,
                    stderr: fam.fit_p1.stderr,
                },
            );
        }
        if ex.lift_holds == Some(true) {
            out.checks.push(Check::new(
                format!("product bound E={label}"),
                r.violations.is_empty(),
                format!("{} violation(s)", r.violations.len()),
            ));
            let failed: Vec<String> = r
                .families
                .iter()
                .filter(|f| f.rate_check.holds == Some(false))
                .map(|f| f.statistic.name())
                .collect();
            out.checks.push(Check::new(
                format!("lifted rate E={label}"),
                failed.is_empty(),
                if failed.is_empty() {
                    "every fitted family meets eta1 - eta0 - CI".to_string()
                } else {
                    format!("failed for {}", failed.join(", "))
                },
            ));
        }
    }
    Ok(out)
}

fn conditions(cfg: &Config) -> Result<Outcome> {
    let dens = cfg.densities();
    let r = condition_report(&dens, cfg.grids.condition_n_max, cfg.grids.condition_k_max);
    let mut t = Table::new(&["scenario_id", "condition", "verdict", "value_at_max", "slope"]);
    let trajectories = [&r.logmom, &r.logmomunif, &r.logsum];
    for tr in trajectories {
        progress(Command::Conditions, format!("{}={}", tr.name, tr.verdict.as_str()));
        t.push(vec![
            cfg.experiment.id.clone(),
            tr.name.clone(),
            tr.verdict.as_str().into(),
            format_float(tr.value_at_max),
            format_float(tr.slope),
        ]);
    }
    let mut out = Outcome::new(t, &r);
    for tr in trajectories {
        out.observe(format!("{}(N_max)", tr.name), Observable::exact(tr.value_at_max));
    }
    if let Some(want) = expect(cfg).verdicts {
        for (name, verdict) in want {
            let got = trajectories.iter().find(|t| t.name == name).map(|t| t.verdict.as_str());
            out.checks.push(Check::new(
                format!("verdict {name}"),
                got == Some(verdict.as_str()),
                format!("expected {verdict}, got {}", got.unwrap_or("no such condition")),
            ));
        }
    }
    Ok(out)
}

/// The localization scenario described by a config.
pub fn scenario(cfg: &Config) -> Scenario {
    let e = &cfg.experiment;
    let mut s = Scenario::new(e.id.clone(), cfg.seed(), cfg.base(), cfg.densities());
    s.interval = e.interval;
    s.energy_grid = cfg.grids.energy.clone();
    s.n_grid = cfg.grids.n.clone();
    if let Some(h) = e.box_half_width {
        s.box_half_width = h;
    }
    s.gamma_n = cfg.sampling.gamma_n;
    s.gamma_samples = cfg.sampling.gamma_samples;
    s.epsilon0 = e.epsilon0;
    s
}

fn localize(cfg: &Config) -> Result<Outcome> {
    let r = run_localization(&scenario(cfg))?;
    if let Some(w) = &r.nu.warning {
        progress(Command::Localize, format!("warning: nu_I {w}"));
    }
    progress(
        Command::Localize,
        format!("{} eigenfunctions in I, pass fraction {:.3}, nu_I = {:.4}", r.rows.len(), r.pass_fraction, r.nu.nu),
    );
    let mut out = Outcome::new(r.table(), &r);
    out.observe("pass_fraction".into(), Observable::exact(r.pass_fraction));
    out.observe("eigenfunctions".into(), Observable::exact(r.rows.len() as f64));
    out.observe("nu".into(), Observable::exact(r.nu.nu));
    if let Some(m) = expect(cfg).min_pass_fraction {
        out.checks.push(Check::new(
            "pass fraction",
            r.pass_fraction >= m,
            format!("{:.4} of {} eigenfunctions, required {m}", r.pass_fraction, r.rows.len()),
        ));
    }
    Ok(out)
}

fn census(cfg: &Config) -> Result<Outcome> {
    let r = singularity_census(&scenario(cfg))?;
    progress(
        Command::Census,
        format!("{} energies, zero from n = {:?}", r.energies.len(), r.zero_from),
    );
    let mut out = Outcome::new(r.table(), &r);
    out.observe(
        "zero_from".into(),
        Observable::exact(r.zero_from.map_or(f64::NAN, |z| z as f64)),
    );
    if let Some(limit) = expect(cfg).zero_before {
        out.checks.push(Check::new(
            "census reaches zero",
            r.zero_from.is_some_and(|z| z < limit),
            format!("zero from {:?}, required below {limit}", r.zero_from),
        ));
    }
    Ok(out)
}

fn edge(cfg: &Config) -> Result<Outcome> {
    let law = cfg.law();
    let e = &cfg.experiment;
    let alpha = e.alpha.unwrap_or_else(|| law.base().alpha_moment());
    let r = edge_bound_census(
        &law,
        alpha,
        e.p,
        &e.r,
        &cfg.grids.n,
        cfg.sampling.samples,
        RngStream::new(cfg.seed(), stream_ids::EDGE),
    )?;
    for tr in &r.trends {
        progress(Command::EdgeCensus, format!("r={}: slope {:?}, summable {}", tr.r, tr.slope, tr.summable));
    }
    let mut out = Outcome::new(r.table(), &r);
    for row in &r.rows {
        let tail = TailEstimate::new(row.violations, row.trials);
        out.observe(
            format!("frequency(n={},r={})", row.n, row.r),
            Observable {
                value: tail.p(),
                stderr: tail.stderr(),
            },
        );
    }
    let ex = expect(cfg);
    if ex.within_tolerance == Some(true) {
        for row in &r.rows {
            out.checks.push(Check::new(
                format!("edge frequency n={} r={}", row.n, row.r),
                row.within_tolerance && row.predicted <= row.chebyshev_bound,
                format!(
                    "frequency {} vs predicted {} (bound {})",
                    row.frequency, row.predicted, row.chebyshev_bound
                ),
            ));
        }
    }
    if let Some(p) = ex.persistent {
        out.checks.push(Check::new(
            "persistent violations",
            r.persistent() == p,
            format!("flagged {}, expected {p}", r.persistent()),
        ));
    }
    Ok(out)
}

fn craig_simon(cfg: &Config) -> Result<Outcome> {
    let law = cfg.law();
    let grid = &cfg.grids.n;
    let n_max = *grid.last().expect("validated") as i64;
    let stream = RngStream::new(cfg.seed(), stream_ids::CRAIG_SIMON);
    let window = sample_window(&law, -n_max, 3 * n_max, stream.child(1))?;
    let energies = cfg.grids.energies();
    let s = &cfg.sampling;
    let stationary = law.stationary();
    let gamma = energies
        .iter()
        .map(|&e| lyapunov_mc(&stationary, Energy::real(e), s.gamma_n, s.gamma_samples, stream.child(2)).map(|l| l.mean))
        .collect::<Result<Vec<f64>>>()?;
    let r = craig_simon_scan(&window, &energies, &gamma, grid)?;
    progress(Command::CraigSimon, format!("max excess {:.4}", r.max_excess()));
    let mut t = Table::new(&["scenario_id", "seed", "law_tag", "n", "family", "max_excess", "argmax_energy"]);
    for row in &r.rows {
        t.push(vec![
            cfg.experiment.id.clone(),
            cfg.seed().to_string(),
            law.tag().as_str().into(),
            row.n.to_string(),
            row.family.as_str().into(),
            format_float(row.max_excess),
            format_float(row.argmax_energy),
        ]);
    }
    let mut out = Outcome::new(t, &r);
    for &n in grid {
        let worst = r
            .rows
            .iter()
            .filter(|x| x.n == n)
            .map(|x| x.max_excess)
            .fold(f64::NEG_INFINITY, f64::max);
        out.observe(format!("max_excess(n={n})"), Observable::exact(worst));
    }
    if let Some(bound) = expect(cfg).max_excess_below {
        for row in r.rows.iter().filter(|x| x.n == n_max as u64) {
            out.checks.push(Check::new(
                format!("excess {} n={}", row.family.as_str(), row.n),
                row.max_excess < bound,
                format!("{} at E = {}, required below {bound}", row.max_excess, row.argmax_energy),
            ));
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct SpectrumRow {
    j: usize,
    eigenvalue: f64,
    residual: f64,
    center: i64,
    decay_rate: f64,
}

fn spectrum(cfg: &Config) -> Result<Outcome> {
    let law = cfg.law();
    let h = cfg.experiment.box_half_width.unwrap_or(200) as i64;
    let [lo, hi] = cfg.experiment.window.unwrap_or([-h, h - 1]);
    let window = sample_window(&law, lo, hi, RngStream::new(cfg.seed(), stream_ids::SPECTRUM))?;
    let bx = TridiagonalBox::new(window);
    let [s, t_hi] = cfg.experiment.interval;
    let pairs = eigenpairs_in(&bx, s, t_hi)?;
    progress(Command::Spectrum, format!("{} eigenvalues in [{s}, {t_hi}] for box [{lo}, {hi}]", pairs.len()));
    let mut t = Table::new(&[
        "scenario_id",
        "seed",
        "law_tag",
        "box_lo",
        "box_hi",
        "j",
        "eigenvalue",
        "residual",
        "center",
        "decay_rate",
    ]);
    let mut rows = Vec::new();
    for (j, p) in pairs.iter().enumerate() {
        let fit = fit_decay(&p.vector, bx.lo());
        t.push(vec![
            cfg.experiment.id.clone(),
            cfg.seed().to_string(),
            law.tag().as_str().into(),
            lo.to_string(),
            hi.to_string(),
            j.to_string(),
            format_float(p.value),
            format_float(p.residual),
            fit.center.to_string(),
            format_float(fit.rate),
        ]);
        rows.push(SpectrumRow {
            j,
            eigenvalue: p.value,
            residual: p.residual,
            center: fit.center,
            decay_rate: fit.rate,
        });
    }
    let mut out = Outcome::new(t, &rows);
    out.observe("eigenvalues".into(), Observable::exact(rows.len() as f64));
    Ok(out)
}
