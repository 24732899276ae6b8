//! Finite-N diagnostics for the three growth conditions on
//! `log ||g_n||_inf`: vanishing averages around a fixed center, vanishing
//! averages uniformly in the center, and summability.

use serde::{Deserialize, Serialize};

use super::DensitySequence;
use crate::numeric::{exact_sum, ExactSum};
use crate::stats::fit_line;

/// A trajectory counts as vanishing below this value at `N_max`.
pub const CONDITION_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    HoldsEmpirically,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::HoldsEmpirically => "holds",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionTrajectory {
    pub name: String,
    pub values: Vec<f64>,
    pub value_at_max: f64,
    /// Least-squares slope against `ln N` over the last decade of the grid.
    pub slope: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub n_grid: Vec<u64>,
    pub k_max: u64,
    /// `(1/N) sum_{|n| <= N} log ||g_n||`.
    pub logmom: ConditionTrajectory,
    /// `sup_{|k| <= K} (1/N) sum_{|n-k| <= N} log ||g_n||`.
    pub logmomunif: ConditionTrajectory,
    /// Mass added over the last decade, `S(N) - S(N/10)` with
    /// `S(N) = sum_{|n| <= N} log ||g_n||`.
    pub logsum: ConditionTrajectory,
    pub logsum_partial_sums: Vec<f64>,
}

/// `(1/N) sum_{n=k-N}^{k+N} log ||g_n||_inf`, summed exactly.
pub fn sup_norm_log_partials(seq: &DensitySequence, n: u64, centered_at: i64) -> f64 {
    assert!(n >= 1, "N must be at least 1");
    let n_i = n as i64;
    exact_sum((centered_at - n_i..=centered_at + n_i).map(|m| seq.sup_norm(m).ln())) / n as f64
}

/// Log-spaced grid of `N` values in `[1, n_max]` (20 per decade).
pub fn log_grid(n_max: u64) -> Vec<u64> {
    let mut grid: Vec<u64> = (0..)
        .map(|j| 10f64.powf(j as f64 / 20.0).round() as u64)
        .take_while(|&n| n <= n_max)
        .collect();
    grid.push(n_max);
    grid.dedup();
    grid
}

pub fn condition_report(seq: &DensitySequence, n_max: u64, k_max: u64) -> ConditionReport {
    let n_max = n_max.max(1);
    let grid = log_grid(n_max);
    let reach = (k_max + n_max) as i64;
    // prefix[i] = sum over sites -reach .. -reach + i - 1
    let logs: Vec<f64> = (-reach..=reach).map(|m| seq.sup_norm(m).ln()).collect();
    let mut prefix = Vec::with_capacity(logs.len() + 1);
    let mut acc = ExactSum::new();
    prefix.push(0.0);
    for &l in &logs {
        acc.add(l);
        prefix.push(acc.value());
    }
    let window_sum = |center: i64, n: i64| -> f64 {
        let a = (center - n + reach) as usize;
        let b = (center + n + reach) as usize + 1;
        prefix[b] - prefix[a]
    };

    let mut logmom = Vec::with_capacity(grid.len());
    let mut unif = Vec::with_capacity(grid.len());
    let mut partial = Vec::with_capacity(grid.len());
    let mut tail = Vec::with_capacity(grid.len());
    for &n in &grid {
        let ni = n as i64;
        let s = window_sum(0, ni);
        logmom.push(s / n as f64);
        let sup = (-(k_max as i64)..=k_max as i64)
            .map(|k| window_sum(k, ni))
            .fold(f64::NEG_INFINITY, f64::max);
        unif.push(sup / n as f64);
        partial.push(s);
        let inner = window_sum(0, ni / 10);
        tail.push(s - inner);
    }

    let logmom = trajectory("logmom", &grid, logmom);
    let mut logmomunif = trajectory("logmomunif", &grid, unif);
    let mut logsum = trajectory("logsum", &grid, tail);
    // The conditions are nested: summability => uniform => fixed center.
    if logmom.verdict != Verdict::HoldsEmpirically && logmomunif.verdict == Verdict::HoldsEmpirically {
        logmomunif.verdict = Verdict::Inconclusive;
    }
    if logmomunif.verdict != Verdict::HoldsEmpirically && logsum.verdict == Verdict::HoldsEmpirically {
        logsum.verdict = Verdict::Inconclusive;
    }
    ConditionReport {
        n_grid: grid,
        k_max,
        logmom,
        logmomunif,
        logsum,
        logsum_partial_sums: partial,
    }
}

fn trajectory(name: &str, grid: &[u64], values: Vec<f64>) -> ConditionTrajectory {
    let n_max = *grid.last().expect("non-empty grid");
    let (xs, ys): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .zip(&values)
        .filter(|(n, _)| **n * 10 >= n_max)
        .map(|(n, v)| ((*n as f64).ln(), *v))
        .unzip();
    let slope = fit_line(&xs, &ys).map_or(0.0, |f| f.slope);
    let value_at_max = *values.last().expect("non-empty");
    let verdict = if value_at_max >= CONDITION_TOLERANCE {
        Verdict::Violated
    } else if slope <= 1e-12 {
        Verdict::HoldsEmpirically
    } else {
        Verdict::Inconclusive
    };
    ConditionTrajectory {
        name: name.to_string(),
        values,
        value_at_max,
        slope,
        verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{BaseMeasure, SiteSet};

    fn e_bumps() -> DensitySequence {
        let base = BaseMeasure::uniform(-1.0, 1.0).unwrap();
        DensitySequence::bump(&base, SiteSet::Dyadic, std::f64::consts::E, 0.25).unwrap()
    }

    #[test]
    fn identity_partials_vanish() {
        for n in [1, 5, 100] {
            assert_eq!(sup_norm_log_partials(&DensitySequence::Identity, n, 3), 0.0);
        }
    }

    #[test]
    fn constant_two_partials() {
        let coin = BaseMeasure::bernoulli(-1.0, 1.0, 0.5).unwrap();
        let seq = DensitySequence::atom_reweight(&coin, vec![(SiteSet::All, vec![1.0, 0.0])]).unwrap();
        for n in [1u64, 7, 50] {
            let v = sup_norm_log_partials(&seq, n, 0);
            let want = (2.0 + 1.0 / n as f64) * 2f64.ln();
            assert!((v - want).abs() < 1e-14, "{v} {want}");
        }
    }

    #[test]
    fn dyadic_bumps_bounded_by_direct_summation() {
        let coin = BaseMeasure::bernoulli(-1.0, 1.0, 0.5).unwrap();
        let seq = DensitySequence::atom_reweight(&coin, vec![(SiteSet::Dyadic, vec![1.0, 0.0])]).unwrap();
        for n in [1u64, 2, 3, 10, 64, 1000, 4097] {
            // oracle: count dyadic sites in [-N, N] directly
            let count = (-(n as i64)..=n as i64)
                .filter(|m| *m != 0 && m.unsigned_abs().is_power_of_two())
                .count() as f64;
            let v = sup_norm_log_partials(&seq, n, 0);
            assert!((v - count * 2f64.ln() / n as f64).abs() < 1e-13);
            let bound = 2.0 * 2f64.ln() * ((n as f64).log2() + 1.0) / n as f64;
            assert!(v <= bound + 1e-15, "N={n}: {v} > {bound}");
        }
    }

    #[test]
    fn report_identity_all_hold() {
        let r = condition_report(&DensitySequence::Identity, 1000, 50);
        for t in [&r.logmom, &r.logmomunif, &r.logsum] {
            assert_eq!(t.verdict, Verdict::HoldsEmpirically, "{}", t.name);
            assert!(t.values.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn report_constant_violates() {
        let coin = BaseMeasure::bernoulli(-1.0, 1.0, 0.5).unwrap();
        let seq = DensitySequence::atom_reweight(&coin, vec![(SiteSet::All, vec![1.0, 0.0])]).unwrap();
        let r = condition_report(&seq, 1000, 20);
        assert_eq!(r.logmom.verdict, Verdict::Violated);
        assert!((r.logmom.value_at_max - 2.0 * 2f64.ln()).abs() < 0.01);
    }

    #[test]
    fn report_bumps_split_verdicts() {
        let seq = e_bumps();
        let r = condition_report(&seq, 10_000, 1000);
        assert_eq!(r.logmom.verdict, Verdict::HoldsEmpirically);
        assert_eq!(r.logmomunif.verdict, Verdict::HoldsEmpirically);
        assert_eq!(r.logsum.verdict, Verdict::Violated);
        // partial sums grow like 2 log2 N (one unit of log per bump)
        let n = *r.n_grid.last().unwrap() as f64;
        let s = *r.logsum_partial_sums.last().unwrap();
        assert!((s - 2.0 * (n.log2().floor() + 1.0)).abs() < 1e-9, "{s}");
    }

    #[test]
    fn finite_perturbation_is_summable() {
        let coin = BaseMeasure::bernoulli(-1.0, 1.0, 0.5).unwrap();
        let seq = DensitySequence::atom_reweight(
            &coin,
            vec![(SiteSet::Sites { sites: vec![0, 3] }, vec![0.9, 0.1])],
        )
        .unwrap();
        let r = condition_report(&seq, 5000, 100);
        assert_eq!(r.logsum.verdict, Verdict::HoldsEmpirically);
        assert_eq!(r.logmomunif.verdict, Verdict::HoldsEmpirically);
        assert_eq!(r.logmom.verdict, Verdict::HoldsEmpirically);
    }

    #[test]
    fn grid_is_increasing_and_ends_at_max() {
        let g = log_grid(1234);
        assert_eq!(*g.last().unwrap(), 1234);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(g[0], 1);
    }
}
