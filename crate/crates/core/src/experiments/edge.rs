//! Heavy-tail edge bound: how often `|V_m| > n^(r/alpha)` for sites within
//! `p log n` of the window edges `+-n`.

use serde::{Deserialize, Serialize};

use super::persist::{format_float, Table};
use crate::error::{invalid, Result};
use crate::measures::ProductLaw;
use crate::numeric::serde_float;
use crate::parallel::try_map_indexed;
use crate::rng::RngStream;
use crate::stats::{fit_line, TailEstimate, SIGMA_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRow {
    pub n: u64,
    pub r: f64,
    /// `n^(r/alpha)`.
    pub threshold: f64,
    pub zone_sites: usize,
    pub trials: u64,
    /// Trials with at least one zone site above the threshold.
    pub violations: u64,
    /// Zone sites above the threshold, summed over trials.
    pub violating_sites: u64,
    pub frequency: f64,
    /// Exact `P(max over the zones |V_m| > threshold)`.
    pub predicted: f64,
    /// `2 C (1 + 2 p log n) / n^r` with `C = sup_m int |x|^alpha g_m dmu`.
    #[serde(with = "serde_float")]
    pub chebyshev_bound: f64,
    pub within_tolerance: bool,
}

/// Trend of the violation frequency in `n` for one `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTrend {
    pub r: f64,
    /// Slope of `log frequency` against `log n` over grid points with
    /// violations.
    pub slope: Option<f64>,
    /// Frequencies decay faster than `1/n` (summable along the grid), so
    /// violations stop eventually.
    pub summable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub alpha: f64,
    pub p: f64,
    pub rows: Vec<EdgeRow>,
    pub trends: Vec<EdgeTrend>,
}

impl EdgeReport {
    pub const COLUMNS: [&'static str; 11] = [
        "n",
        "r",
        "threshold",
        "zone_sites",
        "trials",
        "violations",
        "frequency",
        "predicted",
        "chebyshev_bound",
        "within_tolerance",
        "summable",
    ];

    /// Violations persist along the grid for some `r`.
    pub fn persistent(&self) -> bool {
        self.trends.iter().any(|t| !t.summable)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&Self::COLUMNS);
        for row in &self.rows {
            let summable = self.trends.iter().find(|x| x.r == row.r).is_some_and(|x| x.summable);
            t.push(vec![
                row.n.to_string(),
                format_float(row.r),
                format_float(row.threshold),
                row.zone_sites.to_string(),
                row.trials.to_string(),
                row.violations.to_string(),
                format_float(row.frequency),
                format_float(row.predicted),
                format_float(row.chebyshev_bound),
                row.within_tolerance.to_string(),
                summable.to_string(),
            ]);
        }
        t
    }
}

/// Sites `m` with `|m + n| <= p log n` or `|m - n| <= p log n`, ascending.
pub fn edge_zone(n: u64, p: f64) -> Vec<i64> {
    let w = (p * (n as f64).ln()).floor().max(0.0) as i64;
    let n = n as i64;
    let mut sites: Vec<i64> = (-n - w..=-n + w).chain(n - w..=n + w).collect();
    sites.sort_unstable();
    sites.dedup();
    sites
}

/// Monte Carlo census of edge-zone violations of `|V_m| <= n^(r/alpha)`
/// for each `r`, compared with the exact tail probability. All `r` share the
/// same samples.
#[allow(clippy::too_many_arguments)]
pub fn edge_bound_census(
    law: &ProductLaw,
    alpha: f64,
    p: f64,
    r_values: &[f64],
    n_grid: &[u64],
    trials: u64,
    stream: RngStream,
) -> Result<EdgeReport> {
    if !(alpha > 0.0) {
        return Err(invalid("alpha", "must be positive"));
    }
    if !(p > 0.0) {
        return Err(invalid("p", "must be positive"));
    }
    if r_values.is_empty() || r_values.iter().any(|&r| !(r > 1.0)) {
        return Err(invalid("r", "every r must exceed 1"));
    }
    if n_grid.is_empty() || n_grid.iter().any(|&n| n < 2) || trials == 0 {
        return Err(invalid("n_grid", "n must be at least 2 and trials positive"));
    }
    let mut rows = Vec::new();
    for &n in n_grid {
        let zone = edge_zone(n, p);
        let thresholds: Vec<f64> = r_values.iter().map(|r| (n as f64).powf(r / alpha)).collect();
        let sub = stream.child(n);
        // per trial: per r (trial violated, violating sites)
        let per_trial = try_map_indexed(trials as usize, |i| {
            let mut rng = sub.rng_for(i as u64);
            let mut values = Vec::with_capacity(zone.len());
            for &m in &zone {
                values.push(law.sample_site(m, &mut rng)?.abs());
            }
            Ok(thresholds
                .iter()
                .map(|&t| {
                    let k = values.iter().filter(|&&v| v > t).count() as u64;
                    (k > 0, k)
                })
                .collect::<Vec<_>>())
        })?;
        let moment = zone.iter().map(|&m| law.site_moment(m, alpha)).fold(0.0, f64::max);
        for (k, (&r, &t)) in r_values.iter().zip(&thresholds).enumerate() {
            let violations = per_trial.iter().filter(|x| x[k].0).count() as u64;
            let violating_sites = per_trial.iter().map(|x| x[k].1).sum();
            let log_none: f64 = zone.iter().map(|&m| (-law.site_tail(m, t)).ln_1p()).sum();
            let predicted = -log_none.exp_m1();
            let chebyshev_bound = 2.0 * moment * (1.0 + 2.0 * p * (n as f64).ln()) / (n as f64).powf(r);
            let est = TailEstimate::new(violations, trials);
            rows.push(EdgeRow {
                n,
                r,
                threshold: t,
                zone_sites: zone.len(),
                trials,
                violations,
                violating_sites,
                frequency: est.p(),
                predicted,
                chebyshev_bound,
                within_tolerance: (est.p() - predicted).abs() <= SIGMA_TOLERANCE * est.stderr(),
            });
        }
    }
    let trends = r_values
        .iter()
        .map(|&r| {
            let pts: Vec<&EdgeRow> = rows.iter().filter(|x| x.r == r).collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts
                .iter()
                .filter(|x| x.violations > 0)
                .map(|x| ((x.n as f64).ln(), x.frequency.ln()))
                .unzip();
            let slope = fit_line(&xs, &ys).map(|f| f.slope);
            let last_zero = pts.last().is_some_and(|x| x.violations == 0);
            let summable = match slope {
                Some(s) => s < -1.0,
                None => last_zero,
            };
            EdgeTrend { r, slope, summable }
        })
        .collect();
    Ok(EdgeReport {
        alpha,
        p,
        rows,
        trends,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::BaseMeasure;

    #[test]
    fn zones_are_symmetric() {
        let z = edge_zone(20, 1.0);
        // floor(log 20) = 2
        assert_eq!(z, vec![-22, -21, -20, -19, -18, 18, 19, 20, 21, 22]);
    }

    #[test]
    fn bounded_law_never_violates() {
        let law = ProductLaw::exact(BaseMeasure::bernoulli(-1.0, 1.0, 0.5).unwrap());
        let r = edge_bound_census(&law, 2.0, 1.0, &[1.5, 3.0], &[4, 16, 64], 500, RngStream::new(1, 0)).unwrap();
        assert!(r.rows.iter().all(|x| x.violations == 0 && x.predicted == 0.0));
        assert!(!r.persistent());
    }

    #[test]
    fn monotone_in_r() {
        let law = ProductLaw::exact(BaseMeasure::pareto(1.0, 1.5, true, 1.0).unwrap());
        let r = edge_bound_census(&law, 1.0, 1.0, &[1.2, 2.0, 3.0], &[4, 8], 2000, RngStream::new(2, 0)).unwrap();
        for n in [4, 8] {
            let f: Vec<u64> = r.rows.iter().filter(|x| x.n == n).map(|x| x.violations).collect();
            assert!(f.windows(2).all(|w| w[0] >= w[1]), "{f:?}");
        }
        for row in &r.rows {
            assert!(row.predicted <= row.chebyshev_bound);
        }
    }
}
