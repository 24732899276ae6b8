//! Empirical large-deviation curves and the lifting bound between the
//! stationary law `P1` and a perturbed law `P0`.

use serde::{Deserialize, Serialize};

use super::{lyapunov_mc, tags, Estimate};
use crate::error::{invalid, Result};
use crate::measures::{BaseMeasure, DensitySequence, LawTag, ProductLaw};
use crate::numeric::{serde_float, ExactSum, Scalar};
use crate::parallel::try_map_indexed;
use crate::rng::RngStream;
use crate::stats::{bounded_by, combined_stderr, fit_line, slope_weights, TailEstimate, SIGMA_TOLERANCE};
use crate::transfer::{matrix_element, Energy, ScaledMatrix};

/// Minimum tail count for a grid point to enter the rate fit.
pub const MIN_FIT_COUNT: u64 = 5;
/// Default number of samples for the reference exponent.
pub const DEFAULT_GAMMA_SAMPLES: u64 = 2000;

/// The log-statistic of a transfer product whose deviations are counted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Statistic {
    /// `log ||S||`.
    LogNorm,
    /// `log |P|`, the upper-left entry of `S`.
    LogDet,
    /// `log |<u, S v>|`.
    MatrixElement { u: [f64; 2], v: [f64; 2] },
}

impl Statistic {
    pub fn name(&self) -> String {
        match self {
            Statistic::LogNorm => "log_norm".into(),
            Statistic::LogDet => "log_det".into(),
            Statistic::MatrixElement { u, v } => format!("matrix_element({},{};{},{})", u[0], u[1], v[0], v[1]),
        }
    }

    /// `<e_+, S e_+>` with `e_+ = (1, 1)/sqrt 2`.
    pub fn diagonal_element() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Statistic::MatrixElement { u: [s, s], v: [s, s] }
    }

    pub fn validate(&self) -> Result<()> {
        if let Statistic::MatrixElement { u, v } = self {
            for w in [u, v] {
                let n = (w[0] * w[0] + w[1] * w[1]).sqrt();
                if (n - 1.0).abs() > 1e-12 {
                    return Err(invalid("statistic", format!("matrix element vectors must be unit, got norm {n}")));
                }
            }
        }
        Ok(())
    }

    fn eval<T: Scalar>(&self, s: &ScaledMatrix<T>) -> f64 {
        match self {
            Statistic::LogNorm => s.log_norm(),
            Statistic::LogDet => s.entry(0, 0).log_mag,
            Statistic::MatrixElement { u, v } => {
                let u = [T::from_real(u[0]), T::from_real(u[1])];
                let v = [T::from_real(v[0]), T::from_real(v[1])];
                matrix_element(u, s, v).map_or(f64::NAN, |m| m.log_mag)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    /// Least squares over at least two qualifying grid points.
    Fitted,
    /// No tail event at all: `eta >= log(samples) / n_max^q`.
    LowerBound,
    /// One qualifying point: `eta = -log p / n^q`.
    SinglePoint,
    /// Some events but none reaching the count cutoff.
    Insufficient,
}

/// Rate of `P[deviation at n] ~ exp(-eta n^q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaFit {
    pub kind: FitKind,
    #[serde(with = "serde_float")]
    pub eta: f64,
    #[serde(with = "serde_float")]
    pub stderr: f64,
    pub points: usize,
}

impl EtaFit {
    /// Half-width of the `SIGMA_TOLERANCE` confidence interval.
    pub fn ci(&self) -> f64 {
        SIGMA_TOLERANCE * self.stderr
    }
}

/// Fit `log p_hat(n) = c - eta n^q` over grid points with at least
/// [`MIN_FIT_COUNT`] events. The slope error combines the residual scatter
/// with the binomial error of each `log p_hat`.
pub fn fit_rate(n_grid: &[u64], counts: &[u64], samples: u64, q: f64) -> EtaFit {
    let n_max = n_grid.iter().copied().max().unwrap_or(1) as f64;
    if counts.iter().all(|&c| c == 0) {
        return EtaFit {
            kind: FitKind::LowerBound,
            eta: (samples as f64).ln() / n_max.powf(q),
            stderr: 0.0,
            points: 0,
        };
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut vars = Vec::new();
    for (&n, &c) in n_grid.iter().zip(counts) {
        if c >= MIN_FIT_COUNT {
            let p = c as f64 / samples as f64;
            xs.push((n as f64).powf(q));
            ys.push(p.ln());
            vars.push((1.0 - p) / c as f64);
        }
    }
    match xs.len() {
        0 => EtaFit {
            kind: FitKind::Insufficient,
            eta: f64::NAN,
            stderr: f64::NAN,
            points: 0,
        },
        1 => EtaFit {
            kind: FitKind::SinglePoint,
            eta: -ys[0] / xs[0],
            stderr: vars[0].sqrt() / xs[0],
            points: 1,
        },
        _ => {
            let Some(fit) = fit_line(&xs, &ys) else {
                return EtaFit {
                    kind: FitKind::Insufficient,
                    eta: f64::NAN,
                    stderr: f64::NAN,
                    points: xs.len(),
                };
            };
            let w = slope_weights(&xs);
            let binom: f64 = w.iter().zip(&vars).map(|(w, v)| w * w * v).sum();
            let resid = if fit.slope_stderr.is_finite() { fit.slope_stderr.powi(2) } else { 0.0 };
            EtaFit {
                kind: FitKind::Fitted,
                eta: -fit.slope,
                stderr: (resid + binom).sqrt(),
                points: xs.len(),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdeOptions {
    /// `q` in the rate function `eta n^q`; 1 or 1/2.
    pub rate_exponent: f64,
    /// Reference exponent; estimated at `n_max` when absent.
    pub gamma: Option<Estimate>,
    pub gamma_samples: u64,
}

impl Default for LdeOptions {
    fn default() -> Self {
        Self {
            rate_exponent: 1.0,
            gamma: None,
            gamma_samples: DEFAULT_GAMMA_SAMPLES,
        }
    }
}

impl LdeOptions {
    fn validate(&self) -> Result<()> {
        if self.rate_exponent != 1.0 && self.rate_exponent != 0.5 {
            return Err(invalid("rate_exponent", "must be 1 or 0.5"));
        }
        if self.gamma.is_none() && self.gamma_samples == 0 {
            return Err(invalid("gamma_samples", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdeCurve {
    pub energy: Energy,
    pub epsilon: f64,
    /// `epsilon - 2 stderr(gamma_hat)`, the threshold actually applied.
    pub epsilon_eff: f64,
    pub gamma: Estimate,
    pub statistic: Statistic,
    pub n_grid: Vec<u64>,
    pub counts: Vec<u64>,
    pub samples: u64,
    pub fit: EtaFit,
    pub rate_exponent: f64,
    pub law_tag: LawTag,
}

impl LdeCurve {
    pub fn tail(&self, k: usize) -> TailEstimate {
        TailEstimate::new(self.counts[k], self.samples)
    }
}

fn check_grid(n_grid: &[u64]) -> Result<()> {
    if n_grid.is_empty() || n_grid[0] == 0 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("n_grid", "must be non-empty, positive and strictly increasing"));
    }
    Ok(())
}

fn epsilon_eff(epsilon: f64, gamma: &Estimate) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon", "must be positive"));
    }
    let eff = epsilon - 2.0 * gamma.stderr;
    if !(eff > 0.0) {
        return Err(invalid(
            "epsilon",
            format!("epsilon {epsilon} does not exceed twice the exponent stderr {}", gamma.stderr),
        ));
    }
    Ok(eff)
}

#[inline]
fn deviates(stat: f64, len: f64, gamma: f64, eps: f64) -> bool {
    // NaN (and -inf) statistics count as deviations.
    !((stat / len - gamma).abs() <= eps)
}

/// Tail flags of sites `1..=n` for each grid `n` in one nested pass.
fn one_sided_flags<T: Scalar>(e: T, values: &[f64], grid: &[u64], stat: &Statistic, gamma: f64, eps: f64) -> Vec<bool> {
    let mut s = ScaledMatrix::<T>::identity();
    let mut out = Vec::with_capacity(grid.len());
    let mut next = 0;
    for (k, &v) in values.iter().enumerate() {
        s.push_left_step(e - T::from_real(v));
        while next < grid.len() && grid[next] == k as u64 + 1 {
            out.push(deviates(stat.eval(&s), grid[next] as f64, gamma, eps));
            next += 1;
        }
    }
    out
}

fn count_flags(flags: &[Vec<bool>], len: usize) -> Vec<u64> {
    let mut counts = vec![0u64; len];
    for f in flags {
        for (c, &b) in counts.iter_mut().zip(f) {
            *c += b as u64;
        }
    }
    counts
}

/// Empirical `P[|stat_n / n - gamma| > eps]` over `n_grid` for windows
/// `V_1..V_n`, with the fitted rate.
#[allow(clippy::too_many_arguments)]
pub fn lde_curve(
    law: &ProductLaw,
    energy: Energy,
    epsilon: f64,
    n_grid: &[u64],
    samples: u64,
    stream: RngStream,
    statistic: Statistic,
    options: LdeOptions,
) -> Result<LdeCurve> {
    check_grid(n_grid)?;
    statistic.validate()?;
    options.validate()?;
    if samples == 0 {
        return Err(invalid("samples", "must be positive"));
    }
    let n_max = *n_grid.last().expect("non-empty grid");
    let gamma = match options.gamma {
        Some(g) => g,
        None => Estimate::from(&lyapunov_mc(
            &law.stationary(),
            energy,
            n_max,
            options.gamma_samples,
            stream.child(tags::GAMMA),
        )?),
    };
    let eps = epsilon_eff(epsilon, &gamma)?;
    let sample_stream = stream.child(tags::SAMPLES);
    let flags = try_map_indexed(samples as usize, |i| {
        let mut values = vec![0.0; n_max as usize];
        let mut rng = sample_stream.rng_for(i as u64);
        law.fill_sites(1, &mut values, &mut rng)?;
        Ok(if energy.is_real() {
            one_sided_flags(energy.re, &values, n_grid, &statistic, gamma.value, eps)
        } else {
            one_sided_flags(energy.as_complex(), &values, n_grid, &statistic, gamma.value, eps)
        })
    })?;
    let counts = count_flags(&flags, n_grid.len());
    let fit = fit_rate(n_grid, &counts, samples, options.rate_exponent);
    Ok(LdeCurve {
        energy,
        epsilon,
        epsilon_eff: eps,
        gamma,
        statistic,
        n_grid: n_grid.to_vec(),
        counts,
        samples,
        fit,
        rate_exponent: options.rate_exponent,
        law_tag: law.tag(),
    })
}

/// Whether the fitted `P0` rate reaches the lifted prediction
/// `eta(P1) - eta0(n_max)` within the combined confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCheck {
    #[serde(with = "serde_float")]
    pub predicted: f64,
    #[serde(with = "serde_float")]
    pub tolerance: f64,
    /// `None` when either rate could not be fitted.
    pub holds: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftFamilyReport {
    pub statistic: Statistic,
    pub counts_p0: Vec<u64>,
    pub counts_p1: Vec<u64>,
    pub fit_p0: EtaFit,
    pub fit_p1: EtaFit,
    pub rate_check: RateCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftViolation {
    pub statistic: String,
    pub n: u64,
    pub p0: f64,
    pub p1: f64,
    pub log_bound: f64,
    /// `p0 - (C p1 + 3 combined stderr)`, positive for a violation.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    pub energy: Energy,
    pub epsilon: f64,
    pub epsilon_eff: f64,
    pub gamma: Estimate,
    pub n_grid: Vec<u64>,
    pub samples: u64,
    /// `sum_{|k| <= n} log ||g_k||_inf` per grid point.
    pub log_bound: Vec<f64>,
    /// `log_bound(n) / n`.
    pub eta0: Vec<f64>,
    pub families: Vec<LiftFamilyReport>,
    pub violations: Vec<LiftViolation>,
}

impl LiftReport {
    pub fn eta0_max(&self) -> f64 {
        *self.eta0.last().expect("non-empty grid")
    }

    pub fn tails(&self, family: usize, k: usize) -> (TailEstimate, TailEstimate) {
        let f = &self.families[family];
        (
            TailEstimate::new(f.counts_p0[k], self.samples),
            TailEstimate::new(f.counts_p1[k], self.samples),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftOptions {
    pub families: Vec<Statistic>,
    pub lde: LdeOptions,
}

impl Default for LiftOptions {
    fn default() -> Self {
        Self {
            families: vec![Statistic::LogNorm, Statistic::LogDet, Statistic::diagonal_element()],
            lde: LdeOptions::default(),
        }
    }
}

/// Flags for the two-sided windows `[-n, n]` (length `2n + 1`), grown from
/// the centre outwards. `values[k]` is site `k - n_max`.
fn two_sided_flags<T: Scalar>(
    e: T,
    values: &[f64],
    grid: &[u64],
    families: &[Statistic],
    gamma: f64,
    eps: f64,
) -> Vec<Vec<bool>> {
    let n_max = (values.len() - 1) / 2;
    let d = |site: i64| e - T::from_real(values[(site + n_max as i64) as usize]);
    let mut s = ScaledMatrix::<T>::identity();
    s.push_left_step(d(0));
    let mut out = vec![Vec::with_capacity(grid.len()); families.len()];
    let mut next = 0;
    for n in 1..=n_max as i64 {
        s.push_left_step(d(n));
        s.push_right_step(d(-n));
        while next < grid.len() && grid[next] == n as u64 {
            let len = (2 * n + 1) as f64;
            for (f, stat) in families.iter().enumerate() {
                out[f].push(deviates(stat.eval(&s), len, gamma, eps));
            }
            next += 1;
        }
    }
    out
}

/// Compare deviation tails of `P0 = (x) g_n mu` and `P1 = mu^Z` on the
/// windows `[-n, n]` against the product bound `P0 <= (prod ||g_k||) P1`.
///
/// Both laws draw sample `i` from the same stream index, so the two
/// samples are coupled through shared uniforms.
#[allow(clippy::too_many_arguments)]
pub fn lift_check(
    densities: &DensitySequence,
    base: &BaseMeasure,
    energy: Energy,
    epsilon: f64,
    n_grid: &[u64],
    samples: u64,
    stream: RngStream,
    options: &LiftOptions,
) -> Result<LiftReport> {
    check_grid(n_grid)?;
    options.lde.validate()?;
    if options.families.is_empty() {
        return Err(invalid("families", "at least one statistic required"));
    }
    for f in &options.families {
        f.validate()?;
    }
    if samples == 0 {
        return Err(invalid("samples", "must be positive"));
    }
    let p1 = ProductLaw::exact(base.clone());
    let p0 = ProductLaw::approximate(base.clone(), densities.clone());
    let n_max = *n_grid.last().expect("non-empty grid");
    let gamma = match options.lde.gamma {
        Some(g) => g,
        None => Estimate::from(&lyapunov_mc(
            &p1,
            energy,
            2 * n_max + 1,
            options.lde.gamma_samples,
            stream.child(tags::GAMMA),
        )?),
    };
    let eps = epsilon_eff(epsilon, &gamma)?;
    let sample_stream = stream.child(tags::SAMPLES);
    let lo = -(n_max as i64);
    let width = 2 * n_max as usize + 1;
    let flags = try_map_indexed(samples as usize, |i| {
        let mut per_law = Vec::with_capacity(2);
        for law in [&p0, &p1] {
            let mut values = vec![0.0; width];
            let mut rng = sample_stream.rng_for(i as u64);
            law.fill_sites(lo, &mut values, &mut rng)?;
            per_law.push(if energy.is_real() {
                two_sided_flags(energy.re, &values, n_grid, &options.families, gamma.value, eps)
            } else {
                two_sided_flags(energy.as_complex(), &values, n_grid, &options.families, gamma.value, eps)
            });
        }
        Ok(per_law)
    })?;

    let mut log_bound = Vec::with_capacity(n_grid.len());
    let mut acc = ExactSum::new();
    acc.add(densities.sup_norm(0).ln());
    let mut next = 0;
    for n in 1..=n_max as i64 {
        acc.add(densities.sup_norm(n).ln());
        acc.add(densities.sup_norm(-n).ln());
        while next < n_grid.len() && n_grid[next] == n as u64 {
            log_bound.push(acc.value());
            next += 1;
        }
    }
    let eta0: Vec<f64> = n_grid.iter().zip(&log_bound).map(|(&n, b)| b / n as f64).collect();
    let eta0_max = *eta0.last().expect("non-empty grid");

    let mut families = Vec::with_capacity(options.families.len());
    let mut violations = Vec::new();
    for (f, stat) in options.families.iter().enumerate() {
        let mut counts_p0 = vec![0u64; n_grid.len()];
        let mut counts_p1 = vec![0u64; n_grid.len()];
        for sample in &flags {
            for k in 0..n_grid.len() {
                counts_p0[k] += sample[0][f][k] as u64;
                counts_p1[k] += sample[1][f][k] as u64;
            }
        }
        for (k, &n) in n_grid.iter().enumerate() {
            let t0 = TailEstimate::new(counts_p0[k], samples);
            let t1 = TailEstimate::new(counts_p1[k], samples);
            let c = log_bound[k].exp();
            if !bounded_by(&t0, c, &t1) {
                violations.push(LiftViolation {
                    statistic: stat.name(),
                    n,
                    p0: t0.p(),
                    p1: t1.p(),
                    log_bound: log_bound[k],
                    excess: t0.p() - c * t1.p() - SIGMA_TOLERANCE * combined_stderr(&t0, c, &t1),
                });
            }
        }
        let q = options.lde.rate_exponent;
        let fit_p0 = fit_rate(n_grid, &counts_p0, samples, q);
        let fit_p1 = fit_rate(n_grid, &counts_p1, samples, q);
        let predicted = fit_p1.eta - eta0_max;
        let tolerance = SIGMA_TOLERANCE * (fit_p0.stderr.powi(2) + fit_p1.stderr.powi(2)).sqrt();
        let holds = match (fit_p0.kind, fit_p1.kind) {
            (FitKind::Fitted, FitKind::Fitted) => Some(fit_p0.eta >= predicted - tolerance),
            _ => None,
        };
        families.push(LiftFamilyReport {
            statistic: *stat,
            counts_p0,
            counts_p1,
            fit_p0,
            fit_p1,
            rate_check: RateCheck {
                predicted,
                tolerance,
                holds,
            },
        });
    }
    Ok(LiftReport {
        energy,
        epsilon,
        epsilon_eff: eps,
        gamma,
        n_grid: n_grid.to_vec(),
        samples,
        log_bound,
        eta0,
        families,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::SiteSet;

    fn coin() -> BaseMeasure {
        BaseMeasure::bernoulli(-1.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn point_mass_has_no_tail_events() {
        let law = ProductLaw::exact(BaseMeasure::point_mass(0.0));
        let c = lde_curve(
            &law,
            Energy::real(3.0),
            0.05,
            &[20, 40, 80],
            50,
            RngStream::new(1, 0),
            Statistic::LogNorm,
            LdeOptions {
                gamma: Some(Estimate {
                    value: ((3.0 + 5f64.sqrt()) / 2.0).ln(),
                    stderr: 0.0,
                }),
                ..Default::default()
            },
        );
        // log ||S|| / n exceeds gamma by log(1.342) / n, below 0.015 here.
        let c = c.unwrap();
        assert_eq!(c.counts, vec![0, 0, 0]);
        assert_eq!(c.fit.kind, FitKind::LowerBound);
        assert!((c.fit.eta - 50f64.ln() / 80.0).abs() < 1e-15);
    }

    #[test]
    fn impossible_deviation() {
        // |log ||S_1|| / 1| <= log(|E| + 2) for |V| <= 1, so eps = 10 is unreachable.
        let c = lde_curve(
            &ProductLaw::exact(coin()),
            Energy::real(0.0),
            10.0,
            &[1, 2, 5],
            200,
            RngStream::new(2, 0),
            Statistic::LogNorm,
            LdeOptions::default(),
        )
        .unwrap();
        assert!(c.counts.iter().all(|&k| k == 0));
    }

    #[test]
    fn rate_fit_recovers_exact_exponential() {
        let grid = [10u64, 20, 30, 40];
        let samples = 1_000_000u64;
        let counts: Vec<u64> = grid.iter().map(|&n| (samples as f64 * (-0.1 * n as f64).exp()).round() as u64).collect();
        let f = fit_rate(&grid, &counts, samples, 1.0);
        assert_eq!(f.kind, FitKind::Fitted);
        assert!((f.eta - 0.1).abs() < 1e-3, "{}", f.eta);
        let f = fit_rate(&grid, &[10, 3, 0, 0], samples, 1.0);
        assert_eq!(f.kind, FitKind::SinglePoint);
        let f = fit_rate(&grid, &[4, 3, 0, 0], samples, 1.0);
        assert_eq!(f.kind, FitKind::Insufficient);
    }

    #[test]
    fn identity_densities_never_violate() {
        let r = lift_check(
            &DensitySequence::Identity,
            &coin(),
            Energy::real(0.0),
            0.05,
            &[5, 10, 20],
            400,
            RngStream::new(7, 0),
            &LiftOptions::default(),
        )
        .unwrap();
        assert!(r.violations.is_empty());
        for f in &r.families {
            assert_eq!(f.counts_p0, f.counts_p1);
        }
        assert!(r.log_bound.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn finite_perturbation_bound() {
        let base = coin();
        let dens = DensitySequence::atom_reweight(&base, vec![(SiteSet::Sites { sites: vec![0, 3] }, vec![0.9, 0.1])]).unwrap();
        let r = lift_check(
            &dens,
            &base,
            Energy::real(0.5),
            0.05,
            &[4, 8, 16],
            2000,
            RngStream::new(9, 0),
            &LiftOptions::default(),
        )
        .unwrap();
        let c = 2.0 * 1.8f64.ln();
        assert!((r.log_bound[0] - c).abs() < 1e-15);
        assert!(r.violations.is_empty(), "{:?}", r.violations);
    }

    #[test]
    fn two_sided_growth_matches_direct_product() {
        let values = [0.3, -1.0, 1.0, 0.5, -0.2, 0.9, 1.1];
        let stat = Statistic::LogNorm;
        // n_max = 3; window [-3, 3] is the whole array.
        let full = crate::transfer::product_values(0.4, &values).log_norm();
        let inner = crate::transfer::product_values(0.4, &values[2..5]).log_norm();
        let f_hi = two_sided_flags(0.4, &values, &[1, 3], &[stat], full / 7.0, 1e-12);
        assert_eq!(f_hi[0][1], false);
        let f_lo = two_sided_flags(0.4, &values, &[1, 3], &[stat], inner / 3.0, 1e-12);
        assert_eq!(f_lo[0][0], false);
    }
}
