//! Monte Carlo estimators: Lyapunov exponents, large-deviation curves, the
//! change-of-measure (lifting) bound, deviation sets and Craig-Simon checks.

mod craig_simon;
mod cylinder;
mod lde;

pub use cylinder::{cylinder_check, CylinderCheck, CylinderEvent};
pub use craig_simon::{craig_simon_scan, submean_check, CraigSimonFamily, CraigSimonReport, FamilyExcess, SubmeanReport};
pub use lde::{
    fit_rate, lde_curve, lift_check, EtaFit, FitKind, LdeCurve, LdeOptions, LiftFamilyReport, LiftOptions, LiftReport,
    LiftViolation, MIN_FIT_COUNT,
    RateCheck, Statistic,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::measures::{LawTag, PotentialWindow, ProductLaw};
use crate::numeric::{frexp_exponent, ldexp, serde_float, Scalar};
use crate::parallel::try_map_indexed;
use crate::rng::RngStream;
use crate::stats::mean_stderr;
use crate::transfer::{determinant, Energy};

/// Sites propagated before growth is measured, to align the vector with
/// the expanding direction.
pub const DEFAULT_BURN_IN: usize = 64;

const LN_2: f64 = std::f64::consts::LN_2;

/// Stream tags for the independent sub-streams used by the estimators.
pub(crate) mod tags {
    pub const SAMPLES: u64 = 1;
    pub const GAMMA: u64 = 2;
    pub const BURN_IN: u64 = 3;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub energy: Energy,
    pub n: u64,
    pub samples: u64,
    pub mean: f64,
    pub stderr: f64,
    pub law_tag: LawTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_sample: Option<Vec<f64>>,
}

/// Growth of a vector under successive one-step matrices, kept in
/// normalized form.
#[derive(Debug, Clone, Copy)]
pub(crate) struct VectorGrowth<T: Scalar> {
    e: T,
    v: [T; 2],
    log_scale: f64,
}

impl<T: Scalar> VectorGrowth<T> {
    pub(crate) fn new(e: T, v: [T; 2]) -> Self {
        Self { e, v, log_scale: 0.0 }
    }

    #[inline]
    pub(crate) fn step(&mut self, site_value: f64) {
        let d = self.e - T::from_real(site_value);
        let [a, b] = self.v;
        self.v = [d * a - b, a];
        let m = self.v[0].modulus().max(self.v[1].modulus());
        if !(1e-100..=1e100).contains(&m) {
            let k = frexp_exponent(m);
            self.v = [self.v[0].scale(ldexp(1.0, -k)), self.v[1].scale(ldexp(1.0, -k))];
            self.log_scale += k as f64 * LN_2;
        }
    }

    pub(crate) fn log_norm(&self) -> f64 {
        self.log_scale + 0.5 * (self.v[0].norm_sqr() + self.v[1].norm_sqr()).ln()
    }

    /// Restart the log accumulator with the current direction as a unit vector.
    pub(crate) fn renormalize(&mut self) {
        let n = (self.v[0].norm_sqr() + self.v[1].norm_sqr()).sqrt();
        self.v = [self.v[0].scale(1.0 / n), self.v[1].scale(1.0 / n)];
        self.log_scale = 0.0;
    }
}

/// `(1/n) log ||S_[1,n] v||` for a burned-in unit vector `v`.
fn growth_rate<T: Scalar>(e: T, burn: &[f64], values: &[f64]) -> f64 {
    let mut g = VectorGrowth::new(e, [T::one(), T::zero()]);
    for &v in burn {
        g.step(v);
    }
    g.renormalize();
    for &v in values {
        g.step(v);
    }
    g.log_norm() / values.len() as f64
}

pub(crate) fn growth_rate_at(energy: Energy, burn: &[f64], values: &[f64]) -> f64 {
    if energy.is_real() {
        growth_rate(energy.re, burn, values)
    } else {
        growth_rate(energy.as_complex(), burn, values)
    }
}

/// Draws the burn-in sites `1-burn..=0` and the sites `1..=n` of sample `i`.
pub(crate) fn draw_sample(
    law: &ProductLaw,
    stream: &RngStream,
    i: u64,
    burn: &mut [f64],
    values: &mut [f64],
) -> Result<()> {
    let mut rng = stream.rng_for(i);
    law.fill_sites(1, values, &mut rng)?;
    let mut rng = stream.child(tags::BURN_IN).rng_for(i);
    law.fill_sites(1 - burn.len() as i64, burn, &mut rng)
}

/// Monte Carlo estimate of `gamma(E) = lim (1/n) E log ||S_[1,n]||`.
///
/// Each sample draws `V_1..V_n` (plus a burn-in stretch to the left of site
/// 1) from its own stream, so results do not depend on the worker count.
pub fn lyapunov_mc(law: &ProductLaw, energy: Energy, n: u64, samples: u64, stream: RngStream) -> Result<LyapunovEstimate> {
    lyapunov_mc_with(law, energy, n, samples, stream, DEFAULT_BURN_IN, false)
}

pub fn lyapunov_mc_with(
    law: &ProductLaw,
    energy: Energy,
    n: u64,
    samples: u64,
    stream: RngStream,
    burn_in: usize,
    keep_samples: bool,
) -> Result<LyapunovEstimate> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    if samples == 0 {
        return Err(invalid("samples", "must be at least 1"));
    }
    let stream = stream.child(tags::SAMPLES);
    let rates = try_map_indexed(samples as usize, |i| {
        let mut burn = vec![0.0; burn_in];
        let mut values = vec![0.0; n as usize];
        draw_sample(law, &stream, i as u64, &mut burn, &mut values)?;
        Ok(growth_rate_at(energy, &burn, &values))
    })?;
    let (mean, stderr) = mean_stderr(&rates);
    Ok(LyapunovEstimate {
        energy,
        n,
        samples,
        mean,
        stderr,
        law_tag: law.tag(),
        per_sample: keep_samples.then_some(rates),
    })
}

/// Lyapunov exponent of the constant potential `c`: the log of the larger
/// eigenvalue modulus of `[[E - c, -1], [1, 0]]`; zero inside the band for
/// real energies.
pub fn lyapunov_closed_form(c: f64, energy: Energy) -> f64 {
    if energy.is_real() {
        let z = (energy.re - c).abs();
        if z <= 2.0 {
            return 0.0;
        }
        return ((z + (z * z - 4.0).sqrt()) / 2.0).ln();
    }
    let z = energy.as_complex() - c;
    let root = (z * z - Complex64::new(4.0, 0.0)).sqrt();
    let l1 = (z + root) / 2.0;
    let l2 = (z - root) / 2.0;
    l1.norm().max(l2.norm()).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deviation {
    BPlus,
    BMinus,
    Neither,
}

impl Deviation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Deviation::BPlus => "B_plus",
            Deviation::BMinus => "B_minus",
            Deviation::Neither => "neither",
        }
    }
}

/// `B+` iff `log|P_[a,b]| >= (gamma + eps) L`, `B-` iff
/// `log|P_[a,b]| <= (gamma - eps) L`, with `L = b - a + 1`.
pub fn deviation_classify(
    window: &PotentialWindow,
    a: i64,
    b: i64,
    energy: f64,
    epsilon: f64,
    gamma: f64,
) -> Result<Deviation> {
    let values = window.slice(a, b)?;
    let len = values.len() as f64;
    let p = determinant(energy, values);
    Ok(if p.log_mag >= (gamma + epsilon) * len {
        Deviation::BPlus
    } else if p.log_mag <= (gamma - epsilon) * len {
        Deviation::BMinus
    } else {
        Deviation::Neither
    })
}

/// Serializable `(value, stderr)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    #[serde(with = "serde_float")]
    pub value: f64,
    #[serde(with = "serde_float")]
    pub stderr: f64,
}

impl From<&LyapunovEstimate> for Estimate {
    fn from(l: &LyapunovEstimate) -> Self {
        Estimate {
            value: l.mean,
            stderr: l.stderr,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::BaseMeasure;

    fn point(c: f64) -> ProductLaw {
        ProductLaw::exact(BaseMeasure::point_mass(c))
    }

    fn coin() -> ProductLaw {
        ProductLaw::exact(BaseMeasure::bernoulli(-1.0, 1.0, 0.5).unwrap())
    }

    #[test]
    fn closed_form_examples() {
        let g = lyapunov_closed_form(0.0, Energy::real(3.0));
        assert!((g - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-15);
        assert!((g - 0.962_423_650_119_206_9).abs() < 1e-12);
        assert_eq!(lyapunov_closed_form(0.0, Energy::real(2.0)), 0.0);
        assert_eq!(lyapunov_closed_form(0.0, Energy::real(1.0)), 0.0);
        // z = 2i: lambda^2 - 2i lambda + 1 = 0, lambda = i (1 +- sqrt 2).
        let g = lyapunov_closed_form(0.0, Energy::complex(0.0, 2.0));
        assert!((g - (1.0 + 2f64.sqrt()).ln()).abs() < 1e-14);
    }

    #[test]
    fn point_mass_is_exact() {
        for &(c, e) in &[(0.0, 3.0), (1.0, -2.0), (-0.5, 4.5), (0.0, 2.5)] {
            let est = lyapunov_mc(&point(c), Energy::real(e), 500, 3, RngStream::new(1, 0)).unwrap();
            let want = lyapunov_closed_form(c, Energy::real(e));
            assert!((est.mean - want).abs() < 1e-10, "{c} {e}: {}", est.mean - want);
            assert_eq!(est.stderr, 0.0);
        }
        let est = lyapunov_mc(&point(0.0), Energy::real(0.0), 1000, 2, RngStream::new(1, 0)).unwrap();
        assert!(est.mean.abs() < 1e-12);
    }

    #[test]
    fn complex_point_mass() {
        let z = Energy::complex(0.3, 1.1);
        let est = lyapunov_mc(&point(0.0), z, 400, 2, RngStream::new(1, 0)).unwrap();
        assert!((est.mean - lyapunov_closed_form(0.0, z)).abs() < 1e-10);
    }

    #[test]
    fn bernoulli_doubling_consistency() {
        let a = lyapunov_mc(&coin(), Energy::real(0.0), 500, 200, RngStream::new(3, 1)).unwrap();
        let b = lyapunov_mc(&coin(), Energy::real(0.0), 1000, 200, RngStream::new(3, 2)).unwrap();
        let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!((a.mean - b.mean).abs() <= 3.0 * se + 2.0 * LN_2 / 500.0);
        assert!(a.mean > 3.0 * a.stderr, "gamma must be positive");
    }

    #[test]
    fn deviation_examples() {
        let gamma = ((5.0 + 21f64.sqrt()) / 2.0).ln();
        let w = PotentialWindow::constant(0, 400, 5.0);
        assert_eq!(deviation_classify(&w, 0, 399, 0.0, 0.1, gamma).unwrap(), Deviation::Neither);
        let w = PotentialWindow::new(0, vec![10.0]).unwrap();
        assert_eq!(deviation_classify(&w, 0, 0, 0.0, 0.1, 1.0).unwrap(), Deviation::BPlus);
        let w = PotentialWindow::new(0, vec![0.7]).unwrap();
        assert_eq!(deviation_classify(&w, 0, 0, 0.7, 0.1, 1.0).unwrap(), Deviation::BMinus);
    }
}
