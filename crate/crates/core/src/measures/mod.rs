//! Site laws, perturbed density sequences, product laws and the
//! Radon-Nikodym machinery relating the non-stationary law `P0 = (x) g_n mu`
//! to the stationary law `P1 = mu^Z`.

mod base;
mod conditions;
mod density;

pub use base::{open_unit, Atom, BaseKind, BaseMeasure, Issue, ATOM_WEIGHT_TOLERANCE};
pub use conditions::{
    condition_report, sup_norm_log_partials, ConditionReport, ConditionTrajectory, Verdict,
    CONDITION_TOLERANCE,
};
pub use density::{AtomReweight, BumpSchedule, DensitySequence, ReweightRule, SiteSet};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::numeric::ExactSum;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LawTag {
    /// The stationary product law `mu^Z`.
    #[serde(rename = "P1")]
    Exact,
    /// The non-stationary product law `(x) g_n mu`.
    #[serde(rename = "P0")]
    Approximate,
}

impl LawTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            LawTag::Exact => "P1",
            LawTag::Approximate => "P0",
        }
    }
}

/// Product law over the lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductLaw {
    base: BaseMeasure,
    densities: DensitySequence,
    tag: LawTag,
}

impl ProductLaw {
    pub fn exact(base: BaseMeasure) -> Self {
        Self {
            base,
            densities: DensitySequence::Identity,
            tag: LawTag::Exact,
        }
    }

    /// `P0`; the density sequence must have been built against `base`.
    pub fn approximate(base: BaseMeasure, densities: DensitySequence) -> Self {
        Self {
            base,
            densities,
            tag: LawTag::Approximate,
        }
    }

    pub fn base(&self) -> &BaseMeasure {
        &self.base
    }

    pub fn densities(&self) -> &DensitySequence {
        &self.densities
    }

    pub fn tag(&self) -> LawTag {
        self.tag
    }

    /// The stationary law with the same base measure.
    pub fn stationary(&self) -> ProductLaw {
        ProductLaw::exact(self.base.clone())
    }

    /// One draw from `g_n mu`.
    pub fn sample_site<R: RngCore + ?Sized>(&self, n: i64, rng: &mut R) -> Result<f64> {
        match &self.densities {
            DensitySequence::Identity => Ok(self.base.quantile(open_unit(rng))),
            DensitySequence::AtomReweight(a) => {
                let u = open_unit(rng);
                let w = a.weights_at(n);
                let m = base::quantile_weights(w.iter().copied(), u).unwrap_or(w.len() - 1);
                Ok(a.locations()[m])
            }
            DensitySequence::Bump(_) => {
                let sup = self.densities.sup_norm(n);
                if sup == 1.0 {
                    return Ok(self.base.quantile(open_unit(rng)));
                }
                let cap = 100 * sup.ceil() as u64;
                for _ in 0..cap {
                    let x = self.base.quantile(open_unit(rng));
                    if open_unit(rng) * sup < self.densities.eval(n, x) {
                        return Ok(x);
                    }
                }
                Err(LabError::RejectionCap { site: n, cap })
            }
        }
    }

    /// Fill `out` with sites `lo, lo+1, ...` drawn in increasing site order.
    pub fn fill_sites<R: RngCore + ?Sized>(&self, lo: i64, out: &mut [f64], rng: &mut R) -> Result<()> {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = self.sample_site(lo + i as i64, rng)?;
        }
        Ok(())
    }

    /// `P(|V_n| > t)` under `g_n mu`.
    pub fn site_tail(&self, n: i64, t: f64) -> f64 {
        match &self.densities {
            DensitySequence::Identity => self.base.tail(t),
            DensitySequence::AtomReweight(a) => crate::numeric::exact_sum(
                a.locations()
                    .iter()
                    .zip(a.weights_at(n))
                    .filter(|(x, _)| x.abs() > t)
                    .map(|(_, w)| *w),
            ),
            DensitySequence::Bump(b) => {
                if !b.sites.contains(n) {
                    return self.base.tail(t);
                }
                let t = t.max(0.0);
                let q = b.threshold();
                // mu(|X| > t, X <= q)
                let low = self.base.cdf(q.min(-t)) + (self.base.cdf(q) - self.base.cdf(t)).max(0.0);
                let high = self.base.tail(t) - low;
                b.height * low + b.level() * high.max(0.0)
            }
        }
    }

    /// `int |x|^alpha g_n dmu`.
    pub fn site_moment(&self, n: i64, alpha: f64) -> f64 {
        match &self.densities {
            DensitySequence::Identity => self.base.moment(alpha),
            DensitySequence::AtomReweight(a) => crate::numeric::exact_sum(
                a.locations()
                    .iter()
                    .zip(a.weights_at(n))
                    .map(|(x, w)| w * x.abs().powf(alpha)),
            ),
            DensitySequence::Bump(b) => {
                if !b.sites.contains(n) {
                    return self.base.moment(alpha);
                }
                let q = b.threshold();
                b.height * self.base.partial_moment(alpha, f64::NEG_INFINITY, q)
                    + b.level() * self.base.partial_moment(alpha, q, f64::INFINITY)
            }
        }
    }
}

/// Where a window's values came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub stream: u64,
}

/// Potential values `V_lo, ..., V_hi` on a contiguous block of sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialWindow {
    lo: i64,
    values: Vec<f64>,
    provenance: Option<Provenance>,
}

impl PotentialWindow {
    pub fn new(lo: i64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("values", "window must be non-empty"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid("values", format!("non-finite value at site {}", lo + i as i64)));
        }
        Ok(Self {
            lo,
            values,
            provenance: None,
        })
    }

    pub fn constant(lo: i64, len: usize, v: f64) -> Self {
        Self::new(lo, vec![v; len.max(1)]).expect("finite constant")
    }

    pub fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = Some(p);
        self
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn provenance(&self) -> Option<Provenance> {
        self.provenance
    }

    pub fn get(&self, site: i64) -> Option<f64> {
        if site < self.lo || site > self.hi() {
            None
        } else {
            Some(self.values[(site - self.lo) as usize])
        }
    }

    pub fn contains(&self, lo: i64, hi: i64) -> bool {
        lo <= hi && lo >= self.lo && hi <= self.hi()
    }

    /// Values on sites `[lo, hi]`.
    pub fn slice(&self, lo: i64, hi: i64) -> Result<&[f64]> {
        if !self.contains(lo, hi) {
            return Err(LabError::OutOfWindow {
                lo,
                hi,
                window_lo: self.lo,
                window_hi: self.hi(),
            });
        }
        let a = (lo - self.lo) as usize;
        let b = (hi - self.lo) as usize;
        Ok(&self.values[a..=b])
    }

    pub fn sub_window(&self, lo: i64, hi: i64) -> Result<PotentialWindow> {
        let values = self.slice(lo, hi)?.to_vec();
        Ok(PotentialWindow {
            lo,
            values,
            provenance: self.provenance,
        })
    }
}

/// Draw `V_lo..V_hi` from `law`; deterministic in `(stream, lo, hi)`.
pub fn sample_window(law: &ProductLaw, lo: i64, hi: i64, stream: RngStream) -> Result<PotentialWindow> {
    if lo > hi {
        return Err(invalid("hi", format!("empty window [{lo}, {hi}]")));
    }
    let mut values = vec![0.0; (hi - lo + 1) as usize];
    let mut rng = stream.rng();
    law.fill_sites(lo, &mut values, &mut rng)?;
    Ok(PotentialWindow::new(lo, values)?.with_provenance(Provenance {
        seed: stream.seed,
        stream: stream.stream,
    }))
}

/// Exact accumulator of `sum_n log g_n(V_n)` over the window.
pub fn radon_nikodym_accumulator(law: &ProductLaw, window: &PotentialWindow) -> Result<ExactSum> {
    let mut acc = ExactSum::new();
    if law.densities().is_identity() {
        return Ok(acc);
    }
    for (i, &v) in window.values().iter().enumerate() {
        let n = window.lo() + i as i64;
        if !law.base().in_support(v) {
            return Err(LabError::OutsideSupport { site: n, value: v });
        }
        acc.add(law.densities().eval(n, v).ln());
    }
    Ok(acc)
}

/// `log H = sum_n log g_n(V_n)`, the log of the restricted Radon-Nikodym
/// derivative `dP0/dP1` on the window. `-inf` marks windows impossible
/// under `P0`.
pub fn radon_nikodym_product(law: &ProductLaw, window: &PotentialWindow) -> Result<f64> {
    Ok(radon_nikodym_accumulator(law, window)?.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn coin() -> BaseMeasure {
        BaseMeasure::bernoulli(-1.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn identity_window_respects_support() {
        let law = ProductLaw::exact(coin());
        let w = sample_window(&law, 0, 3, RngStream::new(1, 0)).unwrap();
        assert_eq!(w.len(), 4);
        assert!(w.values().iter().all(|v| *v == -1.0 || *v == 1.0));
    }

    #[test]
    fn degenerate_weights_force_atom() {
        let base = coin();
        let seq = DensitySequence::atom_reweight(&base, vec![(SiteSet::All, vec![1.0, 0.0])]).unwrap();
        let law = ProductLaw::approximate(base, seq);
        let w = sample_window(&law, -5, 20, RngStream::new(9, 2)).unwrap();
        assert!(w.values().iter().all(|v| *v == -1.0));
    }

    #[test]
    fn bernoulli_mean_within_clt_band() {
        let law = ProductLaw::exact(coin());
        let w = sample_window(&law, 0, 10_000, RngStream::new(2024, 0)).unwrap();
        let mean = w.values().iter().sum::<f64>() / w.len() as f64;
        assert!(mean.abs() <= 4.0 / 100.0, "mean {mean}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let law = ProductLaw::exact(BaseMeasure::uniform(-2.0, 2.0).unwrap());
        let a = sample_window(&law, -3, 30, RngStream::new(5, 1)).unwrap();
        let b = sample_window(&law, -3, 30, RngStream::new(5, 1)).unwrap();
        let c = sample_window(&law, -3, 30, RngStream::new(5, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn radon_nikodym_examples() {
        let base = coin();
        let w = PotentialWindow::new(0, vec![-1.0, -1.0]).unwrap();
        assert_eq!(radon_nikodym_product(&ProductLaw::exact(base.clone()), &w).unwrap(), 0.0);
        let seq = DensitySequence::atom_reweight(&base, vec![(SiteSet::All, vec![0.75, 0.25])]).unwrap();
        let law = ProductLaw::approximate(base.clone(), seq);
        let h = radon_nikodym_product(&law, &w).unwrap();
        assert!((h - 2.0 * 1.5f64.ln()).abs() < 1e-15);
        assert!((h.exp() - 2.25).abs() < 1e-14);

        let seq = DensitySequence::atom_reweight(&base, vec![(SiteSet::All, vec![1.0, 0.0])]).unwrap();
        let law = ProductLaw::approximate(base, seq);
        let w = PotentialWindow::new(0, vec![-1.0, 1.0]).unwrap();
        assert_eq!(radon_nikodym_product(&law, &w).unwrap(), f64::NEG_INFINITY);
        let off = PotentialWindow::new(0, vec![0.5]).unwrap();
        assert!(matches!(
            radon_nikodym_product(&law, &off),
            Err(LabError::OutsideSupport { site: 0, .. })
        ));
    }

    #[test]
    fn rejection_cap_names_site() {
        // height 60 on a 1/60 sliver: ||g||_inf = 60, cap = 6000 draws.
        let base = BaseMeasure::uniform(0.0, 1.0).unwrap();
        let seq = DensitySequence::bump(&base, SiteSet::Sites { sites: vec![7] }, 60.0, 1.0 / 60.0).unwrap();
        let law = ProductLaw::approximate(base, seq);
        // the sampler works normally ...
        assert!(sample_window(&law, 0, 10, RngStream::new(1, 1)).is_ok());
        // ... and a density that is zero almost everywhere exhausts the cap.
        let base = BaseMeasure::uniform(0.0, 1.0).unwrap();
        let mut seq = DensitySequence::bump(&base, SiteSet::Sites { sites: vec![3] }, 1.0, 0.5).unwrap();
        if let DensitySequence::Bump(b) = &mut seq {
            // corrupt: a bump whose density vanishes everywhere
            *b = serde_json::from_value(serde_json::json!({
                "sites": {"kind": "sites", "sites": [3]},
                "height": 0.0, "mass": 0.5, "threshold": 0.5, "level": 0.0
            }))
            .unwrap();
        }
        let law = ProductLaw::approximate(base, seq);
        let err = sample_window(&law, 0, 5, RngStream::new(1, 1)).unwrap_err();
        assert!(matches!(err, LabError::RejectionCap { site: 3, .. }), "{err}");
    }

    #[test]
    fn atom_sup_norm_is_max_ratio() {
        let base = BaseMeasure::new(
            BaseKind::FiniteAtoms {
                atoms: vec![
                    Atom { location: 0.0, weight: 0.25 },
                    Atom { location: 1.0, weight: 0.25 },
                    Atom { location: 2.0, weight: 0.5 },
                ],
            },
            1.0,
            false,
        )
        .unwrap();
        let seq = DensitySequence::atom_reweight(&base, vec![(SiteSet::Dyadic, vec![0.5, 0.25, 0.25])]).unwrap();
        assert_eq!(seq.sup_norm(4), 2.0);
        assert_eq!(seq.sup_norm(3), 1.0);
        assert_eq!(seq.integral(4, &base), 1.0);
    }

    #[test]
    fn bump_site_tail_and_moment_match_quadrature() {
        let base = BaseMeasure::uniform(-2.0, 3.0).unwrap();
        let seq = DensitySequence::bump(&base, SiteSet::All, 2.5, 0.3).unwrap();
        let law = ProductLaw::approximate(base.clone(), seq.clone());
        let m = 200_000;
        let (mut tail, mut mom, mut total) = (0.0, 0.0, 0.0);
        for k in 0..m {
            let x = -2.0 + 5.0 * (k as f64 + 0.5) / m as f64;
            let g = seq.eval(0, x) / m as f64;
            total += g;
            if x.abs() > 1.2 {
                tail += g;
            }
            mom += g * x.abs().powf(1.5);
        }
        assert!((total - 1.0).abs() < 1e-4);
        assert!((law.site_tail(0, 1.2) - tail).abs() < 1e-4);
        assert!((law.site_moment(0, 1.5) - mom).abs() < 1e-4);
        assert!((seq.integral(0, &base) - 1.0).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn rn_product_additive(vals in proptest::collection::vec(prop_oneof![Just(-1.0f64), Just(1.0)], 2..40),
                               cut in 1usize..39, w0 in 0.05f64..0.95) {
            let cut = cut.min(vals.len() - 1);
            let base = coin();
            let seq = DensitySequence::atom_reweight(&base, vec![(SiteSet::Dyadic, vec![w0, 1.0 - w0])]).unwrap();
            let law = ProductLaw::approximate(base, seq);
            let whole = PotentialWindow::new(-3, vals.clone()).unwrap();
            let left = whole.sub_window(-3, -3 + cut as i64 - 1).unwrap();
            let right = whole.sub_window(-3 + cut as i64, whole.hi()).unwrap();
            let mut acc = radon_nikodym_accumulator(&law, &left).unwrap();
            acc.merge(&radon_nikodym_accumulator(&law, &right).unwrap());
            prop_assert_eq!(acc.value(), radon_nikodym_product(&law, &whole).unwrap());
        }

        #[test]
        fn densities_normalized(w0 in 0.0f64..=1.0, h in 0.0f64..3.0, mass in 0.01f64..0.3, n in -100i64..100) {
            let coin = coin();
            let seq = DensitySequence::atom_reweight(&coin, vec![(SiteSet::Dyadic, vec![w0, 1.0 - w0])]).unwrap();
            prop_assert!((seq.integral(n, &coin) - 1.0).abs() <= 1e-12);
            let uni = BaseMeasure::uniform(-1.0, 4.0).unwrap();
            let seq = DensitySequence::bump(&uni, SiteSet::All, h, mass).unwrap();
            prop_assert!((seq.integral(n, &uni) - 1.0).abs() <= 1e-10);
            prop_assert!(seq.eval(n, 0.0) >= 0.0 && seq.eval(n, 3.9) >= 0.0);
        }
    }
}
