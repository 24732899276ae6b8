//! The change-of-measure identity `E1[chi_A H] = P0[A]` on cylinder events
//! of an atomic law.

use serde::{Deserialize, Serialize};

use super::tags;
use crate::error::{invalid, Result};
use crate::measures::{radon_nikodym_product, DensitySequence, PotentialWindow, ProductLaw};
use crate::numeric::exact_sum;
use crate::parallel::try_map_indexed;
use crate::rng::RngStream;
use crate::stats::{mean_stderr, TailEstimate, SIGMA_TOLERANCE};

/// `{V_lo = values[0], ..., V_{lo+k-1} = values[k-1]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderEvent {
    pub lo: i64,
    pub values: Vec<f64>,
}

impl CylinderEvent {
    pub fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }

    fn contains(&self, window: &PotentialWindow) -> bool {
        window.values() == self.values.as_slice()
    }

    /// `P[A]` under `law` from the atom weights, exactly up to rounding.
    pub fn probability(&self, law: &ProductLaw) -> Result<f64> {
        let atoms = law
            .base()
            .atoms()
            .ok_or_else(|| invalid("base", "cylinder probabilities need a finite_atoms measure"))?;
        let mut log_p = Vec::with_capacity(self.values.len());
        for (k, &v) in self.values.iter().enumerate() {
            let n = self.lo + k as i64;
            let Some(m) = atoms.iter().position(|a| a.location == v) else {
                return Ok(0.0);
            };
            let w = match law.densities() {
                DensitySequence::AtomReweight(a) => a.weights_at(n)[m],
                _ => atoms[m].weight,
            };
            log_p.push(w.ln());
        }
        Ok(exact_sum(log_p).exp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderCheck {
    pub event: CylinderEvent,
    /// Exact `P0[A]`.
    pub exact: f64,
    /// Mean of `chi_A H` over `P1` samples.
    pub weighted: f64,
    pub weighted_stderr: f64,
    /// Direct frequency of `A` under `P0`.
    pub direct: f64,
    pub direct_stderr: f64,
    /// Both estimates lie within `SIGMA_TOLERANCE` standard errors of the
    /// exact value and of each other.
    pub agrees: bool,
}

/// Estimate `P0[A]` two ways, by reweighting `P1` samples with the
/// Radon-Nikodym product and by sampling `P0` directly, and compare with
/// the exact atom product.
pub fn cylinder_check(law: &ProductLaw, event: &CylinderEvent, samples: u64, stream: RngStream) -> Result<CylinderCheck> {
    if event.values.is_empty() {
        return Err(invalid("event", "cylinder must fix at least one site"));
    }
    if samples < 2 {
        return Err(invalid("samples", "at least two samples required"));
    }
    let exact = event.probability(law)?;
    let p1 = law.stationary();
    let len = event.values.len();
    let draw = |l: &ProductLaw, s: RngStream, i: usize| -> Result<PotentialWindow> {
        let mut values = vec![0.0; len];
        l.fill_sites(event.lo, &mut values, &mut s.rng_for(i as u64))?;
        PotentialWindow::new(event.lo, values)
    };
    let s1 = stream.child(tags::SAMPLES);
    let s0 = stream.child(tags::GAMMA);
    let weights = try_map_indexed(samples as usize, |i| {
        let w = draw(&p1, s1, i)?;
        if event.contains(&w) {
            Ok(radon_nikodym_product(law, &w)?.exp())
        } else {
            Ok(0.0)
        }
    })?;
    let hits = try_map_indexed(samples as usize, |i| Ok(event.contains(&draw(law, s0, i)?)))?;
    let (weighted, weighted_stderr) = mean_stderr(&weights);
    let tail = TailEstimate::new(hits.iter().filter(|&&h| h).count() as u64, samples);
    let (direct, direct_stderr) = (tail.p(), tail.stderr());
    let close = |a: f64, b: f64, se: f64| (a - b).abs() <= SIGMA_TOLERANCE * se;
    let agrees = close(weighted, exact, weighted_stderr)
        && close(direct, exact, direct_stderr)
        && close(weighted, direct, weighted_stderr.hypot(direct_stderr));
    Ok(CylinderCheck {
        event: event.clone(),
        exact,
        weighted,
        weighted_stderr,
        direct,
        direct_stderr,
        agrees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{BaseMeasure, SiteSet};

    fn law() -> ProductLaw {
        let base = BaseMeasure::bernoulli(-1.0, 1.0, 0.5).unwrap();
        let seq = DensitySequence::atom_reweight(&base, vec![(SiteSet::All, vec![0.75, 0.25])]).unwrap();
        ProductLaw::approximate(base, seq)
    }

    #[test]
    fn exact_probability_is_atom_product() {
        let a = CylinderEvent { lo: 0, values: vec![1.0, -1.0] };
        assert!((a.probability(&law()).unwrap() - 0.25 * 0.75).abs() < 1e-15);
        let off = CylinderEvent { lo: 0, values: vec![0.0] };
        assert_eq!(off.probability(&law()).unwrap(), 0.0);
    }

    #[test]
    fn identity_holds_statistically() {
        let a = CylinderEvent { lo: 0, values: vec![1.0, -1.0] };
        let c = cylinder_check(&law(), &a, 20_000, RngStream::new(4, 0)).unwrap();
        assert!(c.agrees, "{c:?}");
    }
}
