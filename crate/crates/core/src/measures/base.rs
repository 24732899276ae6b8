use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// One atom of a finitely supported site law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseKind {
    FiniteAtoms { atoms: Vec<Atom> },
    UniformInterval { lo: f64, hi: f64 },
    /// Pareto type I tail: `P(|X| > t) = (scale / t)^exponent` for `t >= scale`.
    ParetoTail {
        scale: f64,
        exponent: f64,
        symmetric: bool,
    },
}

/// The law of a single potential site, with its declared moment exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseMeasure {
    kind: BaseKind,
    alpha_moment: f64,
}

/// Tolerance on the total mass of a finite atom list.
pub const ATOM_WEIGHT_TOLERANCE: f64 = 1e-12;

/// A constraint violated by a measure description; `field` is relative to
/// the measure object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub field: String,
    pub message: String,
}

impl Issue {
    pub(crate) fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl BaseMeasure {
    /// Validating constructor. Single-atom measures are rejected unless
    /// `allow_trivial` is set (closed-form oracles use point masses).
    pub fn new(kind: BaseKind, alpha_moment: f64, allow_trivial: bool) -> Result<Self> {
        let issues = Self::check(&kind, alpha_moment, allow_trivial);
        if let Some(first) = issues.first() {
            return Err(LabError::InvalidMeasure(format!("{}: {}", first.field, first.message)));
        }
        let kind = match kind {
            BaseKind::FiniteAtoms { mut atoms } => {
                atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
                BaseKind::FiniteAtoms { atoms }
            }
            k => k,
        };
        Ok(Self { kind, alpha_moment })
    }

    pub fn bernoulli(a: f64, b: f64, p_a: f64) -> Result<Self> {
        Self::new(
            BaseKind::FiniteAtoms {
                atoms: vec![
                    Atom { location: a, weight: p_a },
                    Atom { location: b, weight: 1.0 - p_a },
                ],
            },
            1.0,
            false,
        )
    }

    pub fn point_mass(c: f64) -> Self {
        Self::new(
            BaseKind::FiniteAtoms {
                atoms: vec![Atom { location: c, weight: 1.0 }],
            },
            1.0,
            true,
        )
        .expect("point mass is valid with allow_trivial")
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(BaseKind::UniformInterval { lo, hi }, 1.0, false)
    }

    pub fn pareto(scale: f64, exponent: f64, symmetric: bool, alpha_moment: f64) -> Result<Self> {
        Self::new(
            BaseKind::ParetoTail {
                scale,
                exponent,
                symmetric,
            },
            alpha_moment,
            false,
        )
    }

    /// All constraint violations of a measure description.
    pub fn check(kind: &BaseKind, alpha_moment: f64, allow_trivial: bool) -> Vec<Issue> {
        let mut issues = Vec::new();
        if !(alpha_moment.is_finite() && alpha_moment > 0.0) {
            issues.push(Issue::new("alpha_moment", "must be a positive finite number"));
        }
        match kind {
            BaseKind::FiniteAtoms { atoms } => {
                if atoms.is_empty() {
                    issues.push(Issue::new("atoms", "at least one atom required"));
                }
                if atoms.len() == 1 && !allow_trivial {
                    issues.push(Issue::new("atoms", "non-trivial support required"));
                }
                for (i, a) in atoms.iter().enumerate() {
                    if !a.location.is_finite() {
                        issues.push(Issue::new(format!("atoms[{i}].location"), "must be finite"));
                    }
                    if !(a.weight.is_finite() && a.weight > 0.0) {
                        issues.push(Issue::new(format!("atoms[{i}].weight"), "must be positive"));
                    }
                    if atoms[..i].iter().any(|b| b.location == a.location) {
                        issues.push(Issue::new(
                            format!("atoms[{i}].location"),
                            "atom locations must be distinct",
                        ));
                    }
                }
                let total: f64 = crate::numeric::exact_sum(atoms.iter().map(|a| a.weight));
                if !atoms.is_empty() && (total - 1.0).abs() > ATOM_WEIGHT_TOLERANCE {
                    issues.push(Issue::new(
                        "atoms",
                        format!("weights sum to {total}, expected 1"),
                    ));
                }
            }
            BaseKind::UniformInterval { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    issues.push(Issue::new("lo", "requires finite lo < hi"));
                }
            }
            BaseKind::ParetoTail {
                scale, exponent, ..
            } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    issues.push(Issue::new("scale", "must be positive"));
                }
                if !(exponent.is_finite() && *exponent > 0.0) {
                    issues.push(Issue::new("exponent", "must be positive"));
                } else if *exponent <= alpha_moment {
                    issues.push(Issue::new("exponent", "moment condition unsatisfiable"));
                }
            }
        }
        issues
    }

    pub fn kind(&self) -> &BaseKind {
        &self.kind
    }

    pub fn alpha_moment(&self) -> f64 {
        self.alpha_moment
    }

    pub fn atoms(&self) -> Option<&[Atom]> {
        match &self.kind {
            BaseKind::FiniteAtoms { atoms } => Some(atoms),
            _ => None,
        }
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self.kind, BaseKind::FiniteAtoms { .. })
    }

    pub fn is_point_mass(&self) -> Option<f64> {
        match &self.kind {
            BaseKind::FiniteAtoms { atoms } if atoms.len() == 1 => Some(atoms[0].location),
            _ => None,
        }
    }

    /// Smallest interval containing the support (may be infinite).
    pub fn support_bounds(&self) -> (f64, f64) {
        match &self.kind {
            BaseKind::FiniteAtoms { atoms } => (
                atoms.first().map_or(0.0, |a| a.location),
                atoms.last().map_or(0.0, |a| a.location),
            ),
            BaseKind::UniformInterval { lo, hi } => (*lo, *hi),
            BaseKind::ParetoTail { scale, symmetric, .. } => {
                if *symmetric {
                    (f64::NEG_INFINITY, f64::INFINITY)
                } else {
                    (*scale, f64::INFINITY)
                }
            }
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        match &self.kind {
            BaseKind::FiniteAtoms { atoms } => atoms.iter().any(|a| a.location == x),
            BaseKind::UniformInterval { lo, hi } => *lo <= x && x <= *hi,
            BaseKind::ParetoTail { scale, symmetric, .. } => {
                if *symmetric {
                    x.abs() >= *scale
                } else {
                    x >= *scale
                }
            }
        }
    }

    /// Inverse distribution function at `u` in `(0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match &self.kind {
            BaseKind::FiniteAtoms { atoms } => quantile_weights(atoms.iter().map(|a| a.weight), u)
                .map_or(atoms[atoms.len() - 1].location, |i| atoms[i].location),
            BaseKind::UniformInterval { lo, hi } => lo + u * (hi - lo),
            BaseKind::ParetoTail {
                scale,
                exponent,
                symmetric,
            } => {
                if *symmetric {
                    if u < 0.5 {
                        -scale * (2.0 * u).powf(-1.0 / exponent)
                    } else {
                        scale * (2.0 * (1.0 - u)).powf(-1.0 / exponent)
                    }
                } else {
                    scale * (1.0 - u).powf(-1.0 / exponent)
                }
            }
        }
    }

    /// `mu((-inf, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        match &self.kind {
            BaseKind::FiniteAtoms { atoms } => {
                crate::numeric::exact_sum(atoms.iter().filter(|a| a.location <= x).map(|a| a.weight))
            }
            BaseKind::UniformInterval { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            BaseKind::ParetoTail {
                scale,
                exponent,
                symmetric,
            } => {
                if *symmetric {
                    if x <= -scale {
                        0.5 * (scale / -x).powf(*exponent)
                    } else if x < *scale {
                        0.5
                    } else {
                        1.0 - 0.5 * (scale / x).powf(*exponent)
                    }
                } else if x < *scale {
                    0.0
                } else {
                    1.0 - (scale / x).powf(*exponent)
                }
            }
        }
    }

    /// `mu(|X| > t)`.
    pub fn tail(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match &self.kind {
            BaseKind::FiniteAtoms { atoms } => crate::numeric::exact_sum(
                atoms.iter().filter(|a| a.location.abs() > t).map(|a| a.weight),
            ),
            BaseKind::UniformInterval { .. } => self.cdf_open(-t) + (1.0 - self.cdf(t)),
            BaseKind::ParetoTail { scale, exponent, .. } => {
                if t < *scale {
                    1.0
                } else {
                    (scale / t).powf(*exponent)
                }
            }
        }
    }

    /// `mu((-inf, x))`; equals `cdf` for continuous measures.
    pub fn cdf_open(&self, x: f64) -> f64 {
        match &self.kind {
            BaseKind::FiniteAtoms { atoms } => {
                crate::numeric::exact_sum(atoms.iter().filter(|a| a.location < x).map(|a| a.weight))
            }
            _ => self.cdf(x),
        }
    }

    /// `int |x|^alpha dmu`; infinite when the moment diverges.
    pub fn moment(&self, alpha: f64) -> f64 {
        self.partial_moment(alpha, f64::NEG_INFINITY, f64::INFINITY)
    }

    /// `int_{x1 < x <= x2} |x|^alpha dmu`.
    pub fn partial_moment(&self, alpha: f64, x1: f64, x2: f64) -> f64 {
        if x2 <= x1 {
            return 0.0;
        }
        match &self.kind {
            BaseKind::FiniteAtoms { atoms } => crate::numeric::exact_sum(
                atoms
                    .iter()
                    .filter(|a| a.location > x1 && a.location <= x2)
                    .map(|a| a.weight * a.location.abs().powf(alpha)),
            ),
            BaseKind::UniformInterval { lo, hi } => {
                let a = x1.max(*lo);
                let b = x2.min(*hi);
                if b <= a {
                    return 0.0;
                }
                let anti = |t: f64| t.signum() * t.abs().powf(alpha + 1.0) / (alpha + 1.0);
                (anti(b) - anti(a)) / (hi - lo)
            }
            BaseKind::ParetoTail {
                scale,
                exponent,
                symmetric,
            } => {
                // mass density on the positive half-line
                let half = if *symmetric { 0.5 } else { 1.0 };
                let positive = |a: f64, b: f64| -> f64 {
                    let a = a.max(*scale);
                    if b <= a {
                        return 0.0;
                    }
                    if alpha >= *exponent && b.is_infinite() {
                        return f64::INFINITY;
                    }
                    pareto_segment(*scale, *exponent, alpha, a, b)
                };
                let mut total = half * positive(x1.max(0.0), x2);
                if *symmetric && x1 < 0.0 {
                    // mirror (x1, min(x2,0)] onto [-min(x2,0), -x1)
                    total += half * positive((-x2).max(0.0), -x1);
                }
                total
            }
        }
    }
}

fn pareto_segment(scale: f64, exponent: f64, alpha: f64, a: f64, b: f64) -> f64 {
    // int_a^b x^alpha * exponent * scale^exponent * x^(-exponent-1) dx
    let k = alpha - exponent;
    let c = exponent * scale.powf(exponent);
    if k.abs() < 1e-300 {
        c * (b.ln() - a.ln())
    } else {
        let fb = if b.is_infinite() { 0.0 } else { b.powf(k) };
        c * (fb - a.powf(k)) / k
    }
}

/// Index of the first cumulative weight exceeding `u`; `None` if `u` lies
/// beyond the (rounded) total.
pub(crate) fn quantile_weights(weights: impl Iterator<Item = f64>, u: f64) -> Option<usize> {
    let mut cum = 0.0;
    let mut last = None;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last = Some(i);
        }
        cum += w;
        if u < cum && w > 0.0 {
            return Some(i);
        }
    }
    last
}

/// Uniform draw in the open interval `(0, 1)` with 53 random bits.
#[inline]
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_measures() {
        assert!(BaseMeasure::new(
            BaseKind::FiniteAtoms { atoms: vec![Atom { location: 0.0, weight: 1.0 }] },
            1.0,
            false
        )
        .is_err());
        let bad = BaseMeasure::new(
            BaseKind::FiniteAtoms {
                atoms: vec![Atom { location: 0.0, weight: 0.5 }, Atom { location: 1.0, weight: 0.4 }],
            },
            1.0,
            false,
        );
        assert!(matches!(bad, Err(LabError::InvalidMeasure(m)) if m.contains("sum")));
        assert!(BaseMeasure::uniform(1.0, 1.0).is_err());
        let err = BaseMeasure::pareto(1.0, 1.0, true, 1.0).unwrap_err();
        assert!(err.to_string().contains("moment condition unsatisfiable"));
        let dup = BaseMeasure::new(
            BaseKind::FiniteAtoms {
                atoms: vec![Atom { location: 1.0, weight: 0.5 }, Atom { location: 1.0, weight: 0.5 }],
            },
            1.0,
            false,
        );
        assert!(dup.is_err());
    }

    #[test]
    fn pareto_quantile_inverts_cdf() {
        let m = BaseMeasure::pareto(1.0, 1.5, true, 1.0).unwrap();
        for &u in &[0.01, 0.2, 0.49, 0.51, 0.9, 0.999] {
            let x = m.quantile(u);
            assert!((m.cdf(x) - u).abs() < 1e-12, "u={u} x={x}");
        }
        let p = BaseMeasure::pareto(2.0, 3.0, false, 1.0).unwrap();
        assert!((p.tail(4.0) - 0.125).abs() < 1e-15);
        assert!((p.cdf(p.quantile(0.3)) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn moments_closed_form() {
        // E|X| for Pareto(s=1, a=3) = a s / (a - 1) = 1.5
        let p = BaseMeasure::pareto(1.0, 3.0, true, 1.0).unwrap();
        assert!((p.moment(1.0) - 1.5).abs() < 1e-12);
        assert!((p.partial_moment(1.0, f64::NEG_INFINITY, 0.0) - 0.75).abs() < 1e-12);
        // E|X|^2 for U[-1,1] = 1/3
        let u = BaseMeasure::uniform(-1.0, 1.0).unwrap();
        assert!((u.moment(2.0) - 1.0 / 3.0).abs() < 1e-14);
        assert!((u.tail(0.5) - 0.5).abs() < 1e-15);
        let b = BaseMeasure::bernoulli(-1.0, 2.0, 0.5).unwrap();
        assert!((b.moment(2.0) - 2.5).abs() < 1e-15);
        assert!((b.tail(1.5) - 0.5).abs() < 1e-15);
    }
}
