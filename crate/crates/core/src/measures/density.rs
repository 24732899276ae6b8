use serde::{Deserialize, Serialize};

use super::base::{BaseMeasure, Issue};
use crate::error::{LabError, Result};

/// A rule selecting lattice sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SiteSet {
    All,
    /// Explicit finite set.
    Sites { sites: Vec<i64> },
    /// `{ +-2^k : k >= 0 }`.
    Dyadic,
    Range { lo: i64, hi: i64 },
}

impl SiteSet {
    pub fn contains(&self, n: i64) -> bool {
        match self {
            SiteSet::All => true,
            SiteSet::Sites { sites } => sites.contains(&n),
            SiteSet::Dyadic => n != 0 && n.unsigned_abs().is_power_of_two(),
            SiteSet::Range { lo, hi } => *lo <= n && n <= *hi,
        }
    }
}

/// One rule of an atom reweighting schedule: on `sites`, atom `m` receives
/// probability `weights[m]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReweightRule {
    pub sites: SiteSet,
    pub weights: Vec<f64>,
    /// `weights[m] / base_weight[m]`, i.e. the density on atom `m`.
    ratios: Vec<f64>,
    sup_norm: f64,
}

impl ReweightRule {
    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }
}

/// Reweighted atoms: the first rule whose site set contains `n` wins;
/// other sites keep the base law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomReweight {
    locations: Vec<f64>,
    base_weights: Vec<f64>,
    rules: Vec<ReweightRule>,
}

impl AtomReweight {
    pub fn rules(&self) -> &[ReweightRule] {
        &self.rules
    }

    pub fn rule_at(&self, n: i64) -> Option<&ReweightRule> {
        self.rules.iter().find(|r| r.sites.contains(n))
    }

    /// Per-atom probabilities at site `n`.
    pub fn weights_at(&self, n: i64) -> &[f64] {
        self.rule_at(n).map_or(&self.base_weights, |r| &r.weights)
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    fn atom_index(&self, x: f64) -> Option<usize> {
        self.locations.iter().position(|&l| l == x)
    }
}

/// A two-level density on a continuous base: `height` on the lower
/// `mass`-quantile region of the base law and a compensating `level` above it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpSchedule {
    pub sites: SiteSet,
    pub height: f64,
    pub mass: f64,
    threshold: f64,
    level: f64,
}

impl BumpSchedule {
    pub fn threshold(&self) -> f64 {
        self.threshold
    }
    pub fn level(&self) -> f64 {
        self.level
    }
    fn sup_norm(&self) -> f64 {
        self.height.max(self.level)
    }
    fn eval(&self, x: f64) -> f64 {
        if x <= self.threshold {
            self.height
        } else {
            self.level
        }
    }
}

/// The rule `n -> g_n` giving the perturbed site laws `g_n mu`.
///
/// Sequences are rules over all of Z; sites outside a schedule's support use
/// `g_n = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensitySequence {
    Identity,
    AtomReweight(AtomReweight),
    Bump(BumpSchedule),
}

impl DensitySequence {
    /// Atom reweighting. Each rule's weights must be a probability vector
    /// over the atoms of `base`.
    pub fn atom_reweight(base: &BaseMeasure, rules: Vec<(SiteSet, Vec<f64>)>) -> Result<Self> {
        let issues = Self::check_reweight(base, &rules);
        if let Some(i) = issues.first() {
            return Err(LabError::InvalidDensity(format!("{}: {}", i.field, i.message)));
        }
        let atoms = base.atoms().expect("checked");
        let locations: Vec<f64> = atoms.iter().map(|a| a.location).collect();
        let base_weights: Vec<f64> = atoms.iter().map(|a| a.weight).collect();
        let rules = rules
            .into_iter()
            .map(|(sites, weights)| {
                let ratios: Vec<f64> = weights
                    .iter()
                    .zip(&base_weights)
                    .map(|(b, a)| b / a)
                    .collect();
                let sup_norm = ratios.iter().copied().fold(0.0, f64::max);
                ReweightRule {
                    sites,
                    weights,
                    ratios,
                    sup_norm,
                }
            })
            .collect();
        Ok(DensitySequence::AtomReweight(AtomReweight {
            locations,
            base_weights,
            rules,
        }))
    }

    pub fn check_reweight(base: &BaseMeasure, rules: &[(SiteSet, Vec<f64>)]) -> Vec<Issue> {
        let mut issues = Vec::new();
        let Some(atoms) = base.atoms() else {
            issues.push(Issue::new("kind", "atom_reweight requires a finite_atoms measure"));
            return issues;
        };
        for (r, (sites, weights)) in rules.iter().enumerate() {
            if weights.len() != atoms.len() {
                issues.push(Issue::new(
                    format!("rules[{r}].weights"),
                    format!("expected {} weights, got {}", atoms.len(), weights.len()),
                ));
                continue;
            }
            if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                issues.push(Issue::new(format!("rules[{r}].weights"), "weights must be non-negative"));
            }
            let total = crate::numeric::exact_sum(weights.iter().copied());
            if (total - 1.0).abs() > super::base::ATOM_WEIGHT_TOLERANCE {
                issues.push(Issue::new(
                    format!("rules[{r}].weights"),
                    format!("weights sum to {total}, expected 1"),
                ));
            }
            if let SiteSet::Range { lo, hi } = sites {
                if lo > hi {
                    issues.push(Issue::new(format!("rules[{r}].sites"), "empty range"));
                }
            }
        }
        issues
    }

    /// Two-level bump densities on a continuous base.
    pub fn bump(base: &BaseMeasure, sites: SiteSet, height: f64, mass: f64) -> Result<Self> {
        let issues = Self::check_bump(base, height, mass);
        if let Some(i) = issues.first() {
            return Err(LabError::InvalidDensity(format!("{}: {}", i.field, i.message)));
        }
        let level = (1.0 - height * mass) / (1.0 - mass);
        Ok(DensitySequence::Bump(BumpSchedule {
            sites,
            height,
            mass,
            threshold: base.quantile(mass),
            level,
        }))
    }

    pub fn check_bump(base: &BaseMeasure, height: f64, mass: f64) -> Vec<Issue> {
        let mut issues = Vec::new();
        if !base.is_continuous() {
            issues.push(Issue::new("kind", "bump densities require a continuous measure; use atom_reweight"));
        }
        if !(mass.is_finite() && mass > 0.0 && mass < 1.0) {
            issues.push(Issue::new("mass", "must lie in (0, 1)"));
        }
        if !(height.is_finite() && height >= 0.0) {
            issues.push(Issue::new("height", "must be non-negative"));
        } else if height * mass > 1.0 {
            issues.push(Issue::new("height", "height * mass must not exceed 1 (normalization)"));
        }
        issues
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, DensitySequence::Identity)
    }

    /// `g_n(x)`; zero off the support of the atoms.
    pub fn eval(&self, n: i64, x: f64) -> f64 {
        match self {
            DensitySequence::Identity => 1.0,
            DensitySequence::AtomReweight(a) => match a.rule_at(n) {
                None => 1.0,
                Some(rule) => a.atom_index(x).map_or(0.0, |m| rule.ratios[m]),
            },
            DensitySequence::Bump(b) => {
                if b.sites.contains(n) {
                    b.eval(x)
                } else {
                    1.0
                }
            }
        }
    }

    /// `||g_n||_inf` (exactly `max_m beta_{n,m} / alpha_m` for atoms).
    pub fn sup_norm(&self, n: i64) -> f64 {
        match self {
            DensitySequence::Identity => 1.0,
            DensitySequence::AtomReweight(a) => a.rule_at(n).map_or(1.0, |r| r.sup_norm),
            DensitySequence::Bump(b) => {
                if b.sites.contains(n) {
                    b.sup_norm()
                } else {
                    1.0
                }
            }
        }
    }

    /// `int g_n dmu` for the base measure this sequence was built against.
    pub fn integral(&self, n: i64, base: &BaseMeasure) -> f64 {
        match self {
            DensitySequence::Identity => 1.0,
            DensitySequence::AtomReweight(a) => match a.rule_at(n) {
                None => 1.0,
                Some(r) => crate::numeric::exact_sum(
                    r.ratios.iter().zip(&a.base_weights).map(|(g, w)| g * w),
                ),
            },
            DensitySequence::Bump(b) => {
                if b.sites.contains(n) {
                    let below = base.cdf(b.threshold);
                    b.height * below + b.level * (1.0 - below)
                } else {
                    1.0
                }
            }
        }
    }
}
