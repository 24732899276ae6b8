//! Expectations attached to a scenario and pinned values from the
//! checked-in expectations file.

use std::collections::BTreeMap;
use std::path::Path;

use anderson_lab::numeric::serde_float;
use anderson_lab::stats::SIGMA_TOLERANCE;
use serde::{Deserialize, Serialize};

/// Name of the pinned-values file, looked up next to the config.
pub const EXPECTATIONS_FILE: &str = "expectations.json";

/// Pass criteria of one scenario. Every field is optional; only the ones
/// present are checked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    /// Key into the expectations file.
    #[serde(default)]
    pub pinned: Option<String>,
    /// `lyapunov`: the constant potential value `c`; every estimate must
    /// equal the closed form.
    #[serde(default)]
    pub closed_form: Option<f64>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// `lde`: fitted rates positive with the confidence interval excluding 0.
    #[serde(default)]
    pub eta_positive: Option<bool>,
    /// `lift-check`: no bound violation and no failed rate check.
    #[serde(default)]
    pub lift_holds: Option<bool>,
    /// `conditions`: expected verdict per condition name.
    #[serde(default)]
    pub verdicts: Option<BTreeMap<String, String>>,
    /// `localize`.
    #[serde(default)]
    pub min_pass_fraction: Option<f64>,
    /// `census`: counts reach zero at some grid `n` below this.
    #[serde(default)]
    pub zero_before: Option<u64>,
    /// `edge-census`: every frequency within tolerance of the prediction.
    #[serde(default)]
    pub within_tolerance: Option<bool>,
    /// `edge-census`: whether violations are flagged as persistent.
    #[serde(default)]
    pub persistent: Option<bool>,
    /// `craig-simon`: excess at the largest `n` below this for every family.
    #[serde(default)]
    pub max_excess_below: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// A named scalar result of a run, with its standard error (0 for
/// deterministic quantities).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    #[serde(with = "serde_float")]
    pub value: f64,
    #[serde(with = "serde_float")]
    pub stderr: f64,
}

impl Observable {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pinned {
    #[serde(with = "serde_float")]
    pub value: f64,
    #[serde(default)]
    pub stderr: f64,
    #[serde(default)]
    pub tolerance: f64,
}

impl Pinned {
    /// `|x - value| <= 3 sqrt(se_x^2 + se^2) + tolerance`; NaN matches NaN.
    pub fn matches(&self, o: &Observable) -> bool {
        if self.value.is_nan() || o.value.is_nan() {
            return self.value.is_nan() && o.value.is_nan();
        }
        (o.value - self.value).abs() <= SIGMA_TOLERANCE * o.stderr.hypot(self.stderr) + self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinEntry {
    pub command: String,
    /// Config path relative to the expectations file.
    pub config: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Independent oracle replacing the run's own values, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default)]
    pub values: BTreeMap<String, Pinned>,
}

pub type Expectations = BTreeMap<String, PinEntry>;

pub fn load_expectations(path: &Path) -> Result<Expectations, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Compare the run's observables with a pinned entry.
pub fn check_pinned(key: &str, entry: &PinEntry, seed: u64, observed: &BTreeMap<String, Observable>) -> Vec<Check> {
    let mut out = Vec::new();
    if let Some(s) = entry.seed {
        if s != seed {
            out.push(Check::new(
                format!("pinned {key} seed"),
                false,
                format!("values were pinned at seed {s}, run used {seed}"),
            ));
            return out;
        }
    }
    if entry.values.is_empty() {
        out.push(Check::new(format!("pinned {key}"), false, "no pinned values; run pin-expectations"));
    }
    for (name, pin) in &entry.values {
        let check = match observed.get(name) {
            None => Check::new(format!("pinned {key} {name}"), false, "not produced by this run"),
            Some(o) => Check::new(
                format!("pinned {key} {name}"),
                pin.matches(o),
                format!("observed {} (se {}), pinned {} (se {}, tol {})", o.value, o.stderr, pin.value, pin.stderr, pin.tolerance),
            ),
        };
        out.push(check);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinned_tolerance_combines_errors() {
        let p = Pinned {
            value: 1.0,
            stderr: 0.03,
            tolerance: 0.0,
        };
        // 3 * hypot(0.04, 0.03) = 0.15
        assert!(p.matches(&Observable { value: 1.149, stderr: 0.04 }));
        assert!(!p.matches(&Observable { value: 1.151, stderr: 0.04 }));
        let nan = Pinned {
            value: f64::NAN,
            stderr: 0.0,
            tolerance: 0.0,
        };
        assert!(nan.matches(&Observable::exact(f64::NAN)));
        assert!(!nan.matches(&Observable::exact(0.0)));
    }

    #[test]
    fn seed_mismatch_fails() {
        let e = PinEntry {
            command: "localize".into(),
            config: "x.json".into(),
            seed: Some(2),
            oracle: None,
            note: None,
            values: BTreeMap::new(),
        };
        let c = check_pinned("k", &e, 3, &BTreeMap::new());
        assert!(!c[0].passed);
    }
}
