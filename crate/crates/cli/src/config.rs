//! Scenario configuration: one JSON document per run.
//!
//! Parsing is two-stage. The typed parse rejects unknown keys and wrong
//! types; the semantic pass then collects every violated constraint with its
//! JSON path. Neither stage touches a random generator.

use std::fmt;
use std::path::{Path, PathBuf};

use anderson_lab::estimators::Statistic;
use anderson_lab::measures::{Atom, BaseKind, BaseMeasure, DensitySequence, ProductLaw, SiteSet};
use anderson_lab::transfer::Energy;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::expect::Expect;
use crate::Command;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub measure: MeasureConfig,
    #[serde(default)]
    pub densities: DensityConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub grids: GridConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub location: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureConfig {
    FiniteAtoms {
        atoms: Vec<AtomConfig>,
        alpha_moment: f64,
        #[serde(default)]
        allow_trivial: bool,
    },
    UniformInterval {
        lo: f64,
        hi: f64,
        alpha_moment: f64,
    },
    ParetoTail {
        scale: f64,
        exponent: f64,
        #[serde(default)]
        symmetric: bool,
        alpha_moment: f64,
    },
}

impl MeasureConfig {
    fn parts(&self) -> (BaseKind, f64, bool) {
        match self {
            MeasureConfig::FiniteAtoms {
                atoms,
                alpha_moment,
                allow_trivial,
            } => (
                BaseKind::FiniteAtoms {
                    atoms: atoms
                        .iter()
                        .map(|a| Atom {
                            location: a.location,
                            weight: a.weight,
                        })
                        .collect(),
                },
                *alpha_moment,
                *allow_trivial,
            ),
            MeasureConfig::UniformInterval { lo, hi, alpha_moment } => {
                (BaseKind::UniformInterval { lo: *lo, hi: *hi }, *alpha_moment, false)
            }
            MeasureConfig::ParetoTail {
                scale,
                exponent,
                symmetric,
                alpha_moment,
            } => (
                BaseKind::ParetoTail {
                    scale: *scale,
                    exponent: *exponent,
                    symmetric: *symmetric,
                },
                *alpha_moment,
                false,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleConfig {
    pub sites: SiteSet,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityConfig {
    #[default]
    Identity,
    AtomReweight {
        rules: Vec<RuleConfig>,
    },
    Bump {
        sites: SiteSet,
        height: f64,
        mass: f64,
    },
}

/// A real energy or `{"re": .., "im": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnergySpec {
    Real(f64),
    Complex(Energy),
}

impl EnergySpec {
    pub fn energy(&self) -> Energy {
        match *self {
            EnergySpec::Real(e) => Energy::real(e),
            EnergySpec::Complex(e) => e,
        }
    }
}

fn default_id() -> String {
    "scenario".into()
}
fn default_one() -> f64 {
    1.0
}
fn default_interval() -> [f64; 2] {
    [-0.5, 0.5]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_id")]
    pub id: String,
    #[serde(default)]
    pub energies: Vec<EnergySpec>,
    /// Absolute deviation threshold.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Threshold as a fraction of `gamma_hat(E)`.
    #[serde(default)]
    pub epsilon_fraction: Option<f64>,
    #[serde(default = "default_statistic")]
    pub statistic: Statistic,
    #[serde(default)]
    pub families: Option<Vec<Statistic>>,
    #[serde(default = "default_one")]
    pub rate_exponent: f64,
    #[serde(default = "default_interval")]
    pub interval: [f64; 2],
    #[serde(default)]
    pub box_half_width: Option<u64>,
    #[serde(default)]
    pub epsilon0: Option<f64>,
    /// Moment exponent used by the edge census; defaults to the measure's.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "default_one")]
    pub p: f64,
    #[serde(default)]
    pub r: Vec<f64>,
    /// Sites `[lo, hi]` of the box diagonalized by `spectrum`.
    #[serde(default)]
    pub window: Option<[i64; 2]>,
    #[serde(default)]
    pub expect: Option<Expect>,
}

fn default_statistic() -> Statistic {
    Statistic::LogNorm
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_value(Value::Object(Default::default())).expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyRange {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

fn default_condition_n() -> u64 {
    10_000
}
fn default_condition_k() -> u64 {
    1_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub n: Vec<u64>,
    #[serde(default)]
    pub energy: Vec<f64>,
    #[serde(default)]
    pub energy_range: Option<EnergyRange>,
    #[serde(default = "default_condition_n")]
    pub condition_n_max: u64,
    #[serde(default = "default_condition_k")]
    pub condition_k_max: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        serde_json::from_value(Value::Object(Default::default())).expect("all fields have defaults")
    }
}

impl GridConfig {
    /// The explicit energy grid, else the uniform range.
    pub fn energies(&self) -> Vec<f64> {
        if !self.energy.is_empty() {
            return self.energy.clone();
        }
        match self.energy_range {
            Some(EnergyRange { lo, hi, points }) if points >= 2 => {
                (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
            }
            Some(EnergyRange { lo, .. }) => vec![lo],
            None => Vec::new(),
        }
    }
}

fn default_samples() -> u64 {
    1000
}
fn default_gamma_n() -> u64 {
    1000
}
fn default_gamma_samples() -> u64 {
    200
}
fn default_burn_in() -> usize {
    anderson_lab::estimators::DEFAULT_BURN_IN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default = "default_gamma_n")]
    pub gamma_n: u64,
    #[serde(default = "default_gamma_samples")]
    pub gamma_samples: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        serde_json::from_value(Value::Object(Default::default())).expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
    #[serde(default)]
    pub stem: Option<String>,
}

/// A violated constraint, located by JSON path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Read and parse a config file; unreadable or malformed files yield a
/// single violation.
pub fn read(path: &Path) -> Result<Value, Vec<Violation>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| vec![Violation::new(path.display().to_string(), format!("cannot read config: {e}"))])?;
    serde_json::from_str(&text).map_err(|e| vec![Violation::new("$", format!("invalid JSON: {e}"))])
}

/// Typed parse followed by every semantic check relevant to `command`.
/// The seed override replaces `sampling.seed` first.
pub fn validate(value: &Value, command: Command, seed: Option<u64>) -> Result<Config, Vec<Violation>> {
    let mut cfg: Config = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "$".to_string() } else { path };
        vec![Violation::new(path, e.into_inner().to_string())]
    })?;
    if seed.is_some() {
        cfg.sampling.seed = seed;
    }
    let v = violations(&cfg, command);
    if v.is_empty() {
        Ok(cfg)
    } else {
        Err(v)
    }
}

fn check_n_grid(grid: &[u64], min: u64, out: &mut Vec<Violation>) {
    if grid.is_empty() {
        out.push(Violation::new("grids.n", "required for this command"));
    } else if grid[0] < min || grid.windows(2).any(|w| w[0] >= w[1]) {
        out.push(Violation::new(
            "grids.n",
            format!("must be strictly increasing with every n >= {min}"),
        ));
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// Every constraint violated by `cfg` for `command`.
pub fn violations(cfg: &Config, command: Command) -> Vec<Violation> {
    let mut out = Vec::new();
    let (kind, alpha, trivial) = cfg.measure.parts();
    for issue in BaseMeasure::check(&kind, alpha, trivial) {
        let msg = if issue.message == "non-trivial support required" {
            "measure: non-trivial support required".to_string()
        } else {
            issue.message
        };
        out.push(Violation::new(format!("measure.{}", issue.field), msg));
    }
    if out.is_empty() {
        let base = BaseMeasure::new(kind, alpha, trivial).expect("checked");
        let issues = match &cfg.densities {
            DensityConfig::Identity => Vec::new(),
            DensityConfig::AtomReweight { rules } => {
                let rules: Vec<(SiteSet, Vec<f64>)> = rules.iter().map(|r| (r.sites.clone(), r.weights.clone())).collect();
                DensitySequence::check_reweight(&base, &rules)
            }
            DensityConfig::Bump { height, mass, .. } => DensitySequence::check_bump(&base, *height, *mass),
        };
        for i in issues {
            out.push(Violation::new(format!("densities.{}", i.field), i.message));
        }
    }

    let s = &cfg.sampling;
    if s.seed.is_none() {
        out.push(Violation::new("sampling.seed", "required (or pass --seed)"));
    }
    if s.samples == 0 {
        out.push(Violation::new("sampling.samples", "must be positive"));
    }
    if s.gamma_n == 0 {
        out.push(Violation::new("sampling.gamma_n", "must be positive"));
    }
    if s.gamma_samples == 0 {
        out.push(Violation::new("sampling.gamma_samples", "must be positive"));
    }
    if let Some(r) = cfg.grids.energy_range {
        if !(r.lo.is_finite() && r.hi.is_finite() && r.lo <= r.hi) || r.points == 0 {
            out.push(Violation::new("grids.energy_range", "need finite lo <= hi and points >= 1"));
        }
    }
    if cfg.grids.energy.windows(2).any(|w| !(w[0] < w[1])) {
        out.push(Violation::new("grids.energy", "must be strictly increasing"));
    }

    let e = &cfg.experiment;
    if e.id.is_empty() {
        out.push(Violation::new("experiment.id", "must not be empty"));
    }
    let needs_energies = matches!(command, Command::Lyapunov | Command::Lde | Command::LiftCheck);
    if needs_energies && e.energies.is_empty() {
        out.push(Violation::new("experiment.energies", "at least one energy required"));
    }
    for (k, en) in e.energies.iter().enumerate() {
        let z = en.energy();
        if !(z.re.is_finite() && z.im.is_finite()) {
            out.push(Violation::new(format!("experiment.energies[{k}]"), "must be finite"));
        }
    }
    if matches!(command, Command::Lde | Command::LiftCheck) {
        match (e.epsilon, e.epsilon_fraction) {
            (Some(_), Some(_)) => out.push(Violation::new("experiment.epsilon", "give epsilon or epsilon_fraction, not both")),
            (None, None) => out.push(Violation::new("experiment.epsilon", "epsilon or epsilon_fraction required")),
            (Some(x), None) | (None, Some(x)) if !positive(x) => {
                out.push(Violation::new("experiment.epsilon", "must be positive"))
            }
            _ => {}
        }
        if e.rate_exponent != 1.0 && e.rate_exponent != 0.5 {
            out.push(Violation::new("experiment.rate_exponent", "must be 1 or 0.5"));
        }
    }
    match command {
        Command::Lyapunov | Command::Lde | Command::LiftCheck => check_n_grid(&cfg.grids.n, 1, &mut out),
        Command::Localize | Command::Census => {
            check_n_grid(&cfg.grids.n, 1, &mut out);
            let [lo, hi] = e.interval;
            if !(lo < hi) {
                out.push(Violation::new("experiment.interval", "need s < t"));
            }
            if let Some(h) = e.box_half_width {
                if h < 100 {
                    out.push(Violation::new("experiment.box_half_width", "the box must have at least 200 sites"));
                }
            }
            if let Some(x) = e.epsilon0 {
                if !positive(x) {
                    out.push(Violation::new("experiment.epsilon0", "must be positive"));
                }
            }
            if !cfg.grids.energy.is_empty() {
                let g = &cfg.grids.energy;
                if g.windows(2).any(|w| w[1] - w[0] > anderson_lab::experiments::MAX_GRID_SPACING + 1e-12)
                    || g[0] > lo + anderson_lab::experiments::MAX_GRID_SPACING
                    || g[g.len() - 1] < hi - anderson_lab::experiments::MAX_GRID_SPACING
                {
                    out.push(Violation::new("grids.energy", "must cover the interval with spacing at most 0.1"));
                }
            }
        }
        Command::EdgeCensus => {
            check_n_grid(&cfg.grids.n, 2, &mut out);
            if e.r.is_empty() || e.r.iter().any(|&r| !(r > 1.0)) {
                out.push(Violation::new("experiment.r", "need at least one r, each r > 1"));
            }
            if !positive(e.p) {
                out.push(Violation::new("experiment.p", "must be positive"));
            }
            if let Some(a) = e.alpha {
                if !positive(a) {
                    out.push(Violation::new("experiment.alpha", "must be positive"));
                }
            }
        }
        Command::CraigSimon => {
            check_n_grid(&cfg.grids.n, 2, &mut out);
            if cfg.grids.energies().is_empty() {
                out.push(Violation::new("grids.energy", "an energy grid (or energy_range) is required"));
            }
        }
        Command::Spectrum => {
            if let Some([lo, hi]) = e.window {
                if hi < lo {
                    out.push(Violation::new("experiment.window", "need lo <= hi"));
                }
            }
        }
        Command::Conditions => {
            if cfg.grids.condition_n_max == 0 {
                out.push(Violation::new("grids.condition_n_max", "must be positive"));
            }
        }
    }
    out
}

impl Config {
    pub fn seed(&self) -> u64 {
        self.sampling.seed.expect("validated")
    }

    pub fn base(&self) -> BaseMeasure {
        let (kind, alpha, trivial) = self.measure.parts();
        BaseMeasure::new(kind, alpha, trivial).expect("validated")
    }

    pub fn densities(&self) -> DensitySequence {
        let base = self.base();
        match &self.densities {
            DensityConfig::Identity => DensitySequence::Identity,
            DensityConfig::AtomReweight { rules } => DensitySequence::atom_reweight(
                &base,
                rules.iter().map(|r| (r.sites.clone(), r.weights.clone())).collect(),
            )
            .expect("validated"),
            DensityConfig::Bump { sites, height, mass } => {
                DensitySequence::bump(&base, sites.clone(), *height, *mass).expect("validated")
            }
        }
    }

    /// `P1` for identity densities, `P0` otherwise.
    pub fn law(&self) -> ProductLaw {
        let d = self.densities();
        if d.is_identity() {
            ProductLaw::exact(self.base())
        } else {
            ProductLaw::approximate(self.base(), d)
        }
    }

    pub fn energies(&self) -> Vec<Energy> {
        self.experiment.energies.iter().map(EnergySpec::energy).collect()
    }
}
