//! End-to-end studies: eigenfunction localization, regularity census,
//! edge bounds for heavy tails, and persistence of results.

mod edge;
mod localization;
mod persist;

pub use edge::{edge_bound_census, edge_zone, EdgeReport, EdgeRow, EdgeTrend};
pub use localization::{
    fit_decay, run_localization, singularity_census, CensusReport, CensusRow, DecayFit, EigenRow, LocalizationReport,
    CENSUS_CENTER_RADIUS, MIN_DECAY_RATE,
};
pub use persist::{config_digest, format_float, load_report, persist, RunManifest, Table};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimators::{lyapunov_mc, Estimate};
use crate::measures::{BaseMeasure, DensitySequence, LawTag, ProductLaw};
use crate::numeric::serde_float;
use crate::parallel::try_map_indexed;
use crate::rng::RngStream;
use crate::transfer::Energy;

/// Largest admissible spacing of the energy grid used for `nu_I`.
pub const MAX_GRID_SPACING: f64 = 0.1;
const DEFAULT_GRID_SPACING: f64 = 0.05;

/// Sub-streams of a scenario seed.
pub mod streams {
    pub const WINDOW: u64 = 11;
    pub const GAMMA: u64 = 12;
    pub const NU: u64 = 13;
    pub const EDGE: u64 = 14;
}

/// One study: a law, an energy interval `I = [s, t]`, grids and sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub seed: u64,
    pub base: BaseMeasure,
    pub densities: DensitySequence,
    pub interval: [f64; 2],
    /// Energy grid for `nu_I`; a uniform grid of spacing 0.05 when empty.
    #[serde(default)]
    pub energy_grid: Vec<f64>,
    pub n_grid: Vec<u64>,
    /// The localization box is `[-h, h-1]`.
    pub box_half_width: u64,
    /// Length and sample count of the exponent estimates.
    pub gamma_n: u64,
    pub gamma_samples: u64,
    #[serde(default)]
    pub epsilon0: Option<f64>,
}

impl Scenario {
    pub fn new(id: impl Into<String>, seed: u64, base: BaseMeasure, densities: DensitySequence) -> Self {
        Self {
            id: id.into(),
            seed,
            base,
            densities,
            interval: [-0.5, 0.5],
            energy_grid: Vec::new(),
            n_grid: (1..=40).map(|k| 5 * k).collect(),
            box_half_width: 200,
            gamma_n: 1000,
            gamma_samples: 200,
            epsilon0: None,
        }
    }

    /// The scenario law: `P1` for identity densities, `P0` otherwise.
    pub fn law(&self) -> ProductLaw {
        if self.densities.is_identity() {
            ProductLaw::exact(self.base.clone())
        } else {
            ProductLaw::approximate(self.base.clone(), self.densities.clone())
        }
    }

    pub fn law_tag(&self) -> LawTag {
        self.law().tag()
    }

    /// The same scenario under the stationary law.
    pub fn stationary(&self) -> Scenario {
        Scenario {
            densities: DensitySequence::Identity,
            ..self.clone()
        }
    }

    pub fn stream(&self, tag: u64) -> RngStream {
        RngStream::new(self.seed, 0).child(tag)
    }

    pub fn validate(&self) -> Result<()> {
        let [s, t] = self.interval;
        if !(s < t) {
            return Err(invalid("interval", format!("need s < t, got [{s}, {t}]")));
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) || self.n_grid[0] == 0 {
            return Err(invalid("n_grid", "must be non-empty, positive and strictly increasing"));
        }
        if self.gamma_n == 0 || self.gamma_samples == 0 {
            return Err(invalid("gamma_samples", "exponent estimates need positive n and samples"));
        }
        if let Some(e) = self.epsilon0 {
            if !(e > 0.0) {
                return Err(invalid("epsilon0", "must be positive"));
            }
        }
        self.nu_grid().map(|_| ())
    }

    /// The grid used for `nu_I`, checked to cover `I` with spacing at most
    /// [`MAX_GRID_SPACING`].
    pub fn nu_grid(&self) -> Result<Vec<f64>> {
        let [s, t] = self.interval;
        if self.energy_grid.is_empty() {
            let k = ((t - s) / DEFAULT_GRID_SPACING).ceil().max(1.0) as usize;
            return Ok((0..=k).map(|i| s + (t - s) * i as f64 / k as f64).collect());
        }
        let g = &self.energy_grid;
        if g.windows(2).any(|w| !(w[1] > w[0]) || w[1] - w[0] > MAX_GRID_SPACING + 1e-12) {
            return Err(invalid("energy_grid", "must be increasing with spacing at most 0.1"));
        }
        if g[0] > s + MAX_GRID_SPACING || *g.last().expect("non-empty") < t - MAX_GRID_SPACING {
            return Err(invalid("energy_grid", "must cover the interval"));
        }
        Ok(g.clone())
    }
}

/// `nu_I = min_E (gamma_hat(E) - stderr)` over the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuEstimate {
    #[serde(with = "serde_float")]
    pub nu: f64,
    pub grid: Vec<f64>,
    pub gamma: Vec<Estimate>,
    /// Present when some `gamma_hat(E)` is below `3 stderr` or below the
    /// resolution floor [`MIN_DECAY_RATE`].
    pub warning: Option<String>,
}

impl NuEstimate {
    /// `epsilon_0 = min(0.1, nu / 10)`.
    pub fn default_epsilon0(&self) -> f64 {
        (self.nu / 10.0).min(0.1)
    }
}

/// Minimum over the energy grid of the stationary exponent minus its stderr.
pub fn nu_inf(scenario: &Scenario) -> Result<NuEstimate> {
    let grid = scenario.nu_grid()?;
    let law = scenario.stationary().law();
    let stream = scenario.stream(streams::NU);
    let gamma = try_map_indexed(grid.len(), |k| {
        lyapunov_mc(&law, Energy::real(grid[k]), scenario.gamma_n, scenario.gamma_samples, stream).map(|l| Estimate::from(&l))
    })?;
    let nu = gamma.iter().map(|g| g.value - g.stderr).fold(f64::INFINITY, f64::min);
    let weak: Vec<f64> = grid
        .iter()
        .zip(&gamma)
        .filter(|(_, g)| g.value < 3.0 * g.stderr || g.value < MIN_DECAY_RATE)
        .map(|(e, _)| *e)
        .collect();
    let warning = (!weak.is_empty()).then(|| format!("exponent not resolved from zero at E = {weak:?}"));
    Ok(NuEstimate { nu, grid, gamma, warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::lyapunov_closed_form;

    #[test]
    fn point_mass_nu_is_endpoint_value() {
        let mut s = Scenario::new("delta5", 1, BaseMeasure::point_mass(5.0), DensitySequence::Identity);
        s.interval = [-1.0, 1.0];
        s.gamma_n = 300;
        s.gamma_samples = 2;
        let nu = nu_inf(&s).unwrap();
        let want = lyapunov_closed_form(5.0, Energy::real(1.0));
        assert!((nu.nu - want).abs() < 1e-10);
        assert!(nu.warning.is_none());
    }

    #[test]
    fn free_operator_nu_vanishes_with_warning() {
        let mut s = Scenario::new("free", 1, BaseMeasure::point_mass(0.0), DensitySequence::Identity);
        s.gamma_n = 400;
        s.gamma_samples = 2;
        let nu = nu_inf(&s).unwrap();
        assert!(nu.nu.abs() < 0.02);
        assert!(nu.warning.is_some());
    }

    #[test]
    fn coarse_grid_rejected() {
        let mut s = Scenario::new("x", 1, BaseMeasure::point_mass(0.0), DensitySequence::Identity);
        s.energy_grid = vec![-0.5, 0.0, 0.5];
        assert!(s.validate().is_err());
        s.energy_grid = vec![-0.5, -0.4, -0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
        assert!(s.validate().is_ok());
    }
}
