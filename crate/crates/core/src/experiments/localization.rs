//! Eigenfunction decay in a finite box and the regularity census at the
//! sites `+-2n`, `+-(2n+1)`.

use serde::{Deserialize, Serialize};

use super::persist::{format_float, Table};
use super::{nu_inf, streams, NuEstimate, Scenario};
use crate::error::{invalid, LabError, Result};
use crate::estimators::{lyapunov_mc, Estimate};
use crate::measures::{sample_window, LawTag, PotentialWindow};
use crate::numeric::serde_float;
use crate::spectral::{classify_regularity, eigenpairs_in, EigenPair, Regularity, TridiagonalBox};
use crate::stats::fit_line;
use crate::transfer::Energy;

/// Fitted decay rates below this are indistinguishable from extended states
/// at desk scale.
pub const MIN_DECAY_RATE: f64 = 0.02;
/// Eigenfunctions centred within this distance of the origin supply the
/// census energies.
pub const CENSUS_CENTER_RADIUS: i64 = 10;
/// Sites closer than this to the centre are excluded from the decay fit.
const FIT_MIN_DISTANCE: i64 = 10;
/// Sites this close to either end of the box are excluded.
const FIT_EDGE_EXCLUSION: usize = 5;
/// Amplitudes below this fraction of the peak are treated as round-off.
const FIT_FLOOR: f64 = 1e-12;

/// Exponential fit `|psi(x)| ~ exp(-rate |x - center|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub center: i64,
    pub points: usize,
}

/// Least squares of `log |psi|` against the distance to the peak, over the
/// middle 60% of the usable distance range.
pub fn fit_decay(vector: &[f64], box_lo: i64) -> DecayFit {
    let n = vector.len();
    let c = vector
        .iter()
        .enumerate()
        .fold(0, |best, (i, x)| if x.abs() > vector[best].abs() { i } else { best });
    let peak = vector[c].abs();
    let center = box_lo + c as i64;
    let usable: Vec<(i64, f64)> = (0..n)
        .filter(|&i| i >= FIT_EDGE_EXCLUSION && i + FIT_EDGE_EXCLUSION < n)
        .filter(|&i| (i as i64 - c as i64).abs() >= FIT_MIN_DISTANCE && vector[i].abs() >= FIT_FLOOR * peak)
        .map(|i| ((i as i64 - c as i64).abs(), vector[i].abs().ln()))
        .collect();
    let Some(d_max) = usable.iter().map(|p| p.0).max() else {
        return DecayFit { rate: 0.0, center, points: 0 };
    };
    let span = (d_max - FIT_MIN_DISTANCE) as f64;
    let lo = FIT_MIN_DISTANCE as f64 + 0.2 * span;
    let hi = FIT_MIN_DISTANCE as f64 + 0.8 * span;
    let (xs, ys): (Vec<f64>, Vec<f64>) = usable
        .iter()
        .filter(|(d, _)| (lo..=hi).contains(&(*d as f64)))
        .map(|&(d, y)| (d as f64, y))
        .unzip();
    match fit_line(&xs, &ys) {
        Some(f) if xs.len() >= 3 => DecayFit {
            rate: -f.slope,
            center,
            points: xs.len(),
        },
        _ => DecayFit {
            rate: 0.0,
            center,
            points: xs.len(),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenRow {
    pub j: usize,
    pub eigenvalue: f64,
    pub gamma: Estimate,
    pub decay: DecayFit,
    pub pass: bool,
    /// Largest grid `n` at which `2n` or `2n+1` is singular.
    pub largest_singular_n: Option<u64>,
    /// Grid values of `n` skipped because the energy was resonant for a sub-box.
    pub resonant_skips: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub scenario_id: String,
    pub seed: u64,
    pub law_tag: LawTag,
    pub box_lo: i64,
    pub box_hi: i64,
    pub nu: NuEstimate,
    pub epsilon0: f64,
    pub rows: Vec<EigenRow>,
    #[serde(with = "serde_float")]
    pub pass_fraction: f64,
}

impl LocalizationReport {
    pub const COLUMNS: [&'static str; 12] = [
        "scenario_id",
        "seed",
        "law_tag",
        "box_lo",
        "box_hi",
        "j",
        "eigenvalue",
        "gamma_hat",
        "gamma_stderr",
        "decay_rate",
        "center",
        "pass",
    ];

    pub fn table(&self) -> Table {
        let mut t = Table::new(&Self::COLUMNS);
        for r in &self.rows {
            t.push(vec![
                self.scenario_id.clone(),
                self.seed.to_string(),
                self.law_tag.as_str().to_string(),
                self.box_lo.to_string(),
                self.box_hi.to_string(),
                r.j.to_string(),
                format_float(r.eigenvalue),
                format_float(r.gamma.value),
                format_float(r.gamma.stderr),
                format_float(r.decay.rate),
                r.decay.center.to_string(),
                r.pass.to_string(),
            ]);
        }
        t
    }
}

/// Window, box, eigenpairs and the energy-independent constants shared by
/// the localization run and the census.
struct Prepared {
    window: PotentialWindow,
    bx: TridiagonalBox,
    pairs: Vec<EigenPair>,
    nu: NuEstimate,
    epsilon0: f64,
}

fn prepare(scenario: &Scenario) -> Result<Prepared> {
    scenario.validate()?;
    let h = scenario.box_half_width as i64;
    if h < 100 {
        return Err(invalid("box_half_width", "the box must have at least 200 sites"));
    }
    let n_max = *scenario.n_grid.last().expect("validated grid") as i64;
    let reach = h.max(3 * n_max + 1);
    let window = sample_window(&scenario.law(), -reach, reach, scenario.stream(streams::WINDOW))?;
    let bx = TridiagonalBox::new(window.sub_window(-h, h - 1)?);
    let [s, t] = scenario.interval;
    let pairs = eigenpairs_in(&bx, s, t)?;
    let nu = nu_inf(scenario)?;
    let epsilon0 = scenario.epsilon0.unwrap_or_else(|| nu.default_epsilon0());
    Ok(Prepared {
        window,
        bx,
        pairs,
        nu,
        epsilon0,
    })
}

fn gamma_at(scenario: &Scenario, e: f64) -> Result<Estimate> {
    let law = scenario.stationary().law();
    lyapunov_mc(&law, Energy::real(e), scenario.gamma_n, scenario.gamma_samples, scenario.stream(streams::GAMMA))
        .map(|l| Estimate::from(&l))
}

/// Outcome of classifying one site at one energy; resonances count as
/// singular, and so does every site when `c` is below [`MIN_DECAY_RATE`].
fn site_verdict(window: &PotentialWindow, x: i64, n: u64, c: f64, e: f64) -> Result<(Regularity, bool)> {
    if !(c >= MIN_DECAY_RATE) {
        return Ok((Regularity::Singular, false));
    }
    match classify_regularity(window, x, n, c, e) {
        Ok(r) => Ok((r.verdict, false)),
        Err(LabError::ResonantEnergy { .. }) => Ok((Regularity::Singular, true)),
        Err(err) => Err(err),
    }
}

/// Diagonalize the box `[-h, h-1]` under the scenario law, fit the decay of
/// each eigenfunction with eigenvalue in `I`, and test regularity of the
/// sites `2n`, `2n+1` with rate `gamma_hat(E_j) - 8 epsilon_0`.
///
/// An eigenfunction passes when its rate is at least `gamma_hat(E_j) / 2`
/// and at least [`MIN_DECAY_RATE`].
pub fn run_localization(scenario: &Scenario) -> Result<LocalizationReport> {
    let prep = prepare(scenario)?;
    let mut rows = Vec::with_capacity(prep.pairs.len());
    for (j, pair) in prep.pairs.iter().enumerate() {
        let gamma = gamma_at(scenario, pair.value)?;
        let decay = fit_decay(&pair.vector, prep.bx.lo());
        let pass = decay.rate >= 0.5 * gamma.value && decay.rate >= MIN_DECAY_RATE;
        let c = gamma.value - 8.0 * prep.epsilon0;
        let mut largest_singular_n = None;
        let mut resonant_skips = Vec::new();
        for &n in &scenario.n_grid {
            for x in [2 * n as i64, 2 * n as i64 + 1] {
                let (v, resonant) = site_verdict(&prep.window, x, n, c, pair.value)?;
                if resonant {
                    resonant_skips.push(n);
                } else if v == Regularity::Singular {
                    largest_singular_n = Some(n);
                }
            }
        }
        rows.push(EigenRow {
            j,
            eigenvalue: pair.value,
            gamma,
            decay,
            pass,
            largest_singular_n,
            resonant_skips,
        });
    }
    let pass_fraction = if rows.is_empty() {
        f64::NAN
    } else {
        rows.iter().filter(|r| r.pass).count() as f64 / rows.len() as f64
    };
    Ok(LocalizationReport {
        scenario_id: scenario.id.clone(),
        seed: scenario.seed,
        law_tag: scenario.law_tag(),
        box_lo: prep.bx.lo(),
        box_hi: prep.bx.hi(),
        nu: prep.nu,
        epsilon0: prep.epsilon0,
        rows,
        pass_fraction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusRow {
    pub n: u64,
    pub site: i64,
    pub verdict: Regularity,
    pub resonant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusReport {
    pub scenario_id: String,
    pub seed: u64,
    pub law_tag: LawTag,
    pub energies: Vec<f64>,
    pub rates: Vec<f64>,
    pub epsilon0: f64,
    pub rows: Vec<CensusRow>,
    /// `(n, number of singular sites among +-2n, +-(2n+1))`.
    pub counts: Vec<(u64, usize)>,
    /// Smallest grid `n` from which every count is zero.
    pub zero_from: Option<u64>,
}

impl CensusReport {
    pub const COLUMNS: [&'static str; 6] = ["scenario_id", "seed", "law_tag", "n", "site", "verdict"];

    pub fn table(&self) -> Table {
        let mut t = Table::new(&Self::COLUMNS);
        for r in &self.rows {
            t.push(vec![
                self.scenario_id.clone(),
                self.seed.to_string(),
                self.law_tag.as_str().to_string(),
                r.n.to_string(),
                r.site.to_string(),
                r.verdict.as_str().to_string(),
            ]);
        }
        t
    }
}

/// For each grid `n`, classify the four sites `+-2n`, `+-(2n+1)` at the
/// energies of eigenfunctions centred near the origin, with rate
/// `gamma_hat(E) - 8 epsilon_0`. A site is singular when it is singular at
/// any of these energies.
pub fn singularity_census(scenario: &Scenario) -> Result<CensusReport> {
    let prep = prepare(scenario)?;
    let mut chosen: Vec<&EigenPair> = Vec::new();
    let mut closest: Option<(i64, &EigenPair)> = None;
    for p in &prep.pairs {
        let center = fit_decay(&p.vector, prep.bx.lo()).center;
        if center.abs() <= CENSUS_CENTER_RADIUS {
            chosen.push(p);
        }
        if closest.is_none_or(|(d, _)| center.abs() < d) {
            closest = Some((center.abs(), p));
        }
    }
    if chosen.is_empty() {
        chosen.extend(closest.map(|(_, p)| p));
    }
    let energies: Vec<f64> = chosen.iter().map(|p| p.value).collect();
    let rates = energies
        .iter()
        .map(|&e| gamma_at(scenario, e).map(|g| g.value - 8.0 * prep.epsilon0))
        .collect::<Result<Vec<f64>>>()?;
    let mut rows = Vec::new();
    let mut counts = Vec::new();
    for &n in &scenario.n_grid {
        let m = n as i64;
        let mut singular = 0;
        for site in [2 * m, 2 * m + 1, -2 * m, -(2 * m + 1)] {
            let mut verdict = Regularity::Regular;
            let mut resonant = false;
            for (&e, &c) in energies.iter().zip(&rates) {
                let (v, res) = site_verdict(&prep.window, site, n, c, e)?;
                resonant |= res;
                if v == Regularity::Singular {
                    verdict = Regularity::Singular;
                }
            }
            if verdict == Regularity::Singular {
                singular += 1;
            }
            rows.push(CensusRow {
                n,
                site,
                verdict,
                resonant,
            });
        }
        counts.push((n, singular));
    }
    let zero_from = match counts.iter().rposition(|&(_, c)| c > 0) {
        None => counts.first().map(|c| c.0),
        Some(k) => counts.get(k + 1).map(|c| c.0),
    };
    Ok(CensusReport {
        scenario_id: scenario.id.clone(),
        seed: scenario.seed,
        law_tag: scenario.law_tag(),
        energies,
        rates,
        epsilon0: prep.epsilon0,
        rows,
        counts,
        zero_from,
    })
}
