//! Deterministic upper envelopes of `(1/n) log ||S||` and the submean
//! property of the complexified exponent.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{draw_sample, growth_rate_at, tags, Estimate, DEFAULT_BURN_IN};
use crate::error::{invalid, Result};
use crate::measures::{PotentialWindow, ProductLaw};
use crate::parallel::{map_indexed, try_map_indexed};
use crate::rng::RngStream;
use crate::stats::mean_stderr;
use crate::transfer::{product_values, Energy};

/// The four products bounded simultaneously: `S_[1,n]`, `S_[-n,-1]^-1`,
/// `S_[n+1,2n]` and `S_[2n+2,3n]^-1`. Inverses of unimodular matrices have
/// the same norm, so only the forward products are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CraigSimonFamily {
    Right,
    LeftInverse,
    Middle,
    FarInverse,
}

impl CraigSimonFamily {
    pub const ALL: [CraigSimonFamily; 4] = [Self::Right, Self::LeftInverse, Self::Middle, Self::FarInverse];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Right => "[1,n]",
            Self::LeftInverse => "[-n,-1]^-1",
            Self::Middle => "[n+1,2n]",
            Self::FarInverse => "[2n+2,3n]^-1",
        }
    }

    /// Site range of the product for half-width `n`.
    pub fn sites(&self, n: i64) -> (i64, i64) {
        match self {
            Self::Right => (1, n),
            Self::LeftInverse => (-n, -1),
            Self::Middle => (n + 1, 2 * n),
            Self::FarInverse => (2 * n + 2, 3 * n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyExcess {
    pub n: u64,
    pub family: CraigSimonFamily,
    /// `max_E (1/n) log ||S|| - gamma_hat(E)`.
    pub max_excess: f64,
    pub argmax_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CraigSimonReport {
    pub energies: Vec<f64>,
    pub gamma: Vec<f64>,
    pub rows: Vec<FamilyExcess>,
}

impl CraigSimonReport {
    pub fn max_excess(&self) -> f64 {
        self.rows.iter().map(|r| r.max_excess).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Worst excess of `(1/n) log ||S||` over `gamma_hat(E)` on an energy grid,
/// per family and `n`. The window must contain `[-n, 3n]` for every `n`.
pub fn craig_simon_scan(window: &PotentialWindow, energies: &[f64], gamma: &[f64], n_grid: &[u64]) -> Result<CraigSimonReport> {
    if energies.is_empty() || energies.len() != gamma.len() {
        return Err(invalid("gamma", "one exponent per grid energy required"));
    }
    if n_grid.iter().any(|&n| n < 2) {
        return Err(invalid("n_grid", "n must be at least 2"));
    }
    let mut rows = Vec::new();
    for &n in n_grid {
        let n_i = n as i64;
        let slices = CraigSimonFamily::ALL
            .iter()
            .map(|f| {
                let (a, b) = f.sites(n_i);
                window.slice(a, b)
            })
            .collect::<Result<Vec<_>>>()?;
        // excess[e][f]
        let excess = map_indexed(energies.len(), |k| {
            slices
                .iter()
                .map(|s| product_values(energies[k], s).log_norm() / n as f64 - gamma[k])
                .collect::<Vec<f64>>()
        });
        for (f, family) in CraigSimonFamily::ALL.iter().enumerate() {
            let mut best = (f64::NEG_INFINITY, energies[0]);
            for (k, row) in excess.iter().enumerate() {
                if row[f] > best.0 {
                    best = (row[f], energies[k]);
                }
            }
            rows.push(FamilyExcess {
                n,
                family: *family,
                max_excess: best.0,
                argmax_energy: best.1,
            });
        }
    }
    Ok(CraigSimonReport {
        energies: energies.to_vec(),
        gamma: gamma.to_vec(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubmeanReport {
    pub center: Estimate,
    pub circle_average: Estimate,
    /// Per-sample `average - center`, so shared randomness cancels.
    pub difference: Estimate,
}

/// Estimates `gamma` at `z0` and its average over `m` equally spaced points
/// of the circle `|z - z0| = r`, using the same potential for all of them.
pub fn submean_check(
    law: &ProductLaw,
    z0: Energy,
    r: f64,
    m: usize,
    n: u64,
    samples: u64,
    stream: RngStream,
) -> Result<SubmeanReport> {
    if !(r > 0.0) {
        return Err(invalid("r", "radius must be positive"));
    }
    if m < 8 {
        return Err(invalid("m", "at least 8 circle points required"));
    }
    if n == 0 || samples == 0 {
        return Err(invalid("n", "n and samples must be positive"));
    }
    let points: Vec<Energy> = (0..m)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / m as f64;
            Energy::complex(z0.re + r * t.cos(), z0.im + r * t.sin())
        })
        .collect();
    let stream = stream.child(tags::SAMPLES);
    let rows = try_map_indexed(samples as usize, |i| {
        let mut burn = vec![0.0; DEFAULT_BURN_IN];
        let mut values = vec![0.0; n as usize];
        draw_sample(law, &stream, i as u64, &mut burn, &mut values)?;
        let c = growth_rate_at(z0, &burn, &values);
        let avg = points.iter().map(|&z| growth_rate_at(z, &burn, &values)).sum::<f64>() / m as f64;
        Ok((c, avg))
    })?;
    let centers: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let avgs: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let diffs: Vec<f64> = rows.iter().map(|r| r.1 - r.0).collect();
    let est = |xs: &[f64]| {
        let (value, stderr) = mean_stderr(xs);
        Estimate { value, stderr }
    };
    Ok(SubmeanReport {
        center: est(&centers),
        circle_average: est(&avgs),
        difference: est(&diffs),
    })
}
