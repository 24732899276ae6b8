//! Small statistics toolkit: sample moments, binomial tail estimates and
//! least-squares line fits.

use serde::{Deserialize, Serialize};

use crate::numeric::{exact_sum, serde_float};

/// Counts below which binomial uncertainties switch to the Wilson score
/// interval.
pub const WILSON_FALLBACK_COUNT: u64 = 10;

/// The uniform statistical tolerance, in standard errors.
pub const SIGMA_TOLERANCE: f64 = 3.0;

/// Mean and standard error of the mean (sample std with `n - 1`).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = exact_sum(xs.iter().copied()) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = exact_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// A binomial tail estimate `count / samples`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub count: u64,
    pub samples: u64,
}

impl TailEstimate {
    pub fn new(count: u64, samples: u64) -> Self {
        debug_assert!(count <= samples);
        Self { count, samples }
    }

    pub fn p(&self) -> f64 {
        if self.samples == 0 {
            return f64::NAN;
        }
        self.count as f64 / self.samples as f64
    }

    /// Normal-approximation standard error; for fewer than
    /// [`WILSON_FALLBACK_COUNT`] events, the 3-sigma Wilson interval width
    /// divided by 6.
    pub fn stderr(&self) -> f64 {
        let n = self.samples as f64;
        let p = self.p();
        if self.count < WILSON_FALLBACK_COUNT || self.samples - self.count < WILSON_FALLBACK_COUNT {
            let (lo, hi) = wilson(self.count, self.samples, SIGMA_TOLERANCE);
            (hi - lo) / (2.0 * SIGMA_TOLERANCE)
        } else {
            (p * (1.0 - p) / n).sqrt()
        }
    }
}

/// Wilson score interval at `z` standard deviations.
pub fn wilson(count: u64, samples: u64, z: f64) -> (f64, f64) {
    let n = samples as f64;
    if n == 0.0 {
        return (0.0, 1.0);
    }
    let p = count as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// `p0 <= c * p1 + 3 * sqrt(se0^2 + c^2 se1^2)`.
pub fn bounded_by(p0: &TailEstimate, c: f64, p1: &TailEstimate) -> bool {
    p0.p() <= c * p1.p() + SIGMA_TOLERANCE * combined_stderr(p0, c, p1)
}

pub fn combined_stderr(p0: &TailEstimate, c: f64, p1: &TailEstimate) -> f64 {
    let a = p0.stderr();
    let b = c * p1.stderr();
    (a * a + b * b).sqrt()
}

/// Least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the residuals (infinite with fewer
    /// than three points).
    #[serde(with = "serde_float")]
    pub slope_stderr: f64,
    pub points: usize,
}

/// Ordinary least squares; `None` with fewer than two distinct abscissae.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let xbar = exact_sum(xs[..n].iter().copied()) / n as f64;
    let ybar = exact_sum(ys[..n].iter().copied()) / n as f64;
    let sxx = exact_sum(xs[..n].iter().map(|x| (x - xbar) * (x - xbar)));
    if sxx <= 0.0 {
        return None;
    }
    let sxy = exact_sum(xs[..n].iter().zip(&ys[..n]).map(|(x, y)| (x - xbar) * (y - ybar)));
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let slope_stderr = if n > 2 {
        let rss = exact_sum(
            xs[..n]
                .iter()
                .zip(&ys[..n])
                .map(|(x, y)| (y - intercept - slope * x).powi(2)),
        );
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    Some(LineFit {
        slope,
        intercept,
        slope_stderr,
        points: n,
    })
}

/// Least-squares slope weights `w_i = (x_i - xbar) / Sxx`, so that
/// `slope = sum w_i y_i`.
pub fn slope_weights(xs: &[f64]) -> Vec<f64> {
    let n = xs.len() as f64;
    let xbar = exact_sum(xs.iter().copied()) / n;
    let sxx = exact_sum(xs.iter().map(|x| (x - xbar) * (x - xbar)));
    xs.iter().map(|x| (x - xbar) / sxx).collect()
}
