//! Finite-box restrictions `H_[a,b]`: eigenpairs, Green's functions,
//! regularity of sites and the eigenfunction correlator.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::measures::PotentialWindow;
use crate::numeric::{LogDet, SignedLog};
use crate::parallel::map_indexed;
use crate::stats::fit_line;
use crate::transfer::det_recurrence_values;

/// Smallest pivot magnitude tolerated in Sturm counts.
const PIVMIN: f64 = 1e-290;
/// Relative eigenvalue gap below which eigenvectors are reorthogonalized.
pub const CLUSTER_GAP: f64 = 1e-9;
/// Relative distance to the spectrum below which an energy is resonant.
pub const RESONANCE_MARGIN: f64 = 1e-12;
const SHIFT_RETRIES: usize = 5;
const MAX_INVERSE_ITERATIONS: usize = 8;

/// The symmetric tridiagonal matrix with diagonal `V_a..V_b` and unit
/// off-diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TridiagonalBox {
    window: PotentialWindow,
}

impl TridiagonalBox {
    pub fn new(window: PotentialWindow) -> Self {
        Self { window }
    }

    pub fn from_values(lo: i64, values: Vec<f64>) -> Result<Self> {
        Ok(Self::new(PotentialWindow::new(lo, values)?))
    }

    pub fn window(&self) -> &PotentialWindow {
        &self.window
    }

    pub fn lo(&self) -> i64 {
        self.window.lo()
    }

    pub fn hi(&self) -> i64 {
        self.window.hi()
    }

    pub fn dim(&self) -> usize {
        self.window.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        self.window.values()
    }

    /// `2 + max |V|`, the natural magnitude of the matrix.
    pub fn scale(&self) -> f64 {
        2.0 + self.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Gershgorin interval `[min V - 2, max V + 2]`.
    pub fn gershgorin(&self) -> (f64, f64) {
        let d = self.diagonal();
        let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let r = if d.len() > 1 { 2.0 } else { 0.0 };
        (lo - r, hi + r)
    }

    /// `H v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let d = self.diagonal();
        let n = d.len();
        (0..n)
            .map(|i| {
                let mut s = d[i] * v[i];
                if i > 0 {
                    s += v[i - 1];
                }
                if i + 1 < n {
                    s += v[i + 1];
                }
                s
            })
            .collect()
    }
}

/// Number of eigenvalues strictly below `x`.
pub fn sturm_count(bx: &TridiagonalBox, x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for (i, &v) in bx.diagonal().iter().enumerate() {
        d = if i == 0 { v - x } else { (v - x) - 1.0 / d };
        if d.abs() < PIVMIN {
            d = -PIVMIN;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

fn bisect_eigenvalue(bx: &TridiagonalBox, k: usize, mut lo: f64, mut hi: f64) -> f64 {
    // Invariant: sturm_count(lo) <= k < sturm_count(hi).
    for _ in 0..2200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(bx, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn outer_bracket(bx: &TridiagonalBox) -> (f64, f64) {
    let (lo, hi) = bx.gershgorin();
    let pad = 1e-12 * bx.scale();
    (lo - pad, hi + pad)
}

/// All eigenvalues in ascending order, by Sturm-count bisection.
pub fn eigenvalues(bx: &TridiagonalBox) -> Vec<f64> {
    let (lo, hi) = outer_bracket(bx);
    map_indexed(bx.dim(), |k| bisect_eigenvalue(bx, k, lo, hi))
}

/// Eigenvalues in `[e_lo, e_hi]`, ascending.
pub fn eigenvalues_in(bx: &TridiagonalBox, e_lo: f64, e_hi: f64) -> Vec<f64> {
    let (lo, hi) = outer_bracket(bx);
    let first = sturm_count(bx, e_lo);
    let last = sturm_count(bx, e_hi.next_up());
    map_indexed(last.saturating_sub(first), |i| bisect_eigenvalue(bx, first + i, lo, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    /// `||H v - value v||_2`.
    pub residual: f64,
}

/// Partial-pivoting LU of `H - shift`, in the band layout of LAPACK `gttrf`.
struct TridiagonalLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    /// `None` when an exact zero (or non-finite) pivot appears.
    fn factor(diag: &[f64], shift: f64) -> Option<Self> {
        let n = diag.len();
        let mut d: Vec<f64> = diag.iter().map(|v| v - shift).collect();
        let mut dl = vec![1.0f64; n.saturating_sub(1)];
        let mut du = vec![1.0; n.saturating_sub(1)];
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        if d.iter().any(|&p| p == 0.0 || !p.is_finite()) {
            return None;
        }
        Some(Self { dl, d, du, du2, swapped })
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn start_vector(n: usize) -> Vec<f64> {
    // Fixed pseudo-random start so results never depend on a generator.
    let mut state: u64 = 0x2545_f491_4f6c_dd1d;
    (0..n)
        .map(|_| {
            state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
            0.5 + (state >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}

fn residual(bx: &TridiagonalBox, v: &[f64], lambda: f64) -> f64 {
    let hv = bx.apply(v);
    norm2(&hv.iter().zip(v).map(|(h, x)| h - lambda * x).collect::<Vec<_>>())
}

fn inverse_iteration(bx: &TridiagonalBox, lambda: f64, against: &[&[f64]]) -> Result<EigenPair> {
    let n = bx.dim();
    let scale = bx.scale();
    let tol = 1e-8 * scale;
    let mut shift = lambda;
    let mut lu = None;
    for attempt in 0..=SHIFT_RETRIES {
        if attempt > 0 {
            shift = lambda + attempt as f64 * 1e-12 * scale;
        }
        lu = TridiagonalLu::factor(bx.diagonal(), shift);
        if lu.is_some() {
            break;
        }
    }
    let lu = lu.ok_or(LabError::InverseIteration { shift })?;
    let mut v = start_vector(n);
    let mut best: Option<EigenPair> = None;
    for _ in 0..MAX_INVERSE_ITERATIONS {
        for u in against {
            let c = dot(&v, u);
            v.iter_mut().zip(u.iter()).for_each(|(x, y)| *x -= c * y);
        }
        let nv = norm2(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        lu.solve(&mut v);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(LabError::InverseIteration { shift });
        }
        for _ in 0..2 {
            for u in against {
                let c = dot(&v, u);
                v.iter_mut().zip(u.iter()).for_each(|(x, y)| *x -= c * y);
            }
        }
        let nv = norm2(&v);
        if nv == 0.0 {
            return Err(LabError::InverseIteration { shift });
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let value = dot(&v, &bx.apply(&v));
        let r = residual(bx, &v, value);
        let done = r <= 1e-12 * scale;
        if best.as_ref().is_none_or(|b| r < b.residual) {
            best = Some(EigenPair {
                value,
                vector: v.clone(),
                residual: r,
            });
        }
        if done {
            break;
        }
    }
    let mut pair = best.expect("at least one iteration");
    if pair.residual > tol {
        return Err(LabError::InverseIteration { shift });
    }
    fix_sign(&mut pair.vector);
    Ok(pair)
}

/// Make the largest-magnitude entry (first one on ties) positive.
fn fix_sign(v: &mut [f64]) {
    let mut k = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[k].abs() {
            k = i;
        }
    }
    if v[k] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// The eigenvector for an eigenvalue estimate `lambda`.
pub fn eigenvector(bx: &TridiagonalBox, lambda: f64) -> Result<EigenPair> {
    inverse_iteration(bx, lambda, &[])
}

/// Eigenpairs for the given ascending eigenvalues. Vectors inside a cluster
/// (consecutive gaps below `CLUSTER_GAP * scale`) are orthogonalized in
/// eigenvalue order; clusters run in parallel.
pub fn eigenpairs_for(bx: &TridiagonalBox, values: &[f64]) -> Result<Vec<EigenPair>> {
    let gap = CLUSTER_GAP * bx.scale();
    let mut clusters: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] >= gap {
            clusters.push((start, i));
            start = i;
        }
    }
    let solved = map_indexed(clusters.len(), |c| {
        let (s, e) = clusters[c];
        let mut out: Vec<EigenPair> = Vec::with_capacity(e - s);
        for &lambda in &values[s..e] {
            let against: Vec<&[f64]> = out.iter().map(|p| p.vector.as_slice()).collect();
            let pair = inverse_iteration(bx, lambda, &against)?;
            out.push(pair);
        }
        Ok::<_, LabError>(out)
    });
    let mut all = Vec::with_capacity(values.len());
    for c in solved {
        all.extend(c?);
    }
    Ok(all)
}

/// Full eigendecomposition.
pub fn eigenpairs(bx: &TridiagonalBox) -> Result<Vec<EigenPair>> {
    eigenpairs_for(bx, &eigenvalues(bx))
}

/// Eigenpairs with eigenvalues in `[e_lo, e_hi]`.
pub fn eigenpairs_in(bx: &TridiagonalBox, e_lo: f64, e_hi: f64) -> Result<Vec<EigenPair>> {
    eigenpairs_for(bx, &eigenvalues_in(bx, e_lo, e_hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenMethod {
    DetRatio,
    DirectSolve,
}

/// Prefix and suffix determinants of `H_[a,b] - E`:
/// `prefix[k] = P_[a, a+k-1]`, `suffix[k] = P_[b-k+1, b]`, both with
/// `[0] = 1` for the empty interval.
#[derive(Debug, Clone)]
pub struct BoxDeterminants {
    lo: i64,
    prefix: Vec<LogDet>,
    suffix: Vec<LogDet>,
}

impl BoxDeterminants {
    pub fn new(bx: &TridiagonalBox, e: f64) -> Self {
        let d = bx.diagonal();
        let mut prefix = vec![SignedLog::one()];
        prefix.extend(det_recurrence_values(e, d));
        let rev: Vec<f64> = d.iter().rev().copied().collect();
        let mut suffix = vec![SignedLog::one()];
        suffix.extend(det_recurrence_values(e, &rev));
        Self { lo: bx.lo(), prefix, suffix }
    }

    fn dim(&self) -> usize {
        self.prefix.len() - 1
    }

    /// `P_[a,b]`.
    pub fn full(&self) -> LogDet {
        self.prefix[self.dim()]
    }

    /// `P_[a, x-1]`.
    pub fn left_of(&self, x: i64) -> LogDet {
        self.prefix[(x - self.lo) as usize]
    }

    /// `P_[y+1, b]`.
    pub fn right_of(&self, y: i64) -> LogDet {
        self.suffix[self.dim() - 1 - (y - self.lo) as usize]
    }

    /// `G(x, y) = (-1)^(x-y) P_[a,x-1] P_[y+1,b] / P_[a,b]` for `x <= y`,
    /// extended symmetrically.
    pub fn green(&self, x: i64, y: i64) -> LogDet {
        let (x, y) = if x <= y { (x, y) } else { (y, x) };
        let g = self.left_of(x).mul(self.right_of(y)).div(self.full());
        if (y - x) % 2 == 1 {
            g.neg()
        } else {
            g
        }
    }

    /// `max_k log|G(k,k)|`, which bounds `-log dist(E, spectrum)` up to
    /// `log dim`.
    pub fn max_log_diagonal(&self) -> f64 {
        if self.full().is_zero() {
            return f64::INFINITY;
        }
        (0..self.dim() as i64)
            .map(|k| self.green(self.lo + k, self.lo + k).log_mag)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Error unless `E` is farther than about `RESONANCE_MARGIN * scale` from the
/// spectrum of the box.
pub fn check_resonance(bx: &TridiagonalBox, dets: &BoxDeterminants, e: f64) -> Result<()> {
    if dets.max_log_diagonal() > -(RESONANCE_MARGIN * bx.scale()).ln() {
        return Err(LabError::ResonantEnergy {
            energy: e,
            lo: bx.lo(),
            hi: bx.hi(),
        });
    }
    Ok(())
}

fn check_site(bx: &TridiagonalBox, x: i64) -> Result<()> {
    if x < bx.lo() || x > bx.hi() {
        return Err(LabError::OutOfWindow {
            lo: x,
            hi: x,
            window_lo: bx.lo(),
            window_hi: bx.hi(),
        });
    }
    Ok(())
}

/// `G^E_[a,b](x, y) = <delta_x, (H_[a,b] - E)^-1 delta_y>` in signed-log form.
pub fn green(bx: &TridiagonalBox, e: f64, x: i64, y: i64, method: GreenMethod) -> Result<LogDet> {
    check_site(bx, x)?;
    check_site(bx, y)?;
    let dets = BoxDeterminants::new(bx, e);
    check_resonance(bx, &dets, e)?;
    match method {
        GreenMethod::DetRatio => Ok(dets.green(x, y)),
        GreenMethod::DirectSolve => {
            let resonant = LabError::ResonantEnergy {
                energy: e,
                lo: bx.lo(),
                hi: bx.hi(),
            };
            let lu = TridiagonalLu::factor(bx.diagonal(), e).ok_or(resonant)?;
            let mut b = vec![0.0; bx.dim()];
            b[(y - bx.lo()) as usize] = 1.0;
            lu.solve(&mut b);
            Ok(SignedLog::from_value(b[(x - bx.lo()) as usize]))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularity {
    Regular,
    Singular,
}

impl Regularity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regularity::Regular => "regular",
            Regularity::Singular => "singular",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub site: i64,
    pub radius: u64,
    pub rate: f64,
    pub energy: f64,
    /// `G_[x-n,x+n](x, x-n)`.
    pub green_left: LogDet,
    /// `G_[x-n,x+n](x, x+n)`.
    pub green_right: LogDet,
    pub verdict: Regularity,
}

/// `x` is `(C, n, E)`-regular iff `|G_[x-n,x+n](x, x+-n)| <= exp(-C n)`.
pub fn classify_regularity(window: &PotentialWindow, x: i64, n: u64, c: f64, e: f64) -> Result<RegularityReport> {
    if n == 0 {
        return Err(invalid("n", "radius must be positive"));
    }
    let r = n as i64;
    let bx = TridiagonalBox::new(window.sub_window(x - r, x + r)?);
    let dets = BoxDeterminants::new(&bx, e);
    check_resonance(&bx, &dets, e)?;
    let green_left = dets.green(x, x - r);
    let green_right = dets.green(x, x + r);
    let bound = -c * n as f64;
    let verdict = if green_left.log_mag <= bound && green_right.log_mag <= bound {
        Regularity::Regular
    } else {
        Regularity::Singular
    };
    Ok(RegularityReport {
        site: x,
        radius: n,
        rate: c,
        energy: e,
        green_left,
        green_right,
        verdict,
    })
}

/// `-G(x,a) psi(a-1) - G(x,b) psi(b+1)`: the value at `x` of the solution
/// of `H psi = E psi` with the given data just outside the box.
pub fn reconstruct_interior(bx: &TridiagonalBox, e: f64, psi_left: f64, psi_right: f64, x: i64) -> Result<f64> {
    check_site(bx, x)?;
    let dets = BoxDeterminants::new(bx, e);
    check_resonance(bx, &dets, e)?;
    let left = dets.green(x, bx.lo()).mul(SignedLog::from_value(psi_left));
    let right = dets.green(x, bx.hi()).mul(SignedLog::from_value(psi_right));
    Ok(-(left.add(right)).value())
}

/// `Q(x, y) = sum_j |psi_j(x)| |psi_j(y)|` with its fitted off-diagonal decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlator {
    pub q: Vec<Vec<f64>>,
    /// `-slope` of the mean of `log Q(x, x+d)` against `d` for `1 <= d <= dim/2`.
    pub decay_rate: f64,
}

pub fn correlator(pairs: &[EigenPair]) -> Correlator {
    let n = pairs.first().map_or(0, |p| p.vector.len());
    let abs: Vec<Vec<f64>> = pairs.iter().map(|p| p.vector.iter().map(|x| x.abs()).collect()).collect();
    let rows = map_indexed(n, |x| {
        (0..n)
            .map(|y| abs.iter().map(|v| v[x] * v[y]).sum::<f64>())
            .collect::<Vec<f64>>()
    });
    let mut q = rows;
    // Exact symmetry regardless of summation order.
    for x in 0..n {
        for y in 0..x {
            q[x][y] = q[y][x];
        }
    }
    let mut ds = Vec::new();
    let mut means = Vec::new();
    for d in 1..=n / 2 {
        let m = (0..n - d).map(|x| q[x][x + d].max(1e-300).ln()).sum::<f64>() / (n - d) as f64;
        ds.push(d as f64);
        means.push(m);
    }
    let decay_rate = fit_line(&ds, &means).map_or(0.0, |f| -f.slope);
    Correlator { q, decay_rate }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn bx(values: &[f64]) -> TridiagonalBox {
        TridiagonalBox::from_values(0, values.to_vec()).unwrap()
    }

    #[test]
    fn single_site() {
        let b = bx(&[7.0]);
        assert_eq!(eigenvalues(&b), vec![7.0]);
        let p = eigenvector(&b, 7.0).unwrap();
        assert_eq!(p.vector, vec![1.0]);
        assert_eq!(p.residual, 0.0);
        let g = green(&bx(&[3.0]), 0.0, 0, 0, GreenMethod::DetRatio).unwrap();
        assert!((g.log_mag + 3f64.ln()).abs() < 1e-15);
        assert_eq!(g.sign(), 1);
        let c = correlator(&eigenpairs(&b).unwrap());
        assert_eq!(c.q, vec![vec![1.0]]);
    }

    #[test]
    fn free_laplacian_spectrum_and_vectors() {
        let n = 30;
        let b = bx(&vec![0.0; n]);
        let ev = eigenvalues(&b);
        for (k, e) in ev.iter().enumerate() {
            // ascending order: k-th smallest is 2 cos((n-k) pi / (n+1))
            let exact = 2.0 * ((n - k) as f64 * PI / (n + 1) as f64).cos();
            assert!((e - exact).abs() < 1e-12, "{k}: {e} vs {exact}");
        }
        let pairs = eigenpairs(&b).unwrap();
        for (k, p) in pairs.iter().enumerate() {
            let m = (n - k) as f64;
            let mut exact: Vec<f64> = (1..=n).map(|j| (j as f64 * m * PI / (n + 1) as f64).sin()).collect();
            let nn = norm2(&exact);
            exact.iter_mut().for_each(|x| *x /= nn);
            let s = dot(&exact, &p.vector).signum();
            let err = exact.iter().zip(&p.vector).map(|(a, b)| (s * a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-8, "k={k} err={err}");
            assert!(p.residual < 1e-10);
        }
    }

    #[test]
    fn free_correlator_does_not_decay() {
        let c = correlator(&eigenpairs(&bx(&vec![0.0; 60])).unwrap());
        assert!(c.decay_rate < 0.02, "{}", c.decay_rate);
        for x in 0..60 {
            assert!(c.q[x][x] <= 1.0 + 1e-8);
        }
    }

    #[test]
    fn green_diagonal_corner() {
        let b = bx(&[1.5, -0.3, 2.2, 0.7]);
        let d = BoxDeterminants::new(&b, 0.1);
        let g = green(&b, 0.1, 0, 0, GreenMethod::DetRatio).unwrap();
        let want = d.right_of(0).div(d.full());
        assert_eq!(g, want);
    }

    #[test]
    fn resonant_energy_is_rejected() {
        let b = bx(&[0.0, 0.0]);
        // eigenvalues +-1
        assert!(matches!(
            green(&b, 1.0, 0, 1, GreenMethod::DetRatio),
            Err(LabError::ResonantEnergy { .. })
        ));
        assert!(green(&b, 0.5, 0, 1, GreenMethod::DetRatio).is_ok());
    }

    #[test]
    fn free_operator_sites_are_singular() {
        // E = 0 is itself an eigenvalue of the free 5-site box.
        let w = PotentialWindow::constant(-10, 21, 0.0);
        assert!(classify_regularity(&w, 0, 2, 1.0, 0.0).is_err());
        let r = classify_regularity(&w, 0, 2, 1.0, 0.1).unwrap();
        assert_eq!(r.verdict, Regularity::Singular);
    }

    #[test]
    fn constant_five_is_regular() {
        let gamma = ((5.0 + 21f64.sqrt()) / 2.0).ln();
        let w = PotentialWindow::constant(-100, 201, 5.0);
        let r = classify_regularity(&w, 0, 60, 0.5 * gamma, 0.0).unwrap();
        assert_eq!(r.verdict, Regularity::Regular);
        assert!((r.green_right.log_mag / 60.0 + gamma).abs() < 0.05);
    }

    #[test]
    fn reconstruct_zero_data() {
        let b = bx(&[0.3, -1.0, 0.8]);
        assert_eq!(reconstruct_interior(&b, 0.25, 0.0, 0.0, 1).unwrap(), 0.0);
    }

    #[test]
    fn reconstruct_free_exponential() {
        // V = 0, E = 3: psi(n) = r^n with r + 1/r = 3 solves the equation.
        let r = (3.0 + 5f64.sqrt()) / 2.0;
        let b = TridiagonalBox::new(PotentialWindow::constant(1, 8, 0.0));
        for x in 1..=8 {
            let got = reconstruct_interior(&b, 3.0, r.powi(0), r.powi(9), x).unwrap();
            let want = r.powi(x as i32);
            assert!((got - want).abs() <= 1e-10 * want, "{x}");
        }
    }

    #[test]
    fn sturm_counts_total_dimension() {
        let b = bx(&[1.0, -1.0, 1.0, 1.0, -1.0]);
        let (lo, hi) = b.gershgorin();
        assert_eq!(sturm_count(&b, lo - 1.0), 0);
        assert_eq!(sturm_count(&b, hi + 1.0), 5);
    }

    #[test]
    fn eigenvalues_in_interval() {
        let b = bx(&vec![0.0; 10]);
        let all = eigenvalues(&b);
        let some = eigenvalues_in(&b, -1.0, 1.0);
        let want: Vec<f64> = all.iter().copied().filter(|e| (-1.0..=1.0).contains(e)).collect();
        assert_eq!(some, want);
    }
}
