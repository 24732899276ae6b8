//! Transfer matrices of the discrete Schrodinger equation
//! `psi(n+1) + psi(n-1) + V(n) psi(n) = E psi(n)`, overflow-safe products,
//! and the truncated determinants `P_[a,b] = det(H_[a,b] - E)`.
//!
//! The interval matrix is the forward product `S_[a,b] = S_b ... S_a` of the
//! one-step matrices `S_n = [[E - V_n, -1], [1, 0]]`. Its entries are the
//! truncated determinants:
//!
//! ```text
//! S_[a,b] = [[ D_[a,b],   -D_[a+1,b]   ],
//!            [ D_[a,b-1], -D_[a+1,b-1] ]],   D_I = det(E - H_I) = (-1)^|I| P_I
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::measures::PotentialWindow;
use crate::numeric::{frexp_exponent, pow2, ExactSum, LogDet, Scalar, SignedLog};

/// Spectral parameter; the imaginary part is zero on real-energy paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl Energy {
    pub fn real(e: f64) -> Self {
        Self { re: e, im: 0.0 }
    }

    pub fn complex(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn is_real(&self) -> bool {
        self.im == 0.0
    }

    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

impl From<f64> for Energy {
    fn from(e: f64) -> Self {
        Energy::real(e)
    }
}

impl From<Complex64> for Energy {
    fn from(z: Complex64) -> Self {
        Energy::complex(z.re, z.im)
    }
}

const LN_2: f64 = std::f64::consts::LN_2;

/// A 2x2 matrix stored as `exp(log_scale) * entries` with the largest entry
/// modulus of `entries` in `[0.5, 1)`. Rescaling is by powers of two, so it
/// is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledMatrix<T: Scalar = f64> {
    entries: [[T; 2]; 2],
    log_scale: f64,
}

impl<T: Scalar> ScaledMatrix<T> {
    pub fn identity() -> Self {
        let mut m = Self {
            entries: [[T::one(), T::zero()], [T::zero(), T::one()]],
            log_scale: 0.0,
        };
        m.renormalize();
        m
    }

    /// Wraps `exp(log_scale) * entries`; the zero matrix is rejected.
    pub fn from_entries(entries: [[T; 2]; 2], log_scale: f64) -> Result<Self> {
        if entries.iter().flatten().any(|x| !x.is_finite()) {
            return Err(invalid("entries", "non-finite matrix entry"));
        }
        if entries.iter().flatten().all(|x| x.modulus() == 0.0) {
            return Err(invalid("entries", "zero matrix"));
        }
        let mut m = Self { entries, log_scale };
        m.renormalize();
        Ok(m)
    }

    pub fn entries(&self) -> &[[T; 2]; 2] {
        &self.entries
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    fn max_modulus(&self) -> f64 {
        let e = &self.entries;
        e[0][0]
            .modulus()
            .max(e[0][1].modulus())
            .max(e[1][0].modulus())
            .max(e[1][1].modulus())
    }

    #[inline]
    fn renormalize(&mut self) {
        let m = self.max_modulus();
        if (0.5..1.0).contains(&m) || m == 0.0 {
            return;
        }
        let k = frexp_exponent(m);
        let (f1, f2) = (pow2(-k / 2), pow2(-k + k / 2));
        for row in self.entries.iter_mut() {
            for x in row.iter_mut() {
                *x = x.scale(f1).scale(f2);
            }
        }
        self.log_scale += k as f64 * LN_2;
    }

    /// `self <- [[d, -1], [1, 0]] * self`.
    #[inline]
    pub fn push_left_step(&mut self, d: T) {
        let [r0, r1] = self.entries;
        self.entries = [[d * r0[0] - r1[0], d * r0[1] - r1[1]], r0];
        self.renormalize();
    }

    /// `self <- self * [[d, -1], [1, 0]]`.
    #[inline]
    pub fn push_right_step(&mut self, d: T) {
        let [[a, b], [c, e]] = self.entries;
        self.entries = [[a * d + b, -a], [c * d + e, -c]];
        self.renormalize();
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let a = &self.entries;
        let b = &rhs.entries;
        let mut out = Self {
            entries: [
                [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
                [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
            ],
            log_scale: self.log_scale + rhs.log_scale,
        };
        out.renormalize();
        out
    }

    /// Inverse of a unimodular matrix (`|det| = 1`): the adjugate.
    pub fn inverse_unimodular(&self) -> Self {
        let [[a, b], [c, d]] = self.entries;
        // S^-1 = adj(S) / det(S); with det S = 1, adj(e^s M) = e^s adj(M).
        Self {
            entries: [[d, -b], [-c, a]],
            log_scale: self.log_scale,
        }
    }

    /// Determinant of the normalized entries.
    pub fn det_entries(&self) -> T {
        let [[a, b], [c, d]] = self.entries;
        a * d - b * c
    }

    /// `|det(entries) - exp(-2 log_scale)|`, i.e. `|det S - 1| / exp(2 log_scale)`:
    /// the determinant defect relative to the scale of the product.
    pub fn det_defect(&self) -> f64 {
        let target = T::from_real((-2.0 * self.log_scale).exp());
        (self.det_entries() - target).modulus()
    }

    /// `log |det S|` evaluated from the stored entries. Only meaningful when
    /// `log_scale` is moderate; see [`product_log_abs_det`] for long products.
    pub fn log_abs_det(&self) -> f64 {
        2.0 * self.log_scale + self.det_entries().modulus().ln()
    }

    /// `log ||S||` in the operator (spectral) norm.
    pub fn log_norm(&self) -> f64 {
        let f: f64 = self.entries.iter().flatten().map(|x| x.norm_sqr()).sum();
        let det2 = self.det_entries().norm_sqr();
        let disc = (f * f - 4.0 * det2).max(0.0).sqrt();
        self.log_scale + 0.5 * ((f + disc) / 2.0).ln()
    }

    /// Entry `(i, j)` of the true matrix in signed-log form.
    pub fn entry(&self, i: usize, j: usize) -> SignedLog<T> {
        SignedLog::from_scaled(self.entries[i][j], self.log_scale)
    }

    /// The true matrix; overflows for long products.
    pub fn to_dense(&self) -> [[T; 2]; 2] {
        let s = self.log_scale.exp();
        self.entries.map(|row| row.map(|x| x.scale(s)))
    }

    /// `S v` as (normalized vector, log scale).
    pub fn apply(&self, v: [T; 2]) -> ([T; 2], f64) {
        let e = &self.entries;
        (
            [e[0][0] * v[0] + e[0][1] * v[1], e[1][0] * v[0] + e[1][1] * v[1]],
            self.log_scale,
        )
    }
}

/// The one-step matrix `[[E - v, -1], [1, 0]]` (determinant one).
pub fn one_step<T: Scalar>(e: T, v: f64) -> ScaledMatrix<T> {
    ScaledMatrix::from_entries(
        [[e - T::from_real(v), -T::one()], [T::one(), T::zero()]],
        0.0,
    )
    .expect("one-step matrix is never zero")
}

/// `S_[a,b] = S_b ... S_a` for a window of values `V_a..V_b`.
pub fn product_values<T: Scalar>(e: T, values: &[f64]) -> ScaledMatrix<T> {
    let mut s = ScaledMatrix::identity();
    for &v in values {
        s.push_left_step(e - T::from_real(v));
    }
    s
}

pub fn product<T: Scalar>(e: T, window: &PotentialWindow) -> ScaledMatrix<T> {
    product_values(e, window.values())
}

/// Blocks are closed once their log scale passes this, keeping the
/// cancellation in `ad - bc` below about `e^(2 * 4) * eps`.
const DET_BLOCK_SCALE: f64 = 2.0;

/// `log |det S_[a,b]|` of the product as computed in floating point.
///
/// Read off the stored entries of a long product, `ad - bc` cancels to
/// nothing once `log_scale` is large. Determinants are multiplicative, so the
/// window is cut into blocks of moderate scale and their log-determinants are
/// summed; the rounding error then grows linearly in the length.
pub fn product_log_abs_det<T: Scalar>(e: T, values: &[f64]) -> f64 {
    let mut acc = ExactSum::new();
    let mut block = ScaledMatrix::<T>::identity();
    for &v in values {
        block.push_left_step(e - T::from_real(v));
        if block.log_scale() > DET_BLOCK_SCALE {
            acc.add(block.log_abs_det());
            block = ScaledMatrix::identity();
        }
    }
    acc.add(block.log_abs_det());
    acc.value()
}

/// Prefix determinants `P_[a,a], P_[a,a+1], ..., P_[a,b]` of `H - E` via
/// `P_k = (V_k - E) P_{k-1} - P_{k-2}`, `P_empty = 1`, `P_(length -1) = 0`.
pub fn det_recurrence_values<T: Scalar>(e: T, values: &[f64]) -> Vec<LogDet<T>> {
    let mut out = Vec::with_capacity(values.len());
    let mut p1 = T::one();
    let mut p2 = T::zero();
    let mut ls = 0.0;
    for &v in values {
        let p = T::recurrence_step(v, e, p1, p2);
        p2 = p1;
        p1 = p;
        out.push(SignedLog::from_scaled(p, ls));
        let m = p1.modulus().max(p2.modulus());
        if m > RESCALE_HIGH || (m < RESCALE_LOW && m > 0.0) {
            let k = frexp_exponent(m);
            let f = pow2(-k);
            p1 = p1.scale(f);
            p2 = p2.scale(f);
            ls += k as f64 * LN_2;
        }
    }
    out
}

const RESCALE_HIGH: f64 = 1e150;
const RESCALE_LOW: f64 = 1e-150;

pub fn det_recurrence<T: Scalar>(e: T, window: &PotentialWindow) -> Vec<LogDet<T>> {
    det_recurrence_values(e, window.values())
}

/// `P_[a,b]` alone.
pub fn determinant<T: Scalar>(e: T, values: &[f64]) -> LogDet<T> {
    if values.is_empty() {
        return SignedLog::one();
    }
    *det_recurrence_values(e, values).last().expect("non-empty")
}

/// `<u, S v>` (conjugate-linear in `u`) in signed-log form. Both vectors
/// must be unit vectors to within `1e-12`.
pub fn matrix_element<T: Scalar>(u: [T; 2], s: &ScaledMatrix<T>, v: [T; 2]) -> Result<SignedLog<T>> {
    for (name, w) in [("u", u), ("v", v)] {
        let n = (w[0].norm_sqr() + w[1].norm_sqr()).sqrt();
        if (n - 1.0).abs() > 1e-12 {
            return Err(invalid(if name == "u" { "u" } else { "v" }, format!("norm {n} is not 1")));
        }
    }
    let (sv, ls) = s.apply(v);
    let x = u[0].conj() * sv[0] + u[1].conj() * sv[1];
    Ok(SignedLog::from_scaled(x, ls))
}

/// Outcome of comparing a transfer product with its four determinants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockIdentityReport {
    /// Largest `|log|entry| - log|P||` over the four entries.
    pub max_log_discrepancy: f64,
    /// Entries whose sign (phase) disagrees with the `(-1)^length`-adjusted
    /// determinant.
    pub sign_mismatches: usize,
}

/// Compare `S_[a,b]` against `P_[a,b]`, `P_[a+1,b]`, `P_[a,b-1]`,
/// `P_[a+1,b-1]` computed by the determinant recurrence.
pub fn block_identity_check<T: Scalar>(e: T, window: &PotentialWindow) -> Result<BlockIdentityReport> {
    let values = window.values();
    let n = values.len();
    if n < 2 {
        return Err(invalid("window", "block identity needs at least two sites"));
    }
    let s = product_values(e, values);
    let from_a = det_recurrence_values(e, values);
    let from_a1 = det_recurrence_values(e, &values[1..]);
    let p_ab = from_a[n - 1];
    let p_ab1 = from_a[n - 2];
    let p_a1b = from_a1[n - 2];
    let p_a1b1 = if n >= 3 { from_a1[n - 3] } else { SignedLog::one() };
    let sign = |len: usize| if len % 2 == 0 { 1.0 } else { -1.0 };
    let expected = [
        [p_ab.scale_phase(sign(n)), p_a1b.scale_phase(-sign(n - 1))],
        [p_ab1.scale_phase(sign(n - 1)), p_a1b1.scale_phase(-sign(n - 2))],
    ];
    let mut worst: f64 = 0.0;
    let mut mismatches = 0;
    for (i, row) in expected.iter().enumerate() {
        for (j, want) in row.iter().enumerate() {
            let got = s.entry(i, j);
            let d = match (got.is_zero(), want.is_zero()) {
                (true, true) => 0.0,
                (false, false) => (got.log_mag - want.log_mag).abs(),
                _ => f64::INFINITY,
            };
            worst = worst.max(d);
            if !got.is_zero() && !want.is_zero() && (got.phase - want.phase).modulus() > 1e-6 {
                mismatches += 1;
            }
        }
    }
    Ok(BlockIdentityReport {
        max_log_discrepancy: worst,
        sign_mismatches: mismatches,
    })
}

impl<T: Scalar> SignedLog<T> {
    fn scale_phase(self, s: f64) -> Self {
        Self {
            phase: self.phase.scale(s),
            log_mag: self.log_mag,
        }
    }
}
