//! Scalar abstraction over real and complex energies, signed-log values and
//! exact floating-point summation.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Field scalars used by transfer matrices and determinants: `f64` on
/// real-energy paths, [`Complex64`] for complexified energy.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn norm_sqr(self) -> f64;
    fn scale(self, s: f64) -> Self;
    fn conj(self) -> Self;
    fn to_complex(self) -> Complex64;
    fn is_finite(self) -> bool;

    /// `(v - e) * p1 - p2`; when the two terms nearly cancel the step is
    /// redone with error-free products and sums.
    fn recurrence_step(v: f64, e: Self, p1: Self, p2: Self) -> Self;

    /// `x / |x|`, or zero.
    fn unit_phase(self) -> Self {
        let m = self.modulus();
        if m == 0.0 {
            Self::zero()
        } else {
            self.scale(1.0 / m)
        }
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn norm_sqr(self) -> f64 {
        self * self
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn conj(self) -> Self {
        self
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }

    fn recurrence_step(v: f64, e: f64, p1: f64, p2: f64) -> f64 {
        let t1 = (v - e) * p1;
        let r = t1 - p2;
        if r.abs() <= CANCELLATION_GUARD * t1.abs().max(p2.abs()) {
            let (dh, dl) = two_sum(v, -e);
            dot2(&[(dh, p1), (dl, p1), (p2, -1.0)])
        } else {
            r
        }
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn to_complex(self) -> Complex64 {
        self
    }
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }

    fn recurrence_step(v: f64, e: Complex64, p1: Complex64, p2: Complex64) -> Complex64 {
        let t1 = (Complex64::new(v, 0.0) - e) * p1;
        let r = t1 - p2;
        if r.norm() <= CANCELLATION_GUARD * t1.norm().max(p2.norm()) {
            // (v - e) p1 = (v - er) p1 - i ei p1
            let (dh, dl) = two_sum(v, -e.re);
            let re = dot2(&[(dh, p1.re), (dl, p1.re), (e.im, p1.im), (p2.re, -1.0)]);
            let im = dot2(&[(dh, p1.im), (dl, p1.im), (-e.im, p1.re), (p2.im, -1.0)]);
            Complex64::new(re, im)
        } else {
            r
        }
    }
}

/// Relative agreement below which a recurrence step is recomputed with
/// compensated arithmetic.
pub const CANCELLATION_GUARD: f64 = 1e-13;

#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Compensated dot product (Ogita, Rump and Oishi "Dot2"): as accurate as
/// if computed in twice the working precision.
pub fn dot2(terms: &[(f64, f64)]) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for &(a, b) in terms {
        let (p, pe) = two_prod(a, b);
        let (t, se) = two_sum(s, p);
        s = t;
        c += pe + se;
    }
    s + c
}

/// Binary exponent `k` such that `x * 2^-k` lies in `[0.5, 1)`.
pub fn frexp_exponent(x: f64) -> i32 {
    debug_assert!(x.is_finite() && x > 0.0);
    let bits = x.to_bits();
    let raw = ((bits >> 52) & 0x7ff) as i32;
    if raw == 0 {
        // subnormal
        frexp_exponent(x * f64::from_bits(0x43f0_0000_0000_0000)) - 64
    } else {
        raw - 1022
    }
}

/// `2^k` as an `f64` (exact for the exponent range used here).
pub fn pow2(k: i32) -> f64 {
    if (-1022..=1023).contains(&k) {
        f64::from_bits(((k + 1023) as u64) << 52)
    } else {
        2f64.powi(k)
    }
}

/// `x * 2^k`, split in two factors so that neither overflows.
pub fn ldexp(x: f64, k: i32) -> f64 {
    let half = k / 2;
    x * pow2(half) * pow2(k - half)
}

/// A value stored as `phase * exp(log_mag)`.
///
/// For real scalars the phase is `+1`, `-1` or `0`; zero is represented by
/// phase `0` and `log_mag = -inf`, never by underflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog<T: Scalar = f64> {
    pub phase: T,
    pub log_mag: f64,
}

/// Truncated determinants are stored in signed-log form.
pub type LogDet<T = f64> = SignedLog<T>;

impl<T: Scalar> SignedLog<T> {
    pub fn zero() -> Self {
        Self {
            phase: T::zero(),
            log_mag: f64::NEG_INFINITY,
        }
    }

    pub fn one() -> Self {
        Self {
            phase: T::one(),
            log_mag: 0.0,
        }
    }

    /// Signed-log form of `x * exp(log_scale)`.
    pub fn from_scaled(x: T, log_scale: f64) -> Self {
        let m = x.modulus();
        if m == 0.0 {
            Self::zero()
        } else {
            Self {
                phase: x.scale(1.0 / m),
                log_mag: m.ln() + log_scale,
            }
        }
    }

    pub fn from_value(x: T) -> Self {
        Self::from_scaled(x, 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.log_mag == f64::NEG_INFINITY
    }

    /// The plain value; may overflow or underflow.
    pub fn value(&self) -> T {
        if self.is_zero() {
            T::zero()
        } else {
            self.phase.scale(self.log_mag.exp())
        }
    }

    pub fn mul(self, other: Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        Self {
            phase: self.phase * other.phase,
            log_mag: self.log_mag + other.log_mag,
        }
    }

    /// Quotient; dividing by zero yields an infinite magnitude.
    pub fn div(self, other: Self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        if other.is_zero() {
            return Self {
                phase: self.phase,
                log_mag: f64::INFINITY,
            };
        }
        Self {
            phase: self.phase * other.phase.conj(),
            log_mag: self.log_mag - other.log_mag,
        }
    }

    pub fn neg(self) -> Self {
        Self {
            phase: -self.phase,
            log_mag: self.log_mag,
        }
    }

    /// Sum computed relative to the larger magnitude, so it never overflows.
    pub fn add(self, other: Self) -> Self {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        let (big, small) = if self.log_mag >= other.log_mag {
            (self, other)
        } else {
            (other, self)
        };
        let ratio = (small.log_mag - big.log_mag).exp();
        let s = big.phase + small.phase.scale(ratio);
        Self::from_scaled(s, big.log_mag)
    }

    pub fn sub(self, other: Self) -> Self {
        self.add(other.neg())
    }
}

impl SignedLog<f64> {
    /// `-1`, `0` or `+1`.
    pub fn sign(&self) -> i8 {
        if self.is_zero() {
            0
        } else if self.phase > 0.0 {
            1
        } else {
            -1
        }
    }
}

/// Exact floating-point accumulator (Shewchuk's non-overlapping partials).
///
/// The rounded result equals the correctly rounded exact sum of every term
/// ever added, so merging accumulators is exactly associative.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExactSum {
    partials: Vec<f64>,
    neg_inf: bool,
    pos_inf: bool,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        if x == f64::NEG_INFINITY {
            self.neg_inf = true;
            return;
        }
        if x == f64::INFINITY {
            self.pos_inf = true;
            return;
        }
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
        self.neg_inf |= other.neg_inf;
        self.pos_inf |= other.pos_inf;
    }

    /// Correctly rounded total.
    pub fn value(&self) -> f64 {
        match (self.neg_inf, self.pos_inf) {
            (true, true) => return f64::NAN,
            (true, false) => return f64::NEG_INFINITY,
            (false, true) => return f64::INFINITY,
            _ => {}
        }
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = ExactSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn exact_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<ExactSum>().value()
}

#[derive(Serialize, Deserialize)]
struct SignedLogRepr {
    sign: i8,
    #[serde(with = "serde_float")]
    log_mag: f64,
}

impl Serialize for SignedLog<f64> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SignedLogRepr {
            sign: self.sign(),
            log_mag: self.log_mag,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SignedLog<f64> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = SignedLogRepr::deserialize(d)?;
        if (r.sign == 0) != (r.log_mag == f64::NEG_INFINITY) || !(-1..=1).contains(&r.sign) {
            return Err(serde::de::Error::custom("sign 0 must pair with log_mag -inf"));
        }
        Ok(Self {
            phase: r.sign as f64,
            log_mag: r.log_mag,
        })
    }
}

/// Serde adapter writing non-finite floats as strings ("inf", "-inf", "nan").
pub mod serde_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad float `{other}`"))),
            },
        }
    }
}
