//! Floating-point helpers shared by the probability modules.
//!
//! Almost every quantity in this crate is a power of a number close to one,
//! raised to an attribute count that can reach 10^12, and many of them are
//! combined in alternating sums. The helpers here keep those evaluations in
//! log space and accumulate signed sums in double-double arithmetic.

use statrs::distribution::{ContinuousCDF, Normal};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add_f64(self, x: f64) -> Self {
        let (s, e) = two_sum(self.hi, x);
        let (hi, lo) = quick_two_sum(s, e + self.lo);
        DoubleDouble { hi, lo }
    }
}

impl Add for DoubleDouble {
    type Output = DoubleDouble;
    fn add(self, rhs: DoubleDouble) -> DoubleDouble {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let (t, f) = two_sum(self.lo, rhs.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        DoubleDouble { hi, lo }
    }
}

impl Mul for DoubleDouble {
    type Output = DoubleDouble;
    fn mul(self, rhs: DoubleDouble) -> DoubleDouble {
        let p = self.hi * rhs.hi;
        let e = self.hi.mul_add(rhs.hi, -p);
        let (hi, lo) = quick_two_sum(p, e + (self.hi * rhs.lo + self.lo * rhs.hi));
        DoubleDouble { hi, lo }
    }
}

impl DoubleDouble {
    /// `self^k` by binary powering.
    pub fn powu(self, mut k: u64) -> DoubleDouble {
        let mut base = self;
        let mut acc = DoubleDouble::new(1.0);
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            k >>= 1;
            if k > 0 {
                base = base * base;
            }
        }
        acc
    }
}

/// `(1 - p²)^m` in double-double; `1 - p²` itself is formed exactly.
pub fn one_minus_sq_pow(p: f64, m: u64) -> DoubleDouble {
    let s = p * p;
    let s_lo = p.mul_add(p, -s);
    let q = DoubleDouble::new(1.0) - DoubleDouble { hi: s, lo: 0.0 } - DoubleDouble { hi: s_lo, lo: 0.0 };
    q.powu(m)
}

impl Sub for DoubleDouble {
    type Output = DoubleDouble;
    fn sub(self, rhs: DoubleDouble) -> DoubleDouble {
        self + (-rhs)
    }
}

impl Neg for DoubleDouble {
    type Output = DoubleDouble;
    fn neg(self) -> DoubleDouble {
        DoubleDouble {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl AddAssign<f64> for DoubleDouble {
    fn add_assign(&mut self, rhs: f64) {
        *self = self.add_f64(rhs);
    }
}

/// Sums an iterator in double-double arithmetic.
pub fn dd_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    terms
        .into_iter()
        .fold(DoubleDouble::ZERO, DoubleDouble::add_f64)
        .to_f64()
}

/// `ln(1 - p^2)` without forming `1 - p^2`.
#[inline]
pub fn ln_one_minus_sq(p: f64) -> f64 {
    (-p).ln_1p() + p.ln_1p()
}

/// `(1 - s)^m` evaluated as `exp(m * ln(1 - s))`.
#[inline]
pub fn pow_one_minus(s: f64, m: f64) -> f64 {
    if s >= 1.0 {
        return 0.0;
    }
    (m * (-s).ln_1p()).exp()
}

/// `(1 - s)^m - 1`, accurate when `m * s` is small.
#[inline]
pub fn pow_one_minus_m1(s: f64, m: f64) -> f64 {
    if s >= 1.0 {
        return -1.0;
    }
    (m * (-s).ln_1p()).exp_m1()
}

/// `p^k (1-p)^(h-k)` with the conventions `0^0 = 1`.
#[inline]
pub fn bernoulli_weight(p: f64, k: u32, h: u32) -> f64 {
    p.powi(k as i32) * (1.0 - p).powi((h - k) as i32)
}

/// Table of `p^k (1-p)^(h-k)` for `k = 0..=h`.
pub fn weight_table(p: f64, h: u32) -> Vec<f64> {
    (0..=h).map(|k| bernoulli_weight(p, k, h)).collect()
}

const EXACT_BINOMIAL_LIMIT: u64 = 1_000_000;

/// Binomial coefficient as a real; exact integer arithmetic up to `n = 10^6`,
/// a running product for small `k` and log-gamma beyond.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    if n <= EXACT_BINOMIAL_LIMIT {
        // C(n, i+1) = C(n, i) (n - i) / (i + 1) is an exact integer division.
        let mut acc: u128 = 1;
        let mut exact = true;
        for i in 0..k {
            match acc.checked_mul((n - i) as u128) {
                Some(v) => acc = v / (i + 1) as u128,
                None => {
                    exact = false;
                    break;
                }
            }
        }
        if exact {
            return acc as f64;
        }
    }
    if k <= SMALL_K_PRODUCT {
        // k roundings, so a few ulps at most
        return (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
    }
    let lg = |x: f64| libm::lgamma(x);
    (lg(n as f64 + 1.0) - lg(k as f64 + 1.0) - lg((n - k) as f64 + 1.0)).exp()
}

const SMALL_K_PRODUCT: u64 = 64;

/// Standard normal CDF via `erfc`, accurate in both tails.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Antiderivative of the standard normal CDF: `t Φ(t) + φ(t)`.
#[inline]
pub fn normal_cdf_integral(t: f64) -> f64 {
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    t * normal_cdf(t) + normal_pdf(t)
}

/// `∫_t^∞ (1 - Φ(s)) ds = φ(t) - t (1 - Φ(t))`.
#[inline]
pub fn normal_survival_integral(t: f64) -> f64 {
    normal_cdf_integral(-t)
}

/// Quantile of the standard normal, refined with one Newton step on `normal_cdf`.
pub fn normal_quantile(u: f64) -> f64 {
    if u <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if u >= 1.0 {
        return f64::INFINITY;
    }
    let n = Normal::standard();
    let mut x = n.inverse_cdf(u);
    let d = normal_pdf(x);
    if d > 0.0 {
        x -= (normal_cdf(x) - u) / d;
    }
    x
}

/// Least-squares slope of `ys` against `xs`.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
