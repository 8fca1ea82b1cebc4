//! Exponential integrals and the combinatorial coefficients used by the
//! conditional-entropy closed form.
//!
//! `E_q(x) = ∫₁^∞ t^(−q) e^(−x t) dt`. Small arguments (`x ≤ 1`) use the
//! power series for `E_1` followed by upward recurrence in `q`, which is
//! stable there. Larger arguments use the Lentz continued fraction for each
//! order directly; upward recurrence amplifies rounding by `x/q` per step and
//! is unusable once `x` exceeds a few units.

use std::cmp::Ordering;
use std::ops::{Mul, Neg};

use crate::dd::DoubleDouble;
use crate::error::{Error, Result};
use crate::scalar::Real;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EULER_GAMMA_LO: f64 = -4.942_915_152_430_645e-18;
const CF_MAX_ITER: usize = 100_000;

/// A real number carried as sign and natural-log magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLogValue<T: Real> {
    pub log_magnitude: T,
    pub sign: i8,
}

impl<T: Real> SignedLogValue<T> {
    pub fn zero() -> Self {
        Self {
            log_magnitude: T::neg_infinity(),
            sign: 0,
        }
    }

    pub fn one() -> Self {
        Self {
            log_magnitude: T::zero(),
            sign: 1,
        }
    }

    pub fn from_value(x: T) -> Self {
        match x.partial_cmp(&T::zero()) {
            Some(Ordering::Greater) => Self {
                log_magnitude: x.ln(),
                sign: 1,
            },
            Some(Ordering::Less) => Self {
                log_magnitude: (-x).ln(),
                sign: -1,
            },
            _ => Self::zero(),
        }
    }

    pub fn from_log(log_magnitude: T, sign: i8) -> Self {
        if sign == 0 {
            Self::zero()
        } else {
            Self {
                log_magnitude,
                sign: sign.signum(),
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn value(&self) -> T {
        match self.sign {
            0 => T::zero(),
            s if s > 0 => self.log_magnitude.exp(),
            _ => -self.log_magnitude.exp(),
        }
    }

    /// Signed sum, evaluated as a log-sum-exp around the larger magnitude.
    pub fn add(self, other: Self) -> Self {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        let (big, small) = if self.log_magnitude >= other.log_magnitude {
            (self, other)
        } else {
            (other, self)
        };
        let ratio = (small.log_magnitude - big.log_magnitude).exp();
        let scaled = if big.sign == small.sign {
            T::one() + ratio
        } else {
            T::one() - ratio
        };
        if scaled <= T::zero() {
            return Self::zero();
        }
        Self {
            log_magnitude: big.log_magnitude + scaled.ln(),
            sign: big.sign,
        }
    }
}

impl<T: Real> Mul for SignedLogValue<T> {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Self::zero();
        }
        Self {
            log_magnitude: self.log_magnitude + rhs.log_magnitude,
            sign: self.sign * rhs.sign,
        }
    }
}

impl<T: Real> Neg for SignedLogValue<T> {
    type Output = Self;

    fn neg(self) -> Self {
        Self {
            log_magnitude: self.log_magnitude,
            sign: -self.sign,
        }
    }
}

fn check_positive<T: Real>(x: T) -> Result<()> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "exponential integral needs a finite positive argument, got {:?}",
            x
        )))
    }
}

/// `e^x E_1(x)` for `0 < x ≤ 1` via the convergent power series.
fn scaled_e1_series<T: Real>(x: T) -> T {
    let eps = T::epsilon();
    let mut sum = T::zero();
    let mut fact = T::one();
    let mut k = 1usize;
    loop {
        let kf = T::of_usize(k);
        fact = fact * (-x) / kf;
        let term = -fact / kf;
        sum = sum + term;
        if term.abs() < sum.abs() * eps || k > 200 {
            break;
        }
        k += 1;
    }
    let e1 = -T::lit(EULER_GAMMA) - x.ln() + sum;
    e1 * x.exp()
}

/// `e^x E_n(x)` for `x > 1`, `n ≥ 1`, via the modified Lentz continued fraction.
fn scaled_en_cf<T: Real>(n: usize, x: T) -> T {
    let eps = T::epsilon();
    let tiny = T::min_positive_value() / eps;
    let nf = T::of_usize(n);
    let two = T::lit(2.0);
    let mut b = x + nf;
    let mut c = T::one() / tiny;
    let mut d = T::one() / b;
    let mut h = d;
    for i in 1..CF_MAX_ITER {
        let fi = T::of_usize(i);
        let a = -fi * (nf - T::one() + fi);
        b = b + two;
        d = T::one() / (a * d + b);
        c = b + a / c;
        let delta = c * d;
        h = h * delta;
        if (delta - T::one()).abs() < eps {
            break;
        }
    }
    h
}

/// Exponential integral `E_1(x)`; `x` must be positive.
pub fn exp_integral_e1<T: Real>(x: T) -> Result<T> {
    exp_integral_eq(1, x)
}

/// Exponential integral `E_q(x)` of integer order `q ≥ 0`.
///
/// Underflows to zero for very large `x`; use [`scaled_exp_integral`] there.
pub fn exp_integral_eq<T: Real>(q: usize, x: T) -> Result<T> {
    Ok(scaled_exp_integral(q, x)? * (-x).exp())
}

/// `e^x E_q(x)`, finite for every positive `x` representable in `T`.
pub fn scaled_exp_integral<T: Real>(q: usize, x: T) -> Result<T> {
    check_positive(x)?;
    if q == 0 {
        return Ok(x.recip());
    }
    if x > T::one() {
        return Ok(scaled_en_cf(q, x));
    }
    let mut s = scaled_e1_series(x);
    for k in 1..q {
        s = (T::one() - x * s) / T::of_usize(k);
    }
    Ok(s)
}

/// `[e^x E_0(x), e^x E_1(x), …, e^x E_qmax(x)]`.
pub fn scaled_exp_integral_table<T: Real>(qmax: usize, x: T) -> Result<Vec<T>> {
    check_positive(x)?;
    let mut out = Vec::with_capacity(qmax + 1);
    out.push(x.recip());
    if qmax == 0 {
        return Ok(out);
    }
    if x > T::one() {
        out.extend((1..=qmax).map(|q| scaled_en_cf(q, x)));
    } else {
        let mut s = scaled_e1_series(x);
        out.push(s);
        for k in 1..qmax {
            s = (T::one() - x * s) / T::of_usize(k);
            out.push(s);
        }
    }
    Ok(out)
}

/// Double-double counterpart of [`scaled_exp_integral_table`], used where the
/// caller's alternating sums would cancel most of an `f64` mantissa.
pub(crate) fn scaled_exp_integral_table_dd(qmax: usize, x: f64) -> Result<Vec<DoubleDouble>> {
    check_positive(x)?;
    let xd = DoubleDouble::from(x);
    let mut out = Vec::with_capacity(qmax + 1);
    out.push(xd.recip());
    if qmax == 0 {
        return Ok(out);
    }
    if x > 1.0 {
        for n in 1..=qmax {
            let nf = n as f64;
            let mut b = xd + nf;
            let mut c = DoubleDouble::from(1e300);
            let mut d = b.recip();
            let mut h = d;
            for i in 1..CF_MAX_ITER {
                let fi = i as f64;
                let a = -fi * (nf - 1.0 + fi);
                b = b + 2.0;
                d = (d * a + b).recip();
                c = b + DoubleDouble::from(a) / c;
                let delta = c * d;
                h = h * delta;
                if (delta - 1.0).hi.abs() < 1e-31 {
                    break;
                }
            }
            out.push(h);
        }
    } else {
        let mut sum = DoubleDouble::ZERO;
        let mut fact = DoubleDouble::ONE;
        for k in 1..200 {
            let kf = k as f64;
            fact = fact * (-x) / kf;
            let term = -fact / kf;
            sum += term;
            if term.hi.abs() < 1e-34 * sum.hi.abs() {
                break;
            }
        }
        let gamma = DoubleDouble::new(EULER_GAMMA, EULER_GAMMA_LO);
        let e1 = -gamma - xd.ln() + sum;
        let mut s = e1 * xd.exp();
        out.push(s);
        for k in 1..qmax {
            s = (DoubleDouble::ONE - xd * s) / k as f64;
            out.push(s);
        }
    }
    Ok(out)
}

/// `ln(n!)`, summed exactly term by term for moderate `n` and by Stirling's
/// series beyond.
pub fn log_factorial(n: i64) -> Result<f64> {
    if n < 0 {
        return Err(Error::InvalidArgument(format!(
            "factorial of negative integer {n}"
        )));
    }
    Ok(log_factorial_u(n as u64))
}

pub(crate) fn log_factorial_u(n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    if n <= 4096 {
        // Neumaier-compensated sum of ln k.
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for k in 2..=n {
            let v = (k as f64).ln();
            let t = sum + v;
            if sum.abs() >= v.abs() {
                comp += (sum - t) + v;
            } else {
                comp += (v - t) + sum;
            }
            sum = t;
        }
        return sum + comp;
    }
    let x = (n + 1) as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

/// Binomial coefficient, exact when it fits in 128 bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Binomial {
    Exact(u128),
    Log(SignedLogValue<f64>),
}

impl Binomial {
    pub fn to_f64(&self) -> f64 {
        match self {
            Binomial::Exact(v) => *v as f64,
            Binomial::Log(l) => l.value(),
        }
    }

    pub fn ln(&self) -> f64 {
        match self {
            Binomial::Exact(v) => (*v as f64).ln(),
            Binomial::Log(l) => l.log_magnitude,
        }
    }
}

/// Exact `C(n, k)` or `None` on 128-bit overflow. Zero outside `0 ≤ k ≤ n`.
pub fn binomial_exact(n: u64, k: i64) -> Option<u128> {
    if k < 0 || k as u64 > n {
        return Some(0);
    }
    let k = (k as u64).min(n - k as u64);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc·(n−i) is divisible by i+1; split the division so the product never overflows early.
        let den = (i + 1) as u128;
        let g = gcd(acc, den);
        let rest = den / g;
        let num = (n - i) as u128 / rest;
        acc = (acc / g).checked_mul(num)?;
    }
    Some(acc)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// `C(n, k)` with `k` outside `[0, n]` giving zero.
pub fn binomial(n: i64, k: i64) -> Result<Binomial> {
    if n < 0 {
        return Err(Error::InvalidArgument(format!(
            "binomial coefficient with negative n = {n}"
        )));
    }
    if k < 0 || k > n {
        return Ok(Binomial::Exact(0));
    }
    match binomial_exact(n as u64, k) {
        Some(v) => Ok(Binomial::Exact(v)),
        None => Ok(Binomial::Log(SignedLogValue::from_log(
            ln_binomial_u(n as u64, k as u64),
            1,
        ))),
    }
}

pub(crate) fn ln_binomial_u(n: u64, k: u64) -> f64 {
    log_factorial_u(n) - log_factorial_u(k) - log_factorial_u(n - k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn e1_reference_values() {
        assert_relative_eq!(
            exp_integral_e1(1.0f64).unwrap(),
            0.219_383_934_395_520_27,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            exp_integral_e1(0.1f64).unwrap(),
            1.822_923_958_419_390_7,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            exp_integral_e1(2.0f64).unwrap(),
            0.048_900_510_708_061_12,
            max_relative = 1e-13
        );
    }

    #[test]
    fn e1_large_argument_asymptote() {
        let x = 50.0f64;
        let r = exp_integral_e1(x).unwrap() * x * x.exp();
        assert!((r - 1.0).abs() < 0.025);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(exp_integral_e1(0.0f64), Err(Error::Domain(_))));
        assert!(matches!(exp_integral_eq(3, -1.0f64), Err(Error::Domain(_))));
        assert!(matches!(scaled_exp_integral(1, f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn order_zero_and_two() {
        assert_relative_eq!(
            exp_integral_eq(0, 2.0f64).unwrap(),
            (-2.0f64).exp() / 2.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            exp_integral_eq(2, 1.0f64).unwrap(),
            0.148_495_506_775_922_05,
            max_relative = 1e-13
        );
        // e^(-x)/(x+q) < E_q(x) < e^(-x)/(x+q-1)
        let e5 = exp_integral_eq(5, 0.5f64).unwrap();
        let e4 = exp_integral_eq(4, 0.5f64).unwrap();
        let damp = (-0.5f64).exp();
        assert!(e5 > damp / 5.5 && e5 < damp / 4.5 && e5 < e4);
    }

    #[test]
    fn scaled_values() {
        assert_relative_eq!(
            scaled_exp_integral(1, 1.0f64).unwrap(),
            0.596_347_362_323_194_1,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            scaled_exp_integral(1, 500.0f64).unwrap(),
            0.001_996_015_904_760_410_9,
            max_relative = 1e-12
        );
        assert_eq!(scaled_exp_integral(0, 300.0f64).unwrap(), 1.0 / 300.0);
        assert!(scaled_exp_integral(3, 700.0f64).unwrap().is_finite());
    }

    #[test]
    fn table_matches_pointwise() {
        for &x in &[0.01, 0.7, 1.0, 1.5, 20.0] {
            let t = scaled_exp_integral_table(30, x).unwrap();
            for (q, v) in t.iter().enumerate() {
                assert_relative_eq!(*v, scaled_exp_integral(q, x).unwrap(), max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn dd_table_agrees_with_f64() {
        for &x in &[0.05, 0.9, 1.0, 1.2, 7.0, 300.0] {
            let t = scaled_exp_integral_table(40, x).unwrap();
            let d = scaled_exp_integral_table_dd(40, x).unwrap();
            for (a, b) in t.iter().zip(&d) {
                assert_relative_eq!(*a, b.hi, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn dd_table_carries_extra_digits() {
        // (x, q, hi, lo) of e^x E_q(x) at the f64 argument, from 50-digit reference arithmetic.
        let cases = [
            (1.0, 1, 0.596_347_362_323_194_1, -2.215_149_147_878_839_8e-19),
            (0.1, 1, 2.014_642_544_708_451_5, 1.355_255_711_492_935_6e-16),
            (0.35, 1, 1.127_045_349_862_317_9, 4.814_776_925_272_969e-18),
            (0.35, 7, 0.155_918_160_932_256_22, -1.057_404_323_694_859_1e-17),
            (3.5, 1, 0.230_819_331_598_010_3, -3.601_058_857_972_107e-18),
            (3.5, 9, 0.084_648_739_150_811_23, -6.459_303_219_622_829e-18),
        ];
        for (x, q, hi, lo) in cases {
            let d = scaled_exp_integral_table_dd(q, x).unwrap();
            let err = (d[q] - DoubleDouble::new(hi, lo)).hi / hi;
            assert!(err.abs() < 1e-30, "x={x} q={q} rel err {err:e}");
        }
    }

    #[test]
    fn f32_path() {
        let v = exp_integral_e1(1.0f32).unwrap();
        assert!((v - 0.219_383_93).abs() < 1e-6);
    }

    #[test]
    fn factorials_and_binomials() {
        assert_relative_eq!(log_factorial(10).unwrap(), 15.104_412_573_075_516, max_relative = 1e-14);
        assert_relative_eq!(
            log_factorial(5000).unwrap(),
            (1..=5000u32).map(|k| (k as f64).ln()).sum::<f64>(),
            max_relative = 1e-13
        );
        assert!(log_factorial(-1).is_err());
        assert_eq!(binomial(4, 2).unwrap(), Binomial::Exact(6));
        assert_eq!(binomial(198, 2).unwrap(), Binomial::Exact(19503));
        assert_eq!(binomial(5, 7).unwrap(), Binomial::Exact(0));
        assert_eq!(binomial(5, -1).unwrap(), Binomial::Exact(0));
        assert!(binomial(-3, 1).is_err());
        assert_eq!(binomial(60, 30).unwrap(), Binomial::Exact(118_264_581_564_861_424));
        match binomial(2000, 1000).unwrap() {
            Binomial::Log(l) => {
                assert_eq!(l.sign, 1);
                assert_relative_eq!(l.log_magnitude, ln_binomial_u(2000, 1000), max_relative = 1e-15);
            }
            other => panic!("expected log form, got {other:?}"),
        }
    }

    #[test]
    fn signed_log_arithmetic() {
        let a = SignedLogValue::from_value(3.0f64);
        let b = SignedLogValue::from_value(-5.0f64);
        assert_relative_eq!((a * b).value(), -15.0, max_relative = 1e-14);
        assert_relative_eq!(a.add(b).value(), -2.0, max_relative = 1e-14);
        assert_relative_eq!((-a).value(), -3.0, max_relative = 1e-14);
        assert!(a.add(-a).is_zero());
        assert!(SignedLogValue::<f64>::from_value(0.0).is_zero());
    }
}
