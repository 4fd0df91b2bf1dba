//! Numeric abstraction for the pipeline.
//!
//! All dosage arithmetic is plain field arithmetic (multiply, divide, add,
//! compare), so the core is generic over the scalar type. The CLI and the
//! test suites instantiate everything with [`crate::Rational`] for exact
//! results; `f32`/`f64` are also supported for callers that prefer floats.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};

/// Scalar type usable throughout the pipeline.
///
/// Beyond the `num_traits` arithmetic surface, implementors must be
/// constructible from an integer ratio and renderable as a decimal string
/// for output records.
pub trait Scalar: Num + PartialOrd + Clone + fmt::Debug + fmt::Display + ToPrimitive {
    /// Exact value `numer / denom`. `denom` must be positive.
    fn from_ratio(numer: i64, denom: i64) -> Self;

    fn from_int(n: i64) -> Self {
        Self::from_ratio(n, 1)
    }

    /// Render for output records: an exact decimal when the value has a
    /// finite decimal expansion, otherwise `numer/denom`.
    fn decimal_string(&self) -> String;
}

impl Scalar for f64 {
    fn from_ratio(numer: i64, denom: i64) -> Self {
        assert!(denom > 0, "denominator must be positive");
        numer as f64 / denom as f64
    }

    fn decimal_string(&self) -> String {
        format!("{self}")
    }
}

impl Scalar for f32 {
    fn from_ratio(numer: i64, denom: i64) -> Self {
        assert!(denom > 0, "denominator must be positive");
        numer as f32 / denom as f32
    }

    fn decimal_string(&self) -> String {
        format!("{self}")
    }
}

impl Scalar for BigRational {
    fn from_ratio(numer: i64, denom: i64) -> Self {
        assert!(denom > 0, "denominator must be positive");
        BigRational::new(BigInt::from(numer), BigInt::from(denom))
    }

    fn decimal_string(&self) -> String {
        let numer = self.numer();
        let denom = self.denom();
        if denom.is_one() {
            return numer.to_string();
        }
        // Finite decimal expansion exists iff the reduced denominator is 2^a * 5^b.
        let two = BigInt::from(2);
        let five = BigInt::from(5);
        let mut rest = denom.clone();
        let mut twos = 0u32;
        let mut fives = 0u32;
        while (&rest % &two).is_zero() {
            rest /= &two;
            twos += 1;
        }
        while (&rest % &five).is_zero() {
            rest /= &five;
            fives += 1;
        }
        if !rest.is_one() {
            return format!("{numer}/{denom}");
        }
        let places = twos.max(fives);
        let scaled = (numer.abs() * BigInt::from(10).pow(places)) / denom;
        let digits = scaled.to_string();
        let sign = if numer.is_negative() { "-" } else { "" };
        let places = places as usize;
        if digits.len() <= places {
            format!("{sign}0.{digits:0>places$}")
        } else {
            let (int_part, frac_part) = digits.split_at(digits.len() - places);
            format!("{sign}{int_part}.{frac_part}")
        }
    }
}

/// Parse a scalar from `"7"`, `"7.5"`, or `"3/4"` forms. Exact for rational
/// scalars. Returns `None` on anything else (including overflow-sized input).
pub fn parse_scalar<S: Scalar>(text: &str) -> Option<S> {
    let t = text.trim();
    if t.is_empty() {
        return None;
    }
    if let Some((n, d)) = t.split_once('/') {
        let n: i64 = n.trim().parse().ok()?;
        let d: i64 = d.trim().parse().ok()?;
        if d <= 0 {
            return None;
        }
        return Some(S::from_ratio(n, d));
    }
    if let Some((int_part, frac_part)) = t.split_once('.') {
        if frac_part.is_empty()
            || frac_part.len() > 12
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return None;
        }
        let (neg, int_digits) = match int_part.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, int_part),
        };
        if !int_digits.is_empty() && !int_digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let scale = 10i64.checked_pow(frac_part.len() as u32)?;
        let int_value: i64 = if int_digits.is_empty() {
            0
        } else {
            int_digits.parse().ok()?
        };
        let frac_value: i64 = frac_part.parse().ok()?;
        let numer = int_value.checked_mul(scale)?.checked_add(frac_value)?;
        return Some(S::from_ratio(if neg { -numer } else { numer }, scale));
    }
    let n: i64 = t.parse().ok()?;
    Some(S::from_int(n))
}

pub fn smin<S: Scalar>(a: S, b: S) -> S {
    if b < a {
        b
    } else {
        a
    }
}

pub fn smax<S: Scalar>(a: S, b: S) -> S {
    if b > a {
        b
    } else {
        a
    }
}
