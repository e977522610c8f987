//! Exact probability and utility arithmetic.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;

/// Probabilities and utilities are exact rationals end to end.
pub type Prob = BigRational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseRationalError(pub String);

impl fmt::Display for ParseRationalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "not a rational literal: {:?}", self.0)
    }
}

impl std::error::Error for ParseRationalError {}

pub fn int(n: i64) -> Prob {
    BigRational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Prob {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `3`, `-2`, `.4`, `0.25`, `-.1`, `1/3` or `-7/2`.
pub fn parse_rational(text: &str) -> Result<Prob, ParseRationalError> {
    let err = || ParseRationalError(text.to_string());
    let s = text.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = s.split_once('/') {
        let n = parse_decimal(num).ok_or_else(err)?;
        let d = parse_decimal(den).ok_or_else(err)?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(n / d);
    }
    parse_decimal(s).ok_or_else(err)
}

fn parse_decimal(s: &str) -> Option<Prob> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    if body.is_empty() {
        return None;
    }
    let (whole, frac) = match body.split_once('.') {
        Some((w, f)) => (w, f),
        None => (body, ""),
    };
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{whole}{frac}");
    let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    let value = BigRational::new(numer, denom);
    Some(if neg { -value } else { value })
}

pub fn to_f64(r: &Prob) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Renders a rational as a terminating decimal when it has one, else `p/q`.
pub fn format_exact(r: &Prob) -> String {
    if r.is_integer() {
        return r.numer().to_string();
    }
    let mut d = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&d % &two).is_zero() {
        d /= &two;
    }
    while (&d % &five).is_zero() {
        d /= &five;
    }
    if !d.is_one() {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let sign = if r.is_negative() { "-" } else { "" };
    let a = r.abs();
    let whole = a.trunc();
    let mut frac = a - &whole;
    let mut out = String::new();
    while !frac.is_zero() {
        frac *= int(10);
        let digit = frac.trunc();
        out.push_str(&digit.numer().to_string());
        frac -= digit;
    }
    let w = whole.numer().to_string();
    if w == "0" {
        format!("{sign}.{out}")
    } else {
        format!("{sign}{w}.{out}")
    }
}

/// Fixed-point rendering with `places` decimals, rounded half away from zero.
pub fn format_fixed(r: &Prob, places: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10), places);
    let scaled = r * BigRational::from_integer(scale.clone());
    let rounded = scaled.round().to_integer();
    let neg = rounded.is_negative();
    let digits = rounded.abs().to_string();
    let digits = if digits.len() <= places {
        format!("{}{}", "0".repeat(places + 1 - digits.len()), digits)
    } else {
        digits
    };
    let (w, f) = digits.split_at(digits.len() - places);
    let sign = if neg { "-" } else { "" };
    if places == 0 {
        format!("{sign}{w}")
    } else {
        format!("{sign}{w}.{f}")
    }
}

/// Decimal view plus the exact value when it differs, e.g. `47.666667 (143/3)`.
pub fn format_report(r: &Prob) -> String {
    let fixed = format_fixed(r, 6);
    if r.is_integer() {
        return fixed;
    }
    format!("{fixed} ({})", format_exact(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimal_and_fraction_literals() {
        assert_eq!(parse_rational(".4").unwrap(), ratio(2, 5));
        assert_eq!(parse_rational("-.1").unwrap(), ratio(-1, 10));
        assert_eq!(parse_rational("1/3").unwrap(), ratio(1, 3));
        assert_eq!(parse_rational("10").unwrap(), int(10));
        assert_eq!(parse_rational("0.33").unwrap(), ratio(33, 100));
        assert!(parse_rational("Box-0").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("-").is_err());
        assert!(parse_rational(".").is_err());
    }

    #[test]
    fn formats() {
        assert_eq!(format_exact(&ratio(2, 5)), ".4");
        assert_eq!(format_exact(&ratio(-1, 10)), "-.1");
        assert_eq!(format_exact(&ratio(1, 3)), "1/3");
        assert_eq!(format_exact(&int(4)), "4");
        assert_eq!(format_fixed(&ratio(143, 3), 3), "47.667");
        assert_eq!(format_fixed(&ratio(-1, 3), 2), "-0.33");
        assert_eq!(format_report(&ratio(143, 3)), "47.666667 (143/3)");
        assert_eq!(format_report(&int(11)), "11.000000");
    }
}
