//! Exact rational helpers shared by the parser, the symbolic path and reports.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Nearest f64; saturates to +-inf for magnitudes beyond f64 range.
pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Parses a decimal literal `[+-]digits[.digits][(e|E)[+-]digits]` exactly.
pub fn parse_decimal(text: &str) -> Option<Rational> {
    let bytes = text.as_bytes();
    let mut i = 0;
    let negative = match bytes.first() {
        Some(b'-') => {
            i += 1;
            true
        }
        Some(b'+') => {
            i += 1;
            false
        }
        _ => false,
    };
    let int_start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i == int_start {
        return None;
    }
    let mut digits = String::from(&text[int_start..i]);
    let mut scale: i64 = 0;
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i == frac_start {
            return None;
        }
        digits.push_str(&text[frac_start..i]);
        scale -= (i - frac_start) as i64;
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        i += 1;
        let exp_start = i;
        if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
            i += 1;
        }
        let exp_digits = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_digits {
            return None;
        }
        // Exponents beyond this range would allocate absurd integers.
        let exp: i64 = text[exp_start..i].parse().ok()?;
        if exp.abs() > 4096 {
            return None;
        }
        scale += exp;
    }
    if i != bytes.len() {
        return None;
    }
    let mantissa: BigInt = digits.parse().ok()?;
    let mantissa = if negative { -mantissa } else { mantissa };
    let pow = num_traits::pow(BigInt::from(10), scale.unsigned_abs() as usize);
    Some(if scale >= 0 {
        Rational::from_integer(mantissa * pow)
    } else {
        Rational::new(mantissa, pow)
    })
}

/// Parses either a decimal literal or an exact fraction `p/q`.
pub fn parse_rational(text: &str) -> Option<Rational> {
    match text.split_once('/') {
        Some((num, den)) => {
            let num: BigInt = num.parse().ok()?;
            if den.starts_with(['+', '-']) {
                return None;
            }
            let den: BigInt = den.parse().ok()?;
            if den.is_zero() {
                return None;
            }
            Some(Rational::new(num, den))
        }
        None => parse_decimal(text),
    }
}

/// Exact decimal text when the denominator is of the form 2^a 5^b, else `p/q`.
pub fn format_exact(r: &Rational) -> String {
    if r.is_integer() {
        return r.numer().to_string();
    }
    let mut den = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let (mut twos, mut fives) = (0usize, 0usize);
    while den.is_even() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let places = twos.max(fives);
    let scaled = r * Rational::from_integer(num_traits::pow(BigInt::from(10), places));
    let digits = scaled.to_integer().abs().to_string();
    let digits = format!("{:0>width$}", digits, width = places + 1);
    let (whole, frac) = digits.split_at(digits.len() - places);
    let sign = if r.is_negative() { "-" } else { "" };
    format!("{sign}{whole}.{frac}")
}

/// Display adapter for [`format_exact`].
pub struct Exact<'a>(pub &'a Rational);

impl fmt::Display for Exact<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_exact(self.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_literals_are_exact() {
        assert_eq!(parse_decimal("0.1"), Some(ratio(1, 10)));
        assert_eq!(parse_decimal("-2.50"), Some(ratio(-5, 2)));
        assert_eq!(parse_decimal("1e-3"), Some(ratio(1, 1000)));
        assert_eq!(parse_decimal("+12E2"), Some(int(1200)));
        assert_eq!(parse_decimal("1.5e1"), Some(int(15)));
    }

    #[test]
    fn malformed_decimals_are_rejected() {
        for bad in ["", "-", ".5", "1.", "1e", "1e+", "1x", "--1", "1.2.3"] {
            assert_eq!(parse_decimal(bad), None, "{bad:?}");
        }
    }

    #[test]
    fn fractions() {
        assert_eq!(parse_rational("1/3"), Some(ratio(1, 3)));
        assert_eq!(parse_rational("-4/6"), Some(ratio(-2, 3)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("1/-2"), None);
    }

    #[test]
    fn exact_formatting() {
        assert_eq!(format_exact(&int(-7)), "-7");
        assert_eq!(format_exact(&ratio(1, 10)), "0.1");
        assert_eq!(format_exact(&ratio(-1, 8)), "-0.125");
        assert_eq!(format_exact(&ratio(1, 3)), "1/3");
        assert_eq!(format_exact(&ratio(1001, 1000)), "1.001");
    }

    #[test]
    fn format_then_parse_is_identity() {
        for r in [ratio(3, 40), ratio(-1, 3), int(0), ratio(123456789, 1024)] {
            assert_eq!(parse_rational(&format_exact(&r)), Some(r));
        }
    }
}
