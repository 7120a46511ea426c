//! Exact money arithmetic with two fraction digits.
//!
//! All benefit and cost figures in the engine are compared to the cent, so
//! amounts are stored as a signed number of cents. Floats never appear.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A signed amount of money in cents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_cents(cents: i64) -> Money {
        Money(cents)
    }

    pub const fn cents(self) -> i64 {
        self.0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    /// Multiplies a per-unit rate by a quantity of units.
    pub fn times(self, units: u32) -> Money {
        Money(self.0 * i64::from(units))
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

/// Error produced when a money literal does not have the canonical
/// `units.cc` shape.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("bad money literal {0:?}, expected digits with two decimals like 12.50")]
pub struct ParseMoneyError(pub String);

impl FromStr for Money {
    type Err = ParseMoneyError;

    fn from_str(s: &str) -> Result<Money, ParseMoneyError> {
        let bad = || ParseMoneyError(s.to_string());
        let (sign, body) = match s.strip_prefix('-') {
            Some(rest) => (-1i64, rest),
            None => (1i64, s),
        };
        let (units, frac) = body.split_once('.').ok_or_else(bad)?;
        if units.is_empty()
            || frac.len() != 2
            || !units.bytes().all(|b| b.is_ascii_digit())
            || !frac.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(bad());
        }
        let units: i64 = units.parse().map_err(|_| bad())?;
        let frac: i64 = frac.parse().map_err(|_| bad())?;
        Ok(Money(sign * (units * 100 + frac)))
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Money, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        for text in ["0.00", "2.00", "12.34", "-0.50", "160.00"] {
            let m: Money = text.parse().unwrap();
            assert_eq!(m.to_string(), text);
        }
    }

    #[test]
    fn rejects_sloppy_literals() {
        for text in ["2", "2.5", "2.505", ".50", "2,00", "a.bc", "--1.00", "1.00 "] {
            assert!(text.parse::<Money>().is_err(), "accepted {text:?}");
        }
    }

    #[test]
    fn arithmetic_is_exact() {
        let a: Money = "10.01".parse().unwrap();
        let b: Money = "0.02".parse().unwrap();
        assert_eq!((a - b).to_string(), "9.99");
        assert_eq!(a.times(3).to_string(), "30.03");
        assert_eq!((-b).cents(), -2);
        let sum: Money = [a, b, b].into_iter().sum();
        assert_eq!(sum.to_string(), "10.05");
    }
}
