use std::fmt;
use std::iter::Sum;
use std::ops::Add;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Number of fractional decimal digits a finite cost carries.
pub const COST_DECIMALS: u32 = 6;
const SCALE: u64 = 10u64.pow(COST_DECIMALS);
const INF_UNITS: u64 = u64::MAX;

/// A non-negative cost in fixed-point micro-units, or the absorbing
/// [`Cost::INFINITE`].
///
/// Sums of table entries are exact, so two search procedures that add the
/// same entries in different orders always agree bit for bit.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Cost(u64);

impl Cost {
    pub const ZERO: Cost = Cost(0);
    pub const INFINITE: Cost = Cost(INF_UNITS);

    pub fn from_int(value: u64) -> Cost {
        value
            .checked_mul(SCALE)
            .filter(|&units| units != INF_UNITS)
            .map(Cost)
            .unwrap_or(Cost::INFINITE)
    }

    /// Builds a cost from raw micro-units.
    pub fn from_units(units: u64) -> Cost {
        Cost(units)
    }

    pub fn units(self) -> u64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0 == INF_UNITS
    }

    pub fn is_finite(self) -> bool {
        !self.is_infinite()
    }

    pub fn to_f64(self) -> f64 {
        if self.is_infinite() {
            f64::INFINITY
        } else {
            self.0 as f64 / SCALE as f64
        }
    }

    /// Difference that never goes below zero; `INFINITE - x` stays infinite.
    pub fn saturating_sub(self, other: Cost) -> Cost {
        if self.is_infinite() {
            Cost::INFINITE
        } else if other.is_infinite() {
            Cost::ZERO
        } else {
            Cost(self.0.saturating_sub(other.0))
        }
    }

    /// Exact multiplication by a non-negative integer.
    pub fn scale(self, factor: u64) -> Cost {
        if self.is_infinite() {
            return Cost::INFINITE;
        }
        self.0
            .checked_mul(factor)
            .filter(|&units| units != INF_UNITS)
            .map(Cost)
            .unwrap_or(Cost::INFINITE)
    }

    /// Rounds a non-negative float to the nearest micro-unit.
    pub fn from_f64(value: f64) -> Result<Cost, Error> {
        if value.is_infinite() && value > 0.0 {
            return Ok(Cost::INFINITE);
        }
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidCost(value.to_string()));
        }
        let units = (value * SCALE as f64).round();
        if units >= INF_UNITS as f64 {
            return Err(Error::InvalidCost(value.to_string()));
        }
        Ok(Cost(units as u64))
    }
}

impl Add for Cost {
    type Output = Cost;

    fn add(self, rhs: Cost) -> Cost {
        if self.is_infinite() || rhs.is_infinite() {
            return Cost::INFINITE;
        }
        self.0
            .checked_add(rhs.0)
            .filter(|&units| units != INF_UNITS)
            .map(Cost)
            .unwrap_or(Cost::INFINITE)
    }
}

impl Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Cost {
        iter.fold(Cost::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Cost> for Cost {
    fn sum<I: Iterator<Item = &'a Cost>>(iter: I) -> Cost {
        iter.copied().sum()
    }
}

impl FromStr for Cost {
    type Err = Error;

    /// Parses a plain decimal (`130`, `2.5`, `.75`) or `inf`.
    fn from_str(text: &str) -> Result<Cost, Error> {
        let bad = || Error::InvalidCost(text.to_string());
        let text = text.trim();
        if text.eq_ignore_ascii_case("inf") || text.eq_ignore_ascii_case("infinity") {
            return Ok(Cost::INFINITE);
        }
        let body = text.strip_prefix('+').unwrap_or(text);
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        let digits = |s: &str| s.chars().all(|c| c.is_ascii_digit());
        if !digits(int_part) || !digits(frac_part) || frac_part.len() > COST_DECIMALS as usize {
            return Err(bad());
        }
        let whole: u64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| bad())?
        };
        let mut frac: u64 = 0;
        for (i, c) in frac_part.chars().enumerate() {
            frac += u64::from(c as u8 - b'0') * 10u64.pow(COST_DECIMALS - 1 - i as u32);
        }
        whole
            .checked_mul(SCALE)
            .and_then(|w| w.checked_add(frac))
            .filter(|&units| units != INF_UNITS)
            .map(Cost)
            .ok_or_else(bad)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            return f.write_str("inf");
        }
        let whole = self.0 / SCALE;
        let frac = self.0 % SCALE;
        if frac == 0 {
            write!(f, "{whole}")
        } else {
            let digits = format!("{frac:0width$}", width = COST_DECIMALS as usize);
            write!(f, "{whole}.{}", digits.trim_end_matches('0'))
        }
    }
}

impl fmt::Debug for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cost({self})")
    }
}

impl Serialize for Cost {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.is_infinite() {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_f64(self.to_f64())
        }
    }
}

impl<'de> Deserialize<'de> for Cost {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Cost, D::Error> {
        struct CostVisitor;

        impl Visitor<'_> for CostVisitor {
            type Value = Cost;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative number or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Cost, E> {
                Cost::from_f64(v).map_err(E::custom)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Cost, E> {
                Ok(Cost::from_int(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Cost, E> {
                u64::try_from(v)
                    .map(Cost::from_int)
                    .map_err(|_| E::custom("negative cost"))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Cost, E> {
                v.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(CostVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!("130".parse::<Cost>().unwrap(), Cost::from_int(130));
        assert_eq!("2.5".parse::<Cost>().unwrap().units(), 2_500_000);
        assert_eq!(".75".parse::<Cost>().unwrap().units(), 750_000);
        assert!("1.0000001".parse::<Cost>().is_err());
        assert!("-1".parse::<Cost>().is_err());
        assert!("abc".parse::<Cost>().is_err());
        assert!(".".parse::<Cost>().is_err());
    }

    #[test]
    fn infinite_absorbs_and_dominates() {
        assert_eq!(Cost::INFINITE + Cost::from_int(3), Cost::INFINITE);
        assert!(Cost::from_int(u64::MAX / 2_000_000) < Cost::INFINITE);
        assert_eq!(
            Cost::INFINITE.saturating_sub(Cost::from_int(5)),
            Cost::INFINITE
        );
        assert_eq!(
            Cost::from_int(2).saturating_sub(Cost::from_int(5)),
            Cost::ZERO
        );
    }

    #[test]
    fn display_trims_fraction() {
        assert_eq!(Cost::from_int(7).to_string(), "7");
        assert_eq!("0.10".parse::<Cost>().unwrap().to_string(), "0.1");
        assert_eq!(Cost::INFINITE.to_string(), "inf");
    }

    #[test]
    fn decimal_sums_are_order_independent() {
        let a: Cost = "0.1".parse().unwrap();
        let b: Cost = "0.2".parse().unwrap();
        let c: Cost = "0.3".parse().unwrap();
        assert_eq!(a + b, c);
        assert_eq!((a + b) + c, a + (b + c));
    }

    #[test]
    fn json_round_trip() {
        for cost in [
            Cost::ZERO,
            Cost::from_int(470),
            "12.345678".parse().unwrap(),
            Cost::INFINITE,
        ] {
            let text = serde_json::to_string(&cost).unwrap();
            let back: Cost = serde_json::from_str(&text).unwrap();
            assert_eq!(back, cost);
        }
    }
}
