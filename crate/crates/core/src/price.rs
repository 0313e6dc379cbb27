//! Fixed-point prices.
//!
//! Prices are held as integer multiples of 10^-8 currency units so that
//! decimal text parses and prints losslessly and price comparisons are exact.
//! Ratios of price differences are computed from exact integer differences,
//! which makes them invariant under any rescaling that keeps prices on the grid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Number of decimal places carried by [`Price`].
pub const PRICE_DECIMALS: u32 = 8;

/// Grid units per currency unit.
pub const PRICE_SCALE: i64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Price(i64);

impl Price {
    pub const ZERO: Price = Price(0);

    pub const fn from_units(units: i64) -> Self {
        Price(units)
    }

    pub const fn units(self) -> i64 {
        self.0
    }

    /// Nearest grid price to a floating-point value.
    pub fn from_f64(value: f64) -> Self {
        Price((value * PRICE_SCALE as f64).round() as i64)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / PRICE_SCALE as f64
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    /// `(self - base) / base`, the relative move from `base` to `self`.
    pub fn return_from(self, base: Price) -> f64 {
        (self.0 - base.0) as f64 / base.0 as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PriceParseError {
    #[error("empty price")]
    Empty,
    #[error("invalid character in price {0:?}")]
    InvalidCharacter(String),
    #[error("price {0:?} has more than {PRICE_DECIMALS} decimal places")]
    TooPrecise(String),
    #[error("price {0:?} out of range")]
    Overflow(String),
}

impl FromStr for Price {
    type Err = PriceParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(PriceParseError::Empty);
        }
        let (negative, body) = match s.as_bytes()[0] {
            b'-' => (true, &s[1..]),
            b'+' => (false, &s[1..]),
            _ => (false, s),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(PriceParseError::InvalidCharacter(s.to_string()));
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(PriceParseError::InvalidCharacter(s.to_string()));
        }
        if frac_part.len() > PRICE_DECIMALS as usize {
            return Err(PriceParseError::TooPrecise(s.to_string()));
        }
        let overflow = || PriceParseError::Overflow(s.to_string());
        let mut units: i64 = 0;
        for b in int_part.bytes() {
            units = units
                .checked_mul(10)
                .and_then(|u| u.checked_add((b - b'0') as i64))
                .ok_or_else(overflow)?;
        }
        units = units.checked_mul(PRICE_SCALE).ok_or_else(overflow)?;
        let mut frac: i64 = 0;
        for b in frac_part.bytes() {
            frac = frac * 10 + (b - b'0') as i64;
        }
        frac *= 10i64.pow(PRICE_DECIMALS - frac_part.len() as u32);
        units = units.checked_add(frac).ok_or_else(overflow)?;
        Ok(Price(if negative { -units } else { units }))
    }
}

impl fmt::Display for Price {
    /// Shortest exact decimal form: at least two decimals, trailing zeros trimmed.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let int = abs / PRICE_SCALE as u64;
        let frac = abs % PRICE_SCALE as u64;
        let mut digits = format!("{:08}", frac);
        while digits.len() > 2 && digits.ends_with('0') {
            digits.pop();
        }
        write!(f, "{sign}{int}.{digits}")
    }
}

impl Serialize for Price {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Price {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
