//! Exchange-time clock values and trading sessions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Nanoseconds since midnight, exchange time.
pub type Nanos = i64;

pub const NANOS_PER_SECOND: Nanos = 1_000_000_000;
pub const NANOS_PER_MINUTE: Nanos = 60 * NANOS_PER_SECOND;
pub const NANOS_PER_HOUR: Nanos = 60 * NANOS_PER_MINUTE;

pub const fn hms(hour: i64, minute: i64, second: i64) -> Nanos {
    hour * NANOS_PER_HOUR + minute * NANOS_PER_MINUTE + second * NANOS_PER_SECOND
}

pub const PRE_MARKET_OPEN: Nanos = hms(4, 0, 0);
pub const MAIN_OPEN: Nanos = hms(9, 30, 0);
pub const MAIN_CLOSE: Nanos = hms(16, 0, 0);
pub const AFTER_MARKET_CLOSE: Nanos = hms(20, 0, 0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TradingSession {
    PreMarket,
    Main,
    AfterMarket,
}

impl TradingSession {
    pub fn bounds(self) -> (Nanos, Nanos) {
        match self {
            TradingSession::PreMarket => (PRE_MARKET_OPEN, MAIN_OPEN),
            TradingSession::Main => (MAIN_OPEN, MAIN_CLOSE),
            TradingSession::AfterMarket => (MAIN_CLOSE, AFTER_MARKET_CLOSE),
        }
    }
}

impl fmt::Display for TradingSession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TradingSession::PreMarket => "pre-market",
            TradingSession::Main => "main",
            TradingSession::AfterMarket => "after-market",
        })
    }
}

/// Session containing `timestamp`. Boundary instants belong to the later session.
pub fn session_of(timestamp: Nanos) -> Result<TradingSession, Error> {
    match timestamp {
        t if (PRE_MARKET_OPEN..MAIN_OPEN).contains(&t) => Ok(TradingSession::PreMarket),
        t if (MAIN_OPEN..MAIN_CLOSE).contains(&t) => Ok(TradingSession::Main),
        t if (MAIN_CLOSE..AFTER_MARKET_CLOSE).contains(&t) => Ok(TradingSession::AfterMarket),
        t => Err(Error::OutOfSession(format_clock(t))),
    }
}

/// Parses `HH:MM:SS` with an optional `.` and 1 to 9 fractional digits.
pub fn parse_clock(text: &str) -> Option<Nanos> {
    let b = text.as_bytes();
    if b.len() < 8 || b[2] != b':' || b[5] != b':' {
        return None;
    }
    let two = |i: usize| -> Option<i64> {
        let (h, l) = (b[i], b[i + 1]);
        (h.is_ascii_digit() && l.is_ascii_digit()).then(|| ((h - b'0') * 10 + (l - b'0')) as i64)
    };
    let (hour, minute, second) = (two(0)?, two(3)?, two(6)?);
    if hour > 23 || minute > 59 || second > 59 {
        return None;
    }
    let mut nanos = 0i64;
    if b.len() > 8 {
        let frac = &b[9..];
        if b[8] != b'.' || frac.is_empty() || frac.len() > 9 {
            return None;
        }
        for &d in frac {
            if !d.is_ascii_digit() {
                return None;
            }
            nanos = nanos * 10 + (d - b'0') as i64;
        }
        nanos *= 10i64.pow(9 - frac.len() as u32);
    }
    Some(hms(hour, minute, second) + nanos)
}

/// `HH:MM:SS.nnnnnnnnn`, always nine fractional digits.
pub fn format_clock(t: Nanos) -> String {
    let sign = if t < 0 { "-" } else { "" };
    let t = t.abs();
    let secs = t / NANOS_PER_SECOND;
    format!(
        "{sign}{:02}:{:02}:{:02}.{:09}",
        secs / 3600,
        (secs / 60) % 60,
        secs % 60,
        t % NANOS_PER_SECOND
    )
}
