//! Input-format descriptors.
//!
//! A descriptor maps an arbitrary delimited layout onto the canonical trade
//! and quote columns. It is read from a small TOML document:
//!
//! ```toml
//! delimiter = "|"
//! header = true
//! resolution = "ms"
//! timestamp = "taq"        # clock | taq | ticks
//! date = "2014-01-07"      # optional; otherwise a date column or the file name
//!
//! [trade_columns]
//! timestamp = "Time"
//! symbol = "Symbol"
//! price = "Trade_Price"
//! volume = "Trade_Volume"
//!
//! [quote_columns]
//! timestamp = "Time"
//! symbol = "Symbol"
//! bid = "Bid_Price"
//! bid_size = "Bid_Size"
//! ask = "Offer_Price"
//! ask_size = "Offer_Size"
//! ```
//!
//! Columns are named by header field, or given as zero-based indices when the
//! file has no header.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::clock::{self, Nanos};
use crate::error::{Error, Result};

/// Granularity of the timestamps in a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resolution {
    S,
    Ms,
    Us,
    Ns,
}

impl Resolution {
    pub fn nanos(self) -> Nanos {
        match self {
            Resolution::S => 1_000_000_000,
            Resolution::Ms => 1_000_000,
            Resolution::Us => 1_000,
            Resolution::Ns => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimestampStyle {
    /// `HH:MM:SS[.fffffffff]`
    Clock,
    /// `HHMMSS` followed by fractional-second digits, as in Daily TAQ files.
    Taq,
    /// Integer count of `resolution` units since midnight.
    Ticks,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeColumns {
    pub timestamp: ColumnRef,
    pub symbol: ColumnRef,
    pub price: ColumnRef,
    pub volume: ColumnRef,
    #[serde(default)]
    pub date: Option<ColumnRef>,
}

impl Default for TradeColumns {
    fn default() -> Self {
        TradeColumns {
            timestamp: ColumnRef::Name("timestamp".into()),
            symbol: ColumnRef::Name("symbol".into()),
            price: ColumnRef::Name("price".into()),
            volume: ColumnRef::Name("volume".into()),
            date: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuoteColumns {
    pub timestamp: ColumnRef,
    pub symbol: ColumnRef,
    pub bid: ColumnRef,
    pub bid_size: ColumnRef,
    pub ask: ColumnRef,
    pub ask_size: ColumnRef,
    #[serde(default)]
    pub date: Option<ColumnRef>,
}

impl Default for QuoteColumns {
    fn default() -> Self {
        QuoteColumns {
            timestamp: ColumnRef::Name("timestamp".into()),
            symbol: ColumnRef::Name("symbol".into()),
            bid: ColumnRef::Name("bid".into()),
            bid_size: ColumnRef::Name("bid_size".into()),
            ask: ColumnRef::Name("ask".into()),
            ask_size: ColumnRef::Name("ask_size".into()),
            date: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputFormat {
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_true")]
    pub header: bool,
    #[serde(default = "default_resolution")]
    pub resolution: Resolution,
    #[serde(default = "default_style")]
    pub timestamp: TimestampStyle,
    #[serde(default)]
    pub date: Option<NaiveDate>,
    #[serde(default)]
    pub trade_columns: TradeColumns,
    #[serde(default)]
    pub quote_columns: QuoteColumns,
}

fn default_delimiter() -> char {
    ','
}
fn default_true() -> bool {
    true
}
fn default_resolution() -> Resolution {
    Resolution::Ns
}
fn default_style() -> TimestampStyle {
    TimestampStyle::Clock
}

impl Default for InputFormat {
    fn default() -> Self {
        InputFormat {
            delimiter: default_delimiter(),
            header: true,
            resolution: default_resolution(),
            timestamp: default_style(),
            date: None,
            trade_columns: TradeColumns::default(),
            quote_columns: QuoteColumns::default(),
        }
    }
}

impl InputFormat {
    /// The canonical layout, pinned to one trading date.
    pub fn canonical_for(date: NaiveDate) -> Self {
        InputFormat { date: Some(date), ..Self::default() }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("format descriptor serializes")
    }

    pub fn parse_timestamp(&self, text: &str) -> Option<Nanos> {
        match self.timestamp {
            TimestampStyle::Clock => clock::parse_clock(text),
            TimestampStyle::Taq => parse_taq_time(text),
            TimestampStyle::Ticks => {
                let ticks: i64 = text.parse().ok()?;
                (ticks >= 0).then_some(())?;
                ticks.checked_mul(self.resolution.nanos())
            }
        }
    }
}

fn parse_taq_time(text: &str) -> Option<Nanos> {
    let b = text.as_bytes();
    if b.len() < 6 || b.len() > 15 || !b.iter().all(u8::is_ascii_digit) {
        return None;
    }
    let two = |i: usize| ((b[i] - b'0') * 10 + (b[i + 1] - b'0')) as i64;
    let (hour, minute, second) = (two(0), two(2), two(4));
    if hour > 23 || minute > 59 || second > 59 {
        return None;
    }
    let frac = &b[6..];
    let mut nanos = 0i64;
    for &d in frac {
        nanos = nanos * 10 + (d - b'0') as i64;
    }
    nanos *= 10i64.pow(9 - frac.len() as u32);
    Some(clock::hms(hour, minute, second) + nanos)
}

/// Parses `YYYY-MM-DD` or `YYYYMMDD`.
pub fn parse_date(text: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(text, "%Y%m%d"))
        .ok()
}

/// Finds a `YYYY-MM-DD` or `YYYYMMDD` date embedded in a file name.
pub fn date_from_path(path: &Path) -> Option<NaiveDate> {
    let name = path.file_stem()?.to_str()?;
    let bytes = name.as_bytes();
    for width in [10usize, 8] {
        if bytes.len() < width {
            continue;
        }
        for start in 0..=bytes.len() - width {
            let before_ok = start == 0 || !bytes[start - 1].is_ascii_digit();
            let after_ok = start + width == bytes.len() || !bytes[start + width].is_ascii_digit();
            if before_ok && after_ok {
                if let Some(d) = parse_date(&name[start..start + width]) {
                    return Some(d);
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_canonical() {
        let f = InputFormat::from_toml("").unwrap();
        assert_eq!(f, InputFormat::default());
        assert_eq!(f.delimiter, ',');
        assert_eq!(f.resolution, Resolution::Ns);
    }

    #[test]
    fn descriptor_round_trips_through_toml() {
        let text = r#"
            delimiter = "|"
            header = false
            resolution = "ms"
            timestamp = "taq"
            date = "2014-01-07"
            [trade_columns]
            timestamp = 0
            symbol = 2
            price = 5
            volume = 4
        "#;
        let f = InputFormat::from_toml(text).unwrap();
        assert_eq!(f.delimiter, '|');
        assert_eq!(f.trade_columns.price, ColumnRef::Index(5));
        assert_eq!(f.date, NaiveDate::from_ymd_opt(2014, 1, 7));
        assert_eq!(InputFormat::from_toml(&f.to_toml()).unwrap(), f);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(InputFormat::from_toml("delimeter = \";\"").is_err());
    }

    #[test]
    fn taq_timestamps_scale_to_nanoseconds() {
        let ms = InputFormat { timestamp: TimestampStyle::Taq, ..Default::default() };
        assert_eq!(ms.parse_timestamp("093000123"), Some(34_200_123_000_000));
        assert_eq!(ms.parse_timestamp("093000123456789"), Some(34_200_123_456_789));
        assert_eq!(ms.parse_timestamp("093000"), Some(34_200_000_000_000));
        assert_eq!(ms.parse_timestamp("0930001234567890"), None);
        assert_eq!(ms.parse_timestamp("096000"), None);
    }

    #[test]
    fn tick_timestamps_multiply_up() {
        let ms = InputFormat {
            timestamp: TimestampStyle::Ticks,
            resolution: Resolution::Ms,
            ..Default::default()
        };
        assert_eq!(ms.parse_timestamp("34200001"), Some(34_200_001_000_000));
        assert_eq!(ms.parse_timestamp("-1"), None);
    }

    #[test]
    fn dates_in_file_names() {
        let d = NaiveDate::from_ymd_opt(2021, 1, 28).unwrap();
        assert_eq!(date_from_path(Path::new("/x/trades_2021-01-28.csv")), Some(d));
        assert_eq!(date_from_path(Path::new("taq_20210128_AAL.txt")), Some(d));
        assert_eq!(date_from_path(Path::new("trades.csv")), None);
        assert_eq!(date_from_path(Path::new("run12345678901.csv")), None);
    }
}
