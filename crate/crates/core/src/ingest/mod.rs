//! Trade and quote ingestion.
//!
//! Delimited text is parsed into per-symbol-day streams ordered by
//! `(timestamp, sequence)`, where `sequence` is the record's data-line ordinal
//! within its source. Every data line is either accepted or rejected with a
//! reason; nothing is dropped without being counted.

pub mod format;
pub mod validation;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::clock::{format_clock, Nanos};
use crate::error::{Error, Result};
use crate::price::Price;

pub use format::{date_from_path, parse_date, ColumnRef, InputFormat, Resolution, TimestampStyle};
pub use validation::{RejectReason, SymbolCoverage, ValidationReport};

/// One executed trade. The symbol and date live on the owning [`SymbolDay`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub timestamp: Nanos,
    pub price: Price,
    pub volume: u64,
    pub sequence: u64,
}

/// One best-bid/best-ask update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuoteRecord {
    pub timestamp: Nanos,
    pub bid: Price,
    pub bid_size: u64,
    pub ask: Price,
    pub ask_size: u64,
    pub sequence: u64,
    /// Bid strictly above ask, both sides present.
    pub crossed: bool,
    /// Bid or ask not positive.
    pub one_sided: bool,
}

impl QuoteRecord {
    pub fn new(timestamp: Nanos, bid: Price, bid_size: u64, ask: Price, ask_size: u64, sequence: u64) -> Self {
        let one_sided = !bid.is_positive() || !ask.is_positive();
        QuoteRecord {
            timestamp,
            bid,
            bid_size,
            ask,
            ask_size,
            sequence,
            crossed: !one_sided && bid > ask,
            one_sided,
        }
    }

    /// Whether the quote takes part in relative-spread analytics.
    pub fn spread_eligible(&self) -> bool {
        !self.crossed && !self.one_sided
    }
}

pub trait TapeRecord {
    fn timestamp(&self) -> Nanos;
    fn sequence(&self) -> u64;
}

impl TapeRecord for TradeRecord {
    fn timestamp(&self) -> Nanos {
        self.timestamp
    }
    fn sequence(&self) -> u64 {
        self.sequence
    }
}

impl TapeRecord for QuoteRecord {
    fn timestamp(&self) -> Nanos {
        self.timestamp
    }
    fn sequence(&self) -> u64 {
        self.sequence
    }
}

/// A time-ordered stream for one symbol on one date.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolDay<R> {
    pub symbol: String,
    pub date: NaiveDate,
    pub records: Vec<R>,
}

pub type TradeDay = SymbolDay<TradeRecord>;
pub type QuoteDay = SymbolDay<QuoteRecord>;

impl<R> SymbolDay<R> {
    pub fn new(symbol: impl Into<String>, date: NaiveDate, records: Vec<R>) -> Self {
        SymbolDay { symbol: symbol.into(), date, records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn key(&self) -> (&str, NaiveDate) {
        (&self.symbol, self.date)
    }
}

impl<R: TapeRecord> SymbolDay<R> {
    /// `(timestamp, sequence)` strictly increasing.
    pub fn is_ordered(&self) -> bool {
        self.records
            .windows(2)
            .all(|w| (w[0].timestamp(), w[0].sequence()) < (w[1].timestamp(), w[1].sequence()))
    }
}

impl TradeDay {
    pub fn prices(&self) -> impl Iterator<Item = Price> + '_ {
        self.records.iter().map(|t| t.price)
    }
}

/// Parsed streams sorted by `(symbol, date)` plus their accounting.
#[derive(Debug, Clone, Default)]
pub struct Parsed<R> {
    pub days: Vec<SymbolDay<R>>,
    pub report: ValidationReport,
}

pub type ParsedTrades = Parsed<TradeRecord>;
pub type ParsedQuotes = Parsed<QuoteRecord>;

pub const TRADE_HEADER: &str = "timestamp,symbol,price,volume";
pub const QUOTE_HEADER: &str = "timestamp,symbol,bid,bid_size,ask,ask_size";

pub fn parse_trades<S: BufRead>(source: S, format: &InputFormat) -> Result<ParsedTrades> {
    let c = &format.trade_columns;
    let roles = [&c.timestamp, &c.symbol, &c.price, &c.volume];
    parse_tape(source, format, &roles, c.date.as_ref(), |v, ts, seq, _| {
        let price: Price = v[0].parse().map_err(|_| RejectReason::Malformed)?;
        let volume: i64 = v[1].trim().parse().map_err(|_| RejectReason::Malformed)?;
        if !price.is_positive() {
            return Err(RejectReason::NonPositivePrice);
        }
        if volume <= 0 {
            return Err(RejectReason::NonPositiveVolume);
        }
        Ok(TradeRecord { timestamp: ts, price, volume: volume as u64, sequence: seq })
    })
}

pub fn parse_quotes<S: BufRead>(source: S, format: &InputFormat) -> Result<ParsedQuotes> {
    let c = &format.quote_columns;
    let roles = [&c.timestamp, &c.symbol, &c.bid, &c.bid_size, &c.ask, &c.ask_size];
    parse_tape(source, format, &roles, c.date.as_ref(), |v, ts, seq, report| {
        let bid: Price = v[0].parse().map_err(|_| RejectReason::Malformed)?;
        let bid_size: u64 = v[1].trim().parse().map_err(|_| RejectReason::Malformed)?;
        let ask: Price = v[2].parse().map_err(|_| RejectReason::Malformed)?;
        let ask_size: u64 = v[3].trim().parse().map_err(|_| RejectReason::Malformed)?;
        let q = QuoteRecord::new(ts, bid, bid_size, ask, ask_size, seq);
        report.crossed += q.crossed as u64;
        report.one_sided += q.one_sided as u64;
        Ok(q)
    })
}

/// Opens a trade file. Without a date in the descriptor or a date column, the
/// trading date is taken from the file name.
pub fn read_trades_file(path: &Path, format: &InputFormat) -> Result<ParsedTrades> {
    let format = dated_format(path, format, format.trade_columns.date.is_some())?;
    parse_trades(open(path)?, &format)
}

pub fn read_quotes_file(path: &Path, format: &InputFormat) -> Result<ParsedQuotes> {
    let format = dated_format(path, format, format.quote_columns.date.is_some())?;
    parse_quotes(open(path)?, &format)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(|f| BufReader::with_capacity(1 << 20, f))
        .map_err(|source| Error::Read { path: path.to_path_buf(), source })
}

fn dated_format(path: &Path, format: &InputFormat, has_date_column: bool) -> Result<InputFormat> {
    let mut format = format.clone();
    if format.date.is_none() && !has_date_column {
        format.date = Some(date_from_path(path).ok_or_else(|| Error::MissingDate(path.display().to_string()))?);
    }
    Ok(format)
}

/// Column positions for the roles, in role order.
fn resolve_columns(roles: &[&ColumnRef], header: Option<&[&str]>) -> Result<Vec<usize>> {
    roles
        .iter()
        .map(|role| match (role, header) {
            (ColumnRef::Index(i), _) => Ok(*i),
            (ColumnRef::Name(name), Some(h)) => h
                .iter()
                .position(|f| f.trim() == name)
                .ok_or_else(|| Error::MissingColumn(name.clone())),
            (ColumnRef::Name(name), None) => Err(Error::Format(format!(
                "column {name:?} is named but the format declares no header"
            ))),
        })
        .collect()
}

const MAX_ROLES: usize = 8;

fn parse_tape<S, R, F>(
    mut source: S,
    format: &InputFormat,
    roles: &[&ColumnRef],
    date_role: Option<&ColumnRef>,
    build: F,
) -> Result<Parsed<R>>
where
    S: BufRead,
    R: TapeRecord,
    F: Fn(&[&str], Nanos, u64, &mut ValidationReport) -> Result<R, RejectReason>,
{
    let delim = format.delimiter;
    let mut report = ValidationReport::default();
    let mut line = String::new();

    let mut all_roles: Vec<&ColumnRef> = roles.to_vec();
    all_roles.extend(date_role);
    debug_assert!(all_roles.len() <= MAX_ROLES);

    let (columns, expected_fields) = if format.header {
        if read_line(&mut source, &mut line)? == 0 {
            return Ok(Parsed { days: Vec::new(), report });
        }
        let header: Vec<&str> = line.split(delim).collect();
        (resolve_columns(&all_roles, Some(&header))?, Some(header.len()))
    } else {
        (resolve_columns(&all_roles, None)?, None)
    };
    let min_fields = columns.iter().max().map_or(0, |m| m + 1);
    let mut slot_of = vec![usize::MAX; min_fields];
    for (slot, &col) in columns.iter().enumerate() {
        if slot_of[col] != usize::MAX {
            return Err(Error::Format(format!("column {col} mapped to more than one role")));
        }
        slot_of[col] = slot;
    }
    let n_values = roles.len() - 2;

    let mut builders: Vec<SymbolDay<R>> = Vec::new();
    let mut index: HashMap<(String, NaiveDate), usize> = HashMap::new();
    let mut last_key: Option<usize> = None;
    let mut sequence: u64 = 0;

    loop {
        if read_line(&mut source, &mut line)? == 0 {
            break;
        }
        let seq = sequence;
        sequence += 1;

        let mut fields = [""; MAX_ROLES];
        let mut count = 0usize;
        for (i, field) in line.split(delim).enumerate() {
            if let Some(&slot) = slot_of.get(i) {
                if slot != usize::MAX {
                    fields[slot] = field;
                }
            }
            count = i + 1;
        }
        let width_ok = match expected_fields {
            Some(n) => count == n,
            None => count >= min_fields,
        };
        if !width_ok {
            report.reject(RejectReason::Malformed);
            continue;
        }
        let Some(ts) = format.parse_timestamp(fields[0].trim()) else {
            report.reject(RejectReason::Malformed);
            continue;
        };
        let symbol = fields[1].trim();
        if symbol.is_empty() {
            report.reject(RejectReason::Malformed);
            continue;
        }
        let date = match date_role {
            Some(_) => parse_date(fields[roles.len()].trim()),
            None => format.date,
        };
        let Some(date) = date else {
            report.reject(RejectReason::Malformed);
            continue;
        };
        let record = match build(&fields[2..2 + n_values], ts, seq, &mut report) {
            Ok(r) => r,
            Err(reason) => {
                report.reject(reason);
                continue;
            }
        };

        let slot = match last_key {
            Some(k) if builders[k].symbol == symbol && builders[k].date == date => k,
            _ => {
                let k = match index.get(&(symbol.to_string(), date)) {
                    Some(&k) => k,
                    None => {
                        builders.push(SymbolDay::new(symbol, date, Vec::new()));
                        index.insert((symbol.to_string(), date), builders.len() - 1);
                        builders.len() - 1
                    }
                };
                last_key = Some(k);
                k
            }
        };
        let day = &mut builders[slot];
        if day.records.last().is_some_and(|prev| prev.timestamp() > ts) {
            report.reject(RejectReason::OutOfOrder);
            continue;
        }
        report.accept(symbol, date, ts);
        day.records.push(record);
    }

    builders.sort_by(|a, b| a.key().cmp(&b.key()));
    Ok(Parsed { days: builders, report })
}

/// Reads one line without its terminator. Returns bytes consumed.
fn read_line<S: BufRead>(source: &mut S, line: &mut String) -> Result<usize> {
    line.clear();
    let n = source.read_line(line)?;
    if line.ends_with('\n') {
        line.pop();
        if line.ends_with('\r') {
            line.pop();
        }
    }
    Ok(n)
}

/// Canonical trade line, no terminator.
pub fn trade_line(symbol: &str, t: &TradeRecord) -> String {
    format!("{},{},{},{}", format_clock(t.timestamp), symbol, t.price, t.volume)
}

pub fn quote_line(symbol: &str, q: &QuoteRecord) -> String {
    format!(
        "{},{},{},{},{},{}",
        format_clock(q.timestamp),
        symbol,
        q.bid,
        q.bid_size,
        q.ask,
        q.ask_size
    )
}

/// Writes streams in the canonical trade format. Records of different
/// symbols are interleaved in time order, ties broken by stream order.
pub fn write_trades<W: Write>(mut out: W, days: &[TradeDay]) -> Result<()> {
    writeln!(out, "{TRADE_HEADER}")?;
    for (d, i) in merged_order(days) {
        writeln!(out, "{}", trade_line(&days[d].symbol, &days[d].records[i]))?;
    }
    Ok(())
}

pub fn write_quotes<W: Write>(mut out: W, days: &[QuoteDay]) -> Result<()> {
    writeln!(out, "{QUOTE_HEADER}")?;
    for (d, i) in merged_order(days) {
        writeln!(out, "{}", quote_line(&days[d].symbol, &days[d].records[i]))?;
    }
    Ok(())
}

fn merged_order<R: TapeRecord>(days: &[SymbolDay<R>]) -> Vec<(usize, usize)> {
    let mut order: Vec<(usize, usize)> = days
        .iter()
        .enumerate()
        .flat_map(|(d, day)| (0..day.records.len()).map(move |i| (d, i)))
        .collect();
    order.sort_by_key(|&(d, i)| (days[d].records[i].timestamp(), d, i));
    order
}
