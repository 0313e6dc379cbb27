use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::clock::{format_clock, Nanos};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// Wrong field count, unparsable field, or missing date.
    Malformed,
    NonPositivePrice,
    NonPositiveVolume,
    /// Timestamp earlier than its predecessor in the same symbol-day.
    OutOfOrder,
}

impl RejectReason {
    pub const ALL: [RejectReason; 4] = [
        RejectReason::Malformed,
        RejectReason::NonPositivePrice,
        RejectReason::NonPositiveVolume,
        RejectReason::OutOfOrder,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Malformed => "malformed",
            RejectReason::NonPositivePrice => "non_positive_price",
            RejectReason::NonPositiveVolume => "non_positive_volume",
            RejectReason::OutOfOrder => "out_of_order",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolCoverage {
    pub dates: BTreeSet<NaiveDate>,
    pub records: u64,
    pub first_timestamp: Option<Nanos>,
    pub last_timestamp: Option<Nanos>,
}

impl SymbolCoverage {
    fn observe(&mut self, date: NaiveDate, timestamp: Nanos) {
        self.dates.insert(date);
        self.records += 1;
        self.first_timestamp = Some(self.first_timestamp.map_or(timestamp, |t| t.min(timestamp)));
        self.last_timestamp = Some(self.last_timestamp.map_or(timestamp, |t| t.max(timestamp)));
    }

    fn merge(&mut self, other: &SymbolCoverage) {
        self.dates.extend(other.dates.iter().copied());
        self.records += other.records;
        self.first_timestamp = match (self.first_timestamp, other.first_timestamp) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.last_timestamp = match (self.last_timestamp, other.last_timestamp) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
    }
}

/// Per-source ingest accounting. `accepted + rejected == total` always holds,
/// and [`merge`](Self::merge) is commutative and associative.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub total: u64,
    pub accepted: u64,
    pub rejected: BTreeMap<RejectReason, u64>,
    /// Accepted quotes with bid above ask. Retained, excluded from spread analytics.
    pub crossed: u64,
    /// Accepted quotes with a non-positive bid or ask.
    pub one_sided: u64,
    pub coverage: BTreeMap<String, SymbolCoverage>,
}

impl ValidationReport {
    pub fn rejected_total(&self) -> u64 {
        self.rejected.values().sum()
    }

    pub fn rejected_for(&self, reason: RejectReason) -> u64 {
        self.rejected.get(&reason).copied().unwrap_or(0)
    }

    pub(crate) fn reject(&mut self, reason: RejectReason) {
        self.total += 1;
        *self.rejected.entry(reason).or_insert(0) += 1;
    }

    pub(crate) fn accept(&mut self, symbol: &str, date: NaiveDate, timestamp: Nanos) {
        self.total += 1;
        self.accepted += 1;
        match self.coverage.get_mut(symbol) {
            Some(c) => c.observe(date, timestamp),
            None => {
                let mut c = SymbolCoverage::default();
                c.observe(date, timestamp);
                self.coverage.insert(symbol.to_string(), c);
            }
        }
    }

    pub fn merge(&mut self, other: &ValidationReport) {
        self.total += other.total;
        self.accepted += other.accepted;
        for (reason, n) in &other.rejected {
            *self.rejected.entry(*reason).or_insert(0) += n;
        }
        self.crossed += other.crossed;
        self.one_sided += other.one_sided;
        for (symbol, cov) in &other.coverage {
            self.coverage.entry(symbol.clone()).or_default().merge(cov);
        }
    }

    pub fn is_conserved(&self) -> bool {
        self.accepted + self.rejected_total() == self.total
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable summary.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "records parsed: {}", self.total);
        let _ = writeln!(out, "accepted:       {}", self.accepted);
        let _ = writeln!(out, "rejected:       {}", self.rejected_total());
        for reason in RejectReason::ALL {
            let _ = writeln!(out, "  {:<20}{}", reason.as_str(), self.rejected_for(reason));
        }
        let _ = writeln!(out, "crossed quotes:   {}", self.crossed);
        let _ = writeln!(out, "one-sided quotes: {}", self.one_sided);
        let _ = writeln!(out, "symbols: {}", self.coverage.len());
        for (symbol, cov) in &self.coverage {
            let _ = writeln!(
                out,
                "  {symbol:<8} days={} records={} first={} last={}",
                cov.dates.len(),
                cov.records,
                cov.first_timestamp.map(format_clock).unwrap_or_default(),
                cov.last_timestamp.map(format_clock).unwrap_or_default(),
            );
        }
        out
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.summary())
    }
}
