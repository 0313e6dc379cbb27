//! Ultrafast extreme event detection.
//!
//! A trade stream is split into maximal monotonic price runs. A run is an
//! event when its cumulative move from the first trade exceeds the threshold
//! at some trade that is at least `min_trades` into the run, and the whole run
//! lasts less than `max_duration`. Falling runs are flash crashes, rising runs
//! flash spikes.

mod export;
pub mod reference;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clock::{Nanos, NANOS_PER_SECOND};
use crate::error::{Error, Result};
use crate::ingest::{TradeDay, TradeRecord};
use crate::price::Price;

pub use export::{
    events_from_json, events_to_csv, events_to_json, EventDocument, EVENT_CSV_HEADER, EVENT_SCHEMA,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    FlashCrash,
    FlashSpike,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::FlashCrash => "crash",
            Direction::FlashSpike => "spike",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "crash" => Ok(Direction::FlashCrash),
            "spike" => Ok(Direction::FlashSpike),
            other => Err(Error::Format(format!("unknown direction {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionCriteria {
    /// Minimum cumulative move, exclusive.
    pub threshold: f64,
    /// Trades from run start through the qualifying trade, inclusive.
    pub min_trades: usize,
    /// Exclusive upper bound on run duration.
    pub max_duration: Nanos,
    /// Require strictly monotonic prices; repeated prices end a run.
    #[serde(default)]
    pub strict: bool,
}

impl Default for DetectionCriteria {
    fn default() -> Self {
        DetectionCriteria {
            threshold: 0.008,
            min_trades: 11,
            max_duration: 1_500_000_000,
            strict: false,
        }
    }
}

impl DetectionCriteria {
    pub fn with_max_duration(self, max_duration: Nanos) -> Self {
        DetectionCriteria { max_duration, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(Error::InvalidCriteria(format!("threshold {} must be positive", self.threshold)));
        }
        if self.min_trades < 2 {
            return Err(Error::InvalidCriteria(format!("min_trades {} must be at least 2", self.min_trades)));
        }
        if self.max_duration <= 0 {
            return Err(Error::InvalidCriteria("max_duration must be positive".into()));
        }
        Ok(())
    }

    /// Short label such as `1.5s`, used in output file names.
    pub fn label(&self) -> String {
        format_duration(self.max_duration)
    }
}

/// Formats a duration as seconds with at least one decimal, e.g. `1.5s`, `2.0s`.
pub fn format_duration(d: Nanos) -> String {
    let whole = d / NANOS_PER_SECOND;
    let mut frac = format!("{:09}", d % NANOS_PER_SECOND);
    while frac.len() > 1 && frac.ends_with('0') {
        frac.pop();
    }
    format!("{whole}.{frac}s")
}

/// Parses `1.5s`, `2s`, `1500ms`, `250us` or `100ns`.
pub fn parse_duration(text: &str) -> Option<Nanos> {
    let text = text.trim();
    let (number, unit) = if let Some(n) = text.strip_suffix("ms") {
        (n, 1_000_000)
    } else if let Some(n) = text.strip_suffix("us") {
        (n, 1_000)
    } else if let Some(n) = text.strip_suffix("ns") {
        (n, 1)
    } else if let Some(n) = text.strip_suffix('s') {
        (n, NANOS_PER_SECOND)
    } else {
        (text, NANOS_PER_SECOND)
    };
    // Decimal parsed through the price grid to stay exact.
    let value: Price = number.parse().ok()?;
    let units = value.units() as i128 * unit as i128;
    let nanos = units / crate::price::PRICE_SCALE as i128;
    (units % crate::price::PRICE_SCALE as i128 == 0 && nanos > 0 && nanos <= i64::MAX as i128).then_some(nanos as Nanos)
}

/// A maximal monotonic run of trade prices, `first..=last` into the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MonotonicRun {
    pub first: usize,
    pub last: usize,
    pub direction: Direction,
}

impl MonotonicRun {
    pub fn trade_count(&self) -> usize {
        self.last - self.first + 1
    }

    /// Cumulative return of each trade in the run relative to its first trade.
    pub fn cumulative_returns<'a>(&self, trades: &'a [TradeRecord]) -> impl Iterator<Item = f64> + 'a {
        let base = trades[self.first].price;
        trades[self.first..=self.last].iter().map(move |t| t.price.return_from(base))
    }
}

/// All maximal monotonic runs with a nonzero net move, ordered by first trade.
///
/// A trade at a turning point ends one run and starts the next. With
/// non-strict monotonicity a plateau at a turning point belongs to both runs.
pub fn monotonic_runs(trades: &[TradeRecord], strict: bool) -> Vec<MonotonicRun> {
    let mut runs = Vec::new();
    if trades.len() < 2 {
        return runs;
    }
    // `down_start`: first trade of the current non-increasing (or strictly
    // decreasing) stretch; likewise `up_start`.
    let mut down_start = 0usize;
    let mut up_start = 0usize;
    let close = |runs: &mut Vec<MonotonicRun>, first: usize, last: usize, direction: Direction| {
        if last > first && trades[last].price != trades[first].price {
            runs.push(MonotonicRun { first, last, direction });
        }
    };
    for k in 1..trades.len() {
        let (prev, cur) = (trades[k - 1].price, trades[k].price);
        let breaks_down = if strict { cur >= prev } else { cur > prev };
        let breaks_up = if strict { cur <= prev } else { cur < prev };
        if breaks_down {
            close(&mut runs, down_start, k - 1, Direction::FlashCrash);
            down_start = k;
        }
        if breaks_up {
            close(&mut runs, up_start, k - 1, Direction::FlashSpike);
            up_start = k;
        }
    }
    let last = trades.len() - 1;
    close(&mut runs, down_start, last, Direction::FlashCrash);
    close(&mut runs, up_start, last, Direction::FlashSpike);
    runs.sort();
    runs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeeEvent {
    pub symbol: String,
    pub date: NaiveDate,
    pub direction: Direction,
    pub start_index: usize,
    pub change_index: usize,
    pub end_index: usize,
    pub t_start: Nanos,
    pub t_change: Nanos,
    pub t_end: Nanos,
    pub s_start: Price,
    pub s_change: Price,
    pub s_end: Price,
    /// Trades from `start_index` through `change_index`.
    pub trade_count: usize,
    /// Trades from `start_index` through `end_index`.
    pub trade_count_end: usize,
    pub duration: Nanos,
    pub r_uee: f64,
}

impl UeeEvent {
    /// Stable identifier: `SYMBOL:DATE:START:DIRECTION`.
    pub fn id(&self) -> String {
        format!("{}:{}:{}:{}", self.symbol, self.date, self.start_index, self.direction)
    }

    /// Identity of the event independent of its measured values.
    pub fn key(&self) -> (String, NaiveDate, usize, usize, usize, Direction) {
        (
            self.symbol.clone(),
            self.date,
            self.start_index,
            self.change_index,
            self.end_index,
            self.direction,
        )
    }

    /// Checks that the event's recorded fields agree with `trades`.
    pub fn matches(&self, trades: &[TradeRecord]) -> bool {
        let at = |i: usize| trades.get(i);
        matches!(
            (at(self.start_index), at(self.change_index), at(self.end_index)),
            (Some(s), Some(c), Some(e))
                if s.timestamp == self.t_start && s.price == self.s_start
                    && c.timestamp == self.t_change && c.price == self.s_change
                    && e.timestamp == self.t_end && e.price == self.s_end
        )
    }
}

/// `(S_end - S_start) / S_start`.
pub fn uee_return(event: &UeeEvent) -> f64 {
    event.s_end.return_from(event.s_start)
}

/// Detects events in one symbol-day. Runs lasting `max_duration` or longer are
/// dropped whole rather than truncated.
pub fn detect_events(day: &TradeDay, criteria: &DetectionCriteria) -> Vec<UeeEvent> {
    let trades = &day.records;
    let mut events = Vec::new();
    for run in monotonic_runs(trades, criteria.strict) {
        if let Some(change) = qualifying_trade(trades, &run, criteria) {
            let (s, c, e) = (&trades[run.first], &trades[change], &trades[run.last]);
            let mut event = UeeEvent {
                symbol: day.symbol.clone(),
                date: day.date,
                direction: run.direction,
                start_index: run.first,
                change_index: change,
                end_index: run.last,
                t_start: s.timestamp,
                t_change: c.timestamp,
                t_end: e.timestamp,
                s_start: s.price,
                s_change: c.price,
                s_end: e.price,
                trade_count: change - run.first + 1,
                trade_count_end: run.trade_count(),
                duration: e.timestamp - s.timestamp,
                r_uee: 0.0,
            };
            event.r_uee = uee_return(&event);
            events.push(event);
        }
    }
    events
}

fn qualifying_trade(trades: &[TradeRecord], run: &MonotonicRun, criteria: &DetectionCriteria) -> Option<usize> {
    let start = &trades[run.first];
    if trades[run.last].timestamp - start.timestamp >= criteria.max_duration {
        return None;
    }
    let earliest = run.first + criteria.min_trades - 1;
    if earliest > run.last {
        return None;
    }
    // The absolute return is non-decreasing along a monotonic run.
    (earliest..=run.last).find(|&k| trades[k].price.return_from(start.price).abs() > criteria.threshold)
}

/// Detects over many symbol-days in parallel; output follows input order.
pub fn detect_all(days: &[TradeDay], criteria: &DetectionCriteria) -> Vec<UeeEvent> {
    days.par_iter()
        .map(|day| detect_events(day, criteria))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::TradeRecord;

    pub(crate) fn day_from(prices: &[f64], times_ms: &[i64]) -> TradeDay {
        let records = prices
            .iter()
            .zip(times_ms)
            .enumerate()
            .map(|(i, (&p, &t))| TradeRecord {
                timestamp: 34_200_000_000_000 + t * 1_000_000,
                price: Price::from_f64(p),
                volume: 100,
                sequence: i as u64,
            })
            .collect();
        TradeDay::new("TEST", NaiveDate::from_ymd_opt(2014, 1, 7).unwrap(), records)
    }

    fn prices_only(prices: &[f64]) -> TradeDay {
        let times: Vec<i64> = (0..prices.len() as i64).collect();
        day_from(prices, &times)
    }

    fn crash_12(spacing_ms: i64) -> TradeDay {
        // 100.00 down to 99.10 over 12 trades; first beyond 0.8% at trade 11.
        let prices = [100.0, 99.92, 99.84, 99.76, 99.68, 99.60, 99.52, 99.44, 99.36, 99.28, 99.19, 99.10];
        let times: Vec<i64> = (0..12).map(|i| i * spacing_ms).collect();
        let mut day = day_from(&[99.0], &[-500]);
        day.records.extend(day_from(&prices, &times).records);
        day.records.extend(day_from(&[99.5], &[12 * spacing_ms + 500]).records);
        for (i, r) in day.records.iter_mut().enumerate() {
            r.sequence = i as u64;
        }
        day
    }

    #[test]
    fn flat_prices_have_no_runs() {
        assert!(monotonic_runs(&prices_only(&[100.0, 100.0, 100.0]).records, false).is_empty());
    }

    #[test]
    fn single_turning_point() {
        let runs = monotonic_runs(&prices_only(&[100.0, 99.0, 98.0, 99.0]).records, false);
        assert_eq!(
            runs,
            [
                MonotonicRun { first: 0, last: 2, direction: Direction::FlashCrash },
                MonotonicRun { first: 2, last: 3, direction: Direction::FlashSpike },
            ]
        );
    }

    #[test]
    fn plateau_at_turning_point_is_shared() {
        let runs = monotonic_runs(&prices_only(&[100.0, 99.0, 99.0, 100.0]).records, false);
        assert_eq!(
            runs,
            [
                MonotonicRun { first: 0, last: 2, direction: Direction::FlashCrash },
                MonotonicRun { first: 1, last: 3, direction: Direction::FlashSpike },
            ]
        );
        let strict = monotonic_runs(&prices_only(&[100.0, 99.0, 99.0, 100.0]).records, true);
        assert_eq!(
            strict,
            [
                MonotonicRun { first: 0, last: 1, direction: Direction::FlashCrash },
                MonotonicRun { first: 2, last: 3, direction: Direction::FlashSpike },
            ]
        );
    }

    #[test]
    fn short_streams_have_no_runs() {
        assert!(monotonic_runs(&[], false).is_empty());
        assert!(monotonic_runs(&prices_only(&[5.0]).records, false).is_empty());
    }

    #[test]
    fn twelve_trade_crash_is_detected() {
        let day = crash_12(90);
        let events = detect_events(&day, &DetectionCriteria::default());
        assert_eq!(events.len(), 1);
        let e = &events[0];
        assert_eq!(e.direction, Direction::FlashCrash);
        assert_eq!(e.s_start, Price::from_f64(100.0));
        assert_eq!(e.s_end, Price::from_f64(99.10));
        assert_eq!((e.start_index, e.change_index, e.end_index), (1, 11, 12));
        assert_eq!(e.trade_count, 11);
        assert_eq!(e.trade_count_end, 12);
        assert_eq!(e.duration, 11 * 90 * 1_000_000);
        assert!((e.r_uee + 0.009).abs() < 1e-12);
        assert!(e.matches(&day.records));
    }

    #[test]
    fn ten_trades_at_crossing_is_not_an_event() {
        let prices = [100.0, 99.90, 99.80, 99.70, 99.60, 99.50, 99.40, 99.30, 99.20, 99.10];
        let mut day = prices_only(&prices);
        day.records.push(TradeRecord { price: Price::from_f64(99.5), ..day.records[9] });
        day.records[10].timestamp += 1;
        day.records[10].sequence = 10;
        assert!(detect_events(&day, &DetectionCriteria::default()).is_empty());
    }

    #[test]
    fn duration_criterion_excludes_slow_runs() {
        // 12 trades spread over 1.65 s.
        let day = crash_12(150);
        assert!(detect_events(&day, &DetectionCriteria::default()).is_empty());
        let two = DetectionCriteria::default().with_max_duration(2 * NANOS_PER_SECOND);
        assert_eq!(detect_events(&day, &two).len(), 1);
    }

    #[test]
    fn uee_return_arithmetic() {
        let mut e = detect_events(&crash_12(90), &DetectionCriteria::default()).remove(0);
        assert!((uee_return(&e) + 0.009).abs() < 1e-15);
        e.s_start = Price::from_f64(200.0);
        e.s_end = Price::from_f64(201.8);
        assert!((uee_return(&e) - 0.009).abs() < 1e-15);
    }

    #[test]
    fn criteria_validation() {
        assert!(DetectionCriteria::default().validate().is_ok());
        let bad = [
            DetectionCriteria { threshold: 0.0, ..Default::default() },
            DetectionCriteria { threshold: f64::NAN, ..Default::default() },
            DetectionCriteria { min_trades: 1, ..Default::default() },
            DetectionCriteria { max_duration: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn durations_parse_and_format() {
        assert_eq!(parse_duration("1.5s"), Some(1_500_000_000));
        assert_eq!(parse_duration("2.0s"), Some(2_000_000_000));
        assert_eq!(parse_duration("2"), Some(2_000_000_000));
        assert_eq!(parse_duration("1500ms"), Some(1_500_000_000));
        assert_eq!(parse_duration("0s"), None);
        assert_eq!(parse_duration("fast"), None);
        assert_eq!(format_duration(1_500_000_000), "1.5s");
        assert_eq!(format_duration(2_000_000_000), "2.0s");
        assert_eq!(format_duration(1_250_000_001), "1.250000001s");
    }

    #[test]
    fn cumulative_returns_follow_the_run() {
        let day = prices_only(&[100.0, 99.0, 98.0]);
        let run = monotonic_runs(&day.records, false)[0];
        let r: Vec<f64> = run.cumulative_returns(&day.records).collect();
        assert_eq!(r[0], 0.0);
        assert!((r[2] + 0.02).abs() < 1e-15);
    }
}
