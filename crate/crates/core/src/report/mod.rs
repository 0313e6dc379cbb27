//! Aggregate statistics over detected events: summary counts, weekly and
//! intraday histograms, return distributions, quote-return threshold
//! fractions, the volume/return two-dimensional histogram and per-day
//! clustering. Everything is exported as plot-ready delimited text.

mod histogram;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::clock::{format_clock, hms, Nanos, MAIN_CLOSE, MAIN_OPEN, NANOS_PER_MINUTE};
use crate::detect::{Direction, UeeEvent};

pub use histogram::Histogram;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub total: u64,
    pub spikes: u64,
    pub crashes: u64,
}

impl SummaryRow {
    fn share(&self, n: u64) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * n as f64 / self.total as f64
        }
    }

    pub fn spike_pct(&self) -> f64 {
        self.share(self.spikes)
    }

    pub fn crash_pct(&self) -> f64 {
        self.share(self.crashes)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("criterion,total,spikes,spike_pct,crashes,crash_pct\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.1},{},{:.1}",
                r.label,
                r.total,
                r.spikes,
                r.spike_pct(),
                r.crashes,
                r.crash_pct()
            );
        }
        out
    }
}

/// One row per labelled event set, e.g. one per duration criterion.
pub fn summary_table<'a, I>(sets: I) -> SummaryTable
where
    I: IntoIterator<Item = (&'a str, &'a [UeeEvent])>,
{
    let rows = sets
        .into_iter()
        .map(|(label, events)| {
            let spikes = events.iter().filter(|e| e.direction == Direction::FlashSpike).count() as u64;
            SummaryRow { label: label.to_string(), total: events.len() as u64, spikes, crashes: events.len() as u64 - spikes }
        })
        .collect();
    SummaryTable { rows }
}

/// ISO week label, e.g. `2014-W02`.
pub fn iso_week_label(date: NaiveDate) -> String {
    let w = date.iso_week();
    format!("{}-W{:02}", w.year(), w.week())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeeklyHistogram {
    /// `(week label, Monday of the week, count)` for every week from the
    /// first to the last event, zeros included.
    pub weeks: Vec<(String, NaiveDate, u64)>,
}

impl WeeklyHistogram {
    pub fn total(&self) -> u64 {
        self.weeks.iter().map(|w| w.2).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("week,week_start,count\n");
        for (label, monday, count) in &self.weeks {
            let _ = writeln!(out, "{label},{monday},{count}");
        }
        out
    }
}

fn monday_of(date: NaiveDate) -> NaiveDate {
    date - Duration::days(date.weekday().num_days_from_monday() as i64)
}

pub fn weekly_histogram(events: &[UeeEvent]) -> WeeklyHistogram {
    let mut by_week: BTreeMap<NaiveDate, u64> = BTreeMap::new();
    for e in events {
        *by_week.entry(monday_of(e.date)).or_insert(0) += 1;
    }
    let (Some(&first), Some(&last)) = (by_week.keys().next(), by_week.keys().next_back()) else {
        return WeeklyHistogram::default();
    };
    let mut weeks = Vec::new();
    let mut monday = first;
    while monday <= last {
        weeks.push((iso_week_label(monday), monday, by_week.get(&monday).copied().unwrap_or(0)));
        monday += Duration::days(7);
    }
    WeeklyHistogram { weeks }
}

pub const INTRADAY_START: Nanos = hms(4, 0, 0);
pub const INTRADAY_END: Nanos = hms(20, 0, 0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntradayHistogram {
    pub start: Nanos,
    pub bin_width: Nanos,
    pub counts: Vec<u64>,
    /// Events starting before 04:00 or at/after 20:00.
    pub out_of_range: u64,
    pub session_markers: Vec<Nanos>,
}

impl IntradayHistogram {
    pub fn in_range(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_start(&self, k: usize) -> Nanos {
        self.start + k as Nanos * self.bin_width
    }

    pub fn bin_of(&self, t: Nanos) -> Option<usize> {
        (t >= self.start).then(|| ((t - self.start) / self.bin_width) as usize).filter(|&k| k < self.counts.len())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start,bin_end,count,session_boundary\n");
        for (k, count) in self.counts.iter().enumerate() {
            let (lo, hi) = (self.bin_start(k), self.bin_start(k + 1));
            let marker = self.session_markers.contains(&lo);
            let _ = writeln!(out, "{},{},{count},{}", &format_clock(lo)[..8], &format_clock(hi)[..8], marker as u8);
        }
        let _ = writeln!(out, "# out_of_range={}", self.out_of_range);
        out
    }
}

/// Event counts by `t_start` time of day, bins of `bin_width` over 04:00-20:00.
pub fn intraday_histogram(events: &[UeeEvent], bin_width: Nanos) -> IntradayHistogram {
    assert!(bin_width > 0);
    let bins = ((INTRADAY_END - INTRADAY_START) + bin_width - 1) / bin_width;
    let mut h = IntradayHistogram {
        start: INTRADAY_START,
        bin_width,
        counts: vec![0; bins as usize],
        out_of_range: 0,
        session_markers: vec![MAIN_OPEN, MAIN_CLOSE],
    };
    for e in events {
        match (e.t_start < INTRADAY_END).then(|| h.bin_of(e.t_start)).flatten() {
            Some(k) => h.counts[k] += 1,
            None => h.out_of_range += 1,
        }
    }
    h
}

pub const DEFAULT_INTRADAY_BIN: Nanos = 5 * NANOS_PER_MINUTE;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnBins {
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
}

impl Default for ReturnBins {
    fn default() -> Self {
        ReturnBins { lo: -0.03, hi: 0.03, width: 0.001 }
    }
}

impl ReturnBins {
    fn histogram(&self) -> Histogram {
        Histogram::new(self.lo, self.hi, self.width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCount {
    pub direction: Direction,
    pub cutoff: f64,
    pub above: u64,
    pub total: u64,
}

impl ThresholdCount {
    pub fn fraction(&self) -> Option<f64> {
        (self.total > 0).then(|| self.above as f64 / self.total as f64)
    }
}

pub const QUOTE_RETURN_CUTOFFS: [f64; 2] = [0.005, 0.008];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnHistograms {
    pub event_crash: Histogram,
    pub event_spike: Histogram,
    pub quote_crash: Histogram,
    pub quote_spike: Histogram,
    pub thresholds: Vec<ThresholdCount>,
}

impl ReturnHistograms {
    pub fn to_csv(&self) -> String {
        self.series_csv(true)
    }

    /// Like [`to_csv`](Self::to_csv), optionally without the quote-return series.
    pub fn series_csv(&self, with_quotes: bool) -> String {
        let mut out = String::from("series,direction,bin_lo,bin_hi,count\n");
        let series = [
            ("r_uee", Direction::FlashCrash, &self.event_crash),
            ("r_uee", Direction::FlashSpike, &self.event_spike),
            ("quote_return", Direction::FlashCrash, &self.quote_crash),
            ("quote_return", Direction::FlashSpike, &self.quote_spike),
        ];
        for (name, direction, h) in series.into_iter().take(if with_quotes { 4 } else { 2 }) {
            for (k, count) in h.counts.iter().enumerate() {
                let (lo, hi) = h.edges(k);
                let _ = writeln!(out, "{name},{direction},{lo:.9},{hi:.9},{count}");
            }
            let _ = writeln!(out, "{name},{direction},underflow,,{}", h.underflow);
            let _ = writeln!(out, "{name},{direction},overflow,,{}", h.overflow);
        }
        out
    }

    pub fn thresholds_csv(&self) -> String {
        let mut out = String::from("direction,cutoff,above,total,fraction\n");
        for t in &self.thresholds {
            let frac = t.fraction().map(|f| format!("{f:.9}")).unwrap_or_default();
            let _ = writeln!(out, "{},{:.3},{},{},{frac}", t.direction, t.cutoff, t.above, t.total);
        }
        out
    }
}

/// Histograms of event returns and of largest quote returns, split by
/// direction, plus the fraction of absolute quote returns strictly above each
/// cutoff. `quote_moves` pairs each event's direction with its largest quote
/// return, if it had one.
pub fn return_histograms(events: &[UeeEvent], quote_moves: &[(Direction, Option<f64>)], bins: &ReturnBins) -> ReturnHistograms {
    let mut r = ReturnHistograms {
        event_crash: bins.histogram(),
        event_spike: bins.histogram(),
        quote_crash: bins.histogram(),
        quote_spike: bins.histogram(),
        thresholds: Vec::new(),
    };
    for e in events {
        match e.direction {
            Direction::FlashCrash => r.event_crash.add(e.r_uee),
            Direction::FlashSpike => r.event_spike.add(e.r_uee),
        }
    }
    for &(direction, value) in quote_moves {
        if let Some(v) = value {
            match direction {
                Direction::FlashCrash => r.quote_crash.add(v),
                Direction::FlashSpike => r.quote_spike.add(v),
            }
        }
    }
    for direction in [Direction::FlashCrash, Direction::FlashSpike] {
        let values: Vec<f64> = quote_moves.iter().filter(|m| m.0 == direction).filter_map(|m| m.1).collect();
        for cutoff in QUOTE_RETURN_CUTOFFS {
            r.thresholds.push(ThresholdCount {
                direction,
                cutoff,
                above: values.iter().filter(|v| v.abs() > cutoff).count() as u64,
                total: values.len() as u64,
            });
        }
    }
    r
}

/// Binning for the accumulated-volume by largest-quote-return histogram.
/// Volume bins are logarithmic, return bins linear over absolute returns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hist2dSpec {
    pub bins_per_decade: u32,
    pub min_decade: i32,
    pub max_decade: i32,
    pub return_lo: f64,
    pub return_hi: f64,
    pub return_width: f64,
}

impl Default for Hist2dSpec {
    fn default() -> Self {
        Hist2dSpec { bins_per_decade: 5, min_decade: 0, max_decade: 8, return_lo: 0.0, return_hi: 0.02, return_width: 0.001 }
    }
}

impl Hist2dSpec {
    pub fn volume_edges(&self) -> Vec<f64> {
        let n = (self.max_decade - self.min_decade) as u32 * self.bins_per_decade;
        (0..=n)
            .map(|k| 10f64.powf(self.min_decade as f64 + k as f64 / self.bins_per_decade as f64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hist2d {
    pub spec: Hist2dSpec,
    pub volume_edges: Vec<f64>,
    pub returns: Histogram,
    /// `cells[v][r]`
    pub cells: Vec<Vec<u64>>,
    pub out_of_range: u64,
}

impl Hist2d {
    pub fn new(spec: Hist2dSpec) -> Self {
        let volume_edges = spec.volume_edges();
        let returns = Histogram::new(spec.return_lo, spec.return_hi, spec.return_width);
        let cells = vec![vec![0; returns.counts.len()]; volume_edges.len() - 1];
        Hist2d { spec, volume_edges, returns, cells, out_of_range: 0 }
    }

    fn volume_bin(&self, volume: u64) -> Option<usize> {
        let v = volume as f64;
        let above = self.volume_edges.partition_point(|&e| e <= v);
        (above >= 1 && above < self.volume_edges.len()).then(|| above - 1)
    }

    pub fn add(&mut self, volume: u64, quote_return: f64) {
        match (self.volume_bin(volume), self.returns.bin_of(quote_return.abs())) {
            (Some(v), Ok(r)) => self.cells[v][r] += 1,
            _ => self.out_of_range += 1,
        }
    }

    pub fn in_range(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    pub fn volume_marginal(&self) -> Vec<u64> {
        self.cells.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn return_marginal(&self) -> Vec<u64> {
        (0..self.returns.counts.len()).map(|r| self.cells.iter().map(|row| row[r]).sum()).collect()
    }

    /// Non-empty cells as `volume_lo,volume_hi,return_lo,return_hi,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("volume_bin,volume_lo,volume_hi,return_bin,return_lo,return_hi,count\n");
        for (v, row) in self.cells.iter().enumerate() {
            for (r, &count) in row.iter().enumerate() {
                if count == 0 {
                    continue;
                }
                let (rlo, rhi) = self.returns.edges(r);
                let _ = writeln!(
                    out,
                    "{v},{:.3},{:.3},{r},{rlo:.9},{rhi:.9},{count}",
                    self.volume_edges[v],
                    self.volume_edges[v + 1]
                );
            }
        }
        let _ = writeln!(out, "# out_of_range={}", self.out_of_range);
        out
    }
}

/// Two-dimensional histogram of `(accumulated volume, largest quote return)`.
pub fn volume_return_hist2d<I>(records: I, spec: &Hist2dSpec) -> Hist2d
where
    I: IntoIterator<Item = (u64, f64)>,
{
    let mut h = Hist2d::new(*spec);
    for (volume, ret) in records {
        h.add(volume, ret);
    }
    h
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusterTable {
    /// Events per `(date, symbol)`.
    #[serde(with = "symbol_day_counts")]
    pub per_symbol_day: BTreeMap<(NaiveDate, String), u64>,
    /// Events per date across all symbols.
    pub per_day: BTreeMap<NaiveDate, u64>,
}

/// JSON maps need string keys, so symbol-day counts travel as a list.
mod symbol_day_counts {
    use std::collections::BTreeMap;

    use chrono::NaiveDate;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        date: NaiveDate,
        symbol: String,
        count: u64,
    }

    pub fn serialize<S: Serializer>(map: &BTreeMap<(NaiveDate, String), u64>, s: S) -> Result<S::Ok, S::Error> {
        let entries: Vec<Entry> =
            map.iter().map(|((date, symbol), &count)| Entry { date: *date, symbol: symbol.clone(), count }).collect();
        entries.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(NaiveDate, String), u64>, D::Error> {
        Ok(Vec::<Entry>::deserialize(d)?.into_iter().map(|e| ((e.date, e.symbol), e.count)).collect())
    }
}

impl ClusterTable {
    pub fn max_daily(&self) -> Option<(NaiveDate, u64)> {
        // Earliest date wins ties.
        self.per_day.iter().fold(None, |best, (&d, &n)| match best {
            Some((_, m)) if m >= n => best,
            _ => Some((d, n)),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,symbol,count\n");
        for ((date, symbol), n) in &self.per_symbol_day {
            let _ = writeln!(out, "{date},{symbol},{n}");
        }
        for (date, n) in &self.per_day {
            let _ = writeln!(out, "{date},*,{n}");
        }
        if let Some((date, n)) = self.max_daily() {
            let _ = writeln!(out, "# max_daily={n} on {date}");
        }
        out
    }
}

pub fn cluster_table(events: &[UeeEvent]) -> ClusterTable {
    let mut t = ClusterTable::default();
    for e in events {
        *t.per_symbol_day.entry((e.date, e.symbol.clone())).or_insert(0) += 1;
        *t.per_day.entry(e.date).or_insert(0) += 1;
    }
    t
}
