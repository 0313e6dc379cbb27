//! End-to-end stages shared by the command-line tool and the tests: reading
//! input files, per-event analytics over detected events, and the report
//! tables and files derived from them.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clock::Nanos;
use crate::detect::{Direction, UeeEvent};
use crate::error::{Error, Result};
use crate::ingest::{
    read_quotes_file, read_trades_file, InputFormat, Parsed, QuoteDay, SymbolDay, TradeDay, ValidationReport,
};
use crate::quotes::{
    accumulated_volume, average_spread_profile, largest_quote_return, LargestQuoteMove, SpreadConfig, SpreadProfile,
    SpreadSeries, SpreadWindow,
};
use crate::recovery::{recovery_curves, recovery_series, series_to_csv, RecoveryCurves, RecoverySeries};
use crate::recovery::{DEFAULT_HIGH, DEFAULT_LOW, DEFAULT_N_MAX};
use crate::report::{
    cluster_table, intraday_histogram, return_histograms, volume_return_hist2d, weekly_histogram, ClusterTable, Hist2d,
    Hist2dSpec, IntradayHistogram, ReturnBins, ReturnHistograms, WeeklyHistogram, DEFAULT_INTRADAY_BIN,
};

/// Expands directories into their regular, non-hidden files, sorted by name.
pub fn input_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for path in paths {
        let meta = fs::metadata(path).map_err(|source| Error::Read { path: path.clone(), source })?;
        if !meta.is_dir() {
            out.push(path.clone());
            continue;
        }
        let mut entries = Vec::new();
        let listing = fs::read_dir(path).map_err(|source| Error::Read { path: path.clone(), source })?;
        for entry in listing {
            let entry = entry?;
            let hidden = entry.file_name().to_string_lossy().starts_with('.');
            if entry.file_type()?.is_file() && !hidden {
                entries.push(entry.path());
            }
        }
        entries.sort();
        out.extend(entries);
    }
    Ok(out)
}

fn combine<R: Send>(parsed: Vec<Parsed<R>>) -> Result<(Vec<SymbolDay<R>>, ValidationReport)> {
    let mut report = ValidationReport::default();
    let mut days = Vec::new();
    for p in parsed {
        report.merge(&p.report);
        days.extend(p.days);
    }
    days.sort_by(|a, b| a.key().cmp(&b.key()));
    if let Some(w) = days.windows(2).find(|w| w[0].key() == w[1].key()) {
        let (symbol, date) = w[0].key();
        return Err(Error::Format(format!("symbol-day {symbol} {date} appears in more than one input file")));
    }
    Ok((days, report))
}

/// Reads trade files in parallel. A symbol-day split across files is an error.
pub fn read_trade_files(files: &[PathBuf], format: &InputFormat) -> Result<(Vec<TradeDay>, ValidationReport)> {
    combine(files.par_iter().map(|f| read_trades_file(f, format)).collect::<Result<Vec<_>>>()?)
}

pub fn read_quote_files(files: &[PathBuf], format: &InputFormat) -> Result<(Vec<QuoteDay>, ValidationReport)> {
    combine(files.par_iter().map(|f| read_quotes_file(f, format)).collect::<Result<Vec<_>>>()?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniverseEntry {
    pub symbol: String,
    pub company: String,
    pub sector: String,
}

/// Reads a `symbol,company,sector` table with a header line. Company names
/// may contain commas; the first field is the symbol and the last the sector.
pub fn read_universe(path: &Path) -> Result<Vec<UniverseEntry>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed = line.split_once(',').and_then(|(symbol, rest)| {
            let (company, sector) = rest.rsplit_once(',')?;
            Some((symbol.trim(), company.trim().trim_matches('"'), sector.trim()))
        });
        match parsed {
            Some((symbol, company, sector)) if !symbol.is_empty() => out.push(UniverseEntry {
                symbol: symbol.to_string(),
                company: company.to_string(),
                sector: sector.to_string(),
            }),
            _ => return Err(Error::Format(format!("{}:{}: expected symbol,company,sector", path.display(), i + 1))),
        }
    }
    if out.is_empty() {
        return Err(Error::Format(format!("{}: universe is empty", path.display())));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub spread: SpreadConfig,
    pub n_max: usize,
    pub high: f64,
    pub low: f64,
    pub return_bins: ReturnBins,
    pub hist2d: Hist2dSpec,
    pub intraday_bin: Nanos,
    pub skip_quotes: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            spread: SpreadConfig::default(),
            n_max: DEFAULT_N_MAX,
            high: DEFAULT_HIGH,
            low: DEFAULT_LOW,
            return_bins: ReturnBins::default(),
            hist2d: Hist2dSpec::default(),
            intraday_bin: DEFAULT_INTRADAY_BIN,
            skip_quotes: false,
        }
    }
}

/// Why an event has no spread window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowStatus {
    Complete,
    Incomplete,
    NoAnchor,
    NoQuotes,
}

impl WindowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            WindowStatus::Complete => "complete",
            WindowStatus::Incomplete => "incomplete",
            WindowStatus::NoAnchor => "no_anchor",
            WindowStatus::NoQuotes => "no_quotes",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventAnalytics {
    pub id: String,
    pub symbol: String,
    pub date: NaiveDate,
    pub direction: Direction,
    pub accumulated_volume: u64,
    pub quote_move: Option<LargestQuoteMove>,
    pub window: Option<WindowStatus>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub events: u64,
    /// Events with fewer than two usable quote updates inside the event.
    pub no_quote_move: u64,
    pub no_anchor: u64,
    pub incomplete_windows: u64,
    pub missing_quote_days: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpreadProfiles {
    pub all: Option<SpreadProfile>,
    pub crash: Option<SpreadProfile>,
    pub spike: Option<SpreadProfile>,
}

impl SpreadProfiles {
    fn build(windows: &[(String, Direction, SpreadWindow)]) -> Self {
        let profile = |d: Option<Direction>| {
            average_spread_profile(windows.iter().filter(|w| d.is_none_or(|d| w.1 == d)).map(|w| &w.2)).ok()
        };
        SpreadProfiles {
            all: profile(None),
            crash: profile(Some(Direction::FlashCrash)),
            spike: profile(Some(Direction::FlashSpike)),
        }
    }

    /// `offset,all,crash,spike` means; empty where no complete window exists.
    pub fn to_csv(&self, half_width: usize) -> String {
        let count = |p: &Option<SpreadProfile>| p.as_ref().map_or(0, |p| p.windows);
        let mut out = format!(
            "# windows all={} crash={} spike={}\noffset,all,crash,spike\n",
            count(&self.all),
            count(&self.crash),
            count(&self.spike)
        );
        let w = half_width as isize;
        for offset in -w..=w {
            let cell = |p: &Option<SpreadProfile>| p.as_ref().map(|p| format!("{:.9}", p.at(offset))).unwrap_or_default();
            let _ = writeln!(out, "{offset},{},{},{}", cell(&self.all), cell(&self.crash), cell(&self.spike));
        }
        out
    }
}

/// Histograms and tables over one event set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTables {
    pub events: u64,
    pub weekly: WeeklyHistogram,
    pub intraday: IntradayHistogram,
    pub returns: ReturnHistograms,
    pub hist2d: Option<Hist2d>,
    pub clusters: ClusterTable,
}

impl ReportTables {
    /// `analytics` is `None` when quote analytics were skipped; otherwise it
    /// holds one entry per event in the same order.
    pub fn build(events: &[UeeEvent], analytics: Option<&[EventAnalytics]>, config: &AnalysisConfig) -> Self {
        let quote_moves: Vec<(Direction, Option<f64>)> = analytics
            .map(|a| a.iter().map(|e| (e.direction, e.quote_move.as_ref().map(|m| m.value))).collect())
            .unwrap_or_default();
        let hist2d = analytics.map(|a| {
            let records = a.iter().filter_map(|e| e.quote_move.as_ref().map(|m| (e.accumulated_volume, m.value)));
            volume_return_hist2d(records, &config.hist2d)
        });
        ReportTables {
            events: events.len() as u64,
            weekly: weekly_histogram(events),
            intraday: intraday_histogram(events, config.intraday_bin),
            returns: return_histograms(events, &quote_moves, &config.return_bins),
            hist2d,
            clusters: cluster_table(events),
        }
    }

    /// Writes the report files into `dir`, returning their paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let with_quotes = self.hist2d.is_some();
        let mut files = vec![
            ("weekly.csv", self.weekly.to_csv()),
            ("intraday.csv", self.intraday.to_csv()),
            ("clusters.csv", self.clusters.to_csv()),
            ("returns_hist.csv", self.returns.series_csv(with_quotes)),
        ];
        if let Some(h) = &self.hist2d {
            files.push(("quote_thresholds.csv", self.returns.thresholds_csv()));
            files.push(("volume_return_hist2d.csv", h.to_csv()));
        }
        files.push(("report.json", to_json(self)));
        write_files(dir, files)
    }
}

pub struct Analysis {
    pub config: AnalysisConfig,
    pub analytics: Vec<EventAnalytics>,
    /// Every event's spread window, incomplete ones included.
    pub windows: Vec<(String, Direction, SpreadWindow)>,
    pub profiles: Option<SpreadProfiles>,
    pub recovery: Vec<RecoverySeries>,
    pub curves: RecoveryCurves,
    pub diagnostics: Diagnostics,
    pub report: ReportTables,
}

/// Per-event quote, volume and recovery analytics plus the report tables.
///
/// Every event must match its symbol-day in `trades`. `quotes` is ignored when
/// the configuration skips quote analytics.
pub fn analyze(
    events: &[UeeEvent],
    trades: &[TradeDay],
    quotes: Option<&[QuoteDay]>,
    config: &AnalysisConfig,
) -> Result<Analysis> {
    let trade_index: HashMap<(&str, NaiveDate), &TradeDay> = trades.iter().map(|d| (d.key(), d)).collect();
    let quotes = if config.skip_quotes { None } else { quotes };
    let quote_index: HashMap<(&str, NaiveDate), &QuoteDay> =
        quotes.unwrap_or(&[]).iter().map(|d| (d.key(), d)).collect();

    let mut days_with_events: Vec<(&str, NaiveDate)> = events.iter().map(|e| (e.symbol.as_str(), e.date)).collect();
    days_with_events.sort();
    days_with_events.dedup();
    let series: HashMap<(&str, NaiveDate), SpreadSeries> = days_with_events
        .par_iter()
        .filter_map(|k| quote_index.get(k).map(|q| (*k, SpreadSeries::new(&q.records, config.spread.changes_only))))
        .collect();

    type PerEvent = (EventAnalytics, Option<SpreadWindow>, RecoverySeries);
    let per_event: Vec<PerEvent> = events
        .par_iter()
        .map(|e| {
            let key = (e.symbol.as_str(), e.date);
            let day = trade_index.get(&key).filter(|d| e.matches(&d.records)).ok_or_else(|| Error::EventMismatch(e.id()))?;
            let mut a = EventAnalytics {
                id: e.id(),
                symbol: e.symbol.clone(),
                date: e.date,
                direction: e.direction,
                accumulated_volume: accumulated_volume(e, &day.records),
                quote_move: None,
                window: None,
            };
            let mut window = None;
            if quotes.is_some() {
                match (quote_index.get(&key), series.get(&key)) {
                    (Some(q), Some(s)) => {
                        a.quote_move = largest_quote_return(e, &q.records);
                        match s.window(e.t_start, &config.spread) {
                            Ok(w) => {
                                a.window = Some(if w.complete { WindowStatus::Complete } else { WindowStatus::Incomplete });
                                window = Some(w);
                            }
                            Err(Error::AnchorMissing) => a.window = Some(WindowStatus::NoAnchor),
                            Err(err) => return Err(err),
                        }
                    }
                    _ => a.window = Some(WindowStatus::NoQuotes),
                }
            }
            let r = recovery_series(e, &day.records, config.n_max);
            Ok((a, window, r))
        })
        .collect::<Result<_>>()?;

    let mut analytics = Vec::with_capacity(per_event.len());
    let mut windows = Vec::new();
    let mut recovery = Vec::with_capacity(per_event.len());
    let mut diagnostics = Diagnostics { events: events.len() as u64, ..Diagnostics::default() };
    for (a, w, r) in per_event {
        if quotes.is_some() {
            match a.window {
                Some(WindowStatus::NoQuotes) => diagnostics.missing_quote_days += 1,
                Some(WindowStatus::NoAnchor) => diagnostics.no_anchor += 1,
                Some(WindowStatus::Incomplete) => diagnostics.incomplete_windows += 1,
                _ => {}
            }
            if a.quote_move.is_none() {
                diagnostics.no_quote_move += 1;
            }
        }
        if let Some(w) = w {
            windows.push((a.id.clone(), a.direction, w));
        }
        analytics.push(a);
        recovery.push(r);
    }
    let curves = if recovery.is_empty() {
        RecoveryCurves::empty(config.n_max, config.high, config.low)
    } else {
        recovery_curves(&recovery, config.n_max, config.high, config.low)?
    };
    let profiles = quotes.map(|_| SpreadProfiles::build(&windows));
    let report = ReportTables::build(events, quotes.map(|_| analytics.as_slice()), config);
    Ok(Analysis { config: *config, analytics, windows, profiles, recovery, curves, diagnostics, report })
}

fn opt9(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9}")).unwrap_or_default()
}

impl Analysis {
    pub fn analytics_csv(&self) -> String {
        let mut out = String::from("id,direction,accumulated_volume,quote_side,largest_quote_return,quote_from,quote_to,spread_window\n");
        for a in &self.analytics {
            let m = a.quote_move.as_ref();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                a.id,
                a.direction,
                a.accumulated_volume,
                m.map(|m| m.side.as_str()).unwrap_or_default(),
                opt9(m.map(|m| m.value)),
                m.map(|m| crate::clock::format_clock(m.from_time)).unwrap_or_default(),
                m.map(|m| crate::clock::format_clock(m.to_time)).unwrap_or_default(),
                a.window.map(|w| w.as_str()).unwrap_or_default(),
            );
        }
        out
    }

    /// `event_id,direction,offset,spread,complete` for every retained window.
    pub fn windows_csv(&self) -> String {
        let mut out = String::from("event_id,direction,offset,spread,complete\n");
        for (id, direction, w) in &self.windows {
            for offset in w.offsets() {
                let _ = writeln!(out, "{id},{direction},{offset},{},{}", opt9(w.at(offset)), w.complete as u8);
            }
        }
        out
    }

    /// Writes every analytics and report file into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut files = vec![
            ("event_analytics.csv", self.analytics_csv()),
            ("event_analytics.json", to_json(&self.analytics)),
            ("recovery_series.csv", series_to_csv(&self.recovery)),
            ("recovery_curves.csv", self.curves.to_csv()),
            ("diagnostics.json", to_json(&self.diagnostics)),
        ];
        if let Some(p) = &self.profiles {
            files.push(("spread_windows.csv", self.windows_csv()));
            files.push(("spread_profile.csv", p.to_csv(self.config.spread.half_width)));
        }
        let mut written = write_files(dir, files)?;
        written.extend(self.report.write(dir)?);
        Ok(written)
    }
}

pub(crate) fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

fn write_files(dir: &Path, files: Vec<(&str, String)>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{detect_all, DetectionCriteria};
    use crate::synth::{fixture_suite_with, FixtureConfig};

    #[test]
    fn fixture_analytics_match_ground_truth() {
        let corpus = fixture_suite_with(21, &FixtureConfig::small()).unwrap();
        let trades = corpus.trade_days();
        let quotes = corpus.quote_days();
        let criteria = DetectionCriteria::default();
        let events = detect_all(&trades, &criteria);
        let analysis = analyze(&events, &trades, Some(&quotes), &AnalysisConfig::default()).unwrap();
        assert_eq!(analysis.analytics.len(), events.len());
        for (e, a) in events.iter().zip(&analysis.analytics) {
            let truth = corpus
                .truth
                .events
                .iter()
                .find(|p| p.expected_event(&criteria).as_ref() == Some(e))
                .expect("every detection is planted");
            assert_eq!(Some(a.accumulated_volume), truth.accumulated_volume);
            assert_eq!(a.quote_move.as_ref().map(|m| m.value), truth.largest_quote_return);
            let window = analysis.windows.iter().find(|w| w.0 == a.id).map(|w| &w.2).unwrap();
            let values: Vec<f64> = window.values.iter().map(|v| v.unwrap()).collect();
            assert_eq!(Some(values), truth.spread_window);
        }
        let profile = analysis.profiles.as_ref().unwrap().all.as_ref().unwrap();
        assert!((-50..=0).all(|o| profile.at(o) > profile.at(-400)));
        assert_eq!(analysis.report.returns.event_crash.total() + analysis.report.returns.event_spike.total(), events.len() as u64);
    }

    #[test]
    fn skip_quotes_and_mismatched_events() {
        let corpus = fixture_suite_with(21, &FixtureConfig::small()).unwrap();
        let trades = corpus.trade_days();
        let events = detect_all(&trades, &DetectionCriteria::default());
        let config = AnalysisConfig { skip_quotes: true, ..AnalysisConfig::default() };
        let analysis = analyze(&events, &trades, None, &config).unwrap();
        assert!(analysis.profiles.is_none() && analysis.report.hist2d.is_none());
        assert!(analysis.analytics.iter().all(|a| a.quote_move.is_none() && a.window.is_none()));

        let mut wrong = events.clone();
        wrong[0].s_start = crate::price::Price::from_units(1);
        assert!(matches!(analyze(&wrong, &trades, None, &config), Err(Error::EventMismatch(_))));
    }

    #[test]
    fn empty_event_set() {
        let analysis = analyze(&[], &[], None, &AnalysisConfig::default()).unwrap();
        assert!(analysis.analytics.is_empty());
        assert!(analysis.curves.crash.iter().all(|p| p.samples == 0));
        assert_eq!(analysis.report.weekly.weeks.len(), 0);
    }

    #[test]
    fn universe_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        fs::write(&path, "symbol,company,sector\nAAPL,\"Apple, Inc.\",Technology\nXOM,Exxon Mobil,Energy\n").unwrap();
        let u = read_universe(&path).unwrap();
        assert_eq!(u.len(), 2);
        assert_eq!(u[0].company, "Apple, Inc.");
        assert_eq!(u[1].sector, "Energy");
        fs::write(&path, "symbol,company,sector\n").unwrap();
        assert!(read_universe(&path).is_err());
    }

    #[test]
    fn duplicate_symbol_days_across_files_are_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let body = "timestamp,symbol,price,volume\n09:30:00.000000001,AAA,10.00,100\n";
        for name in ["trades_20140107.csv", "more_20140107.csv"] {
            fs::write(dir.path().join(name), body).unwrap();
        }
        let files = input_files(&[dir.path().to_path_buf()]).unwrap();
        assert_eq!(files.len(), 2);
        assert!(matches!(read_trade_files(&files, &InputFormat::default()), Err(Error::Format(_))));
    }
}
