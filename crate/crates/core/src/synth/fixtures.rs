use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::truth::{standard_criteria, GroundTruth, PlantKind, PlantedEvent};
use super::{generate_baseline, plant_uee, stream_rng, BaselineParams, PlantSpec, SpreadRamp, SynthDay};
use crate::clock::{hms, Nanos, NANOS_PER_MINUTE, NANOS_PER_SECOND};
use crate::detect::{reference, Direction};
use crate::error::{Error, Result};
use crate::ingest::{write_quotes, write_trades, QuoteDay, TradeDay};
use crate::quotes::DEFAULT_HALF_WIDTH;
use crate::recovery::DEFAULT_N_MAX;

/// Near-miss negatives planted per symbol-day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NegativeMix {
    pub few_trades: usize,
    pub sub_threshold: usize,
    pub slow_run: usize,
    pub reversal: usize,
}

impl NegativeMix {
    pub fn total(&self) -> usize {
        self.few_trades + self.sub_threshold + self.slow_run + self.reversal
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureConfig {
    pub symbols: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub positives_per_day: usize,
    pub negatives: NegativeMix,
    pub baseline: BaselineParams,
    pub half_width: usize,
    /// Minimum distance between the starts of two plants.
    pub min_spacing: Nanos,
}

impl FixtureConfig {
    /// Three symbols on four dates spread over four ISO weeks, one of them
    /// empty: 216 positives and 108 near misses.
    pub fn standard() -> Self {
        let d = |m, day| NaiveDate::from_ymd_opt(2014, m, day).unwrap();
        FixtureConfig {
            symbols: ["SYNA", "SYNB", "SYNC"].map(String::from).to_vec(),
            dates: vec![d(1, 7), d(1, 9), d(1, 15), d(1, 29)],
            positives_per_day: 18,
            negatives: NegativeMix { few_trades: 2, sub_threshold: 3, slow_run: 2, reversal: 2 },
            baseline: BaselineParams { crossed_rate: 0.0005, one_sided_rate: 0.0002, ..BaselineParams::default() },
            half_width: DEFAULT_HALF_WIDTH,
            min_spacing: 90 * NANOS_PER_SECOND,
        }
    }

    /// One symbol on two dates, for quick checks.
    pub fn small() -> Self {
        FixtureConfig {
            symbols: vec!["SYNA".into()],
            dates: vec![NaiveDate::from_ymd_opt(2014, 1, 7).unwrap(), NaiveDate::from_ymd_opt(2014, 1, 14).unwrap()],
            positives_per_day: 4,
            negatives: NegativeMix { few_trades: 1, sub_threshold: 1, slow_run: 1, reversal: 1 },
            baseline: BaselineParams { open: hms(9, 0, 0), close: hms(17, 0, 0), ..FixtureConfig::standard().baseline },
            ..FixtureConfig::standard()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub days: Vec<SynthDay>,
    pub truth: GroundTruth,
}

impl Corpus {
    pub fn trade_days(&self) -> Vec<TradeDay> {
        self.days.iter().map(|d| d.trades.clone()).collect()
    }

    pub fn quote_days(&self) -> Vec<QuoteDay> {
        self.days.iter().map(|d| d.quotes.clone()).collect()
    }
}

/// The standard acceptance corpus.
pub fn fixture_suite(seed: u64) -> Result<Corpus> {
    fixture_suite_with(seed, &FixtureConfig::standard())
}

/// Generates every symbol-day of `config` and certifies each one: the
/// reference enumerator must find exactly the planted positives under both
/// standard duration criteria.
pub fn fixture_suite_with(seed: u64, config: &FixtureConfig) -> Result<Corpus> {
    let jobs: Vec<(NaiveDate, &str)> = config
        .dates
        .iter()
        .flat_map(|&d| config.symbols.iter().map(move |s| (d, s.as_str())))
        .collect();
    let built: Vec<(SynthDay, Vec<PlantedEvent>)> =
        jobs.par_iter().map(|&(date, symbol)| build_day(seed, symbol, date, config)).collect::<Result<_>>()?;
    let (days, events): (Vec<SynthDay>, Vec<Vec<PlantedEvent>>) = built.into_iter().unzip();
    let truth = GroundTruth::finalize(seed, events.into_iter().flatten().collect(), &days, config.half_width);
    Ok(Corpus { days, truth })
}

fn build_day(seed: u64, symbol: &str, date: NaiveDate, config: &FixtureConfig) -> Result<(SynthDay, Vec<PlantedEvent>)> {
    let baseline = generate_baseline(seed, symbol, date, &config.baseline)?;
    let attempts = config.baseline.max_attempts;
    let mut reason = String::new();
    for attempt in 0..attempts {
        let mut rng = stream_rng(seed, symbol, date, attempt, "plants");
        let specs = plan_day(&mut rng, config)?;
        let mut day = baseline.clone();
        let planted: Result<Vec<PlantedEvent>> = specs.iter().map(|s| plant_uee(&mut day, s)).collect();
        match planted {
            Ok(planted) => match self_check(&day, &planted) {
                Ok(()) => return Ok((day, planted)),
                Err(r) => reason = r,
            },
            Err(e) => reason = e.to_string(),
        }
    }
    Err(Error::Generation { attempts, reason: format!("{symbol} {date}: {reason}") })
}

fn self_check(day: &SynthDay, planted: &[PlantedEvent]) -> std::result::Result<(), String> {
    for criteria in standard_criteria() {
        let mut found: Vec<_> = reference::enumerate_events(&day.trades.records, &criteria)
            .into_iter()
            .map(|(run, change)| (run.first, change, run.last, run.direction))
            .collect();
        let mut expected: Vec<_> = planted
            .iter()
            .flat_map(|p| p.expected_events(&criteria))
            .map(|e| (e.start_index, e.change_index, e.end_index, e.direction))
            .collect();
        found.sort();
        expected.sort();
        if found != expected {
            return Err(format!(
                "enumerator found {} events under {}, {} planted",
                found.len(),
                criteria.label(),
                expected.len()
            ));
        }
    }
    Ok(())
}

fn plan_day(rng: &mut ChaCha8Rng, config: &FixtureConfig) -> Result<Vec<PlantSpec>> {
    let mix = config.negatives;
    let mut kinds: Vec<PlantKind> = std::iter::repeat_n(PlantKind::Positive, config.positives_per_day)
        .chain(std::iter::repeat_n(PlantKind::FewTrades, mix.few_trades))
        .chain(std::iter::repeat_n(PlantKind::SubThreshold, mix.sub_threshold))
        .chain(std::iter::repeat_n(PlantKind::SlowRun, mix.slow_run))
        .chain(std::iter::repeat_n(PlantKind::Reversal, mix.reversal))
        .collect();
    kinds.shuffle(rng);

    // Plant starts cluster just after the main-session open and close. The
    // margins leave room for a full spread window and the recovery path.
    let params = &config.baseline;
    let lo = params.open + 5 * NANOS_PER_MINUTE;
    let hi = params.close - 5 * NANOS_PER_MINUTE;
    if hi <= lo {
        return Err(Error::InvalidBaseline("day too short for fixtures".into()));
    }
    let clusters = [(hms(9, 30, 0), hms(10, 0, 0)), (hms(16, 0, 0), hms(16, 30, 0))];
    let mut starts: Vec<Nanos> = Vec::with_capacity(kinds.len());
    let mut tries = 0;
    while starts.len() < kinds.len() {
        tries += 1;
        if tries > 100_000 {
            return Err(Error::InvalidBaseline("cannot fit the requested plants into the day".into()));
        }
        let u: f64 = rng.random();
        let (a, b) = match u {
            u if u < 0.4 => clusters[0],
            u if u < 0.7 => clusters[1],
            _ => (lo, hi),
        };
        let (a, b) = (a.max(lo), b.min(hi));
        if b <= a {
            continue;
        }
        let t = rng.random_range(a..b);
        if starts.iter().all(|&s| (s - t).abs() >= config.min_spacing) {
            starts.push(t);
        }
    }
    starts.sort_unstable();
    Ok(starts.into_iter().zip(kinds).map(|(t, kind)| plan_event(rng, kind, t, params)).collect())
}

fn plan_event(rng: &mut ChaCha8Rng, kind: PlantKind, start: Nanos, params: &BaselineParams) -> PlantSpec {
    let direction = if rng.random_bool(0.5) { Direction::FlashCrash } else { Direction::FlashSpike };
    let fast = |rng: &mut ChaCha8Rng| rng.random_range(200_000_000..=1_400_000_000);
    let mut reversal = None;
    let (n, magnitude, duration) = match kind {
        PlantKind::Positive => (rng.random_range(11..=60), rng.random_range(0.0081..=0.02), fast(rng)),
        PlantKind::FewTrades => (10, rng.random_range(0.009..=0.02), fast(rng)),
        PlantKind::SubThreshold => (rng.random_range(11..=60), 0.0079, fast(rng)),
        PlantKind::SlowRun => (rng.random_range(11..=60), rng.random_range(0.0081..=0.02), 1_600_000_000),
        PlantKind::Reversal => {
            // Both monotone pieces keep at most ten trades.
            let n = rng.random_range(12..=20usize);
            reversal = Some(rng.random_range((n - 10).max(2)..=10.min(n - 2)));
            (n, rng.random_range(0.009..=0.02), fast(rng))
        }
    };

    // Larger events carry smaller quote gaps; the gap still has to exceed
    // the largest step of the trade path to be the largest quote move.
    let total_volume = 10f64.powf(rng.random_range(2.0..6.0));
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let sum: f64 = weights.iter().sum();
    let volumes = weights.iter().map(|w| ((total_volume * w / sum).round() as u64).max(1)).collect();
    let step = magnitude / (n - 1) as f64 * if reversal.is_some() { 3.5 } else { 1.0 };
    let quote_gap = (0.002 + 0.08 * total_volume.powf(-0.35)).max(2.0 * step + 0.001);

    let ramp = SpreadRamp {
        start: params.base_spread,
        end: params.base_spread * rng.random_range(3.0..8.0),
        length: rng.random_range(60..=120),
    };

    let target = match rng.random_range(0..3) {
        0 => rng.random_range(0.85..1.05),
        1 => rng.random_range(0.35..0.65),
        _ => rng.random_range(0.02..0.15),
    };
    let tau: f64 = rng.random_range(1.0..15.0);
    let mut recovery: Vec<f64> = (1..=DEFAULT_N_MAX)
        .map(|k| target * (1.0 - (-(k as f64) / tau).exp()) + rng.random_range(-0.03..0.03))
        .collect();
    recovery[0] = recovery[0].max(0.02);

    let sign = match direction {
        Direction::FlashCrash => -1.0,
        Direction::FlashSpike => 1.0,
    };
    PlantSpec {
        kind,
        direction,
        total_return: sign * magnitude,
        trade_count: n,
        duration,
        start,
        volumes,
        quote_gap,
        ramp,
        recovery,
        reversal,
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes one trade file per date under `trades/` and one quote file per date
/// under `quotes/` in the canonical layout, dated through the file name, plus
/// `ground_truth.json` carrying the data checksums keyed by relative path.
pub fn write_corpus(dir: &Path, corpus: &mut Corpus) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir.join("trades"))?;
    fs::create_dir_all(dir.join("quotes"))?;
    let mut by_date: BTreeMap<NaiveDate, Vec<&SynthDay>> = BTreeMap::new();
    for day in &corpus.days {
        by_date.entry(day.date()).or_default().push(day);
    }
    let mut written = Vec::new();
    let mut sums = BTreeMap::new();
    for (date, days) in by_date {
        let stamp = date.format("%Y%m%d");
        let trades: Vec<TradeDay> = days.iter().map(|d| d.trades.clone()).collect();
        let quotes: Vec<QuoteDay> = days.iter().map(|d| d.quotes.clone()).collect();
        let mut t = Vec::new();
        write_trades(&mut t, &trades)?;
        let mut q = Vec::new();
        write_quotes(&mut q, &quotes)?;
        for (name, bytes) in [(format!("trades/trades_{stamp}.csv"), t), (format!("quotes/quotes_{stamp}.csv"), q)] {
            let path = dir.join(&name);
            fs::write(&path, &bytes)?;
            sums.insert(name, sha256_hex(&bytes));
            written.push(path);
        }
    }
    corpus.truth.data_sha256 = sums;
    corpus.truth.seal();
    let path = dir.join("ground_truth.json");
    fs::write(&path, corpus.truth.to_json())?;
    written.push(path);
    Ok(written)
}
