//! Synthetic trade and quote days with planted events.
//!
//! A baseline day is a bounded-volatility multiplicative random walk on a
//! price grid with exponential inter-arrival times and quotes that straddle
//! the latest trade. Events are planted into a baseline one at a time, in
//! chronological order, together with their quote path (pre-event spread
//! ramp, mid-event quote gap) and a post-event recovery path. Everything the
//! analytics should report for a planted event is recorded in its
//! [`PlantedEvent`] from the realized grid prices.

mod fixtures;
mod truth;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clock::{hms, Nanos, NANOS_PER_SECOND};
use crate::detect::{reference, DetectionCriteria, Direction};
use crate::error::{Error, Result};
use crate::ingest::{QuoteDay, QuoteRecord, TradeDay, TradeRecord};
use crate::price::Price;

pub use fixtures::{fixture_suite, fixture_suite_with, write_corpus, Corpus, FixtureConfig, NegativeMix};
pub use truth::{standard_criteria, ExpectedOutcome, GroundTruth, PlantKind, PlantedEvent, TRUTH_SCHEMA};

/// Spacing of the planted post-event recovery trades.
pub const RECOVERY_SPACING: Nanos = 250_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub initial_price: f64,
    pub tick: Price,
    pub mean_interarrival: Nanos,
    /// Standard deviation of the per-trade log return.
    pub volatility: f64,
    pub quotes_per_trade: f64,
    pub base_spread: f64,
    pub mean_volume: f64,
    pub crossed_rate: f64,
    pub one_sided_rate: f64,
    pub open: Nanos,
    pub close: Nanos,
    pub max_attempts: u32,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            initial_price: 100.0,
            tick: Price::from_units(10_000),
            mean_interarrival: NANOS_PER_SECOND,
            volatility: 3e-5,
            quotes_per_trade: 3.0,
            base_spread: 0.0005,
            mean_volume: 200.0,
            crossed_rate: 0.0,
            one_sided_rate: 0.0,
            open: hms(4, 0, 0),
            close: hms(20, 0, 0),
            max_attempts: 8,
        }
    }
}

impl BaselineParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidBaseline(m.to_string()));
        if self.initial_price <= 0.0 || !self.initial_price.is_finite() {
            return bad("initial price must be positive");
        }
        if !self.tick.is_positive() {
            return bad("tick must be positive");
        }
        if self.mean_interarrival <= 0 || self.quotes_per_trade.is_nan() || self.quotes_per_trade <= 0.0 {
            return bad("trade and quote rates must be positive");
        }
        if self.volatility < 0.0 || !self.volatility.is_finite() {
            return bad("volatility must be finite and non-negative");
        }
        if !(self.base_spread > 0.0 && self.base_spread < 1.0) {
            return bad("base spread must lie in (0, 1)");
        }
        if self.mean_volume.is_nan() || self.mean_volume < 1.0 {
            return bad("mean volume must be at least one share");
        }
        if !(0.0..=1.0).contains(&(self.crossed_rate + self.one_sided_rate)) || self.crossed_rate < 0.0 || self.one_sided_rate < 0.0 {
            return bad("injection rates must be probabilities");
        }
        if self.open >= self.close {
            return bad("open must precede close");
        }
        if self.max_attempts == 0 {
            return bad("at least one attempt is required");
        }
        Ok(())
    }
}

/// One generated symbol-day and the time ranges already taken by plants.
#[derive(Debug, Clone)]
pub struct SynthDay {
    pub trades: TradeDay,
    pub quotes: QuoteDay,
    pub params: BaselineParams,
    occupied: Vec<(Nanos, Nanos)>,
}

impl SynthDay {
    pub fn symbol(&self) -> &str {
        &self.trades.symbol
    }

    pub fn date(&self) -> NaiveDate {
        self.trades.date
    }

    pub fn occupied(&self) -> &[(Nanos, Nanos)] {
        &self.occupied
    }
}

/// Deterministic per-stream generator keyed by seed, symbol, date, attempt and purpose.
pub(crate) fn stream_rng(seed: u64, symbol: &str, date: NaiveDate, attempt: u32, purpose: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(symbol.as_bytes());
    h.update([0]);
    h.update(date.to_string().as_bytes());
    h.update(attempt.to_le_bytes());
    h.update(purpose.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn floor_tick(x: f64, tick: i64) -> Price {
    Price::from_units((x / tick as f64).floor() as i64 * tick)
}

fn ceil_tick(x: f64, tick: i64) -> Price {
    Price::from_units((x / tick as f64).ceil() as i64 * tick)
}

fn round_tick(x: f64, tick: i64) -> Price {
    Price::from_units((x / tick as f64).round() as i64 * tick)
}

/// Bid and ask around `price` with relative width about `spread`.
fn straddle(price: Price, spread: f64, tick: i64) -> (Price, Price) {
    let p = price.units() as f64;
    let bid = floor_tick(p * (1.0 - spread / 2.0), tick).max(Price::from_units(tick));
    let mut ask = ceil_tick(p * (1.0 + spread / 2.0), tick);
    if ask <= bid {
        ask = Price::from_units(bid.units() + tick);
    }
    (bid, ask)
}

fn renumber(day: &mut SynthDay) {
    for (i, t) in day.trades.records.iter_mut().enumerate() {
        t.sequence = i as u64;
    }
    for (i, q) in day.quotes.records.iter_mut().enumerate() {
        q.sequence = i as u64;
    }
}

/// Random-walk trades and straddling quotes for one symbol-day.
///
/// The day is regenerated with a fresh stream until the reference enumerator
/// finds no interval meeting the relaxed (2.0 s) criteria, which also rules
/// out the default criteria. After `max_attempts` failures the parameters are
/// reported as unable to avoid accidental events.
pub fn generate_baseline(seed: u64, symbol: &str, date: NaiveDate, params: &BaselineParams) -> Result<SynthDay> {
    params.validate()?;
    let relaxed = DetectionCriteria::default().with_max_duration(2 * NANOS_PER_SECOND);
    for attempt in 0..params.max_attempts {
        let mut rng = stream_rng(seed, symbol, date, attempt, "baseline");
        let day = baseline_once(&mut rng, symbol, date, params);
        if reference::enumerate_events(&day.trades.records, &relaxed).is_empty() {
            return Ok(day);
        }
    }
    Err(Error::Generation {
        attempts: params.max_attempts,
        reason: format!("baseline for {symbol} {date} keeps producing events; lower the volatility"),
    })
}

fn baseline_once(rng: &mut ChaCha8Rng, symbol: &str, date: NaiveDate, params: &BaselineParams) -> SynthDay {
    let tick = params.tick.units();
    let gaps = Exp::new(1.0 / params.mean_interarrival as f64).expect("positive rate");
    let shocks = Normal::new(0.0, params.volatility).expect("finite volatility");
    let sizes = LogNormal::new(params.mean_volume.ln() - 0.5, 1.0).expect("valid volume law");

    let mut trades = Vec::new();
    let mut price = round_tick(params.initial_price * crate::price::PRICE_SCALE as f64, tick).max(params.tick);
    let mut t = params.open;
    loop {
        t += (gaps.sample(rng).round() as Nanos).max(1);
        if t >= params.close {
            break;
        }
        let next = price.units() as f64 * shocks.sample(rng).exp();
        price = round_tick(next, tick).max(params.tick);
        let volume = (sizes.sample(rng).round() as u64).max(1);
        trades.push(TradeRecord { timestamp: t, price, volume, sequence: 0 });
    }

    let quote_gaps = Exp::new(params.quotes_per_trade / params.mean_interarrival as f64).expect("positive rate");
    let initial = round_tick(params.initial_price * crate::price::PRICE_SCALE as f64, tick).max(params.tick);
    let mut quotes = Vec::new();
    let mut latest = 0usize;
    let mut t = params.open;
    loop {
        t += (quote_gaps.sample(rng).round() as Nanos).max(1);
        if t >= params.close {
            break;
        }
        while latest < trades.len() && trades[latest].timestamp <= t {
            latest += 1;
        }
        let mid = if latest == 0 { initial } else { trades[latest - 1].price };
        let spread = params.base_spread * rng.random_range(0.8..1.2);
        let (mut bid, ask) = straddle(mid, spread, tick);
        let u: f64 = rng.random();
        if u < params.crossed_rate {
            bid = Price::from_units(ask.units() + tick);
        } else if u < params.crossed_rate + params.one_sided_rate {
            bid = Price::ZERO;
        }
        let (bs, asz) = (100 * rng.random_range(1..=20u64), 100 * rng.random_range(1..=20u64));
        quotes.push(QuoteRecord::new(t, bid, bs, ask, asz, 0));
    }

    let mut day = SynthDay {
        trades: TradeDay::new(symbol, date, trades),
        quotes: QuoteDay::new(symbol, date, quotes),
        params: params.clone(),
        occupied: Vec::new(),
    };
    renumber(&mut day);
    day
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadRamp {
    pub start: f64,
    pub end: f64,
    /// Number of quote updates before the event start that are re-spread.
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub kind: PlantKind,
    pub direction: Direction,
    /// Signed net return from the first to the last planted trade.
    pub total_return: f64,
    pub trade_count: usize,
    pub duration: Nanos,
    /// Time of day of the first planted trade.
    pub start: Nanos,
    pub volumes: Vec<u64>,
    /// Relative size of the quote jump planted halfway through the event.
    pub quote_gap: f64,
    pub ramp: SpreadRamp,
    /// Target recovery ratios for the trades following the event.
    pub recovery: Vec<f64>,
    /// Index of a trade that moves against the direction, for near misses.
    pub reversal: Option<usize>,
}

impl PlantSpec {
    /// Crash or spike with flat volumes, a modest gap and ramp, and a
    /// geometric recovery towards the starting price.
    pub fn simple(direction: Direction, magnitude: f64, trade_count: usize, duration: Nanos, start: Nanos) -> Self {
        let sign = match direction {
            Direction::FlashCrash => -1.0,
            Direction::FlashSpike => 1.0,
        };
        PlantSpec {
            kind: PlantKind::Positive,
            direction,
            total_return: sign * magnitude.abs(),
            trade_count,
            duration,
            start,
            volumes: vec![100; trade_count],
            quote_gap: 0.006,
            ramp: SpreadRamp { start: 0.0005, end: 0.002, length: 10 },
            recovery: (1..=crate::recovery::DEFAULT_N_MAX).map(|n| 1.0 - 0.8f64.powi(n as i32)).collect(),
            reversal: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPlant(m));
        let n = self.trade_count;
        if n < 3 {
            return bad(format!("{n} trades; at least 3 are needed"));
        }
        if self.volumes.len() != n || self.volumes.contains(&0) {
            return bad("one positive volume per planted trade is required".into());
        }
        if self.duration < 2 * (n as Nanos - 1) {
            return bad("duration too short for the trade count".into());
        }
        let sign_ok = match self.direction {
            Direction::FlashCrash => self.total_return < 0.0,
            Direction::FlashSpike => self.total_return > 0.0,
        };
        if !sign_ok || self.total_return <= -1.0 || !self.total_return.is_finite() {
            return bad(format!("return {} does not fit a {}", self.total_return, self.direction));
        }
        if !(self.quote_gap > 0.0 && self.quote_gap < 1.0) {
            return bad("quote gap must lie in (0, 1)".into());
        }
        let r = &self.ramp;
        if !(r.start > 0.0 && r.start < 1.0 && r.end > 0.0 && r.end < 1.0) {
            return bad("ramp spreads must lie in (0, 1)".into());
        }
        if self.recovery.is_empty() || self.recovery[0] <= 0.0 || self.recovery.iter().any(|e| !e.is_finite()) {
            return bad("recovery path must start with a positive ratio".into());
        }
        if let Some(k) = self.reversal {
            // Both sides of the reversal keep at least two trades so the
            // pieces stay inside the planted path.
            if k < 2 || k + 2 > n {
                return bad(format!("reversal at trade {k} of {n}"));
            }
        }
        Ok(())
    }
}

/// Inserts a planted event into `day` and returns its ground-truth entry.
///
/// Baseline trades and quotes between the event start and the end of the
/// recovery path are replaced; later baseline prices are shifted so the walk
/// continues from the last recovery trade. Plants must be added in time order
/// and may not overlap. The spread window of the entry is filled in by
/// [`GroundTruth::finalize`] once the day is complete.
pub fn plant_uee(day: &mut SynthDay, spec: &PlantSpec) -> Result<PlantedEvent> {
    spec.validate()?;
    let tick = day.params.tick.units();
    let n = spec.trade_count;
    let t0 = spec.start;
    let t_end = t0 + spec.duration;
    let t_rec_end = t_end + RECOVERY_SPACING * spec.recovery.len() as Nanos;
    if t0 <= day.params.open || t_rec_end >= day.params.close {
        return Err(Error::InvalidPlant("plant does not fit inside the day".into()));
    }

    let trades = &day.trades.records;
    let quotes = &day.quotes.records;
    let before = trades.partition_point(|t| t.timestamp < t0);
    if before == 0 {
        return Err(Error::InvalidPlant("no baseline trade precedes the plant".into()));
    }
    let prev = trades[before - 1];
    let quotes_before = quotes.partition_point(|q| q.timestamp < t0);
    if quotes_before < spec.ramp.length {
        return Err(Error::InvalidPlant("not enough quotes before the plant for the ramp".into()));
    }
    let ramp_first = quotes_before - spec.ramp.length;
    let occupied_from = match spec.ramp.length {
        0 => prev.timestamp,
        _ => prev.timestamp.min(quotes[ramp_first].timestamp),
    };
    for &(a, b) in &day.occupied {
        if occupied_from <= b && a <= t_rec_end {
            return Err(Error::PlantOverlap);
        }
        if a > t_rec_end {
            return Err(Error::InvalidPlant("plants must be added in time order".into()));
        }
    }

    // Planted trade path. The first price sits one tick beyond the previous
    // trade so the planted run cannot extend backwards.
    let (sign, crash) = match spec.direction {
        Direction::FlashCrash => (-1i64, true),
        Direction::FlashSpike => (1i64, false),
    };
    let s_start = Price::from_units(prev.price.units() - sign * tick);
    let s_end = round_tick(s_start.units() as f64 * (1.0 + spec.total_return), tick);
    let delta = (s_end.units() - s_start.units()) / tick;
    let mut path: Vec<i64> = (0..n)
        .map(|j| s_start.units() + (delta as f64 * j as f64 / (n - 1) as f64).round() as i64 * tick)
        .collect();
    if let Some(k) = spec.reversal {
        let step = (delta.abs() + n as i64 - 2) / (n as i64 - 1);
        let bump = (2 * step + 2) * tick;
        for p in &mut path[k..n - 1] {
            *p -= sign * bump;
        }
    }
    let pieces = truth::monotone_pieces(&path, spec.direction);
    if path.iter().any(|&p| p <= 0) || pieces.is_none() {
        return Err(Error::InvalidPlant("planted path is not strictly monotone between reversals".into()));
    }
    let times: Vec<Nanos> = (0..n)
        .map(|k| t0 + (spec.duration as i128 * k as i128 / (n - 1) as i128) as Nanos)
        .collect();

    // Recovery path from the target ratios, realized on the grid.
    let recovery: Vec<i64> = spec
        .recovery
        .iter()
        .map(|&eta| s_end.units() - (eta * delta as f64).round() as i64 * tick)
        .collect();
    if recovery.iter().any(|&p| p <= 0) {
        return Err(Error::InvalidPlant("recovery path leaves positive prices".into()));
    }
    if (recovery[0] - s_end.units()) * sign >= 0 {
        return Err(Error::InvalidPlant("first recovery trade does not reverse the move".into()));
    }
    let rec_times: Vec<Nanos> = (1..=recovery.len() as Nanos).map(|k| t_end + k * RECOVERY_SPACING).collect();

    // Quote path: anchor at the start, one quote per later trade, plus the gap.
    let spread = spec.ramp.end;
    let m = (n - 1) / 2;
    let t_gap = times[m] + (times[m + 1] - times[m]) / 2;
    let mut event_quotes: Vec<QuoteRecord> = Vec::with_capacity(n + 1);
    let mut gap_level: Option<Price> = None;
    for k in 0..n {
        let (mut bid, mut ask) = straddle(Price::from_units(path[k]), spread, tick);
        if let Some(g) = gap_level {
            if crash {
                bid = bid.min(g);
            } else {
                ask = ask.max(g);
            }
        }
        event_quotes.push(QuoteRecord::new(times[k], bid, 100, ask, 100, 0));
        if k == m {
            let (gb, ga) = if crash {
                let gb = floor_tick(bid.units() as f64 * (1.0 - spec.quote_gap), tick);
                (gb, ceil_tick(gb.units() as f64 / (1.0 - spread), tick))
            } else {
                let ga = ceil_tick(ask.units() as f64 * (1.0 + spec.quote_gap), tick);
                (floor_tick(ga.units() as f64 * (1.0 - spread), tick), ga)
            };
            if !gb.is_positive() || ga <= gb {
                return Err(Error::InvalidPlant("quote gap leaves no valid quote".into()));
            }
            gap_level = Some(if crash { gb } else { ga });
            event_quotes.push(QuoteRecord::new(t_gap, gb, 100, ga, 100, 0));
        }
    }
    let largest = truth::largest_move(&event_quotes, spec.direction);
    if !matches!(largest, Some((_, from, to)) if from == times[m] && to == t_gap) {
        return Err(Error::InvalidPlant("quote gap does not dominate the path steps".into()));
    }

    // Ramp: re-spread the last `length` quotes before the start.
    let l = spec.ramp.length;
    let mut new_quotes: Vec<QuoteRecord> = quotes[..ramp_first].to_vec();
    for (i, q) in quotes[ramp_first..quotes_before].iter().enumerate() {
        let s = spec.ramp.start + (spec.ramp.end - spec.ramp.start) * i as f64 / l as f64;
        let latest = trades[..before].partition_point(|t| t.timestamp <= q.timestamp);
        let mid = if latest == 0 { prev.price } else { trades[latest - 1].price };
        let (bid, ask) = straddle(mid, s, tick);
        new_quotes.push(QuoteRecord::new(q.timestamp, bid, q.bid_size, ask, q.ask_size, 0));
    }
    new_quotes.extend(event_quotes.iter().copied());
    for (&t, &p) in rec_times.iter().zip(&recovery) {
        let (bid, ask) = straddle(Price::from_units(p), day.params.base_spread, tick);
        new_quotes.push(QuoteRecord::new(t, bid, 100, ask, 100, 0));
    }

    // Re-level the remaining baseline.
    let after = trades.partition_point(|t| t.timestamp <= t_rec_end);
    let shift = recovery[recovery.len() - 1] - trades[after - 1].price.units();
    let mut new_trades: Vec<TradeRecord> = trades[..before].to_vec();
    for k in 0..n {
        new_trades.push(TradeRecord { timestamp: times[k], price: Price::from_units(path[k]), volume: spec.volumes[k], sequence: 0 });
    }
    for (&t, &p) in rec_times.iter().zip(&recovery) {
        new_trades.push(TradeRecord { timestamp: t, price: Price::from_units(p), volume: 100, sequence: 0 });
    }
    for t in &trades[after..] {
        let price = Price::from_units(t.price.units() + shift);
        if !price.is_positive() {
            return Err(Error::InvalidPlant("re-levelled baseline turns non-positive".into()));
        }
        new_trades.push(TradeRecord { price, ..*t });
    }
    let quotes_after = quotes.partition_point(|q| q.timestamp <= t_rec_end);
    for q in &quotes[quotes_after..] {
        let move_side = |p: Price| if p.is_positive() { Price::from_units(p.units() + shift) } else { p };
        let (bid, ask) = (move_side(q.bid), move_side(q.ask));
        if (q.bid.is_positive() && !bid.is_positive()) || (q.ask.is_positive() && !ask.is_positive()) {
            return Err(Error::InvalidPlant("re-levelled quotes turn non-positive".into()));
        }
        new_quotes.push(QuoteRecord::new(q.timestamp, bid, q.bid_size, ask, q.ask_size, 0));
    }

    day.trades.records = new_trades;
    day.quotes.records = new_quotes;
    day.occupied.push((occupied_from, t_rec_end));
    renumber(day);

    let planted = truth::PlantedEvent::realize(day, spec, before, &pieces.expect("checked above"), largest.map(|l| l.0), &recovery);
    Ok(planted)
}
