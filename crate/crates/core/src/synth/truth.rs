use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{PlantSpec, SynthDay};
use crate::clock::{Nanos, NANOS_PER_SECOND};
use crate::detect::{DetectionCriteria, Direction, UeeEvent};
use crate::error::{Error, Result};
use crate::ingest::QuoteRecord;
use crate::price::Price;

pub const TRUTH_SCHEMA: &str = "ueescan.truth.v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    Positive,
    /// Ten trades only.
    FewTrades,
    /// Net move of 0.79%.
    SubThreshold,
    /// Lasts 1.6 s.
    SlowRun,
    /// One trade against the direction.
    Reversal,
}

impl PlantKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlantKind::Positive => "positive",
            PlantKind::FewTrades => "few_trades",
            PlantKind::SubThreshold => "sub_threshold",
            PlantKind::SlowRun => "slow_run",
            PlantKind::Reversal => "reversal",
        }
    }
}

/// The default criteria and the relaxed 2.0 s variant.
pub fn standard_criteria() -> [DetectionCriteria; 2] {
    let default = DetectionCriteria::default();
    [default, default.with_max_duration(2 * NANOS_PER_SECOND)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedOutcome {
    pub max_duration: Nanos,
    pub events: Vec<UeeEvent>,
}

/// A maximal strictly monotone stretch of the planted path, local indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Piece {
    pub first: usize,
    pub last: usize,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEvent {
    pub symbol: String,
    pub date: NaiveDate,
    pub kind: PlantKind,
    pub direction: Direction,
    /// Index of the first planted trade within its symbol-day.
    pub start_index: usize,
    pub times: Vec<Nanos>,
    pub prices: Vec<Price>,
    pub volumes: Vec<u64>,
    pub pieces: Vec<Piece>,
    /// Expected detections under each standard criterion.
    pub expected: Vec<ExpectedOutcome>,
    /// Signed largest consecutive move of the event's quote side.
    pub largest_quote_return: Option<f64>,
    /// Volume through the qualifying trade, under the default criteria.
    pub accumulated_volume: Option<u64>,
    pub eta: Vec<f64>,
    /// Relative spreads at offsets `-W..=W` around the anchor quote, when the
    /// day holds a complete window.
    pub spread_window: Option<Vec<f64>>,
}

/// Splits a planted path into strictly monotone pieces. `None` when a step
/// is flat or the path does not open in `direction`.
pub(crate) fn monotone_pieces(path: &[i64], direction: Direction) -> Option<Vec<Piece>> {
    let step_dir = |k: usize| match path[k + 1].cmp(&path[k]) {
        std::cmp::Ordering::Less => Some(Direction::FlashCrash),
        std::cmp::Ordering::Greater => Some(Direction::FlashSpike),
        std::cmp::Ordering::Equal => None,
    };
    let mut pieces: Vec<Piece> = Vec::new();
    for k in 0..path.len() - 1 {
        let d = step_dir(k)?;
        match pieces.last_mut() {
            Some(p) if p.direction == d => p.last = k + 1,
            _ => pieces.push(Piece { first: k, last: k + 1, direction: d }),
        }
    }
    (pieces.first()?.direction == direction && pieces.last()?.direction == direction).then_some(pieces)
}

/// Largest-magnitude consecutive return of the event's quote side, the
/// earliest one on ties, with the times of the two quotes.
pub(crate) fn largest_move(quotes: &[QuoteRecord], direction: Direction) -> Option<(f64, Nanos, Nanos)> {
    let side = |q: &QuoteRecord| match direction {
        Direction::FlashCrash => q.bid,
        Direction::FlashSpike => q.ask,
    };
    let usable: Vec<&QuoteRecord> = quotes.iter().filter(|q| side(q).is_positive()).collect();
    let mut best: Option<(f64, Nanos, Nanos)> = None;
    for w in usable.windows(2) {
        let (a, b) = (side(w[0]).units(), side(w[1]).units());
        let r = (b - a) as f64 / a as f64;
        if best.is_none_or(|(v, _, _)| r.abs() > v.abs()) {
            best = Some((r, w[0].timestamp, w[1].timestamp));
        }
    }
    best
}

impl PlantedEvent {
    pub(crate) fn realize(
        day: &SynthDay,
        spec: &PlantSpec,
        start_index: usize,
        pieces: &[Piece],
        largest_quote_return: Option<f64>,
        recovery: &[i64],
    ) -> Self {
        let n = spec.trade_count;
        let planted = &day.trades.records[start_index..start_index + n];
        let prices: Vec<Price> = planted.iter().map(|t| t.price).collect();
        let (s_start, s_end) = (prices[0].units(), prices[n - 1].units());
        let eta = recovery.iter().map(|&s| (s_end - s) as f64 / (s_end - s_start) as f64).collect();
        let mut event = PlantedEvent {
            symbol: day.symbol().to_string(),
            date: day.date(),
            kind: spec.kind,
            direction: spec.direction,
            start_index,
            times: planted.iter().map(|t| t.timestamp).collect(),
            prices,
            volumes: planted.iter().map(|t| t.volume).collect(),
            pieces: pieces.to_vec(),
            expected: Vec::new(),
            largest_quote_return,
            accumulated_volume: None,
            eta,
            spread_window: None,
        };
        event.expected = standard_criteria()
            .iter()
            .map(|c| ExpectedOutcome { max_duration: c.max_duration, events: event.expected_events(c) })
            .collect();
        event.accumulated_volume = event.expected_event(&DetectionCriteria::default()).map(|e| {
            let first = e.start_index - start_index;
            event.volumes[first..=e.change_index - start_index].iter().sum()
        });
        event
    }

    pub fn s_start(&self) -> Price {
        self.prices[0]
    }

    pub fn s_end(&self) -> Price {
        self.prices[self.prices.len() - 1]
    }

    pub fn end_index(&self) -> usize {
        self.start_index + self.prices.len() - 1
    }

    /// Events the definition yields on the planted pieces. The pieces are
    /// maximal runs of the whole day by construction: the trade before the
    /// plant and the first recovery trade both move against the adjacent piece.
    pub fn expected_events(&self, criteria: &DetectionCriteria) -> Vec<UeeEvent> {
        let mut out = Vec::new();
        for p in &self.pieces {
            let (t_a, t_b) = (self.times[p.first], self.times[p.last]);
            if t_b - t_a >= criteria.max_duration {
                continue;
            }
            let base = self.prices[p.first].units();
            let change = (p.first..=p.last).find(|&k| {
                let moved = (self.prices[k].units() - base).abs() as f64 / base as f64;
                k + 1 - p.first >= criteria.min_trades && moved > criteria.threshold
            });
            let Some(c) = change else { continue };
            let (s_start, s_end) = (self.prices[p.first], self.prices[p.last]);
            out.push(UeeEvent {
                symbol: self.symbol.clone(),
                date: self.date,
                direction: p.direction,
                start_index: self.start_index + p.first,
                change_index: self.start_index + c,
                end_index: self.start_index + p.last,
                t_start: t_a,
                t_change: self.times[c],
                t_end: t_b,
                s_start,
                s_change: self.prices[c],
                s_end,
                trade_count: c + 1 - p.first,
                trade_count_end: p.last + 1 - p.first,
                duration: t_b - t_a,
                r_uee: (s_end.units() - s_start.units()) as f64 / s_start.units() as f64,
            });
        }
        out
    }

    pub fn expected_event(&self, criteria: &DetectionCriteria) -> Option<UeeEvent> {
        self.expected_events(criteria).into_iter().next()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub schema: String,
    pub seed: u64,
    pub half_width: usize,
    pub events: Vec<PlantedEvent>,
    /// SHA-256 of each generated data file, by file name.
    pub data_sha256: BTreeMap<String, String>,
    /// SHA-256 over the document with this field empty.
    pub checksum: String,
}

impl GroundTruth {
    /// Collects planted events, fills their spread windows from the finished
    /// days and seals the document.
    pub fn finalize(seed: u64, mut events: Vec<PlantedEvent>, days: &[SynthDay], half_width: usize) -> Self {
        events.sort_by(|a, b| (&a.date, &a.symbol, a.start_index).cmp(&(&b.date, &b.symbol, b.start_index)));
        let mut by_day: BTreeMap<(NaiveDate, &str), Vec<(Nanos, f64)>> = BTreeMap::new();
        for day in days {
            let eligible = day
                .quotes
                .records
                .iter()
                .filter(|q| !q.crossed && !q.one_sided)
                .map(|q| (q.timestamp, (q.ask.units() - q.bid.units()) as f64 / q.ask.units() as f64))
                .collect();
            by_day.insert((day.date(), day.symbol()), eligible);
        }
        for e in &mut events {
            let Some(spreads) = by_day.get(&(e.date, e.symbol.as_str())) else { continue };
            // Last eligible quote at or before the first planted trade.
            let Some(anchor) = spreads.iter().rposition(|&(t, _)| t <= e.times[0]) else { continue };
            let w = half_width;
            e.spread_window = (anchor >= w && anchor + w < spreads.len())
                .then(|| spreads[anchor - w..=anchor + w].iter().map(|s| s.1).collect());
        }
        let mut truth = GroundTruth {
            schema: TRUTH_SCHEMA.to_string(),
            seed,
            half_width,
            events,
            data_sha256: BTreeMap::new(),
            checksum: String::new(),
        };
        truth.seal();
        truth
    }

    pub fn compute_checksum(&self) -> String {
        let unsealed = GroundTruth { checksum: String::new(), ..self.clone() };
        let body = serde_json::to_vec(&unsealed).expect("ground truth serializes");
        hex::encode(Sha256::digest(&body))
    }

    pub fn seal(&mut self) {
        self.checksum = self.compute_checksum();
    }

    pub fn verify(&self) -> Result<()> {
        if self.schema != TRUTH_SCHEMA {
            return Err(Error::Format(format!("unknown ground-truth schema {:?}", self.schema)));
        }
        if self.checksum != self.compute_checksum() {
            return Err(Error::Format("ground-truth checksum mismatch".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("ground truth serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let truth: GroundTruth = serde_json::from_str(text)?;
        truth.verify()?;
        Ok(truth)
    }

    /// All events the planted data should produce under `criteria`, sorted by
    /// identity.
    pub fn expected_events(&self, criteria: &DetectionCriteria) -> Vec<UeeEvent> {
        let mut out: Vec<UeeEvent> = self.events.iter().flat_map(|e| e.expected_events(criteria)).collect();
        out.sort_by_key(|e| e.key());
        out
    }

    pub fn count(&self, kind: PlantKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }
}
