//! Post-event recovery ratios.
//!
//! For the n-th trade after an event ends, the recovery ratio is
//! `(S_end - S_n) / (S_end - S_start)`: 0 when the price still sits at the
//! event extremum, 1 when it is back at the starting price, negative when the
//! move continued (aftershock), above 1 on overshoot. Values are never clipped.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::detect::{Direction, UeeEvent};
use crate::error::{Error, Result};
use crate::ingest::TradeRecord;
use crate::price::Price;

pub const DEFAULT_N_MAX: usize = 100;
pub const DEFAULT_HIGH: f64 = 0.8;
pub const DEFAULT_LOW: f64 = 0.2;

/// Recovery ratio from exact price differences.
pub fn recovery_ratio(s_start: Price, s_end: Price, s_n: Price) -> f64 {
    (s_end.units() - s_n.units()) as f64 / (s_end.units() - s_start.units()) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverySeries {
    pub event_id: String,
    pub direction: Direction,
    pub n_max: usize,
    /// `eta[n - 1]` is the ratio at the n-th trade after the event; its length
    /// is the number of trades available that day, capped at `n_max`.
    pub eta: Vec<f64>,
}

impl RecoverySeries {
    pub fn available_n(&self) -> usize {
        self.eta.len()
    }

    pub fn eta(&self, n: usize) -> Option<f64> {
        n.checked_sub(1).and_then(|i| self.eta.get(i)).copied()
    }
}

/// Ratios for the first `n_max` trades after `end_index` in the same symbol-day.
/// Trades with equal timestamps count in tape order.
pub fn recovery_series(event: &UeeEvent, trades: &[TradeRecord], n_max: usize) -> RecoverySeries {
    let after = trades.get(event.end_index + 1..).unwrap_or(&[]);
    let eta = after
        .iter()
        .take(n_max)
        .map(|t| recovery_ratio(event.s_start, event.s_end, t.price))
        .collect();
    RecoverySeries { event_id: event.id(), direction: event.direction, n_max, eta }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub samples: u64,
    /// `eta >= high`
    pub high: u64,
    /// `eta <= low`
    pub low: u64,
}

impl CurvePoint {
    fn frac(&self, count: u64) -> Option<f64> {
        (self.samples > 0).then(|| count as f64 / self.samples as f64)
    }

    pub fn p_high(&self) -> Option<f64> {
        self.frac(self.high)
    }

    pub fn p_low(&self) -> Option<f64> {
        self.frac(self.low)
    }

    pub fn p_mid(&self) -> Option<f64> {
        self.frac(self.samples - self.high - self.low)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryCurves {
    pub high: f64,
    pub low: f64,
    pub n_max: usize,
    pub crash: Vec<CurvePoint>,
    pub spike: Vec<CurvePoint>,
}

impl RecoveryCurves {
    pub fn empty(n_max: usize, high: f64, low: f64) -> Self {
        let points = (1..=n_max).map(|n| CurvePoint { n, ..Default::default() }).collect::<Vec<_>>();
        RecoveryCurves { high, low, n_max, crash: points.clone(), spike: points }
    }

    pub fn for_direction(&self, direction: Direction) -> &[CurvePoint] {
        match direction {
            Direction::FlashCrash => &self.crash,
            Direction::FlashSpike => &self.spike,
        }
    }

    /// Tallies one series; it counts at `n` only while `n <= available_n`.
    pub fn add(&mut self, series: &RecoverySeries) {
        let (high, low) = (self.high, self.low);
        let points = match series.direction {
            Direction::FlashCrash => &mut self.crash,
            Direction::FlashSpike => &mut self.spike,
        };
        for (point, &eta) in points.iter_mut().zip(&series.eta) {
            point.samples += 1;
            point.high += (eta >= high) as u64;
            point.low += (eta <= low) as u64;
        }
    }

    pub fn merge(&mut self, other: &RecoveryCurves) {
        debug_assert_eq!((self.n_max, self.high, self.low), (other.n_max, other.high, other.low));
        for (a, b) in self.crash.iter_mut().zip(&other.crash).chain(self.spike.iter_mut().zip(&other.spike)) {
            a.samples += b.samples;
            a.high += b.high;
            a.low += b.low;
        }
    }

    /// `direction,n,p_high,p_low,samples`; undefined probabilities are left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("direction,n,p_high,p_low,samples\n");
        for (direction, points) in [(Direction::FlashCrash, &self.crash), (Direction::FlashSpike, &self.spike)] {
            for p in points {
                let fmt = |v: Option<f64>| v.map(|x| format!("{x:.9}")).unwrap_or_default();
                let _ = writeln!(out, "{direction},{},{},{},{}", p.n, fmt(p.p_high()), fmt(p.p_low()), p.samples);
            }
        }
        out
    }
}

/// Relative frequencies of near-full (`eta >= high`) and near-zero
/// (`eta <= low`) recovery at each `n`, crashes and spikes separately.
pub fn recovery_curves(series: &[RecoverySeries], n_max: usize, high: f64, low: f64) -> Result<RecoveryCurves> {
    if series.is_empty() {
        return Err(Error::Format("no recovery series to aggregate".into()));
    }
    if low.is_nan() || high.is_nan() || low >= high {
        return Err(Error::Format(format!("low cutoff {low} must lie below high cutoff {high}")));
    }
    let mut curves = RecoveryCurves::empty(n_max, high, low);
    for s in series {
        curves.add(s);
    }
    Ok(curves)
}

/// `event_id,n,eta` triples.
pub fn series_to_csv(series: &[RecoverySeries]) -> String {
    let mut out = String::from("event_id,n,eta\n");
    for s in series {
        for (i, eta) in s.eta.iter().enumerate() {
            let _ = writeln!(out, "{},{},{eta:.9}", s.event_id, i + 1);
        }
    }
    out
}
