//! Quote-side analytics around detected events: the largest consecutive
//! quote return inside the event, accumulated volume up to the qualifying
//! trade, and relative-spread windows indexed by quote update.

use serde::{Deserialize, Serialize};

use crate::clock::{session_of, Nanos};
use crate::detect::{Direction, UeeEvent};
use crate::error::{Error, Result};
use crate::ingest::{QuoteRecord, TradeRecord};
use crate::price::Price;

pub const DEFAULT_HALF_WIDTH: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuoteSide {
    Bid,
    Ask,
}

impl QuoteSide {
    /// Bid for crashes, ask for spikes.
    pub fn for_direction(direction: Direction) -> Self {
        match direction {
            Direction::FlashCrash => QuoteSide::Bid,
            Direction::FlashSpike => QuoteSide::Ask,
        }
    }

    pub fn price(self, q: &QuoteRecord) -> Price {
        match self {
            QuoteSide::Bid => q.bid,
            QuoteSide::Ask => q.ask,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QuoteSide::Bid => "bid",
            QuoteSide::Ask => "ask",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeSpread {
    pub value: f64,
    /// One-sided book (non-positive bid).
    pub degenerate: bool,
}

/// `(ask - bid) / ask`.
pub fn relative_spread(q: &QuoteRecord) -> Result<RelativeSpread> {
    if !q.ask.is_positive() {
        return Err(Error::UndefinedSpread(q.ask.to_string()));
    }
    if q.bid > q.ask {
        return Err(Error::CrossedQuote { bid: q.bid.to_string(), ask: q.ask.to_string() });
    }
    let value = (q.ask.units() - q.bid.units()) as f64 / q.ask.units() as f64;
    Ok(RelativeSpread { value, degenerate: !q.bid.is_positive() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargestQuoteMove {
    pub side: QuoteSide,
    /// Signed return of the largest-magnitude consecutive move.
    pub value: f64,
    pub from_time: Nanos,
    pub to_time: Nanos,
}

/// Largest-magnitude return between consecutive updates of the event's quote
/// side with `t_start <= t <= t_end`. Zero-priced quotes are skipped. `None`
/// when fewer than two usable updates fall inside the event.
pub fn largest_quote_return(event: &UeeEvent, quotes: &[QuoteRecord]) -> Option<LargestQuoteMove> {
    let side = QuoteSide::for_direction(event.direction);
    let lo = quotes.partition_point(|q| q.timestamp < event.t_start);
    let hi = quotes.partition_point(|q| q.timestamp <= event.t_end);
    let mut prev: Option<&QuoteRecord> = None;
    let mut best: Option<LargestQuoteMove> = None;
    for q in quotes[lo..hi].iter().filter(|q| side.price(q).is_positive()) {
        if let Some(p) = prev {
            let value = side.price(q).return_from(side.price(p));
            if best.as_ref().is_none_or(|b| value.abs() > b.value.abs()) {
                best = Some(LargestQuoteMove { side, value, from_time: p.timestamp, to_time: q.timestamp });
            }
        }
        prev = Some(q);
    }
    best
}

/// Total traded volume from the event's first trade through its qualifying trade.
pub fn accumulated_volume(event: &UeeEvent, trades: &[TradeRecord]) -> u64 {
    trades[event.start_index..=event.change_index].iter().map(|t| t.volume).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpreadConfig {
    pub half_width: usize,
    /// Count only updates that change the relative spread as spread events.
    pub changes_only: bool,
    /// Treat quotes outside the session containing the anchor as absent.
    pub session_bounded: bool,
}

impl Default for SpreadConfig {
    fn default() -> Self {
        SpreadConfig { half_width: DEFAULT_HALF_WIDTH, changes_only: false, session_bounded: false }
    }
}

/// Relative spreads of the spread-eligible quotes of one symbol-day, in tape order.
#[derive(Debug, Clone, Default)]
pub struct SpreadSeries {
    pub times: Vec<Nanos>,
    pub values: Vec<f64>,
}

impl SpreadSeries {
    pub fn new(quotes: &[QuoteRecord], changes_only: bool) -> Self {
        let mut series = SpreadSeries::default();
        for q in quotes.iter().filter(|q| q.spread_eligible()) {
            let Ok(s) = relative_spread(q) else { continue };
            if changes_only && series.values.last() == Some(&s.value) {
                continue;
            }
            series.times.push(q.timestamp);
            series.values.push(s.value);
        }
        series
    }

    /// Window of `2 * half_width + 1` spread events around the last update
    /// at or before `t_start`.
    pub fn window(&self, t_start: Nanos, config: &SpreadConfig) -> Result<SpreadWindow> {
        let after = self.times.partition_point(|&t| t <= t_start);
        if after == 0 {
            return Err(Error::AnchorMissing);
        }
        let anchor = after - 1;
        let bounds = if config.session_bounded {
            session_of(self.times[anchor]).ok().map(|s| s.bounds())
        } else {
            None
        };
        let w = config.half_width as isize;
        let values: Vec<Option<f64>> = (-w..=w)
            .map(|offset| {
                let i = anchor as isize + offset;
                if i < 0 || i as usize >= self.values.len() {
                    return None;
                }
                let i = i as usize;
                match bounds {
                    Some((lo, hi)) if !(lo..hi).contains(&self.times[i]) => None,
                    _ => Some(self.values[i]),
                }
            })
            .collect();
        let complete = values.iter().all(Option::is_some);
        Ok(SpreadWindow { half_width: config.half_width, anchor_time: self.times[anchor], values, complete })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadWindow {
    pub half_width: usize,
    pub anchor_time: Nanos,
    /// Index `k` holds offset `k - half_width`.
    pub values: Vec<Option<f64>>,
    pub complete: bool,
}

impl SpreadWindow {
    pub fn at(&self, offset: isize) -> Option<f64> {
        let i = offset + self.half_width as isize;
        if i < 0 {
            return None;
        }
        self.values.get(i as usize).copied().flatten()
    }

    pub fn offsets(&self) -> impl Iterator<Item = isize> {
        let w = self.half_width as isize;
        -w..=w
    }
}

/// Spread window for one event straight from its quote stream.
pub fn spread_window(event: &UeeEvent, quotes: &[QuoteRecord], config: &SpreadConfig) -> Result<SpreadWindow> {
    SpreadSeries::new(quotes, config.changes_only).window(event.t_start, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadProfile {
    pub half_width: usize,
    /// Per-offset mean, index `k` holds offset `k - half_width`.
    pub mean: Vec<f64>,
    /// Number of complete windows averaged.
    pub windows: usize,
}

impl SpreadProfile {
    pub fn at(&self, offset: isize) -> f64 {
        self.mean[(offset + self.half_width as isize) as usize]
    }
}

/// Per-offset arithmetic mean over the complete windows.
pub fn average_spread_profile<'a, I>(windows: I) -> Result<SpreadProfile>
where
    I: IntoIterator<Item = &'a SpreadWindow>,
{
    let mut sums: Vec<f64> = Vec::new();
    let mut half_width = None;
    let mut count = 0usize;
    for w in windows {
        match half_width {
            None => {
                half_width = Some(w.half_width);
                sums = vec![0.0; 2 * w.half_width + 1];
            }
            Some(hw) if hw != w.half_width => {
                return Err(Error::Format(format!("spread windows of half-width {hw} and {}", w.half_width)));
            }
            _ => {}
        }
        if !w.complete {
            continue;
        }
        for (s, v) in sums.iter_mut().zip(&w.values) {
            *s += v.expect("complete window");
        }
        count += 1;
    }
    let half_width = half_width.ok_or(Error::EmptyProfile)?;
    if count == 0 {
        return Err(Error::EmptyProfile);
    }
    let mean = sums.into_iter().map(|s| s / count as f64).collect();
    Ok(SpreadProfile { half_width, mean, windows: count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::MAIN_OPEN;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn quote(t: Nanos, bid: f64, ask: f64) -> QuoteRecord {
        QuoteRecord::new(t, Price::from_f64(bid), 100, Price::from_f64(ask), 100, t as u64)
    }

    fn event(direction: Direction, t_start: Nanos, t_end: Nanos) -> UeeEvent {
        UeeEvent {
            symbol: "T".into(),
            date: NaiveDate::from_ymd_opt(2014, 1, 7).unwrap(),
            direction,
            start_index: 0,
            change_index: 1,
            end_index: 1,
            t_start,
            t_change: t_end,
            t_end,
            s_start: Price::from_f64(100.0),
            s_change: Price::from_f64(99.0),
            s_end: Price::from_f64(99.0),
            trade_count: 2,
            trade_count_end: 2,
            duration: t_end - t_start,
            r_uee: -0.01,
        }
    }

    #[test]
    fn relative_spread_cases() {
        let s = relative_spread(&quote(0, 99.9, 100.0)).unwrap();
        assert!((s.value - 0.001).abs() < 1e-15 && !s.degenerate);
        assert_eq!(relative_spread(&quote(0, 100.0, 100.0)).unwrap().value, 0.0);
        let one_sided = relative_spread(&quote(0, 0.0, 100.0)).unwrap();
        assert_eq!(one_sided.value, 1.0);
        assert!(one_sided.degenerate);
        assert!(matches!(relative_spread(&quote(0, 1.0, 0.0)), Err(Error::UndefinedSpread(_))));
        assert!(matches!(relative_spread(&quote(0, 100.1, 100.0)), Err(Error::CrossedQuote { .. })));
    }

    #[test]
    fn largest_bid_move_in_crash() {
        let quotes = [quote(10, 100.0, 100.1), quote(20, 100.0, 100.1), quote(30, 99.1, 99.2)];
        let m = largest_quote_return(&event(Direction::FlashCrash, 10, 30), &quotes).unwrap();
        assert_eq!(m.side, QuoteSide::Bid);
        assert!((m.value + 0.009).abs() < 1e-15);
        assert_eq!((m.from_time, m.to_time), (20, 30));
    }

    #[test]
    fn largest_ask_move_in_spike() {
        // 0.1/50.0 = 0.002 beats 0.1/50.1.
        let quotes = [quote(10, 49.9, 50.0), quote(20, 50.0, 50.1), quote(30, 50.1, 50.2)];
        let m = largest_quote_return(&event(Direction::FlashSpike, 10, 30), &quotes).unwrap();
        assert_eq!(m.side, QuoteSide::Ask);
        let oracle = [0.1f64 / 50.0, 0.1 / 50.1].into_iter().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        assert!((m.value - oracle).abs() < 1e-12);
        assert!((m.value - 0.002).abs() < 1e-12);
    }

    #[test]
    fn quote_moves_need_two_updates_inside_the_event() {
        let quotes = [quote(5, 100.0, 100.1), quote(10, 99.0, 99.1), quote(40, 98.0, 98.1)];
        assert!(largest_quote_return(&event(Direction::FlashCrash, 10, 30), &quotes).is_none());
        assert!(largest_quote_return(&event(Direction::FlashCrash, 10, 30), &[]).is_none());
    }

    #[test]
    fn zero_priced_quotes_are_skipped() {
        let quotes = [quote(10, 100.0, 100.1), quote(20, 0.0, 100.1), quote(30, 99.5, 100.1)];
        let m = largest_quote_return(&event(Direction::FlashCrash, 10, 30), &quotes).unwrap();
        assert!((m.value + 0.005).abs() < 1e-15);
        assert_eq!((m.from_time, m.to_time), (10, 30));
    }

    #[test]
    fn accumulated_volume_sums_through_change() {
        let trades: Vec<TradeRecord> = [200u64, 300, 700]
            .iter()
            .enumerate()
            .map(|(i, &v)| TradeRecord { timestamp: i as i64, price: Price::from_f64(1.0), volume: v, sequence: i as u64 })
            .collect();
        let mut e = event(Direction::FlashCrash, 0, 2);
        e.start_index = 0;
        e.change_index = 1;
        assert_eq!(accumulated_volume(&e, &trades), 500);
        let flat: Vec<TradeRecord> = (0..12)
            .map(|i| TradeRecord { timestamp: i, price: Price::from_f64(1.0), volume: 100, sequence: i as u64 })
            .collect();
        e.change_index = 10;
        assert_eq!(accumulated_volume(&e, &flat), 1_100);
    }

    #[test]
    fn constant_quotes_give_constant_window() {
        let quotes: Vec<_> = (0..1000).map(|i| quote(i * 10, 99.9, 100.0)).collect();
        let w = spread_window(&event(Direction::FlashCrash, 5000, 6000), &quotes, &SpreadConfig::default()).unwrap();
        assert!(w.complete);
        assert_eq!(w.values.len(), 801);
        assert_eq!(w.anchor_time, 5000);
        for v in &w.values {
            assert!((v.unwrap() - 0.001).abs() < 1e-15);
        }
    }

    #[test]
    fn window_near_day_start_is_truncated() {
        let quotes: Vec<_> = (0..1000).map(|i| quote(MAIN_OPEN + i * 10, 99.9, 100.0)).collect();
        let w = spread_window(&event(Direction::FlashCrash, MAIN_OPEN + 105, 0), &quotes, &SpreadConfig::default())
            .unwrap();
        assert!(!w.complete);
        for o in -400..=-11 {
            assert_eq!(w.at(o), None, "offset {o}");
        }
        for o in -10..=400 {
            assert!(w.at(o).is_some(), "offset {o}");
        }
    }

    #[test]
    fn session_bounded_windows_stop_at_the_open() {
        let quotes: Vec<_> = (-50..1000).map(|i| quote(MAIN_OPEN + i * 10, 99.9, 100.0)).collect();
        let config = SpreadConfig { session_bounded: true, ..Default::default() };
        let w = spread_window(&event(Direction::FlashCrash, MAIN_OPEN + 100, 0), &quotes, &config).unwrap();
        assert_eq!(w.at(-10), Some(w.at(0).unwrap()));
        assert_eq!(w.at(-11), None);
        let unbounded = spread_window(&event(Direction::FlashCrash, MAIN_OPEN + 100, 0), &quotes, &SpreadConfig::default())
            .unwrap();
        assert!(unbounded.at(-11).is_some());
    }

    #[test]
    fn missing_anchor() {
        let quotes = [quote(100, 99.9, 100.0)];
        assert!(matches!(
            spread_window(&event(Direction::FlashCrash, 50, 60), &quotes, &SpreadConfig::default()),
            Err(Error::AnchorMissing)
        ));
    }

    #[test]
    fn crossed_and_one_sided_quotes_are_not_spread_events() {
        let quotes = [quote(1, 99.9, 100.0), quote(2, 100.1, 100.0), quote(3, 0.0, 100.0), quote(4, 99.8, 100.0)];
        let s = SpreadSeries::new(&quotes, false);
        assert_eq!(s.times, [1, 4]);
    }

    #[test]
    fn changes_only_collapses_repeats() {
        let quotes = [quote(1, 99.9, 100.0), quote(2, 99.9, 100.0), quote(3, 99.8, 100.0), quote(4, 99.8, 100.0)];
        assert_eq!(SpreadSeries::new(&quotes, true).times, [1, 3]);
        assert_eq!(SpreadSeries::new(&quotes, false).times.len(), 4);
    }

    fn window(values: Vec<Option<f64>>) -> SpreadWindow {
        let half_width = (values.len() - 1) / 2;
        let complete = values.iter().all(Option::is_some);
        SpreadWindow { half_width, anchor_time: 0, values, complete }
    }

    #[test]
    fn profile_of_one_window_is_that_window() {
        let w = window((0..9).map(|i| Some(i as f64 * 1e-4)).collect());
        let p = average_spread_profile([&w]).unwrap();
        assert_eq!(p.mean, w.values.iter().map(|v| v.unwrap()).collect::<Vec<_>>());
        assert_eq!(p.windows, 1);
    }

    #[test]
    fn profile_averages_pointwise() {
        let a = window((0..9).map(|i| Some(i as f64 * 1e-4 + 1e-4)).collect());
        let b = window(a.values.iter().map(|v| Some(3.0 * v.unwrap())).collect());
        let p = average_spread_profile([&a, &b]).unwrap();
        for (m, v) in p.mean.iter().zip(&a.values) {
            assert!((m - 2.0 * v.unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn profile_needs_a_complete_window() {
        let mut w = window(vec![Some(0.1), None, Some(0.1)]);
        w.complete = false;
        assert!(matches!(average_spread_profile([&w]), Err(Error::EmptyProfile)));
        assert!(matches!(average_spread_profile(std::iter::empty()), Err(Error::EmptyProfile)));
        let other = window(vec![Some(0.1); 5]);
        assert!(average_spread_profile([&window(vec![Some(0.1); 3]), &other]).is_err());
    }

    proptest! {
        #[test]
        fn largest_move_dominates_every_consecutive_return(
            bids in proptest::collection::vec(1i64..1_000_000, 2..60),
        ) {
            let quotes: Vec<QuoteRecord> = bids.iter().enumerate().map(|(i, &b)| {
                QuoteRecord::new(i as i64, Price::from_units(b * 1000), 1, Price::from_units(b * 1000 + 500), 1, i as u64)
            }).collect();
            let e = event(Direction::FlashCrash, 0, bids.len() as i64 - 1);
            let m = largest_quote_return(&e, &quotes).unwrap();
            for w in quotes.windows(2) {
                let r = w[1].bid.return_from(w[0].bid);
                prop_assert!(m.value.abs() >= r.abs());
            }
        }

        #[test]
        fn spreads_of_eligible_quotes_lie_in_unit_interval(
            pairs in proptest::collection::vec((0i64..10_000_000, 0i64..10_000_000), 1..100),
        ) {
            let quotes: Vec<QuoteRecord> = pairs.iter().enumerate()
                .map(|(i, &(b, a))| QuoteRecord::new(i as i64, Price::from_units(b), 1, Price::from_units(a), 1, i as u64))
                .collect();
            for q in quotes.iter().filter(|q| q.spread_eligible()) {
                let s = relative_spread(q).unwrap().value;
                prop_assert!((0.0..1.0).contains(&s));
            }
        }

        #[test]
        fn profile_is_bounded_by_its_windows(
            raw in proptest::collection::vec(proptest::collection::vec(0.0f64..0.5, 7), 1..20),
        ) {
            let windows: Vec<SpreadWindow> = raw.iter().map(|v| window(v.iter().map(|&x| Some(x)).collect())).collect();
            let p = average_spread_profile(&windows).unwrap();
            for (k, m) in p.mean.iter().enumerate() {
                let lo = raw.iter().map(|v| v[k]).fold(f64::INFINITY, f64::min);
                let hi = raw.iter().map(|v| v[k]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(*m >= lo - 1e-15 && *m <= hi + 1e-15);
            }
        }

        #[test]
        fn splitting_a_trade_preserves_accumulated_volume(
            vols in proptest::collection::vec(1u64..10_000, 2..30),
            split_at in 0usize..30,
        ) {
            let split_at = split_at % vols.len();
            let mk = |vs: &[u64]| -> Vec<TradeRecord> {
                vs.iter().enumerate().map(|(i, &v)| TradeRecord { timestamp: i as i64, price: Price::from_f64(1.0), volume: v, sequence: i as u64 }).collect()
            };
            let mut doubled: Vec<u64> = vols.iter().map(|v| v * 2).collect();
            let whole = mk(&doubled);
            let half = doubled[split_at] / 2;
            doubled.splice(split_at..=split_at, [half, half]);
            let split = mk(&doubled);
            let mut e = event(Direction::FlashCrash, 0, 0);
            e.change_index = whole.len() - 1;
            let before = accumulated_volume(&e, &whole);
            e.change_index = split.len() - 1;
            prop_assert_eq!(before, accumulated_volume(&e, &split));
        }
    }
}
