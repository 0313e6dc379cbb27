//! Brute-force reference enumerator.
//!
//! Tests candidate intervals directly against the definitions instead of
//! tracking runs incrementally. Every interval `[i, j]` is examined until it
//! stops being monotonic (no longer interval from `i` can be monotonic after
//! that), so the cost is quadratic in the longest run. Used to cross-check the
//! linear-time detector and to certify generated fixtures.

use crate::detect::{DetectionCriteria, Direction, MonotonicRun};
use crate::ingest::TradeRecord;

fn step_ok(trades: &[TradeRecord], k: usize, direction: Direction, strict: bool) -> bool {
    let (a, b) = (trades[k].price.units(), trades[k + 1].price.units());
    match (direction, strict) {
        (Direction::FlashCrash, false) => b <= a,
        (Direction::FlashCrash, true) => b < a,
        (Direction::FlashSpike, false) => b >= a,
        (Direction::FlashSpike, true) => b > a,
    }
}

/// Every maximal monotonic interval with nonzero net change.
pub fn enumerate_runs(trades: &[TradeRecord], strict: bool) -> Vec<MonotonicRun> {
    let n = trades.len();
    let mut runs = Vec::new();
    for direction in [Direction::FlashCrash, Direction::FlashSpike] {
        for i in 0..n {
            let left_closed = i == 0 || !step_ok(trades, i - 1, direction, strict);
            if !left_closed {
                continue;
            }
            for j in i + 1..n {
                if !(i..j).all(|k| step_ok(trades, k, direction, strict)) {
                    break;
                }
                let right_closed = j == n - 1 || !step_ok(trades, j, direction, strict);
                if right_closed && trades[i].price != trades[j].price {
                    runs.push(MonotonicRun { first: i, last: j, direction });
                }
            }
        }
    }
    runs.sort();
    runs
}

/// `(run, change index)` for every run satisfying the criteria, checked trade
/// by trade against the definition.
pub fn enumerate_events(trades: &[TradeRecord], criteria: &DetectionCriteria) -> Vec<(MonotonicRun, usize)> {
    let mut out = Vec::new();
    for run in enumerate_runs(trades, criteria.strict) {
        let start = trades[run.first];
        if trades[run.last].timestamp - start.timestamp >= criteria.max_duration {
            continue;
        }
        let change = (run.first..=run.last).find(|&k| {
            let count = k - run.first + 1;
            let moved = (trades[k].price.units() - start.price.units()).abs() as f64 / start.price.units() as f64;
            let elapsed = trades[k].timestamp - start.timestamp;
            count >= criteria.min_trades && moved > criteria.threshold && elapsed < criteria.max_duration
        });
        if let Some(change) = change {
            out.push((run, change));
        }
    }
    out
}
