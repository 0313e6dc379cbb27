use chrono::NaiveDate;
use proptest::prelude::*;
use uee_core::detect::reference::enumerate_events;
use uee_core::ingest::SymbolDay;
use uee_core::{detect_all, detect_events, DetectionCriteria, Nanos, Price, TradeDay, TradeRecord, UeeEvent};

fn day(steps: &[(i64, Nanos)], symbol: &str) -> TradeDay {
    let mut p = 10_000i64;
    let mut t: Nanos = 34_200_000_000_000;
    let records = steps
        .iter()
        .enumerate()
        .map(|(i, &(dp, dt))| {
            p = (p + dp).max(1);
            t += dt;
            TradeRecord { timestamp: t, price: Price::from_units(p * 1_000_000), volume: 1, sequence: i as u64 }
        })
        .collect();
    SymbolDay::new(symbol, NaiveDate::from_ymd_opt(2014, 1, 7).unwrap(), records)
}

/// Price steps biased towards short monotone bursts and ties.
fn steps() -> impl Strategy<Value = Vec<(i64, Nanos)>> {
    let step = prop_oneof![3 => Just(0i64), 4 => 1i64..=12, 4 => -12i64..=-1];
    let dt = prop_oneof![1 => Just(0 as Nanos), 6 => 0..200_000_000 as Nanos, 1 => 0..3_000_000_000 as Nanos];
    proptest::collection::vec((step, dt), 0..400)
}

fn criteria() -> impl Strategy<Value = DetectionCriteria> {
    (prop_oneof![Just(0.008), 0.001..0.02], 2usize..15, 100_000_000..3_000_000_000 as Nanos, any::<bool>())
        .prop_map(|(threshold, min_trades, max_duration, strict)| DetectionCriteria { threshold, min_trades, max_duration, strict })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn detector_matches_brute_force(steps in steps(), c in criteria()) {
        let d = day(&steps, "PRP");
        let found: Vec<(usize, usize, usize)> =
            detect_events(&d, &c).iter().map(|e| (e.start_index, e.change_index, e.end_index)).collect();
        let mut expected: Vec<(usize, usize, usize)> =
            enumerate_events(&d.records, &c).into_iter().map(|(r, k)| (r.first, k, r.last)).collect();
        expected.sort();
        let mut sorted = found.clone();
        sorted.sort();
        prop_assert_eq!(sorted, expected);
    }

    #[test]
    fn longer_windows_only_add_events(steps in steps(), c in criteria(), extra in 1..2_000_000_000 as Nanos) {
        let d = day(&steps, "PRP");
        let narrow = detect_events(&d, &c);
        let wide = detect_events(&d, &c.with_max_duration(c.max_duration + extra));
        prop_assert!(narrow.iter().all(|e| wide.contains(e)));
    }
}

#[test]
fn detection_is_independent_of_worker_count() {
    let runner = || {
        let mut rng = proptest::test_runner::TestRunner::deterministic();
        (0..40)
            .map(|i| day(&steps().new_tree(&mut rng).unwrap().current(), &format!("S{i:02}")))
            .collect::<Vec<_>>()
    };
    use proptest::strategy::ValueTree;
    let days = runner();
    assert_eq!(days, runner());
    let c = DetectionCriteria { threshold: 0.003, min_trades: 4, ..DetectionCriteria::default() };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| detect_all(&days, &c))
    };
    let one: Vec<UeeEvent> = run(1);
    assert!(!one.is_empty());
    assert_eq!(one, run(3));
    let sequential: Vec<UeeEvent> = days.iter().flat_map(|d| detect_events(d, &c)).collect();
    assert_eq!(one, sequential);
}
