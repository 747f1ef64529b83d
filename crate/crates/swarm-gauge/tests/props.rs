//! Property tests for the curve model and metric kernels.

mod common;

use proptest::prelude::*;

use swarm_gauge::curves::{
    aggregate_events, format_curves, mean_over_runs, parse_curves, CurveBundle,
    InterferenceCurve, PerformanceCurve, PopulationCurve,
};
use swarm_gauge::dtw::{dtw_distance, DtwConfig};
use swarm_gauge::robustness::availability;
use swarm_gauge::scalability::{karp_flatt_scalability, ScalabilityInput};
use swarm_gauge::selforg::task_selforg;

fn label() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_-]{0,7}"
}

fn bundle() -> impl Strategy<Value = CurveBundle> {
    (1usize..16, 1u32..2000, 1u32..64, label(), label())
        .prop_flat_map(|(len, interval_len, max_n, controller, condition)| {
            (
                prop::collection::vec(0.0..1e6f64, len),
                prop::collection::vec(0.0..=1.0f64, len),
                prop::collection::vec(0..=max_n, len),
                Just(interval_len),
                Just(max_n),
                Just(controller),
                Just(condition),
                any::<u64>(),
            )
        })
        .prop_map(|(perf, intf, pop, interval_len, max_n, controller, condition, seed)| {
            CurveBundle::new(
                PerformanceCurve::new(perf, interval_len, max_n, controller.clone(), condition.clone())
                    .unwrap(),
                InterferenceCurve::new(intf, interval_len, max_n, controller, condition).unwrap(),
                PopulationCurve::new(pop, interval_len, max_n).unwrap(),
                seed,
            )
            .unwrap()
        })
}

proptest! {
    #[test]
    fn csv_round_trip_is_bit_exact(b in bundle()) {
        let text = format_curves(&b);
        let back = parse_curves(&text, "prop").unwrap();
        prop_assert_eq!(back, b);
    }

    #[test]
    fn aggregation_preserves_event_totals(
        events in prop::collection::vec(0u64..50, 1..200),
        interval_len in 1u32..20,
    ) {
        prop_assume!(events.len() >= interval_len as usize);
        let curve = aggregate_events(&events, interval_len, 4, "crw", "ideal").unwrap();
        prop_assert_eq!(curve.len(), events.len() / interval_len as usize);
        if events.len() % interval_len as usize == 0 {
            let total: f64 =
                curve.values().iter().map(|v| v * interval_len as f64).sum();
            let expected: u64 = events.iter().sum();
            prop_assert!((total - expected as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn mean_of_identical_bundles_is_identity(b in bundle(), copies in 2usize..6) {
        let runs: Vec<CurveBundle> = vec![b.clone(); copies];
        let mean = mean_over_runs(&runs).unwrap();
        prop_assert_eq!(mean.bundle, b);
        prop_assert!(mean.perf_half_width.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn dtw_identity_symmetry_and_l1_bound(
        x in prop::collection::vec(-100.0..100.0f64, 1..10),
        y in prop::collection::vec(-100.0..100.0f64, 1..10),
    ) {
        let cfg = DtwConfig::default();
        prop_assert_eq!(dtw_distance(&x, &x, &cfg).unwrap(), 0.0);
        let xy = dtw_distance(&x, &y, &cfg).unwrap();
        prop_assert!(xy >= 0.0);
        prop_assert_eq!(xy, dtw_distance(&y, &x, &cfg).unwrap());
        if x.len() == y.len() {
            let l1: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum();
            prop_assert!(xy <= l1 + 1e-12);
        }
    }

    #[test]
    fn dtw_matches_exhaustive_enumeration(
        x in prop::collection::vec(-10.0..10.0f64, 1..6),
        y in prop::collection::vec(-10.0..10.0f64, 1..6),
    ) {
        let dp = dtw_distance(&x, &y, &DtwConfig::default()).unwrap();
        prop_assert_eq!(dp, common::dtw_exhaustive(&x, &y));
    }

    #[test]
    fn task_selforg_is_zero_under_linear_scaling(
        values in prop::collection::vec(0.0..1e3f64, 1..20),
        n1 in 1u32..32,
        ratio in 2u32..8,
    ) {
        let n2 = n1 * ratio;
        let low = PerformanceCurve::new(values.clone(), 10, n1, "crw", "ideal").unwrap();
        let scaled: Vec<f64> =
            values.iter().map(|v| v * (n2 as f64 / n1 as f64)).collect();
        let high = PerformanceCurve::new(scaled, 10, n2, "crw", "ideal").unwrap();
        let metric = task_selforg(&low, &high).unwrap();
        prop_assert!(metric.abs() < 1e-9, "{}", metric);
    }

    #[test]
    fn scalability_of_equal_curves_is_zero(
        values in prop::collection::vec(0.01..1e3f64, 1..20),
        n1 in 1u32..32,
        ratio in 2u32..8,
    ) {
        let low = PerformanceCurve::new(values.clone(), 10, n1, "crw", "ideal").unwrap();
        let high = PerformanceCurve::new(values, 10, n1 * ratio, "crw", "ideal").unwrap();
        let input = ScalabilityInput::new(&low, &high).unwrap();
        prop_assert_eq!(karp_flatt_scalability(&input).unwrap(), 0.0);
    }

    #[test]
    fn availability_is_monotone_and_bounded(
        rho in 0.01..0.99f64,
        n in 1u32..40,
    ) {
        let mut last = f64::INFINITY;
        for n_min in 1..=n {
            let p = availability(rho, n, n_min).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(p <= last + 1e-15);
            last = p;
        }
    }
}
