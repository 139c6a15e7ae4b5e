mod common;

use acgan::data::{PriceMatrix, WindowConfig};
use acgan::portfolio::*;
use acgan::portfolio::Strategy;
use acgan::random::RandomSource;
use acgan::scenario::ScenarioSet;
use acgan::tensor::Tensor;
use common::*;
use proptest::prelude::*;

fn instance(seed: u64) -> ReturnEstimate {
    let (mean, cov) = random_instance(&mut RandomSource::seeded(seed));
    ReturnEstimate { mean, cov, days: 20 }
}

#[test]
fn optimizer_beats_or_matches_grid() {
    for seed in 0..10 {
        let e = instance(seed);
        let w = max_sharpe(&e, 0.0).unwrap();
        let sr = naive_sharpe(&e.mean, &e.cov, &w);
        let (grid, _) = grid_sharpe3(&e.mean, &e.cov, 0.05);
        assert!(sr >= grid - 1e-12, "seed {seed}: {sr} < grid {grid}");
        let fine = refined_grid_sharpe3(&e.mean, &e.cov, 0.05, 4);
        assert!((sr - fine).abs() <= 1e-3, "seed {seed}: {sr} vs refined {fine}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_live_on_the_simplex(seed in any::<u64>()) {
        let w = max_sharpe(&instance(seed), 0.0).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(w.iter().all(|&x| (-1e-9..=1.0 + 1e-9).contains(&x)));
    }

    #[test]
    fn sharpe_is_scale_invariant(seed in any::<u64>(), c in 0.01f64..100.0) {
        let e = instance(seed);
        let scaled = ReturnEstimate {
            mean: e.mean.iter().map(|v| c * v).collect(),
            cov: e.cov.iter().map(|v| c * c * v).collect(),
            days: e.days,
        };
        let a = naive_sharpe(&e.mean, &e.cov, &max_sharpe(&e, 0.0).unwrap());
        let b = naive_sharpe(&e.mean, &e.cov, &max_sharpe(&scaled, 0.0).unwrap());
        prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }

    #[test]
    fn mean_weights_are_convex(seed in any::<u64>(), draws in 1usize..20) {
        let rows: Vec<Option<Vec<f64>>> = (0..draws)
            .map(|r| Some(max_sharpe(&instance(seed.wrapping_add(r as u64)), 0.0).unwrap()))
            .collect();
        let m = mean_weights(&rows).unwrap();
        prop_assert!((m.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for a in 0..3 {
            let lo = rows.iter().flatten().map(|w| w[a]).fold(f64::INFINITY, f64::min);
            let hi = rows.iter().flatten().map(|w| w[a]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(m[a] >= lo - 1e-12 && m[a] <= hi + 1e-12);
        }
    }

    /// A single rebalance equals a one-shot allocation compounded forward.
    #[test]
    fn single_rebalance_is_one_shot(seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let x = gbm(3, 60, seed);
        let h = 10;
        let s = a + b + 1.0;
        let w = vec![a / s, b / s, 1.0 / s];
        let r = backtest(&x, &Strategy::Fixed(w.clone()), "fixed", 60 - h, h).unwrap();
        prop_assert_eq!(r.rebalances.len(), 1);
        prop_assert_eq!(r.equity.len(), 60 - h + 1);
        for (j, v) in r.equity.iter().enumerate() {
            let d = h - 1 + j;
            let oracle: f64 = (0..3).map(|i| w[i] * x.values().get(i, d) / x.values().get(i, h - 1)).sum();
            prop_assert!((v - oracle).abs() <= 1e-12, "day {d}: {v} vs {oracle}");
        }
    }
}

#[test]
fn buy_and_hold_and_flat_market() {
    let x = gbm(2, 120, 3);
    let r = backtest(&x, &Strategy::Fixed(vec![0.0, 1.0]), "B", 7, 20).unwrap();
    for (j, v) in r.equity.iter().enumerate() {
        let d = 19 + j;
        assert!((v - x.values().get(1, d) / x.values().get(1, 19)).abs() <= 1e-12);
    }
    let flat = x.with_values(Tensor::filled(2, 120, 10.0)).unwrap();
    for strategy in [Strategy::Markowitz, Strategy::Fixed(vec![0.3, 0.7])] {
        let r = backtest(&flat, &strategy, "flat", 10, 20).unwrap();
        assert!(r.equity.iter().all(|&v| v == 1.0));
        assert_eq!(r.sharpe, None);
    }
}

#[test]
fn compare_report_adds_benchmarks() {
    let x = gbm(3, 100, 8);
    let r = backtest(&x, &Strategy::Markowitz, "Markowitz", 10, 20).unwrap();
    let (rows, curves) = compare_report(&x, std::slice::from_ref(&r), &[], 20).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(curves.is_empty());
    let (rows, curves) = compare_report(&x, &[r], &["A2".to_string()], 20).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].benchmark);
    for (j, v) in curves[0].equity.iter().enumerate() {
        assert!((v - x.values().get(1, 19 + j) / x.values().get(1, 19)).abs() <= 1e-12);
    }
    assert!(compare_report(&x, &[], &["nope".to_string()], 20).is_err());
}

#[test]
fn identical_draws_give_the_single_draw_weights() {
    let x = gbm(3, 100, 4);
    let draw = gbm(3, 100, 5).values().clone();
    let set = |k: usize| ScenarioSet {
        reference: x.clone(),
        window: WindowConfig::new(20, 10).unwrap(),
        draws: vec![draw.clone(); k],
        seeds: vec![0; k],
    };
    let one = set(1);
    let many = set(6);
    for t in rebalance_days(100, 20, 10).unwrap() {
        let single = scenario_weights(&one, t, 10, Aggregation::Draw(0), 0.0).unwrap();
        assert_eq!(scenario_weights(&many, t, 10, Aggregation::Mean, 0.0).unwrap(), single);
    }
    let a = backtest(&x, &Strategy::Scenario { set: &one, how: Aggregation::Draw(0) }, "one", 10, 20).unwrap();
    let b = backtest(&x, &Strategy::Scenario { set: &many, how: Aggregation::Mean }, "mean", 10, 20).unwrap();
    assert_eq!(a.equity, b.equity);
    let (mean, per_draw) = schedules(&weight_table(&many, 20, 10).unwrap()).unwrap();
    assert_eq!(per_draw.len(), 6);
    assert!(per_draw.iter().all(|s| *s == mean));
}

#[test]
fn misaligned_scenarios_are_rejected() {
    let x = gbm(3, 100, 4);
    let other: PriceMatrix<f64> = gbm(3, 90, 4);
    let set = ScenarioSet {
        reference: other.clone(),
        window: WindowConfig::new(20, 10).unwrap(),
        draws: vec![other.values().clone()],
        seeds: vec![0],
    };
    let s = Strategy::Scenario { set: &set, how: Aggregation::Mean };
    assert!(backtest(&x, &s, "bad", 10, 20).is_err());
    assert!(backtest(&x, &Strategy::Markowitz, "short", 90, 20).is_err());
}
