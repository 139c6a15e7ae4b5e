mod common;

use acgan::facts::*;
use common::*;
use proptest::prelude::*;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn single_series_statistics_match_naive(seed in any::<u64>(), k in 1usize..=10, scale in 1e-3f64..1.0) {
        let r: Vec<f64> = normals(1000, seed).into_iter().map(|v| v * scale).collect();
        prop_assert!(close(autocorrelation(&r, k).unwrap(), naive_lagged_corr(&r, &r, k)));
        let lev = leverage_effect(&r, k).unwrap();
        let oracle = naive_leverage(&r, &r, k);
        prop_assert!((lev - oracle).abs() <= 1e-10 * oracle.abs().max(1.0), "{lev} vs {oracle}");
        let (rho, delta) = coarse_fine(&r, COARSE_FINE_TAU, k).unwrap();
        let (nrho, ndelta) = naive_coarse_fine(&r, COARSE_FINE_TAU, k);
        prop_assert!(close(rho, nrho) && close(delta, ndelta));
        let m = moments(&r).unwrap();
        let (kurt, skew) = naive_moments(&r);
        prop_assert!(close(m.kurtosis, kurt) && close(m.skewness, skew));
    }

    #[test]
    fn pair_statistics_match_naive(seed in any::<u64>(), k in 1usize..=10) {
        let x = normals(1000, seed);
        let y: Vec<f64> = normals(1000, seed ^ 1).iter().zip(&x).map(|(e, a)| 0.5 * a + e).collect();
        prop_assert!(close(pearson(&x, &y).unwrap(), naive_pearson(&x, &y)));
        prop_assert!(close(lagged_correlation(&x, &y, k).unwrap(), naive_lagged_corr(&x, &y, k)));
        let ax: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        let ay: Vec<f64> = y.iter().map(|v| v.abs()).collect();
        let p = pair_stats(&[x.clone(), y.clone()], 0, 1, &[k]).unwrap();
        prop_assert!(close(p.volatility_correlation[0], naive_lagged_corr(&ax, &ay, k)));
        let cl = naive_leverage(&x, &y, k);
        prop_assert!((p.cross_leverage[0] - cl).abs() <= 1e-10 * cl.abs().max(1.0));
    }
}

#[test]
fn pareto_estimate_converges() {
    let err = |n: usize| -> f64 {
        let reps = 8;
        (0..reps)
            .map(|s| (tail_exponent(&pareto(3.5, n, 100 + s)).unwrap().alpha - 3.5).abs())
            .sum::<f64>()
            / reps as f64
    };
    let small = err(1_000);
    let large = err(100_000);
    assert!(large < small, "{large} !< {small}");
    assert!(large < 0.1, "{large}");
}

#[test]
fn report_averages_and_labels() {
    let r1 = normals(300, 1);
    let r2 = normals(300, 2);
    let tickers = vec!["a".to_string(), "b".to_string()];
    let rep = fact_report(&tickers, &[r1.clone(), r2.clone()]);
    assert_eq!(rep.cross.as_ref().unwrap().pairs, 1);
    let avg = FactReport::average(&[rep.clone(), rep.clone()]).unwrap();
    assert_eq!(avg.assets[0].autocorrelation, rep.assets[0].autocorrelation);
    assert_eq!(ROW_LABELS.len(), rep.assets[0].values().len());
    let single = fact_report(&tickers[..1], &[r1]);
    assert!(single.cross.is_none());
}
