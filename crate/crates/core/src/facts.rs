//! Stylized facts of return series: linear unpredictability, fat tails,
//! leverage effect, coarse-fine volatility asymmetry, moments, and the
//! cross-asset versions of the correlation and leverage statistics.
//!
//! All statistics work in `f64` whatever scalar the prices were stored in.

use log::warn;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scenario::ScenarioSet;

/// Lags averaged in reports.
pub const LAGS: std::ops::RangeInclusive<usize> = 1..=10;
/// Window of the coarse and fine volatilities.
pub const COARSE_FINE_TAU: usize = 5;

fn undefined(what: &str) -> Error {
    Error::UndefinedStatistic(what.to_string())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance about `mu`.
fn variance(x: &[f64], mu: f64) -> f64 {
    x.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / x.len() as f64
}

/// `r_t = log p_{t+1} - log p_t`.
pub fn log_returns<S: Scalar>(prices: &[S]) -> Result<Vec<f64>> {
    if prices.len() < 2 {
        return Err(Error::InsufficientData("log returns need at least two prices".into()));
    }
    if let Some(p) = prices.iter().find(|p| !(p.as_f64() > 0.0)) {
        return Err(Error::Domain(format!("non-positive price {p}")));
    }
    Ok(prices
        .windows(2)
        .map(|w| w[1].as_f64().ln() - w[0].as_f64().ln())
        .collect())
}

/// `E[(x_t - mu_x)(y_{t+k} - mu_y)] / (sigma_x sigma_y)` with full-series
/// means and population deviations, the expectation taken over the `n - k`
/// available pairs.
pub fn lagged_correlation(x: &[f64], y: &[f64], k: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            op: "lagged_correlation",
            left: (x.len(), 1),
            right: (y.len(), 1),
        });
    }
    let n = x.len();
    if n < k + 2 {
        return Err(Error::InsufficientData(format!("lag {k} needs more than {} points, have {n}", k + 1)));
    }
    let (mx, my) = (mean(x), mean(y));
    let (vx, vy) = (variance(x, mx), variance(y, my));
    if !(vx > 0.0 && vy > 0.0) {
        return Err(undefined("correlation of a constant series"));
    }
    let cov = (0..n - k).map(|t| (x[t] - mx) * (y[t + k] - my)).sum::<f64>() / (n - k) as f64;
    Ok(cov / (vx * vy).sqrt())
}

pub fn autocorrelation(r: &[f64], k: usize) -> Result<f64> {
    lagged_correlation(r, r, k)
}

/// `(E[x_t y_{t+k}^2] - E[x] E[y^2]) / E[y^2]^2`; with `x = y` this is the
/// single-asset leverage function `L(k)`.
pub fn cross_leverage(x: &[f64], y: &[f64], k: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            op: "leverage",
            left: (x.len(), 1),
            right: (y.len(), 1),
        });
    }
    let n = x.len();
    if n < k + 2 {
        return Err(Error::InsufficientData(format!("lag {k} needs more than {} points, have {n}", k + 1)));
    }
    let m2 = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if !(m2 > 0.0) {
        return Err(undefined("leverage with zero second moment"));
    }
    let lead = (0..n - k).map(|t| x[t] * y[t + k] * y[t + k]).sum::<f64>() / (n - k) as f64;
    Ok((lead - mean(x) * m2) / (m2 * m2))
}

pub fn leverage_effect(r: &[f64], k: usize) -> Result<f64> {
    cross_leverage(r, r, k)
}

/// Product-moment correlation of two equally long series.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            op: "pearson",
            left: (x.len(), 1),
            right: (y.len(), 1),
        });
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData("pearson needs at least two points".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(undefined("pearson correlation of a constant series"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Coarse `|sum r|` and fine `sum |r|` volatilities over the `tau` returns
/// preceding each time `t = tau ..= n`.
pub fn coarse_fine_volatility(r: &[f64], tau: usize) -> (Vec<f64>, Vec<f64>) {
    if tau == 0 || r.len() < tau {
        return (Vec::new(), Vec::new());
    }
    r.windows(tau)
        .map(|w| (w.iter().sum::<f64>().abs(), w.iter().map(|v| v.abs()).sum::<f64>()))
        .unzip()
}

/// `rho(k) = Corr(nu_c(t + k), nu_f(t))` for a signed lag.
pub fn coarse_fine_rho(r: &[f64], tau: usize, k: isize) -> Result<f64> {
    let (coarse, fine) = coarse_fine_volatility(r, tau);
    let lag = k.unsigned_abs();
    if coarse.len() < lag + 2 {
        return Err(Error::InsufficientData(format!(
            "coarse-fine at tau={tau}, k={k} needs more than {} returns",
            tau + lag + 1
        )));
    }
    let m = coarse.len() - lag;
    if k >= 0 {
        pearson(&coarse[lag..], &fine[..m])
    } else {
        pearson(&coarse[..m], &fine[lag..])
    }
}

/// `(rho(k), rho(k) - rho(-k))`.
pub fn coarse_fine(r: &[f64], tau: usize, k: usize) -> Result<(f64, f64)> {
    let k = k as isize;
    let plus = coarse_fine_rho(r, tau, k)?;
    let minus = coarse_fine_rho(r, tau, -k)?;
    Ok((plus, plus - minus))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    /// Non-excess: 3 for a normal distribution.
    pub kurtosis: f64,
    pub skewness: f64,
}

pub fn moments(r: &[f64]) -> Result<Moments> {
    if r.len() < 4 {
        return Err(Error::InsufficientData("moments need at least four points".into()));
    }
    let mu = mean(r);
    let n = r.len() as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in r {
        let d = v - mu;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    if !(m2 > 0.0) {
        return Err(undefined("moments of a constant series"));
    }
    Ok(Moments {
        kurtosis: m4 / (m2 * m2),
        skewness: m3 / m2.powf(1.5),
    })
}

/// Continuous power-law fit `p(x) ~ x^-alpha` for `x >= x_min`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailFit {
    pub alpha: f64,
    pub x_min: f64,
    pub tail_points: usize,
    pub ks_distance: f64,
    /// Log-likelihood of the power law minus that of an exponential fitted
    /// to the same tail.
    pub likelihood_ratio: f64,
}

impl TailFit {
    /// Whether the tail looks like a power law in the sense of the reported
    /// range: heavier than exponential and `alpha <= 5`.
    pub fn is_power_law(&self) -> bool {
        self.likelihood_ratio > 0.0 && self.alpha <= 5.0
    }
}

pub const MIN_TAIL_POINTS: usize = 20;
const MAX_CANDIDATES: usize = 500;

/// Maximum-likelihood power-law exponent of `|x|`, with the cutoff chosen to
/// minimize the Kolmogorov-Smirnov distance between the empirical and fitted
/// tail distributions.
pub fn tail_exponent(x: &[f64]) -> Result<TailFit> {
    if x.len() < 100 {
        return Err(Error::InsufficientData(format!(
            "tail fit needs at least 100 observations, have {}",
            x.len()
        )));
    }
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).filter(|v| *v > 0.0).collect();
    a.sort_by(f64::total_cmp);
    let n = a.len();
    if n < MIN_TAIL_POINTS + 1 {
        return Err(Error::InsufficientData("too few non-zero observations for a tail fit".into()));
    }
    // suffix[i] = sum of ln(a[j]) for j >= i.
    let mut suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + a[i].ln();
    }

    let last = n - MIN_TAIL_POINTS;
    let step = (last / MAX_CANDIDATES).max(1);
    let mut best: Option<TailFit> = None;
    let mut i = 0;
    while i <= last {
        // Start at the first occurrence of this value so ties are all in the tail.
        let x_min = a[i];
        let start = a.partition_point(|v| *v < x_min);
        let m = n - start;
        let log_sum = suffix[start] - m as f64 * x_min.ln();
        if m >= MIN_TAIL_POINTS && log_sum > 0.0 {
            let alpha = 1.0 + m as f64 / log_sum;
            let mut ks: f64 = 0.0;
            for (j, &v) in a[start..].iter().enumerate() {
                let fitted = 1.0 - (v / x_min).powf(1.0 - alpha);
                let below = j as f64 / m as f64;
                let upto = (j + 1) as f64 / m as f64;
                ks = ks.max((fitted - below).abs()).max((upto - fitted).abs());
            }
            if best.is_none_or(|b| ks < b.ks_distance) {
                best = Some(TailFit {
                    alpha,
                    x_min,
                    tail_points: m,
                    ks_distance: ks,
                    likelihood_ratio: 0.0,
                });
            }
        }
        i += step;
    }
    let mut fit = best.ok_or_else(|| Error::InsufficientData("no admissible tail cutoff".into()))?;

    let tail = &a[n - fit.tail_points..];
    let m = tail.len() as f64;
    let excess = tail.iter().map(|v| v - fit.x_min).sum::<f64>();
    let log_sum = tail.iter().map(|v| (v / fit.x_min).ln()).sum::<f64>();
    let ll_power = m * ((fit.alpha - 1.0) / fit.x_min).ln() - fit.alpha * log_sum;
    let ll_exp = if excess > 0.0 {
        let lambda = m / excess;
        m * lambda.ln() - lambda * excess
    } else {
        f64::INFINITY
    };
    fit.likelihood_ratio = ll_power - ll_exp;
    Ok(fit)
}

fn lag_mean(f: impl Fn(usize) -> Result<f64>) -> Result<f64> {
    let mut total = 0.0;
    for k in LAGS {
        total += f(k)?;
    }
    Ok(total / LAGS.count() as f64)
}

/// Single-asset row of a fact report; `None` marks an undefined statistic.
#[derive(Clone, Debug, PartialEq)]
pub struct AssetFacts {
    pub ticker: String,
    /// Mean |autocorrelation| over lags 1..=10.
    pub autocorrelation: Option<f64>,
    pub tail_exponent: Option<f64>,
    /// Mean L(k) over lags 1..=10.
    pub leverage: Option<f64>,
    /// Coarse-fine asymmetry at k = 1.
    pub coarse_fine: Option<f64>,
    pub kurtosis: Option<f64>,
    pub skewness: Option<f64>,
}

pub fn asset_facts(ticker: &str, r: &[f64]) -> AssetFacts {
    let m = moments(r).ok();
    AssetFacts {
        ticker: ticker.to_string(),
        autocorrelation: lag_mean(|k| autocorrelation(r, k).map(f64::abs)).ok(),
        tail_exponent: tail_exponent(r).ok().map(|t| t.alpha),
        leverage: lag_mean(|k| leverage_effect(r, k)).ok(),
        coarse_fine: coarse_fine(r, COARSE_FINE_TAU, 1).ok().map(|c| c.1),
        kurtosis: m.map(|m| m.kurtosis),
        skewness: m.map(|m| m.skewness),
    }
}

/// Cross-asset statistics averaged over lags 1..=10 and all unordered pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossFacts {
    pub cross_correlation: Option<f64>,
    pub volatility_correlation: Option<f64>,
    pub cross_leverage: Option<f64>,
    pub pairs: usize,
}

/// Lagged statistics for one ordered pair `(i leads j)` at each of `lags`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairStats {
    pub i: usize,
    pub j: usize,
    pub cross_correlation: Vec<f64>,
    pub volatility_correlation: Vec<f64>,
    pub cross_leverage: Vec<f64>,
}

pub fn pair_stats(returns: &[Vec<f64>], i: usize, j: usize, lags: &[usize]) -> Result<PairStats> {
    let (x, y) = (&returns[i], &returns[j]);
    let ax: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let ay: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    Ok(PairStats {
        i,
        j,
        cross_correlation: lags.iter().map(|&k| lagged_correlation(x, y, k)).collect::<Result<_>>()?,
        volatility_correlation: lags.iter().map(|&k| lagged_correlation(&ax, &ay, k)).collect::<Result<_>>()?,
        cross_leverage: lags.iter().map(|&k| cross_leverage(x, y, k)).collect::<Result<_>>()?,
    })
}

/// Degenerate pairs are skipped with a warning.
pub fn cross_stats(returns: &[Vec<f64>]) -> Result<CrossFacts> {
    if returns.len() < 2 {
        return Err(Error::InsufficientData("cross statistics need at least two assets".into()));
    }
    let lags: Vec<usize> = LAGS.collect();
    let mut sums = [0.0f64; 3];
    let mut pairs = 0;
    for i in 0..returns.len() {
        for j in i + 1..returns.len() {
            match pair_stats(returns, i, j, &lags) {
                Ok(p) => {
                    sums[0] += mean(&p.cross_correlation);
                    sums[1] += mean(&p.volatility_correlation);
                    sums[2] += mean(&p.cross_leverage);
                    pairs += 1;
                }
                Err(e) => warn!("skipping asset pair ({i}, {j}): {e}"),
            }
        }
    }
    let avg = |s: f64| (pairs > 0).then(|| s / pairs as f64);
    Ok(CrossFacts {
        cross_correlation: avg(sums[0]),
        volatility_correlation: avg(sums[1]),
        cross_leverage: avg(sums[2]),
        pairs,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactReport {
    pub assets: Vec<AssetFacts>,
    pub cross: Option<CrossFacts>,
}

pub const ROW_LABELS: [&str; 6] = [
    "Autocorrelation",
    "Fat-tail",
    "Leverage effect",
    "Coarse-fine",
    "Kurtosis",
    "Skewness",
];

pub const CROSS_LABELS: [&str; 3] = ["Cross correlation", "Volatility correlation", "Cross leverage effect"];

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values.flatten() {
        s += v;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

impl AssetFacts {
    pub fn values(&self) -> [Option<f64>; 6] {
        [
            self.autocorrelation,
            self.tail_exponent,
            self.leverage,
            self.coarse_fine,
            self.kurtosis,
            self.skewness,
        ]
    }
}

impl CrossFacts {
    pub fn values(&self) -> [Option<f64>; 3] {
        [self.cross_correlation, self.volatility_correlation, self.cross_leverage]
    }
}

impl FactReport {
    /// Per-statistic means over assets, in [`ROW_LABELS`] order.
    pub fn asset_means(&self) -> [Option<f64>; 6] {
        std::array::from_fn(|i| mean_defined(self.assets.iter().map(|a| a.values()[i])))
    }

    /// Field-wise mean of several reports over the same assets.
    pub fn average(reports: &[FactReport]) -> Option<FactReport> {
        let first = reports.first()?;
        let assets = (0..first.assets.len())
            .map(|a| {
                let col = |i: usize| mean_defined(reports.iter().map(|r| r.assets[a].values()[i]));
                AssetFacts {
                    ticker: first.assets[a].ticker.clone(),
                    autocorrelation: col(0),
                    tail_exponent: col(1),
                    leverage: col(2),
                    coarse_fine: col(3),
                    kurtosis: col(4),
                    skewness: col(5),
                }
            })
            .collect();
        let cross = first.cross.as_ref().map(|c| {
            let col = |i: usize| mean_defined(reports.iter().filter_map(|r| r.cross.as_ref()).map(|c| c.values()[i]));
            CrossFacts {
                cross_correlation: col(0),
                volatility_correlation: col(1),
                cross_leverage: col(2),
                pairs: c.pairs,
            }
        });
        Some(FactReport { assets, cross })
    }
}

pub fn fact_report(tickers: &[String], returns: &[Vec<f64>]) -> FactReport {
    let assets = tickers.iter().zip(returns).map(|(t, r)| asset_facts(t, r)).collect();
    let cross = if returns.len() >= 2 {
        cross_stats(returns).ok()
    } else {
        None
    };
    FactReport { assets, cross }
}

/// Real and synthetic reports plus the per-asset mean Pearson correlation
/// between true and generated prices.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub real: FactReport,
    pub synthetic: FactReport,
    pub pearson: Vec<(String, Option<f64>)>,
}

/// Statistics of both the reference and the draws use days `h+1..=K` only, so
/// the copied prefix cannot inflate agreement.
pub fn evaluate_scenarios<S: Scalar>(set: &ScenarioSet<S>) -> Result<Evaluation> {
    if set.is_empty() {
        return Err(Error::Config("no scenarios to evaluate".into()));
    }
    let x = &set.reference;
    let h = set.window.h;
    let tickers = x.tickers();
    let span = |row: &[S]| -> Vec<S> { row[h..].to_vec() };
    let to_f64 = |v: &[S]| -> Vec<f64> { v.iter().map(|p| p.as_f64()).collect() };

    let real_prices: Vec<Vec<S>> = (0..x.n_assets()).map(|a| span(x.series(a))).collect();
    let real_returns = real_prices.iter().map(|p| log_returns(p)).collect::<Result<Vec<_>>>()?;
    let real = fact_report(tickers, &real_returns);

    let mut reports = Vec::with_capacity(set.len());
    let mut pearson_sums = vec![(0.0, 0usize); x.n_assets()];
    for draw in &set.draws {
        let prices: Vec<Vec<S>> = (0..x.n_assets()).map(|a| span(draw.row(a))).collect();
        let returns = prices.iter().map(|p| log_returns(p)).collect::<Result<Vec<_>>>()?;
        reports.push(fact_report(tickers, &returns));
        for a in 0..x.n_assets() {
            match pearson(&to_f64(&real_prices[a]), &to_f64(&prices[a])) {
                Ok(c) => {
                    pearson_sums[a].0 += c;
                    pearson_sums[a].1 += 1;
                }
                Err(e) => warn!("pearson undefined for {}: {e}", tickers[a]),
            }
        }
    }
    let synthetic = FactReport::average(&reports).expect("non-empty");
    let pearson = tickers
        .iter()
        .zip(pearson_sums)
        .map(|(t, (s, n))| (t.clone(), (n > 0).then(|| s / n as f64)))
        .collect();
    Ok(Evaluation { real, synthetic, pearson })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::RandomSource;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        RandomSource::seeded(seed).normals(n)
    }

    #[test]
    fn exact_log_returns() {
        let e = std::f64::consts::E;
        let r = log_returns(&[1.0, e, e * e]).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-15 && (r[1] - 1.0).abs() < 1e-15);
        assert_eq!(log_returns(&[2.0, 2.0, 2.0]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(log_returns(&[1.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn autocorrelation_edge_cases() {
        let alt: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(autocorrelation(&alt, 1).unwrap(), -1.0);
        let r = normals(500, 1);
        assert_eq!(autocorrelation(&r, 0).unwrap(), 1.0);
        assert!(matches!(autocorrelation(&[1.0; 20], 1), Err(Error::UndefinedStatistic(_))));
    }

    #[test]
    fn iid_autocorrelation_is_small() {
        let r = normals(10_000, 2);
        for k in LAGS {
            assert!(autocorrelation(&r, k).unwrap().abs() < 0.05);
        }
    }

    #[test]
    fn leverage_signs() {
        let r = normals(100_000, 3);
        // Standard error of L(1) for unit normals is about sqrt(2 / n).
        assert!(leverage_effect(&r, 1).unwrap().abs() < 5.0 * (2.0f64 / 100_000.0).sqrt());

        // A fall is followed by a doubled move.
        let mut rng = RandomSource::seeded(4);
        let mut s = Vec::with_capacity(10_000);
        let mut prev: f64 = 0.0;
        for _ in 0..10_000 {
            let scale = if prev < 0.0 { 2.0 } else { 1.0 };
            prev = scale * rng.normal::<f64>();
            s.push(prev);
        }
        assert!(leverage_effect(&s, 1).unwrap() < 0.0);
    }

    #[test]
    fn coarse_fine_cases() {
        let pos: Vec<f64> = (0..200).map(|i| 0.01 + 0.001 * ((i * 7 % 13) as f64)).collect();
        let (c, f) = coarse_fine_volatility(&pos, 5);
        assert_eq!(c, f);
        assert!((coarse_fine_rho(&pos, 5, 0).unwrap() - 1.0).abs() < 1e-12);

        let r = normals(100_000, 5);
        let (_, delta) = coarse_fine(&r, 5, 1).unwrap();
        assert!(delta.abs() < 0.03, "{delta}");
    }

    #[test]
    fn gaussian_and_two_point_moments() {
        let r = normals(1_000_000, 6);
        let m = moments(&r).unwrap();
        assert!((2.9..=3.1).contains(&m.kurtosis), "{m:?}");
        assert!(m.skewness.abs() <= 0.05);
        let two: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let m = moments(&two).unwrap();
        assert_eq!(m.kurtosis, 1.0);
        assert_eq!(m.skewness, 0.0);
    }

    #[test]
    fn pearson_identities() {
        let x = normals(50, 7);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let aff: Vec<f64> = x.iter().map(|v| 2.5 * v + 4.0).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!((pearson(&x, &aff).unwrap() - 1.0).abs() < 1e-12);
        assert!(pearson(&x, &[1.0; 50]).is_err());
    }

    fn pareto(n: usize, alpha: f64, seed: u64) -> Vec<f64> {
        let mut rng = RandomSource::seeded(seed);
        (0..n).map(|_| (1.0 - rng.uniform::<f64>()).powf(-1.0 / (alpha - 1.0))).collect()
    }

    #[test]
    fn pareto_tail_recovered() {
        let fit = tail_exponent(&pareto(50_000, 3.5, 8)).unwrap();
        assert!((3.3..=3.7).contains(&fit.alpha), "{fit:?}");
        assert!(fit.is_power_law());
    }

    #[test]
    fn gaussian_tail_is_flagged() {
        let fit = tail_exponent(&normals(50_000, 9)).unwrap();
        assert!(fit.alpha > 5.0, "{fit:?}");
        assert!(!fit.is_power_law());
    }

    #[test]
    fn tail_needs_data() {
        assert!(matches!(tail_exponent(&[1.0; 50]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn cross_self_pair_is_one() {
        let x = normals(300, 10);
        assert_eq!(lagged_correlation(&x, &x, 0).unwrap(), 1.0);
        let a = normals(5_000, 11);
        let b = normals(5_000, 12);
        let c = cross_stats(&[a, b]).unwrap();
        assert_eq!(c.pairs, 1);
        assert!(c.cross_correlation.unwrap().abs() < 0.03);
    }
}
