//! Long-only Sharpe maximization, scenario-driven allocation schedules and
//! rebalanced backtests.
//!
//! Days are 0-based columns here. A backtest over a `K`-day test matrix
//! rebalances on days `h, h + eta, ...` at the previous close and reports an
//! equity curve for days `h - 1 ..= K - 1`, starting at 1.

use log::warn;

use crate::data::PriceMatrix;
use crate::error::{Error, Result};
use crate::random::RandomSource;
use crate::scalar::Scalar;
use crate::scenario::ScenarioSet;
use crate::tensor::Tensor;

pub const TRADING_DAYS: usize = 252;
/// Portfolio volatility below which risk is treated as zero.
pub const RISK_FLOOR: f64 = 1e-12;

/// Mean simple daily returns and their sample covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnEstimate {
    pub mean: Vec<f64>,
    /// Row-major `N x N`.
    pub cov: Vec<f64>,
    /// Number of price days the estimate was built from.
    pub days: usize,
}

impl ReturnEstimate {
    pub fn n_assets(&self) -> usize {
        self.mean.len()
    }

    pub fn cov_at(&self, i: usize, j: usize) -> f64 {
        self.cov[i * self.n_assets() + j]
    }

    pub fn portfolio_return(&self, w: &[f64]) -> f64 {
        w.iter().zip(&self.mean).map(|(a, b)| a * b).sum()
    }

    pub fn portfolio_variance(&self, w: &[f64]) -> f64 {
        let n = self.n_assets();
        let mut v = 0.0;
        for i in 0..n {
            for j in 0..n {
                v += w[i] * self.cov[i * n + j] * w[j];
            }
        }
        v.max(0.0)
    }

    /// Per-period Sharpe ratio of weights `w`; `None` when risk is zero.
    pub fn sharpe(&self, w: &[f64], rf: f64) -> Option<f64> {
        let sd = self.portfolio_variance(w).sqrt();
        (sd >= RISK_FLOOR).then(|| (self.portfolio_return(w) - rf) / sd)
    }
}

/// Symmetric eigen-decomposition by cyclic Jacobi rotations. Returns
/// eigenvalues and row-major eigenvectors (column `k` pairs with value `k`).
pub fn symmetric_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[i * n + i]).collect(), v)
}

/// Simple returns `p_{t+1} / p_t - 1` of an `N x T` price block, their mean
/// and sample covariance. The covariance is symmetrized and, if it has
/// negative eigenvalues, rebuilt with those clipped to zero.
pub fn estimate_returns<S: Scalar>(prices: &Tensor<S>) -> Result<ReturnEstimate> {
    let (n, t) = prices.shape();
    if t < 3 {
        return Err(Error::InsufficientData(format!("return estimate needs at least 3 days, have {t}")));
    }
    if n == 0 {
        return Err(Error::InsufficientData("no assets".into()));
    }
    let returns: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            prices
                .row(a)
                .windows(2)
                .map(|w| w[1].as_f64() / w[0].as_f64() - 1.0)
                .collect()
        })
        .collect();
    let len = (t - 1) as f64;
    let mean: Vec<f64> = returns.iter().map(|r| r.iter().sum::<f64>() / len).collect();
    let mut cov = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let c = returns[i]
                .iter()
                .zip(&returns[j])
                .map(|(a, b)| (a - mean[i]) * (b - mean[j]))
                .sum::<f64>()
                / (len - 1.0);
            cov[i * n + j] = c;
            cov[j * n + i] = c;
        }
    }
    if !cov.iter().chain(&mean).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("estimate_returns".into()));
    }
    let (values, vectors) = symmetric_eigen(&cov, n);
    if values.iter().any(|&l| l < 0.0) {
        let mut rebuilt = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                rebuilt[i * n + j] = (0..n)
                    .map(|k| vectors[i * n + k] * values[k].max(0.0) * vectors[j * n + k])
                    .sum();
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let s = 0.5 * (rebuilt[i * n + j] + rebuilt[j * n + i]);
                rebuilt[i * n + j] = s;
                rebuilt[j * n + i] = s;
            }
        }
        cov = rebuilt;
    }
    Ok(ReturnEstimate { mean, cov, days: t })
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|x| (x - theta).max(0.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

fn sharpe_gradient(est: &ReturnEstimate, w: &[f64], rf: f64) -> Vec<f64> {
    let n = est.n_assets();
    let var = est.portfolio_variance(w);
    let sd = var.sqrt();
    let excess = est.portfolio_return(w) - rf;
    (0..n)
        .map(|i| {
            let sw: f64 = (0..n).map(|j| est.cov_at(i, j) * w[j]).sum();
            est.mean[i] / sd - excess * sw / (sd * var)
        })
        .collect()
}

fn ascend(est: &ReturnEstimate, rf: f64, start: Vec<f64>) -> (Vec<f64>, f64) {
    let mut w = start;
    let Some(mut sr) = est.sharpe(&w, rf) else {
        return (w, f64::NEG_INFINITY);
    };
    let mut step = 1.0;
    for _ in 0..2000 {
        let g = sharpe_gradient(est, &w, rf);
        let mut improved = false;
        while step > 1e-14 {
            let trial: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a + step * b).collect();
            let trial = project_simplex(&trial);
            if let Some(s) = est.sharpe(&trial, rf) {
                if s > sr {
                    let moved: f64 = trial.iter().zip(&w).map(|(a, b)| (a - b).abs()).sum();
                    w = trial;
                    let gain = s - sr;
                    sr = s;
                    improved = moved > 1e-13 && gain > 1e-15;
                    step *= 2.0;
                    break;
                }
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (w, sr)
}

/// Long-only weights maximizing `(w'r - r_f) / sqrt(w' Cov w)`.
///
/// Projected-gradient ascent from the equal-weight point, every vertex, and
/// a few fixed pseudo-random interior points; a later start replaces the
/// incumbent only if strictly better, so flat objectives return equal weights.
pub fn max_sharpe(est: &ReturnEstimate, rf: f64) -> Result<Vec<f64>> {
    let n = est.n_assets();
    if n == 0 {
        return Err(Error::InsufficientData("no assets".into()));
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    // Riskless assets that beat the risk-free rate have unbounded Sharpe.
    let riskless_best = (0..n)
        .filter(|&i| est.cov_at(i, i).sqrt() < RISK_FLOOR && est.mean[i] > rf)
        .max_by(|&a, &b| est.mean[a].total_cmp(&est.mean[b]));
    if let Some(i) = riskless_best {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        return Ok(w);
    }

    let mut starts = vec![vec![1.0 / n as f64; n]];
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        starts.push(e);
    }
    let mut rng = RandomSource::seeded(0x5eed);
    for _ in 0..8 {
        let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.uniform::<f64>()).ln()).collect();
        let s: f64 = raw.iter().sum();
        starts.push(raw.into_iter().map(|x| x / s).collect());
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in starts {
        let (w, sr) = ascend(est, rf, start);
        if sr.is_finite() && best.as_ref().is_none_or(|(_, b)| sr > *b + 1e-12) {
            best = Some((w, sr));
        }
    }
    match best {
        Some((mut w, _)) => {
            w.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= s);
            Ok(w)
        }
        None => Err(Error::DegenerateRisk(
            "portfolio volatility is zero for every candidate allocation".into(),
        )),
    }
}

/// Annualized Sharpe ratio of per-period returns: mean excess over the
/// sample standard deviation, times `sqrt(periods_per_year)`.
pub fn sharpe_ratio(returns: &[f64], rf: f64, periods_per_year: usize) -> Result<f64> {
    if returns.len() < 2 {
        return Err(Error::InsufficientData("Sharpe ratio needs at least two returns".into()));
    }
    let n = returns.len() as f64;
    let mean = returns.iter().map(|r| r - rf).sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - rf - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if !(sd >= RISK_FLOOR) {
        return Err(Error::UndefinedStatistic("Sharpe ratio with zero volatility".into()));
    }
    Ok(mean / sd * (periods_per_year as f64).sqrt())
}

/// Rebalance days `h, h + eta, ...` below `k`; at least one full holding
/// period must fit.
pub fn rebalance_days(k: usize, h: usize, eta: usize) -> Result<Vec<usize>> {
    if eta == 0 {
        return Err(Error::Config("rebalance interval must be >= 1".into()));
    }
    if h == 0 || k < h + eta {
        return Err(Error::InsufficientData(format!(
            "backtest needs at least h + eta = {} days, have {k}",
            h + eta
        )));
    }
    Ok((h..k).step_by(eta).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregation {
    /// Average the per-draw weights.
    Mean,
    /// Use the weights of a single draw (0-based).
    Draw(usize),
}

/// Max-Sharpe weights of one draw at rebalance day `t`, estimated from the
/// generated block `Y[:, t .. t + eta)`. Near the end of the horizon the block
/// is shifted back so that it holds at least three prices.
pub fn draw_weights<S: Scalar>(draw: &Tensor<S>, t: usize, eta: usize, rf: f64) -> Result<Vec<f64>> {
    let k = draw.cols();
    let end = (t + eta).min(k);
    let start = t.min(end.saturating_sub(3));
    let est = estimate_returns(&draw.slice_cols(start, end - start)?)?;
    max_sharpe(&est, rf)
}

/// Per-draw weights at rebalance day `t`; failing draws are `None`.
pub fn per_draw_weights<S: Scalar>(set: &ScenarioSet<S>, t: usize, eta: usize, rf: f64) -> Vec<Option<Vec<f64>>> {
    set.draws
        .iter()
        .enumerate()
        .map(|(r, d)| match draw_weights(d, t, eta, rf) {
            Ok(w) => Some(w),
            Err(e) => {
                warn!("draw {} dropped at day {t}: {e}", r + 1);
                None
            }
        })
        .collect()
}

/// Running mean of the surviving weight vectors, renormalized only if the
/// sum drifted from 1.
pub fn mean_weights(weights: &[Option<Vec<f64>>]) -> Result<Vec<f64>> {
    let mut acc: Option<Vec<f64>> = None;
    let mut count = 0usize;
    for w in weights.iter().flatten() {
        count += 1;
        match acc.as_mut() {
            None => acc = Some(w.clone()),
            Some(m) => {
                for (mi, wi) in m.iter_mut().zip(w) {
                    *mi += (wi - *mi) / count as f64;
                }
            }
        }
    }
    let mut m = acc.ok_or_else(|| Error::DegenerateRisk("every scenario draw failed".into()))?;
    let s: f64 = m.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        m.iter_mut().for_each(|x| *x /= s);
    }
    Ok(m)
}

pub fn scenario_weights<S: Scalar>(
    set: &ScenarioSet<S>,
    t: usize,
    eta: usize,
    how: Aggregation,
    rf: f64,
) -> Result<Vec<f64>> {
    match how {
        Aggregation::Mean => mean_weights(&per_draw_weights(set, t, eta, rf)),
        Aggregation::Draw(r) => {
            let d = set.draws.get(r).ok_or(Error::OutOfRange {
                index: r,
                len: set.draws.len(),
            })?;
            draw_weights(d, t, eta, rf)
        }
    }
}

pub enum Strategy<'a, S> {
    /// Max-Sharpe on the trailing `h` true days; equal weights if that is
    /// degenerate.
    Markowitz,
    Scenario {
        set: &'a ScenarioSet<S>,
        how: Aggregation,
    },
    Fixed(Vec<f64>),
    /// Weights precomputed for each rebalance day.
    Schedule(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BacktestReport {
    pub label: String,
    pub eta: usize,
    /// First day of the equity curve (0-based); the curve has one value per
    /// day from there to the end of the horizon.
    pub first_day: usize,
    pub equity: Vec<f64>,
    pub annual_return: f64,
    pub sharpe: Option<f64>,
    /// `(rebalance day, weights)`.
    pub rebalances: Vec<(usize, Vec<f64>)>,
}

impl BacktestReport {
    pub fn final_value(&self) -> f64 {
        *self.equity.last().expect("non-empty equity curve")
    }

    pub fn daily_returns(&self) -> Vec<f64> {
        self.equity.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
    }
}

fn markowitz_weights<S: Scalar>(x: &PriceMatrix<S>, t: usize, h: usize, rf: f64) -> Result<Vec<f64>> {
    let est = estimate_returns(&x.values().slice_cols(t - h, h)?)?;
    match max_sharpe(&est, rf) {
        Ok(w) => Ok(w),
        Err(Error::DegenerateRisk(_)) => {
            let n = x.n_assets();
            Ok(vec![1.0 / n as f64; n])
        }
        Err(e) => Err(e),
    }
}

fn check_weights(w: &[f64], n: usize) -> Result<()> {
    if w.len() != n {
        return Err(Error::Dimension {
            op: "weights",
            left: (n, 1),
            right: (w.len(), 1),
        });
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-9 || w.iter().any(|&x| !(-1e-12..=1.0 + 1e-12).contains(&x)) {
        return Err(Error::Parameter(format!("weights {w:?} are not on the simplex")));
    }
    Ok(())
}

/// Rebalanced buy-and-hold: on each rebalance day `t` the portfolio value at
/// the close of `t - 1` is split by the strategy's weights into asset units,
/// which then drift with prices until the next rebalance.
pub fn backtest<S: Scalar>(
    x: &PriceMatrix<S>,
    strategy: &Strategy<S>,
    label: &str,
    eta: usize,
    h: usize,
) -> Result<BacktestReport> {
    let k = x.n_days();
    let n = x.n_assets();
    let days = rebalance_days(k, h, eta)?;
    if let Strategy::Scenario { set, .. } = strategy {
        if set.reference.n_days() != k || set.reference.n_assets() != n {
            return Err(Error::Dimension {
                op: "backtest (scenarios vs test prices)",
                left: (n, k),
                right: (set.reference.n_assets(), set.reference.n_days()),
            });
        }
    }
    if let Strategy::Schedule(s) = strategy {
        if s.len() != days.len() {
            return Err(Error::Dimension {
                op: "backtest (schedule length)",
                left: (days.len(), 1),
                right: (s.len(), 1),
            });
        }
    }
    let price = |a: usize, d: usize| x.values().get(a, d).as_f64();

    let mut equity = Vec::with_capacity(k - h + 1);
    equity.push(1.0);
    let mut value = 1.0;
    let mut units = vec![0.0; n];
    let mut rebalances = Vec::with_capacity(days.len());
    let mut next = 0;
    for d in h..k {
        if next < days.len() && days[next] == d {
            let w = match strategy {
                Strategy::Markowitz => markowitz_weights(x, d, h, 0.0)?,
                Strategy::Scenario { set, how } => scenario_weights(set, d, eta, *how, 0.0)?,
                Strategy::Fixed(w) => w.clone(),
                Strategy::Schedule(s) => s[next].clone(),
            };
            check_weights(&w, n)?;
            for a in 0..n {
                units[a] = value * w[a] / price(a, d - 1);
            }
            rebalances.push((d, w));
            next += 1;
        }
        value = (0..n).map(|a| units[a] * price(a, d)).sum();
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonFinite(format!("portfolio value {value} on day {d}")));
        }
        equity.push(value);
    }
    let years = (k - h) as f64 / TRADING_DAYS as f64;
    let report = BacktestReport {
        label: label.to_string(),
        eta,
        first_day: h - 1,
        annual_return: value.powf(1.0 / years) - 1.0,
        sharpe: None,
        equity,
        rebalances,
    };
    let sharpe = sharpe_ratio(&report.daily_returns(), 0.0, TRADING_DAYS).ok();
    Ok(BacktestReport { sharpe, ..report })
}

/// Per-draw weights for every rebalance day: `[rebalance][draw]`.
pub fn weight_table<S: Scalar>(set: &ScenarioSet<S>, h: usize, eta: usize) -> Result<Vec<Vec<Option<Vec<f64>>>>> {
    let days = rebalance_days(set.reference.n_days(), h, eta)?;
    Ok(days.iter().map(|&t| per_draw_weights(set, t, eta, 0.0)).collect())
}

/// Mean-strategy schedule and one schedule per draw from a weight table.
/// A draw that failed on some day falls back to the mean weights there.
pub fn schedules(table: &[Vec<Option<Vec<f64>>>]) -> Result<(Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>)> {
    let mean: Vec<Vec<f64>> = table.iter().map(|row| mean_weights(row)).collect::<Result<_>>()?;
    let draws = table.first().map_or(0, Vec::len);
    let per_draw = (0..draws)
        .map(|r| {
            table
                .iter()
                .zip(&mean)
                .map(|(row, m)| row[r].clone().unwrap_or_else(|| m.clone()))
                .collect()
        })
        .collect();
    Ok((mean, per_draw))
}

/// Summary row of a comparison table.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub annual_return: f64,
    pub sharpe: Option<f64>,
    pub final_value: f64,
    pub benchmark: bool,
}

/// Strategy rows followed by buy-and-hold rows for each benchmark ticker.
pub fn compare_report<S: Scalar>(
    x: &PriceMatrix<S>,
    reports: &[BacktestReport],
    benchmarks: &[String],
    h: usize,
) -> Result<(Vec<ComparisonRow>, Vec<BacktestReport>)> {
    let mut rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|r| ComparisonRow {
            label: r.label.clone(),
            annual_return: r.annual_return,
            sharpe: r.sharpe,
            final_value: r.final_value(),
            benchmark: false,
        })
        .collect();
    if let Some(first) = reports.first() {
        if reports.iter().any(|r| r.equity.len() != first.equity.len()) {
            return Err(Error::Dimension {
                op: "compare_report (horizons)",
                left: (first.equity.len(), 1),
                right: (reports.iter().map(|r| r.equity.len()).max().unwrap_or(0), 1),
            });
        }
    }
    let mut curves = Vec::with_capacity(benchmarks.len());
    for b in benchmarks {
        let a = x
            .tickers()
            .iter()
            .position(|t| t == b)
            .ok_or_else(|| Error::Config(format!("benchmark `{b}` is not a column of the test file")))?;
        let mut w = vec![0.0; x.n_assets()];
        w[a] = 1.0;
        let r = backtest(x, &Strategy::Fixed(w), b, x.n_days().saturating_sub(h).max(1), h)?;
        rows.push(ComparisonRow {
            label: b.clone(),
            annual_return: r.annual_return,
            sharpe: r.sharpe,
            final_value: r.final_value(),
            benchmark: true,
        });
        curves.push(r);
    }
    Ok((rows, curves))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(mean: Vec<f64>, cov: Vec<f64>) -> ReturnEstimate {
        ReturnEstimate { mean, cov, days: 10 }
    }

    #[test]
    fn projection_lands_on_simplex() {
        let w = project_simplex(&[0.3, -2.0, 5.0, 0.1]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(w, vec![0.0, 0.0, 1.0, 0.0]);
        let w = project_simplex(&[0.2, 0.3, 0.5]);
        assert!((w[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_asset_and_flat_objective() {
        assert_eq!(max_sharpe(&est(vec![0.01], vec![4e-4]), 0.0).unwrap(), vec![1.0]);
        let e = est(vec![0.001, 0.001], vec![1e-4, 1e-4, 1e-4, 1e-4]);
        assert_eq!(max_sharpe(&e, 0.0).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn riskless_winner_takes_all() {
        let e = est(vec![0.001, 0.002], vec![0.0, 0.0, 0.0, 1e-4]);
        assert_eq!(max_sharpe(&e, 0.0).unwrap(), vec![1.0, 0.0]);
        let flat = est(vec![0.0, 0.0], vec![0.0; 4]);
        assert!(matches!(max_sharpe(&flat, 0.0), Err(Error::DegenerateRisk(_))));
    }

    #[test]
    fn tangency_portfolio_for_uncorrelated_assets() {
        // Unconstrained optimum is proportional to Cov^-1 r = (10, 10) / ... -> equal.
        let e = est(vec![0.001, 0.004], vec![1e-4, 0.0, 0.0, 4e-4]);
        let w = max_sharpe(&e, 0.0).unwrap();
        // Cov^-1 r = (10, 10): equal weights.
        assert!((w[0] - 0.5).abs() < 1e-6, "{w:?}");
    }

    #[test]
    fn sharpe_examples() {
        // Alternating returns 0.001 +- 0.01 * sqrt((n-1)/n) have sample sd 0.01.
        let n = 1000;
        let a = 0.01 * ((n - 1) as f64 / n as f64).sqrt();
        let r: Vec<f64> = (0..n).map(|i| 0.001 + if i % 2 == 0 { a } else { -a }).collect();
        let sr = sharpe_ratio(&r, 0.0, 252).unwrap();
        assert!((sr - 0.1 * 252f64.sqrt()).abs() < 1e-9, "{sr}");
        assert!((sr - 1.587).abs() < 1e-3);
        let m = r.iter().sum::<f64>() / n as f64;
        assert!(sharpe_ratio(&r, m, 252).unwrap().abs() < 1e-9);
        assert!(matches!(sharpe_ratio(&[0.01; 5], 0.0, 252), Err(Error::UndefinedStatistic(_))));
    }

    #[test]
    fn rebalance_counts() {
        assert_eq!(rebalance_days(800, 40, 20).unwrap().len(), 38);
        assert_eq!(rebalance_days(800, 40, 10).unwrap().len(), 76);
        assert_eq!(rebalance_days(60, 40, 20).unwrap(), vec![40]);
        assert!(rebalance_days(59, 40, 20).is_err());
    }

    #[test]
    fn mean_of_identical_draws_is_exact() {
        let w = vec![0.2, 0.3, 0.5];
        let rows = vec![Some(w.clone()); 7];
        assert_eq!(mean_weights(&rows).unwrap(), w);
        let rows = vec![None, Some(vec![1.0, 0.0, 0.0]), Some(vec![0.0, 0.5, 0.5])];
        let m = mean_weights(&rows).unwrap();
        assert_eq!(m, vec![0.5, 0.25, 0.25]);
        assert!(mean_weights(&[None, None]).is_err());
    }

    #[test]
    fn covariance_of_correlated_assets() {
        let p = Tensor::from_rows(&[vec![1.0, 1.1, 1.05, 1.2, 1.3], vec![2.0, 2.2, 2.1, 2.4, 2.6]]).unwrap();
        let e = estimate_returns(&p).unwrap();
        let corr = e.cov_at(0, 1) / (e.cov_at(0, 0) * e.cov_at(1, 1)).sqrt();
        assert!((corr - 1.0).abs() < 1e-12);
        let flat = Tensor::from_rows(&[vec![3.0; 5], vec![4.0; 5]]).unwrap();
        let e = estimate_returns(&flat).unwrap();
        assert!(e.mean.iter().chain(&e.cov).all(|&v| v == 0.0));
        assert!(estimate_returns(&Tensor::<f64>::filled(2, 2, 1.0)).is_err());
    }

    #[test]
    fn jacobi_reconstructs() {
        let a = vec![4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1.0];
        let (vals, vecs) = symmetric_eigen(&a, 3);
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3).map(|k| vecs[i * 3 + k] * vals[k] * vecs[j * 3 + k]).sum();
                assert!((r - a[i * 3 + j]).abs() < 1e-12);
            }
        }
    }
}
