//! Price histories, window slicing and 3-sigma normalization.
//!
//! Day indices in this module are 1-based, as in the training/inference
//! index sets: window `i` covers days `i ..= i + w - 1`.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};

use crate::error::{Error, Result};
use crate::random::RandomSource;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const DATE_FORMAT: &str = "%Y-%m-%d";

/// Adjusted closing prices, one row per asset and one column per trading day.
#[derive(Clone, Debug, PartialEq)]
pub struct PriceMatrix<S> {
    tickers: Vec<String>,
    dates: Vec<NaiveDate>,
    values: Tensor<S>,
}

impl<S: Scalar> PriceMatrix<S> {
    pub fn new(tickers: Vec<String>, dates: Vec<NaiveDate>, values: Tensor<S>) -> Result<Self> {
        if values.shape() != (tickers.len(), dates.len()) {
            return Err(Error::Dimension {
                op: "price matrix",
                left: (tickers.len(), dates.len()),
                right: values.shape(),
            });
        }
        if tickers.is_empty() || dates.is_empty() {
            return Err(Error::Config("price matrix needs at least one asset and one day".into()));
        }
        for (row, pair) in dates.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(Error::Ordering {
                    row: row + 2,
                    date: pair[1].format(DATE_FORMAT).to_string(),
                });
            }
        }
        for (a, ticker) in tickers.iter().enumerate() {
            if let Some(day) = values.row(a).iter().position(|&p| p <= S::zero()) {
                return Err(Error::Domain(format!(
                    "non-positive price {} for {ticker} on {}",
                    values.get(a, day),
                    dates[day].format(DATE_FORMAT)
                )));
            }
        }
        Ok(PriceMatrix { tickers, dates, values })
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &Tensor<S> {
        &self.values
    }

    /// Price path of one asset.
    pub fn series(&self, asset: usize) -> &[S] {
        self.values.row(asset)
    }

    /// Columns for days `first ..= first + len - 1` (1-based), as an `N x len` block.
    pub fn block(&self, first: usize, len: usize) -> Result<Tensor<S>> {
        if first == 0 || first + len - 1 > self.n_days() {
            return Err(Error::OutOfRange {
                index: first + len.saturating_sub(1),
                len: self.n_days(),
            });
        }
        self.values.slice_cols(first - 1, len)
    }

    /// Same assets and dates with replaced values.
    pub fn with_values(&self, values: Tensor<S>) -> Result<Self> {
        PriceMatrix::new(self.tickers.clone(), self.dates.clone(), values)
    }
}

/// Parses a wide price file: header `date,<ticker>...`, one row per day.
pub fn read_prices<S: Scalar>(reader: impl Read) -> Result<PriceMatrix<S>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Ingest {
            row: 1,
            column: String::new(),
            message: e.to_string(),
        })?
        .clone();
    if header.len() < 2 || !header[0].eq_ignore_ascii_case("date") {
        return Err(Error::Ingest {
            row: 1,
            column: header.get(0).unwrap_or("").to_string(),
            message: "header must be `date` followed by tickers".into(),
        });
    }
    let tickers: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut dates = Vec::new();
    let mut columns: Vec<Vec<S>> = vec![Vec::new(); tickers.len()];

    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Ingest {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(Error::Ingest {
                row,
                column: String::new(),
                message: format!("expected {} cells, found {}", header.len(), record.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&record[0], DATE_FORMAT).map_err(|e| Error::Ingest {
            row,
            column: "date".into(),
            message: format!("bad date `{}`: {e}", &record[0]),
        })?;
        if let Some(&prev) = dates.last() {
            if date <= prev {
                return Err(Error::Ordering {
                    row,
                    date: record[0].to_string(),
                });
            }
        }
        dates.push(date);
        for (a, cell) in record.iter().skip(1).enumerate() {
            let column = || tickers[a].clone();
            if cell.is_empty() {
                return Err(Error::Ingest {
                    row,
                    column: column(),
                    message: "missing value".into(),
                });
            }
            let v: f64 = cell.parse().map_err(|_| Error::Ingest {
                row,
                column: column(),
                message: format!("not a number: `{cell}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Ingest {
                    row,
                    column: column(),
                    message: format!("non-finite value `{cell}`"),
                });
            }
            if v <= 0.0 {
                return Err(Error::Domain(format!(
                    "non-positive price {cell} at row {row}, column {}",
                    column()
                )));
            }
            columns[a].push(S::lit(v));
        }
    }
    if dates.is_empty() {
        return Err(Error::Ingest {
            row: 2,
            column: String::new(),
            message: "no data rows".into(),
        });
    }
    let d = dates.len();
    let values = Tensor::new(tickers.len(), d, columns.concat())?;
    PriceMatrix::new(tickers, dates, values)
}

pub fn load_prices<S: Scalar>(path: impl AsRef<Path>) -> Result<PriceMatrix<S>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_prices(std::io::BufReader::new(file))
}

/// Writes the wide format read by [`read_prices`]. Values use the shortest
/// representation that parses back to the same number.
pub fn write_prices<S: Scalar>(prices: &PriceMatrix<S>, mut out: impl Write) -> std::io::Result<()> {
    let mut line = String::from("date");
    for t in &prices.tickers {
        line.push(',');
        line.push_str(t);
    }
    writeln!(out, "{line}")?;
    for (d, date) in prices.dates.iter().enumerate() {
        line.clear();
        line.push_str(&date.format(DATE_FORMAT).to_string());
        for a in 0..prices.n_assets() {
            line.push(',');
            line.push_str(&prices.values.get(a, d).to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn save_prices<S: Scalar>(prices: &PriceMatrix<S>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    write_prices(prices, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowConfig {
    pub h: usize,
    pub f: usize,
}

impl WindowConfig {
    pub fn new(h: usize, f: usize) -> Result<Self> {
        if h < 2 || f < 1 {
            return Err(Error::Config(format!("window needs h >= 2 and f >= 1, got h={h}, f={f}")));
        }
        Ok(WindowConfig { h, f })
    }

    pub fn w(&self) -> usize {
        self.h + self.f
    }
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { h: 40, f: 20 }
    }
}

/// Per-asset mean and floored population standard deviation of a history block.
#[derive(Clone, Debug, PartialEq)]
pub struct NormStats<S> {
    pub mean: Vec<S>,
    pub std: Vec<S>,
}

impl<S: Scalar> NormStats<S> {
    /// `sigma` is floored at `1e-8 * max(1, mu)`.
    pub fn from_history(history: &Tensor<S>) -> Result<Self> {
        let n = history.cols();
        if n == 0 {
            return Err(Error::Config("empty history block".into()));
        }
        let len = S::from_usize_lossy(n);
        let mut mean = Vec::with_capacity(history.rows());
        let mut std = Vec::with_capacity(history.rows());
        for r in 0..history.rows() {
            let row = history.row(r);
            let mu = row.iter().copied().sum::<S>() / len;
            let var = row.iter().map(|&p| (p - mu) * (p - mu)).sum::<S>() / len;
            let floor = S::lit(1e-8) * mu.max(S::one());
            mean.push(mu);
            std.push(var.sqrt().max(floor));
        }
        Ok(NormStats { mean, std })
    }

    pub fn n_assets(&self) -> usize {
        self.mean.len()
    }

    fn check(&self, block: &Tensor<S>, op: &'static str) -> Result<()> {
        if block.rows() != self.n_assets() {
            return Err(Error::Dimension {
                op,
                left: block.shape(),
                right: (self.n_assets(), block.cols()),
            });
        }
        Ok(())
    }

    /// `(p - mu) / (3 sigma)` row by row.
    pub fn normalize(&self, block: &Tensor<S>) -> Result<Tensor<S>> {
        self.check(block, "normalize")?;
        let three = S::lit(3.0);
        let out = Tensor::from_fn(block.rows(), block.cols(), |r, c| {
            (block.get(r, c) - self.mean[r]) / (three * self.std[r])
        });
        out.ensure_finite("normalize")?;
        Ok(out)
    }

    /// `p * 3 sigma + mu` row by row.
    pub fn denormalize(&self, block: &Tensor<S>) -> Result<Tensor<S>> {
        self.check(block, "denormalize")?;
        let three = S::lit(3.0);
        let out = Tensor::from_fn(block.rows(), block.cols(), |r, c| {
            block.get(r, c) * three * self.std[r] + self.mean[r]
        });
        out.ensure_finite("denormalize")?;
        Ok(out)
    }
}

pub fn denormalize<S: Scalar>(series: &Tensor<S>, stats: &NormStats<S>) -> Result<Tensor<S>> {
    stats.denormalize(series)
}

/// One normalized (history, future) pair. `index` is the 1-based first day.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSample<S> {
    pub history: Tensor<S>,
    pub future: Option<Tensor<S>>,
    pub stats: NormStats<S>,
    pub index: usize,
}

/// Training window starts `1 ..= D - w + 1`.
pub fn training_indices(d: usize, w: usize) -> Result<Vec<usize>> {
    if w == 0 || d < w {
        return Err(Error::Config(format!("need at least w={w} days, have {d}")));
    }
    Ok((1..=d - w + 1).collect())
}

/// A run of generated days: `len` columns starting at 1-based day `start`.
/// `len < f` only for the trailing remainder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
}

/// Full inference blocks `h+1, h+f+1, ...` whose last day is at most `K`.
pub fn inference_indices(k: usize, cfg: WindowConfig) -> Result<Vec<usize>> {
    if k < cfg.w() {
        return Err(Error::Config(format!(
            "test horizon {k} shorter than window {}",
            cfg.w()
        )));
    }
    Ok((cfg.h + 1..=k + 1 - cfg.f).step_by(cfg.f).collect())
}

/// Every generated segment of an inference pass, including a truncated
/// trailing one when `f` does not divide `K - h`.
pub fn inference_segments(k: usize, cfg: WindowConfig) -> Result<Vec<Segment>> {
    let mut segs: Vec<Segment> = inference_indices(k, cfg)?
        .into_iter()
        .map(|start| Segment { start, len: cfg.f })
        .collect();
    let covered = segs.last().map_or(cfg.h, |s| s.start + s.len - 1);
    if covered < k {
        segs.push(Segment {
            start: covered + 1,
            len: k - covered,
        });
    }
    Ok(segs)
}

/// Window starting at 1-based day `i`: history is days `i .. i+h-1`, future
/// the following `f` days. Both are normalized with statistics of the history.
pub fn extract_window<S: Scalar>(
    prices: &PriceMatrix<S>,
    i: usize,
    cfg: WindowConfig,
    with_future: bool,
) -> Result<WindowSample<S>> {
    let need = if with_future { cfg.w() } else { cfg.h };
    if i == 0 || i + need - 1 > prices.n_days() {
        return Err(Error::OutOfRange {
            index: i,
            len: prices.n_days(),
        });
    }
    let raw_history = prices.block(i, cfg.h)?;
    let stats = NormStats::from_history(&raw_history)?;
    let history = stats.normalize(&raw_history)?;
    let future = if with_future {
        Some(stats.normalize(&prices.block(i + cfg.h, cfg.f)?)?)
    } else {
        None
    };
    Ok(WindowSample {
        history,
        future,
        stats,
        index: i,
    })
}

/// Business days (Mon-Fri) starting at `first`, or the next weekday after it.
pub fn business_days(first: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = first;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

/// Parameters of an independent geometric Brownian motion per asset, in
/// daily units.
#[derive(Clone, Debug, PartialEq)]
pub struct GbmParams {
    pub initial: Vec<f64>,
    pub drift: Vec<f64>,
    pub volatility: Vec<f64>,
}

impl GbmParams {
    /// `n` assets with slightly different drifts and volatilities.
    pub fn spread(n: usize) -> Self {
        GbmParams {
            initial: (0..n).map(|i| 50.0 + 25.0 * i as f64).collect(),
            drift: (0..n).map(|i| 2e-4 + 1e-4 * i as f64).collect(),
            volatility: (0..n).map(|i| 0.01 + 0.004 * i as f64).collect(),
        }
    }
}

/// Exact GBM sampling: `p_{t+1} = p_t exp((mu - sigma^2/2) + sigma z)`.
pub fn simulate_gbm<S: Scalar>(
    params: &GbmParams,
    days: usize,
    start: NaiveDate,
    rng: &mut RandomSource,
) -> Result<PriceMatrix<S>> {
    let n = params.initial.len();
    if params.drift.len() != n || params.volatility.len() != n || days == 0 {
        return Err(Error::Config("inconsistent GBM parameters".into()));
    }
    let mut values = vec![0.0f64; n * days];
    for a in 0..n {
        values[a * days] = params.initial[a];
    }
    for t in 1..days {
        for a in 0..n {
            let sigma = params.volatility[a];
            let z: f64 = rng.normal();
            let step = (params.drift[a] - 0.5 * sigma * sigma) + sigma * z;
            values[a * days + t] = values[a * days + t - 1] * step.exp();
        }
    }
    let tickers = (0..n).map(|a| format!("A{}", a + 1)).collect();
    let values = Tensor::new(n, days, values.into_iter().map(S::lit).collect())?;
    PriceMatrix::new(tickers, business_days(start, days), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, DATE_FORMAT).unwrap()
    }

    #[test]
    fn reads_happy_path() {
        let csv = "date,AAA,BBB\n2020-01-02,1.5,10\n2020-01-03,1.6,11\n2020-01-06,1.7,12\n";
        let m: PriceMatrix<f64> = read_prices(csv.as_bytes()).unwrap();
        assert_eq!(m.n_assets(), 2);
        assert_eq!(m.n_days(), 3);
        assert_eq!(m.series(1), &[10.0, 11.0, 12.0]);
        assert_eq!(m.dates()[2], date("2020-01-06"));
    }

    #[test]
    fn empty_cell_names_row_and_column() {
        let csv = "date,AAA,BBB\n2020-01-02,1.5,10\n2020-01-03,,11\n";
        match read_prices::<f64>(csv.as_bytes()) {
            Err(Error::Ingest { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "AAA");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_unordered_dates_and_bad_prices() {
        let csv = "date,AAA\n2020-01-03,1\n2020-01-02,1\n";
        assert!(matches!(read_prices::<f64>(csv.as_bytes()), Err(Error::Ordering { row: 3, .. })));
        let csv = "date,AAA\n2020-01-02,1\n2020-01-02,1\n";
        assert!(matches!(read_prices::<f64>(csv.as_bytes()), Err(Error::Ordering { .. })));
        let csv = "date,AAA\n2020-01-02,0\n";
        assert!(matches!(read_prices::<f64>(csv.as_bytes()), Err(Error::Domain(_))));
        let csv = "date,AAA\n2020-01-02,-3\n";
        assert!(matches!(read_prices::<f64>(csv.as_bytes()), Err(Error::Domain(_))));
    }

    #[test]
    fn write_then_read_is_exact() {
        let mut rng = RandomSource::seeded(3);
        let m: PriceMatrix<f64> = simulate_gbm(&GbmParams::spread(10), 800, date("2015-01-02"), &mut rng).unwrap();
        let mut buf = Vec::new();
        write_prices(&m, &mut buf).unwrap();
        let back: PriceMatrix<f64> = read_prices(buf.as_slice()).unwrap();
        assert_eq!(back.n_assets(), 10);
        assert_eq!(back.n_days(), 800);
        assert_eq!(back, m);
    }

    #[test]
    fn training_index_sets() {
        assert_eq!(training_indices(100, 60).unwrap(), (1..=41).collect::<Vec<_>>());
        assert_eq!(training_indices(60, 60).unwrap(), vec![1]);
        assert!(training_indices(60, 61).is_err());
    }

    #[test]
    fn inference_index_sets() {
        let cfg = WindowConfig::new(40, 20).unwrap();
        let s2 = inference_indices(800, cfg).unwrap();
        assert_eq!(s2.len(), 38);
        assert_eq!(s2[0], 41);
        assert_eq!(s2[1], 61);
        assert_eq!(*s2.last().unwrap(), 781);
        assert_eq!(inference_indices(60, cfg).unwrap(), vec![41]);
        assert!(inference_indices(59, cfg).is_err());

        let segs = inference_segments(805, cfg).unwrap();
        assert_eq!(segs.len(), 39);
        assert_eq!(segs[37], Segment { start: 781, len: 20 });
        assert_eq!(segs[38], Segment { start: 801, len: 5 });
        assert_eq!(inference_segments(800, cfg).unwrap().len(), 38);
    }

    #[test]
    fn hand_normalization() {
        let csv = "date,AAA\n2020-01-02,1\n2020-01-03,3\n2020-01-06,5\n";
        let m: PriceMatrix<f64> = read_prices(csv.as_bytes()).unwrap();
        let cfg = WindowConfig::new(2, 1).unwrap();
        let w = extract_window(&m, 1, cfg, true).unwrap();
        assert_eq!(w.stats.mean, vec![2.0]);
        assert_eq!(w.stats.std, vec![1.0]);
        assert_eq!(w.history.data(), &[-1.0 / 3.0, 1.0 / 3.0]);
        // The future uses the history's statistics: (5 - 2) / 3.
        assert_eq!(w.future.unwrap().data(), &[1.0]);
    }

    #[test]
    fn constant_history_is_floored() {
        let csv = "date,AAA\n2020-01-02,7\n2020-01-03,7\n2020-01-06,7\n";
        let m: PriceMatrix<f64> = read_prices(csv.as_bytes()).unwrap();
        let w = extract_window(&m, 1, WindowConfig::new(2, 1).unwrap(), false).unwrap();
        assert_eq!(w.stats.std, vec![7e-8]);
        assert!(w.history.data().iter().all(|&x| x == 0.0));
        assert!(w.future.is_none());
    }

    #[test]
    fn denormalize_examples() {
        let stats = NormStats { mean: vec![2.0, -1.0], std: vec![1.0, 4.0] };
        let zeros = Tensor::zeros(2, 3);
        let out = denormalize(&zeros, &stats).unwrap();
        assert_eq!(out.row(0), &[2.0; 3]);
        assert_eq!(out.row(1), &[-1.0; 3]);
        let third = Tensor::from_rows(&[vec![1.0 / 3.0]]).unwrap();
        let one = NormStats { mean: vec![2.0], std: vec![1.0] };
        assert_eq!(one.denormalize(&third).unwrap().data(), &[3.0]);
        assert!(one.denormalize(&zeros).is_err());
    }

    #[test]
    fn out_of_range_window() {
        let mut rng = RandomSource::seeded(1);
        let m: PriceMatrix<f64> = simulate_gbm(&GbmParams::spread(2), 10, date("2020-01-01"), &mut rng).unwrap();
        let cfg = WindowConfig::new(4, 2).unwrap();
        assert!(extract_window(&m, 5, cfg, true).is_ok());
        assert!(matches!(extract_window(&m, 6, cfg, true), Err(Error::OutOfRange { .. })));
        assert!(extract_window(&m, 7, cfg, false).is_ok());
        assert!(extract_window(&m, 0, cfg, false).is_err());
    }

    #[test]
    fn business_days_skip_weekends() {
        let d = business_days(date("2021-01-01"), 3);
        assert_eq!(d, vec![date("2021-01-01"), date("2021-01-04"), date("2021-01-05")]);
    }
}
