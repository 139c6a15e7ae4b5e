use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::info;

use acgan::checkpoint;
use acgan::config::RunConfig;
use acgan::data::{load_prices, simulate_gbm, write_prices, GbmParams, PriceMatrix};
use chrono::NaiveDate;
use acgan::facts::{self, evaluate_scenarios, log_returns, CROSS_LABELS, LAGS, ROW_LABELS};
use acgan::gan::{build_networks, train_with, GanDims, GanMode, LossRecord};
use acgan::portfolio::{backtest, compare_report, schedules, weight_table, BacktestReport, ComparisonRow, Strategy};
use acgan::random::RandomSource;
use acgan::scenario::{
    export_scenarios, file_sha256, generate_scenarios, load_scenarios, parse_key_values, ScenarioOptions, MANIFEST,
};
use acgan::svg::{line_chart, scatter_chart, Series};
use acgan::{Error, ScenarioSet64};

/// Train CGAN/ACGAN scenario generators, generate synthetic price paths,
/// score them and backtest Sharpe-maximizing portfolios.
#[derive(Parser)]
#[command(name = "acgan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Command {
    /// Train a generator on the train file; writes a checkpoint, loss table and config echo.
    Train,
    /// Generate scenario draws over the test file from a checkpoint.
    Generate,
    /// Stylized facts of real vs generated returns, and Pearson correlations.
    Stats,
    /// Backtest Markowitz and scenario strategies for each rebalance interval.
    Backtest,
    /// Render SVG charts from the plot-data files in the output directory.
    Report,
    /// Write a seeded geometric-Brownian price file split into train and test parts.
    Simulate {
        #[arg(long, default_value_t = 4)]
        assets: usize,
        /// Days in the train part.
        #[arg(long, default_value_t = 1000)]
        train_days: usize,
        /// Days in the test part, which follows the train part.
        #[arg(long, default_value_t = 400)]
        test_days: usize,
    },
}

#[derive(Args)]
struct Flags {
    /// Key-value configuration file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// cgan or acgan.
    #[arg(long, global = true)]
    mode: Option<GanMode>,
    /// Number of scenario draws.
    #[arg(long, global = true)]
    draws: Option<usize>,
    /// Rebalance intervals in days, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    eta: Vec<usize>,
    /// Output directory (default: $ACGAN_OUT, else `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    train: Option<PathBuf>,
    #[arg(long, global = true)]
    test: Option<PathBuf>,
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    /// Scenario directories, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    scenarios: Vec<PathBuf>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Any configuration key as key=value; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Flags {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("--set expects key=value, got `{kv}`"))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(s) = self.seed {
            cfg.train.seed = s;
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(d) = self.draws {
            cfg.draws = d;
        }
        if !self.eta.is_empty() {
            cfg.etas = self.eta.clone();
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(p) = &self.train {
            cfg.train_file = Some(p.clone());
        }
        if let Some(p) = &self.test {
            cfg.test_file = Some(p.clone());
        }
        if let Some(p) = &self.checkpoint {
            cfg.checkpoint = Some(p.clone());
        }
        if !self.scenarios.is_empty() {
            cfg.scenarios = self.scenarios.clone();
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn na(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn require<'a>(p: &'a Option<PathBuf>, what: &str) -> anyhow::Result<&'a Path> {
    let p = p
        .as_deref()
        .with_context(|| format!("no {what} file given (use --{what} or `{what}=` in the config)"))?;
    if !p.exists() {
        bail!("{what} file {} does not exist", p.display());
    }
    Ok(p)
}

fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect::<String>()
        .split('_')
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("_")
}

fn loss_csv(records: &[LossRecord]) -> String {
    let mut s = String::from("epoch,wasserstein,gradient_penalty,generator_score,autoencoding,batches\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.epoch,
            r.wasserstein,
            r.gradient_penalty,
            r.generator_score,
            na(r.autoencoding),
            r.batches
        );
    }
    s
}

fn cmd_train(cfg: &RunConfig) -> anyhow::Result<()> {
    let prices: PriceMatrix<f64> = load_prices(require(&cfg.train_file, "train")?)?;
    let dims = GanDims::new(prices.n_assets(), cfg.window, cfg.train.latent)?;
    let mut bundle = build_networks(
        dims,
        &cfg.architecture(),
        cfg.mode,
        cfg.train.adam(),
        &mut RandomSource::seeded(cfg.train.seed),
    )?;
    bundle.config_echo = cfg.echo();
    let ckpt = cfg.checkpoint_path();
    let losses = cfg.out.join(format!("losses_{}.csv", cfg.mode));
    write_file(&cfg.out.join(format!("config_{}.txt", cfg.mode)), cfg.echo_text())?;
    let mut records = Vec::new();
    train_with(&mut bundle, &prices, &cfg.train, |b, r| {
        info!(
            "epoch {} W={:.5} GP={:.5} S={:.5} AP={}",
            r.epoch,
            r.wasserstein,
            r.gradient_penalty,
            r.generator_score,
            na(r.autoencoding)
        );
        records.push(r.clone());
        write_file(&ckpt, checkpoint::to_bytes(b)).map_err(|e| Error::Config(format!("{e:#}")))?;
        write_file(&losses, loss_csv(&records)).map_err(|e| Error::Config(format!("{e:#}")))?;
        Ok(())
    })?;
    Ok(())
}

fn cmd_generate(cfg: &RunConfig) -> anyhow::Result<()> {
    let ckpt = cfg.checkpoint_path();
    let test_path = require(&cfg.test_file, "test")?;
    let bundle = checkpoint::load::<f64>(&ckpt, None)?;
    let test: PriceMatrix<f64> = load_prices(test_path)?;
    let opts = ScenarioOptions {
        draws: cfg.draws,
        seed: cfg.train.seed,
        continuity_shift: cfg.continuity_shift,
        allow_untrained: false,
    };
    let set = generate_scenarios(&bundle, &test, opts)?;
    let dir = cfg
        .scenarios
        .first()
        .cloned()
        .unwrap_or_else(|| cfg.out.join(format!("scenarios_{}", bundle.mode)));
    let extra = vec![
        ("mode".to_string(), bundle.mode.to_string()),
        ("seed".to_string(), cfg.train.seed.to_string()),
        ("continuity_shift".to_string(), cfg.continuity_shift.to_string()),
        ("trained_epochs".to_string(), bundle.trained_epochs.to_string()),
        ("checkpoint_sha256".to_string(), file_sha256(&ckpt)?),
        ("test_sha256".to_string(), file_sha256(test_path)?),
    ];
    export_scenarios(&set, &dir, &extra)?;
    info!("wrote {} draws to {}", set.len(), dir.display());
    Ok(())
}

/// Scenario directories to read: explicit ones, or whichever of the default
/// per-mode directories exist.
fn scenario_dirs(cfg: &RunConfig) -> Vec<PathBuf> {
    if !cfg.scenarios.is_empty() {
        return cfg.scenarios.clone();
    }
    [GanMode::Acgan, GanMode::Cgan]
        .iter()
        .map(|m| cfg.out.join(format!("scenarios_{m}")))
        .filter(|d| d.join(MANIFEST).exists())
        .collect()
}

fn scenario_label(dir: &Path) -> anyhow::Result<String> {
    let mpath = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let kv = parse_key_values(&text)?;
    Ok(match kv.get("mode") {
        Some(m) => m.to_ascii_uppercase(),
        None => dir
            .file_name()
            .map_or_else(|| "scenarios".to_string(), |n| n.to_string_lossy().into_owned()),
    })
}

fn load_sets(cfg: &RunConfig, test: &PriceMatrix<f64>) -> anyhow::Result<Vec<(String, ScenarioSet64)>> {
    let mut out: Vec<(String, ScenarioSet64)> = Vec::new();
    for dir in scenario_dirs(cfg) {
        let mut label = scenario_label(&dir)?;
        if out.iter().any(|(l, _)| *l == label) {
            label = format!("{label}:{}", dir.display());
        }
        let set = load_scenarios(&dir, test).with_context(|| format!("loading scenarios from {}", dir.display()))?;
        out.push((label, set));
    }
    Ok(out)
}

fn pair_means(returns: &[Vec<f64>], i: usize, j: usize) -> Option<[f64; 3]> {
    let lags: Vec<usize> = LAGS.collect();
    let p = facts::pair_stats(returns, i, j, &lags).ok()?;
    let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Some([m(&p.cross_correlation), m(&p.volatility_correlation), m(&p.cross_leverage)])
}

fn span_returns(values: &acgan::Tensor64, h: usize) -> anyhow::Result<Vec<Vec<f64>>> {
    (0..values.rows())
        .map(|a| Ok(log_returns(&values.row(a)[h..])?))
        .collect()
}

fn cmd_stats(cfg: &RunConfig) -> anyhow::Result<()> {
    let test: PriceMatrix<f64> = load_prices(require(&cfg.test_file, "test")?)?;
    let sets = load_sets(cfg, &test)?;
    if sets.is_empty() {
        bail!("no scenario directories found (run `generate` first or pass --scenarios)");
    }
    let tickers = test.tickers();
    for (label, set) in &sets {
        let ev = evaluate_scenarios(set)?;
        let mut s = String::from("statistic,asset,real,synthetic\n");
        for (row, name) in ROW_LABELS.iter().enumerate() {
            for (ra, sa) in ev.real.assets.iter().zip(&ev.synthetic.assets) {
                let _ = writeln!(s, "{name},{},{},{}", ra.ticker, na(ra.values()[row]), na(sa.values()[row]));
            }
            let _ = writeln!(
                s,
                "{name},mean,{},{}",
                na(ev.real.asset_means()[row]),
                na(ev.synthetic.asset_means()[row])
            );
        }
        if let (Some(rc), Some(sc)) = (&ev.real.cross, &ev.synthetic.cross) {
            for (k, name) in CROSS_LABELS.iter().enumerate() {
                let _ = writeln!(s, "{name},all pairs,{},{}", na(rc.values()[k]), na(sc.values()[k]));
            }
        }
        let base = slug(label);
        write_file(&cfg.out.join(format!("stats_{base}.csv")), s)?;

        let mut p = String::from("asset,pearson\n");
        for (t, v) in &ev.pearson {
            let _ = writeln!(p, "{t},{}", na(*v));
        }
        write_file(&cfg.out.join(format!("pearson_{base}.csv")), p)?;

        // Per-pair cross statistics, synthetic values averaged over draws.
        let h = set.window.h;
        let real = span_returns(test.values(), h)?;
        let draws = set
            .draws
            .iter()
            .map(|d| span_returns(d, h))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let mut c = String::from("pair,statistic,real,synthetic\n");
        for i in 0..tickers.len() {
            for j in i + 1..tickers.len() {
                let r = pair_means(&real, i, j);
                let mut sums = [0.0; 3];
                let mut n = 0usize;
                for d in &draws {
                    if let Some(v) = pair_means(d, i, j) {
                        (0..3).for_each(|k| sums[k] += v[k]);
                        n += 1;
                    }
                }
                for (k, name) in CROSS_LABELS.iter().enumerate() {
                    let _ = writeln!(
                        c,
                        "{}-{},{name},{},{}",
                        tickers[i],
                        tickers[j],
                        na(r.map(|v| v[k])),
                        na((n > 0).then(|| sums[k] / n as f64))
                    );
                }
            }
        }
        write_file(&cfg.out.join(format!("cross_{base}.csv")), c)?;
        info!("stats for {label} written");
    }
    Ok(())
}

fn summary_csv(rows: &[ComparisonRow]) -> String {
    let mut s = String::from("strategy,annual_return,sharpe,final_value,benchmark\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.label,
            r.annual_return,
            na(r.sharpe),
            r.final_value,
            r.benchmark
        );
    }
    s
}

fn curve_csv(test: &PriceMatrix<f64>, r: &BacktestReport) -> String {
    let mut s = String::from("day,date,value\n");
    for (k, v) in r.equity.iter().enumerate() {
        let d = r.first_day + k;
        let _ = writeln!(s, "{},{},{v}", d + 1, test.dates()[d]);
    }
    s
}

fn cmd_backtest(cfg: &RunConfig) -> anyhow::Result<()> {
    let test: PriceMatrix<f64> = load_prices(require(&cfg.test_file, "test")?)?;
    let sets = load_sets(cfg, &test)?;
    let h = cfg.window.h;
    for (_, set) in &sets {
        if set.window.h != h {
            bail!("scenario history length {} differs from configured h={h}", set.window.h);
        }
    }
    let dir = cfg.out.join("backtest");
    for &eta in &cfg.etas {
        let mut reports = vec![backtest(&test, &Strategy::Markowitz, "Markowitz", eta, h)?];
        let mut scatter = String::from("strategy,draw,annual_return,sharpe\n");
        for (label, set) in &sets {
            let (mean, per_draw) = schedules(&weight_table(set, h, eta)?)?;
            reports.push(backtest(&test, &Strategy::Schedule(mean), &format!("{label} (Mean)"), eta, h)?);
            for (r, sched) in per_draw.into_iter().enumerate() {
                let rep = backtest(&test, &Strategy::Schedule(sched), label, eta, h)?;
                let _ = writeln!(scatter, "{label},{},{},{}", r + 1, rep.annual_return, na(rep.sharpe));
            }
        }
        let (rows, bench) = compare_report(&test, &reports, &cfg.benchmarks, h)?;
        write_file(&dir.join(format!("summary_eta{eta}.csv")), summary_csv(&rows))?;
        if !sets.is_empty() {
            write_file(&dir.join(format!("scatter_eta{eta}.csv")), scatter)?;
        }
        let mut long = String::from("day,date,strategy,value,benchmark\n");
        for (r, is_bench) in reports.iter().map(|r| (r, false)).chain(bench.iter().map(|r| (r, true))) {
            write_file(
                &dir.join(format!("equity_eta{eta}_{}.csv", slug(&r.label))),
                curve_csv(&test, r),
            )?;
            for (k, v) in r.equity.iter().enumerate() {
                let d = r.first_day + k;
                let _ = writeln!(long, "{},{},{},{v},{is_bench}", d + 1, test.dates()[d], r.label);
            }
        }
        write_file(&dir.join(format!("equity_eta{eta}.csv")), long)?;
        info!("backtest eta={eta} done");
    }
    Ok(())
}

fn read_csv(path: &Path) -> anyhow::Result<Vec<BTreeMap<String, String>>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        rows.push(headers.iter().zip(rec.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect());
    }
    Ok(rows)
}

fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row.get(key).and_then(|v| v.parse().ok()).unwrap_or(f64::NAN)
}

/// Groups rows by `key`, keeping first-appearance order.
fn grouped(rows: &[BTreeMap<String, String>], key: &str) -> Vec<(String, Vec<usize>)> {
    let mut out: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let k = r.get(key).cloned().unwrap_or_default();
        match out.iter_mut().find(|(l, _)| *l == k) {
            Some((_, v)) => v.push(i),
            None => out.push((k, vec![i])),
        }
    }
    out
}

fn cmd_report(cfg: &RunConfig) -> anyhow::Result<()> {
    let dir = cfg.out.join("backtest");
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect();
    names.sort();
    let mut charts = 0;
    for name in &names {
        let Some(stem) = name.strip_suffix(".csv") else { continue };
        let path = dir.join(name);
        if let Some(eta) = stem.strip_prefix("equity_eta").filter(|s| s.chars().all(|c| c.is_ascii_digit())) {
            let rows = read_csv(&path)?;
            let groups = grouped(&rows, "strategy");
            let series: Vec<Series> = groups
                .iter()
                .map(|(label, idx)| Series {
                    label: label.as_str(),
                    points: idx.iter().map(|&i| (num(&rows[i], "day"), num(&rows[i], "value"))).collect(),
                    dashed: rows[idx[0]].get("benchmark").is_some_and(|b| b == "true"),
                })
                .collect();
            let svg = line_chart(&format!("Portfolio value, eta = {eta}"), "day", "value", &series);
            write_file(&dir.join(format!("{stem}.svg")), svg)?;
            charts += 1;
        } else if let Some(eta) = stem.strip_prefix("scatter_eta") {
            let rows = read_csv(&path)?;
            let groups = grouped(&rows, "strategy");
            let series: Vec<Series> = groups
                .iter()
                .map(|(label, idx)| Series {
                    label: label.as_str(),
                    points: idx
                        .iter()
                        .map(|&i| (num(&rows[i], "annual_return"), num(&rows[i], "sharpe")))
                        .collect(),
                    dashed: false,
                })
                .collect();
            let svg = scatter_chart(
                &format!("Per-draw annual return vs Sharpe ratio, eta = {eta}"),
                "annual return",
                "Sharpe ratio",
                &series,
            );
            write_file(&dir.join(format!("{stem}.svg")), svg)?;
            charts += 1;
        }
    }
    for m in [GanMode::Acgan, GanMode::Cgan] {
        let path = cfg.out.join(format!("losses_{m}.csv"));
        if !path.exists() {
            continue;
        }
        let rows = read_csv(&path)?;
        let col = |k: &str| rows.iter().map(|r| (num(r, "epoch"), num(r, k))).collect::<Vec<_>>();
        let mut series = vec![
            Series { label: "Wasserstein", points: col("wasserstein"), dashed: false },
            Series { label: "gradient penalty", points: col("gradient_penalty"), dashed: false },
        ];
        if m == GanMode::Acgan {
            series.push(Series { label: "autoencoding", points: col("autoencoding"), dashed: false });
        }
        let svg = line_chart(&format!("{} training losses", m.as_str().to_uppercase()), "epoch", "loss", &series);
        write_file(&cfg.out.join(format!("losses_{m}.svg")), svg)?;
        charts += 1;
    }
    if charts == 0 {
        bail!("no plot data found under {}", cfg.out.display());
    }
    info!("{charts} charts written");
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig, assets: usize, train_days: usize, test_days: usize) -> anyhow::Result<()> {
    if assets == 0 || train_days < 2 || test_days < 2 {
        bail!("simulate needs at least one asset and two days in each part");
    }
    let start = NaiveDate::from_ymd_opt(2010, 1, 4).expect("valid date");
    let all: PriceMatrix<f64> = simulate_gbm(
        &GbmParams::spread(assets),
        train_days + test_days,
        start,
        &mut RandomSource::seeded(cfg.train.seed),
    )?;
    let part = |first: usize, len: usize| -> anyhow::Result<PriceMatrix<f64>> {
        Ok(PriceMatrix::new(
            all.tickers().to_vec(),
            all.dates()[first..first + len].to_vec(),
            all.values().slice_cols(first, len)?,
        )?)
    };
    let train_path = cfg.train_file.clone().unwrap_or_else(|| cfg.out.join("train.csv"));
    let test_path = cfg.test_file.clone().unwrap_or_else(|| cfg.out.join("test.csv"));
    for (path, m) in [(&train_path, part(0, train_days)?), (&test_path, part(train_days, test_days)?)] {
        let mut buf = Vec::new();
        write_prices(&m, &mut buf).map_err(|e| Error::io(path, e))?;
        write_file(path, buf)?;
    }
    info!("wrote {} and {}", train_path.display(), test_path.display());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = cli.flags.resolve()?;
    match cli.command {
        Command::Train => cmd_train(&cfg),
        Command::Generate => cmd_generate(&cfg),
        Command::Stats => cmd_stats(&cfg),
        Command::Backtest => cmd_backtest(&cfg),
        Command::Report => cmd_report(&cfg),
        Command::Simulate {
            assets,
            train_days,
            test_days,
        } => cmd_simulate(&cfg, assets, train_days, test_days),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
