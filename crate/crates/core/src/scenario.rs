//! Synthetic test-horizon price paths stitched from generated segments.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::data::{inference_segments, load_prices, save_prices, NormStats, PriceMatrix, Segment, WindowConfig};
use crate::error::{Error, Result};
use crate::gan::GanBundle;
use crate::random::{mix_seed, RandomSource};
use crate::scalar::Scalar;
use crate::tape::DropoutMode;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScenarioOptions {
    pub draws: usize,
    pub seed: u64,
    /// Shift each generated block so that its first day continues from the
    /// last observed price. Off by default.
    pub continuity_shift: bool,
    pub allow_untrained: bool,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        ScenarioOptions {
            draws: 1,
            seed: 0,
            continuity_shift: false,
            allow_untrained: false,
        }
    }
}

/// Reference prices `X` and `R` synthetic matrices of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSet<S> {
    pub reference: PriceMatrix<S>,
    pub window: WindowConfig,
    pub draws: Vec<Tensor<S>>,
    pub seeds: Vec<u64>,
}

impl<S: Scalar> ScenarioSet<S> {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Draw `r` (0-based) with the reference's tickers and dates.
    pub fn draw_prices(&self, r: usize) -> Result<PriceMatrix<S>> {
        let d = self.draws.get(r).ok_or(Error::OutOfRange {
            index: r,
            len: self.draws.len(),
        })?;
        self.reference.with_values(d.clone())
    }

    pub fn segments(&self) -> Result<Vec<Segment>> {
        inference_segments(self.reference.n_days(), self.window)
    }
}

/// Seed of draw `r` under a run seed.
pub fn draw_seed(seed: u64, r: usize) -> u64 {
    mix_seed(seed, r as u64)
}

/// One synthetic path. Days `1..=h` are copied from `x`; each later segment
/// is generated from the `h` true days before it, with a fresh latent draw.
pub fn generate_draw<S: Scalar>(
    bundle: &GanBundle<S>,
    x: &PriceMatrix<S>,
    seed: u64,
    continuity_shift: bool,
) -> Result<Tensor<S>> {
    let d = bundle.dims;
    let window = d.window();
    if x.n_assets() != d.assets {
        return Err(Error::Dimension {
            op: "generate_scenarios (assets)",
            left: (d.assets, d.h + d.f),
            right: (x.n_assets(), x.n_days()),
        });
    }
    let segments = inference_segments(x.n_days(), window)?;
    let mut rng = RandomSource::seeded(seed);
    let mut y = x.values().clone();
    for seg in segments {
        let raw = x.block(seg.start - d.h, d.h)?;
        let stats = NormStats::from_history(&raw)?;
        let history = stats.normalize(&raw)?;
        let z: Vec<S> = rng.normals(d.latent);
        let generated = bundle.generate(&z, &history, DropoutMode::Infer, &mut rng)?;
        let prices = stats.denormalize(&generated)?;
        for a in 0..d.assets {
            let shift = if continuity_shift {
                raw.get(a, d.h - 1) - prices.get(a, 0)
            } else {
                S::zero()
            };
            for j in 0..seg.len {
                y.set(a, seg.start - 1 + j, prices.get(a, j) + shift);
            }
        }
    }
    y.ensure_finite("generate_scenarios")?;
    Ok(y)
}

pub fn generate_scenarios<S: Scalar>(
    bundle: &GanBundle<S>,
    x: &PriceMatrix<S>,
    opts: ScenarioOptions,
) -> Result<ScenarioSet<S>> {
    if bundle.trained_epochs == 0 && !opts.allow_untrained {
        return Err(Error::Config("the model has not been trained".into()));
    }
    if opts.draws == 0 {
        return Err(Error::Config("draw count must be >= 1".into()));
    }
    let seeds: Vec<u64> = (0..opts.draws).map(|r| draw_seed(opts.seed, r)).collect();
    let draws = seeds
        .iter()
        .map(|&s| generate_draw(bundle, x, s, opts.continuity_shift))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioSet {
        reference: x.clone(),
        window: bundle.dims.window(),
        draws,
        seeds,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub const MANIFEST: &str = "manifest.txt";

pub fn draw_file_name(r: usize) -> String {
    format!("scenario_{:04}.csv", r + 1)
}

/// Writes one price file per draw plus `manifest.txt`. `extra` entries (for
/// instance the checkpoint hash and configuration) are appended to the
/// manifest in the given order.
pub fn export_scenarios<S: Scalar>(
    set: &ScenarioSet<S>,
    dir: impl AsRef<Path>,
    extra: &[(String, String)],
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::with_capacity(set.len());
    let mut manifest = String::new();
    manifest.push_str(&format!("draws={}\n", set.len()));
    manifest.push_str(&format!("h={}\nf={}\n", set.window.h, set.window.f));
    manifest.push_str(&format!("assets={}\ndays={}\n", set.reference.n_assets(), set.reference.n_days()));
    for (k, v) in extra {
        manifest.push_str(&format!("{k}={v}\n"));
    }
    for r in 0..set.len() {
        let name = draw_file_name(r);
        let path = dir.join(&name);
        save_prices(&set.draw_prices(r)?, &path)?;
        manifest.push_str(&format!("draw.{}.seed={}\ndraw.{}.file={name}\n", r + 1, set.seeds[r], r + 1));
        files.push(path);
    }
    let mpath = dir.join(MANIFEST);
    std::fs::File::create(&mpath)
        .and_then(|mut f| f.write_all(manifest.as_bytes()))
        .map_err(|e| Error::io(&mpath, e))?;
    files.push(mpath);
    Ok(files)
}

/// `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got `{line}`", i + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Reads back a directory written by [`export_scenarios`]; `reference` is the
/// test matrix the scenarios were generated from.
pub fn load_scenarios<S: Scalar>(dir: impl AsRef<Path>, reference: &PriceMatrix<S>) -> Result<ScenarioSet<S>> {
    let dir = dir.as_ref();
    let mpath = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let kv = parse_key_values(&text)?;
    let get = |k: &str| -> Result<usize> {
        kv.get(k)
            .ok_or_else(|| Error::Config(format!("{}: missing `{k}`", mpath.display())))?
            .parse()
            .map_err(|_| Error::Config(format!("{}: `{k}` is not a count", mpath.display())))
    };
    let draws = get("draws")?;
    let window = WindowConfig::new(get("h")?, get("f")?)?;
    let mut set = ScenarioSet {
        reference: reference.clone(),
        window,
        draws: Vec::with_capacity(draws),
        seeds: Vec::with_capacity(draws),
    };
    for r in 1..=draws {
        let file = kv
            .get(&format!("draw.{r}.file"))
            .cloned()
            .unwrap_or_else(|| draw_file_name(r - 1));
        let seed = kv
            .get(&format!("draw.{r}.seed"))
            .and_then(|s| s.parse().ok())
            .unwrap_or(0);
        let m: PriceMatrix<S> = load_prices(dir.join(&file))?;
        if m.tickers() != reference.tickers() || m.dates() != reference.dates() {
            return Err(Error::Dimension {
                op: "load_scenarios (alignment with test prices)",
                left: (reference.n_assets(), reference.n_days()),
                right: (m.n_assets(), m.n_days()),
            });
        }
        set.draws.push(m.values().clone());
        set.seeds.push(seed);
    }
    Ok(set)
}
