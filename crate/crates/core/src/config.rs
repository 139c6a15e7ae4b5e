//! Run configuration: a `key=value` text file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use crate::data::WindowConfig;
use crate::error::{Error, Result};
use crate::gan::{Architecture, GanMode, TrainConfig};
use crate::scenario::parse_key_values;

pub const OUT_ENV: &str = "ACGAN_OUT";

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train_file: Option<PathBuf>,
    pub test_file: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: PathBuf,
    pub window: WindowConfig,
    pub train: TrainConfig,
    pub mode: GanMode,
    pub draws: usize,
    pub etas: Vec<usize>,
    pub benchmarks: Vec<String>,
    /// Scenario directories for `stats` and `backtest`.
    pub scenarios: Vec<PathBuf>,
    /// Cap on hidden widths; `None` keeps the full-size networks.
    pub width: Option<usize>,
    pub continuity_shift: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train_file: None,
            test_file: None,
            checkpoint: None,
            out: std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("out"), PathBuf::from),
            window: WindowConfig::default(),
            train: TrainConfig::default(),
            mode: GanMode::Acgan,
            draws: 1000,
            etas: vec![10, 15, 20],
            benchmarks: Vec::new(),
            scenarios: Vec::new(),
            width: None,
            continuity_shift: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (k, v) in parse_key_values(text)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Sets one key; unknown keys are rejected.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "train" => self.train_file = Some(v.into()),
            "test" => self.test_file = Some(v.into()),
            "checkpoint" => self.checkpoint = Some(v.into()),
            "out" => self.out = v.into(),
            "h" => self.window.h = parse(key, v)?,
            "f" => self.window.f = parse(key, v)?,
            "latent" => t.latent = parse(key, v)?,
            "lambda1" => t.lambda1 = parse(key, v)?,
            "lambda2" => t.lambda2 = parse(key, v)?,
            "lr" => t.learning_rate = parse(key, v)?,
            "beta1" => t.beta1 = parse(key, v)?,
            "beta2" => t.beta2 = parse(key, v)?,
            "epochs" => t.epochs = parse(key, v)?,
            "batch" => t.batch_size = parse(key, v)?,
            "critic_steps" => t.critic_steps = parse(key, v)?,
            "seed" => t.seed = parse(key, v)?,
            "mode" => self.mode = parse(key, v)?,
            "draws" => self.draws = parse(key, v)?,
            "eta" => self.etas = list(key, v)?,
            "benchmarks" => self.benchmarks = list(key, v)?,
            "scenarios" => self.scenarios = list::<String>(key, v)?.into_iter().map(PathBuf::from).collect(),
            "width" => {
                let w: usize = parse(key, v)?;
                self.width = (w > 0).then_some(w);
            }
            "continuity_shift" => self.continuity_shift = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        WindowConfig::new(self.window.h, self.window.f)?;
        self.train.validate()?;
        if self.draws == 0 {
            return Err(Error::Config("draws must be >= 1".into()));
        }
        if self.etas.is_empty() || self.etas.contains(&0) {
            return Err(Error::Config("eta list must be non-empty with entries >= 1".into()));
        }
        if self.width == Some(1) {
            return Err(Error::Config("width must be 0 (full size) or >= 2".into()));
        }
        Ok(())
    }

    pub fn architecture(&self) -> Architecture {
        self.width.map_or_else(Architecture::standard, Architecture::compact)
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.out.join(format!("model_{}.ckpt", self.mode)))
    }

    pub fn scenario_dir(&self) -> PathBuf {
        self.out.join(format!("scenarios_{}", self.mode))
    }

    /// Every setting as `key=value` pairs, in a fixed order; feeding the
    /// pairs back through [`RunConfig::set`] reproduces the configuration.
    pub fn echo(&self) -> Vec<(String, String)> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let join = |v: Vec<String>| v.join(",");
        let t = &self.train;
        let mut out = Vec::new();
        for (k, v) in [
            ("train", path(&self.train_file)),
            ("test", path(&self.test_file)),
            ("checkpoint", path(&self.checkpoint)),
        ] {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        }
        let rest = [
            ("out", self.out.display().to_string()),
            ("mode", self.mode.to_string()),
            ("h", self.window.h.to_string()),
            ("f", self.window.f.to_string()),
            ("latent", t.latent.to_string()),
            ("lambda1", t.lambda1.to_string()),
            ("lambda2", t.lambda2.to_string()),
            ("lr", t.learning_rate.to_string()),
            ("beta1", t.beta1.to_string()),
            ("beta2", t.beta2.to_string()),
            ("epochs", t.epochs.to_string()),
            ("batch", t.batch_size.to_string()),
            ("critic_steps", t.critic_steps.to_string()),
            ("seed", t.seed.to_string()),
            ("draws", self.draws.to_string()),
            ("eta", join(self.etas.iter().map(ToString::to_string).collect())),
            ("benchmarks", join(self.benchmarks.clone())),
            (
                "scenarios",
                join(self.scenarios.iter().map(|p| p.display().to_string()).collect()),
            ),
            ("width", self.width.unwrap_or(0).to_string()),
            ("continuity_shift", self.continuity_shift.to_string()),
        ];
        out.extend(rest.into_iter().map(|(k, v)| (k.to_string(), v)));
        out
    }

    pub fn echo_text(&self) -> String {
        self.echo().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}
