//! Independent oracles shared by the integration tests and the acceptance
//! harness. Everything here is written from the defining formulas with plain
//! loops and does not call into the statistics or optimizer code it checks.
#![allow(dead_code)]

use acgan::data::{GbmParams, PriceMatrix, WindowConfig};
use acgan::gan::{build_networks, discriminator_loss, generator_loss, Architecture, GanBundle, GanDims, GanMode, ReconstructionTarget};
use acgan::network::{AdamConfig, ParamSet};
use acgan::random::RandomSource;
use acgan::tape::DropoutMode;
use acgan::tensor::Tensor;
use chrono::NaiveDate;

pub fn start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2010, 1, 4).unwrap()
}

pub fn gbm(assets: usize, days: usize, seed: u64) -> PriceMatrix<f64> {
    acgan::data::simulate_gbm(&GbmParams::spread(assets), days, start_date(), &mut RandomSource::seeded(seed)).unwrap()
}

/// Columns `first .. first + len` (0-based) of a price matrix.
pub fn days(m: &PriceMatrix<f64>, first: usize, len: usize) -> PriceMatrix<f64> {
    PriceMatrix::new(
        m.tickers().to_vec(),
        m.dates()[first..first + len].to_vec(),
        m.values().slice_cols(first, len).unwrap(),
    )
    .unwrap()
}

// ---- statistics -----------------------------------------------------------

fn avg(v: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in v {
        s += x;
    }
    s / v.len() as f64
}

/// Correlation of `x_t` with `y_{t+k}`: full-sample means and population
/// standard deviations, lagged products averaged over the overlap.
pub fn naive_lagged_corr(x: &[f64], y: &[f64], k: usize) -> f64 {
    let n = x.len();
    let (mx, my) = (avg(x), avg(y));
    let mut sx = 0.0;
    let mut sy = 0.0;
    for t in 0..n {
        sx += (x[t] - mx).powi(2);
        sy += (y[t] - my).powi(2);
    }
    let (sx, sy) = ((sx / n as f64).sqrt(), (sy / n as f64).sqrt());
    let mut c = 0.0;
    for t in 0..n - k {
        c += (x[t] - mx) / sx * ((y[t + k] - my) / sy);
    }
    c / (n - k) as f64
}

/// `L(k) = (E[x_t y_{t+k}^2] - E[x] E[y^2]) / E[y^2]^2`.
pub fn naive_leverage(x: &[f64], y: &[f64], k: usize) -> f64 {
    let n = x.len();
    let sq: Vec<f64> = y.iter().map(|v| v * v).collect();
    let m2 = avg(&sq);
    let mut lead = 0.0;
    for t in 0..n - k {
        lead += x[t] * sq[t + k];
    }
    lead /= (n - k) as f64;
    (lead - avg(x) * m2) / (m2 * m2)
}

pub fn naive_pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (avg(x), avg(y));
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx.sqrt() * vy.sqrt())
}

/// `rho(k) - rho(-k)` with `rho(k) = Corr(|sum_{tau} r|(t + k), sum_{tau} |r|(t))`.
pub fn naive_coarse_fine(r: &[f64], tau: usize, k: usize) -> (f64, f64) {
    let mut coarse = Vec::new();
    let mut fine = Vec::new();
    for t in tau..=r.len() {
        let mut s = 0.0;
        let mut a = 0.0;
        for v in &r[t - tau..t] {
            s += v;
            a += v.abs();
        }
        coarse.push(s.abs());
        fine.push(a);
    }
    let m = coarse.len() - k;
    let plus = naive_pearson(&coarse[k..], &fine[..m]);
    let minus = naive_pearson(&coarse[..m], &fine[k..]);
    (plus, plus - minus)
}

/// (non-excess kurtosis, skewness) from population central moments.
pub fn naive_moments(r: &[f64]) -> (f64, f64) {
    let mu = avg(r);
    let c = |p: i32| r.iter().map(|v| (v - mu).powi(p)).sum::<f64>() / r.len() as f64;
    let var = c(2);
    (c(4) / (var * var), c(3) / (var * var.sqrt()))
}

/// Samples with density `(alpha - 1) x^-alpha` on `[1, inf)`.
pub fn pareto(alpha: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = RandomSource::seeded(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.uniform();
            (1.0 - u).powf(-1.0 / (alpha - 1.0))
        })
        .collect()
}

pub fn normals(n: usize, seed: u64) -> Vec<f64> {
    RandomSource::seeded(seed).normals(n)
}

// ---- portfolio ------------------------------------------------------------

pub fn naive_sharpe(mean: &[f64], cov: &[f64], w: &[f64]) -> f64 {
    let n = mean.len();
    let mut r = 0.0;
    let mut v = 0.0;
    for i in 0..n {
        r += w[i] * mean[i];
        for j in 0..n {
            v += w[i] * w[j] * cov[i * n + j];
        }
    }
    r / v.sqrt()
}

/// Best Sharpe ratio over the 3-asset simplex grid with the given step.
pub fn grid_sharpe3(mean: &[f64], cov: &[f64], step: f64) -> (f64, [f64; 3]) {
    let k = (1.0 / step).round() as usize;
    let mut best = (f64::NEG_INFINITY, [0.0; 3]);
    for a in 0..=k {
        for b in 0..=k - a {
            let w = [a as f64 / k as f64, b as f64 / k as f64, (k - a - b) as f64 / k as f64];
            let s = naive_sharpe(mean, cov, &w);
            if s > best.0 {
                best = (s, w);
            }
        }
    }
    best
}

/// Exhaustive grid at `step`, then repeated exhaustive searches on grids ten
/// times finer around the incumbent, down to `step / 10^zooms`.
pub fn refined_grid_sharpe3(mean: &[f64], cov: &[f64], step: f64, zooms: usize) -> f64 {
    let (mut best, mut w) = grid_sharpe3(mean, cov, step);
    let mut radius = step;
    for _ in 0..zooms {
        let fine = radius / 10.0;
        let k = (2.0 * radius / fine).round() as i64;
        let (a0, b0) = (w[0] - radius, w[1] - radius);
        for i in 0..=k {
            for j in 0..=k {
                let a = a0 + i as f64 * fine;
                let b = b0 + j as f64 * fine;
                let c = 1.0 - a - b;
                if a < 0.0 || b < 0.0 || c < 0.0 {
                    continue;
                }
                let cand = [a, b, c];
                let s = naive_sharpe(mean, cov, &cand);
                if s > best {
                    best = s;
                    w = cand;
                }
            }
        }
        radius = fine;
    }
    best
}

/// A random positive-definite 3-asset instance at daily-return scale.
pub fn random_instance(rng: &mut RandomSource) -> (Vec<f64>, Vec<f64>) {
    let mean: Vec<f64> = (0..3).map(|_| rng.uniform_range(-0.001, 0.002)).collect();
    let sd: Vec<f64> = (0..3).map(|_| rng.uniform_range(0.005, 0.03)).collect();
    let a: Vec<f64> = (0..9).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let mut g = vec![0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            g[i * 3 + j] = (0..3).map(|k| a[i * 3 + k] * a[j * 3 + k]).sum::<f64>() + if i == j { 0.1 } else { 0.0 };
        }
    }
    let mut cov = vec![0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            let corr = g[i * 3 + j] / (g[i * 3 + i] * g[j * 3 + j]).sqrt();
            cov[i * 3 + j] = corr * sd[i] * sd[j];
        }
    }
    (mean, cov)
}

// ---- gradients --------------------------------------------------------------

pub fn gradient_dims() -> GanDims {
    GanDims::new(3, WindowConfig::new(8, 4).unwrap(), 8).unwrap()
}

pub fn small_bundle(mode: GanMode, seed: u64) -> GanBundle<f64> {
    sized_bundle(mode, seed, 32)
}

pub fn sized_bundle(mode: GanMode, seed: u64, width: usize) -> GanBundle<f64> {
    build_networks(
        gradient_dims(),
        &Architecture::compact(width),
        mode,
        AdamConfig::default(),
        &mut RandomSource::seeded(seed),
    )
    .unwrap()
}

fn flat_grads(g: &[Tensor<f64>]) -> Vec<f64> {
    g.iter().flat_map(|t| t.data().iter().copied()).collect()
}

/// `||a - b|| / max(||a||, ||b||)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-300)
}

/// Central differences of `f` with respect to every entry of `params`.
///
/// A coordinate is flagged as a kink when its forward and backward
/// differences disagree by more than `KINK_TOL` (relative above magnitude 1):
/// the stencil then straddles a rectifier switch and the central difference
/// says nothing about the derivative.
pub struct Differences {
    pub values: Vec<f64>,
    pub kinks: Vec<bool>,
}

pub const KINK_TOL: f64 = 1e-2;

pub fn central_differences(params: &ParamSet<f64>, step: f64, f: impl Fn(&ParamSet<f64>) -> f64) -> Differences {
    let base = params.flatten();
    let mut p = params.clone();
    let mid = f(&p);
    let mut values = Vec::with_capacity(base.len());
    let mut kinks = Vec::with_capacity(base.len());
    let mut v = base.clone();
    for i in 0..base.len() {
        v[i] = base[i] + step;
        p.assign_flat(&v).unwrap();
        let up = f(&p);
        v[i] = base[i] - step;
        p.assign_flat(&v).unwrap();
        let down = f(&p);
        v[i] = base[i];
        let central = (up - down) / (2.0 * step);
        let (fwd, bwd) = ((up - mid) / step, (mid - down) / step);
        values.push(central);
        kinks.push((fwd - bwd).abs() > KINK_TOL * central.abs().max(1.0));
    }
    Differences { values, kinks }
}

impl Differences {
    fn extend(&mut self, other: Differences) {
        self.values.extend(other.values);
        self.kinks.extend(other.kinks);
    }
}

/// Outcome of comparing an analytic gradient against central differences.
#[derive(Clone, Copy, Debug)]
pub struct GradCheck {
    /// Norm-based relative error over the smooth coordinates.
    pub error: f64,
    pub kinks: usize,
    pub coords: usize,
}

fn check(analytic: &[f64], numeric: &Differences) -> GradCheck {
    let keep = |v: &[f64]| -> Vec<f64> {
        v.iter().zip(&numeric.kinks).filter(|(_, k)| !**k).map(|(x, _)| *x).collect()
    };
    GradCheck {
        error: relative_error(&keep(analytic), &keep(&numeric.values)),
        kinks: numeric.kinks.iter().filter(|k| **k).count(),
        coords: analytic.len(),
    }
}

pub struct GradientCase {
    pub bundle: GanBundle<f64>,
    pub history: Tensor<f64>,
    pub future: Tensor<f64>,
    pub z: Tensor<f64>,
    pub eps: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub dropout_seed: u64,
}

pub fn gradient_case(seed: u64, mode: GanMode, batch: usize) -> GradientCase {
    sized_gradient_case(seed, mode, batch, 32)
}

pub fn sized_gradient_case(seed: u64, mode: GanMode, batch: usize, width: usize) -> GradientCase {
    let mut rng = RandomSource::stream(seed, 99);
    let d = gradient_dims();
    let mut bundle = sized_bundle(mode, seed, width);
    // Move the critic away from initialization so the penalty is not trivial.
    let scale = rng.uniform_range(0.5, 2.0);
    let w: Vec<f64> = bundle.discriminator.flatten().iter().map(|v| v * scale).collect();
    bundle.discriminator.assign_flat(&w).unwrap();
    let uni = |rng: &mut RandomSource, r: usize, c: usize| Tensor::from_fn(r, c, |_, _| rng.uniform_range(-1.0, 1.0));
    GradientCase {
        history: uni(&mut rng, batch, d.history_width()),
        future: uni(&mut rng, batch, d.future_width()),
        z: Tensor::new(batch, d.latent, rng.normals(batch * d.latent)).unwrap(),
        eps: (0..batch).map(|_| rng.uniform()).collect(),
        lambda1: rng.uniform_range(1.0, 10.0),
        lambda2: rng.uniform_range(0.5, 5.0),
        dropout_seed: seed.wrapping_mul(31).wrapping_add(7),
        bundle,
    }
}

impl GradientCase {
    fn fake(&self) -> Tensor<f64> {
        let mut rng = RandomSource::seeded(self.dropout_seed ^ 0xfa4e);
        self.bundle
            .generate_batch(&self.z, &self.history, DropoutMode::Train, &mut rng)
            .unwrap()
    }

    fn critic_loss(&self, critic: &ParamSet<f64>, fake: &Tensor<f64>, mode: DropoutMode) -> (f64, Vec<f64>) {
        let real = Tensor::concat_cols(&self.history, &self.future).unwrap();
        let fake = Tensor::concat_cols(&self.history, fake).unwrap();
        let mut rng = RandomSource::seeded(self.dropout_seed);
        let s = discriminator_loss(critic, &real, &fake, &self.eps, self.lambda1, mode, &mut rng).unwrap();
        (s.loss, flat_grads(&s.gradients))
    }

    /// Relative error of the critic-loss gradient (penalty included).
    pub fn critic_error(&self, mode: DropoutMode, step: f64) -> GradCheck {
        let fake = self.fake();
        let (_, analytic) = self.critic_loss(&self.bundle.discriminator, &fake, mode);
        let numeric = central_differences(&self.bundle.discriminator, step, |p| self.critic_loss(p, &fake, mode).0);
        check(&analytic, &numeric)
    }

    fn generator_value(&self, b: &GanBundle<f64>, mode: DropoutMode) -> acgan::gan::GeneratorStep<f64> {
        let mut rng = RandomSource::seeded(self.dropout_seed);
        generator_loss(b, &self.history, &self.z, self.lambda2, ReconstructionTarget::Identity, mode, &mut rng).unwrap()
    }

    /// Relative error of the generator-loss gradient over E, F (if present)
    /// and G together.
    pub fn generator_error(&self, mode: DropoutMode, step: f64) -> GradCheck {
        let g = self.generator_value(&self.bundle, mode);
        let mut analytic = flat_grads(&g.encoder_grads);
        let mut numeric = central_differences(&self.bundle.encoder, step, |p| {
            let mut b = self.bundle.clone();
            b.encoder = p.clone();
            self.generator_value(&b, mode).loss
        });
        if let (Some(dec), Some(dg)) = (&self.bundle.decoder, &g.decoder_grads) {
            analytic.extend(flat_grads(dg));
            numeric.extend(central_differences(dec, step, |p| {
                let mut b = self.bundle.clone();
                b.decoder = Some(p.clone());
                self.generator_value(&b, mode).loss
            }));
        }
        analytic.extend(flat_grads(&g.simulator_grads));
        numeric.extend(central_differences(&self.bundle.simulator, step, |p| {
            let mut b = self.bundle.clone();
            b.simulator = p.clone();
            self.generator_value(&b, mode).loss
        }));
        check(&analytic, &numeric)
    }
}
