//! Conditional GAN (CGAN) and autoencoding conditional GAN (ACGAN) networks,
//! their losses, and the adversarial training loop.
//!
//! Batches are row-major: row `b` of a history batch is the `N x h` window
//! flattened asset by asset, and likewise for futures. The critic sees a
//! history row followed by a future row.

use log::debug;
use rand::RngCore;

use crate::data::{extract_window, training_indices, PriceMatrix, WindowConfig};
use crate::error::{Error, Result};
use crate::network::{Activation, AdamConfig, LayerSpec, NetworkSpec, ParamSet};
use crate::random::RandomSource;
use crate::scalar::Scalar;
use crate::tape::{DropoutMode, Tape};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GanMode {
    Cgan,
    Acgan,
}

impl GanMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GanMode::Cgan => "cgan",
            GanMode::Acgan => "acgan",
        }
    }
}

impl std::str::FromStr for GanMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cgan" => Ok(GanMode::Cgan),
            "acgan" => Ok(GanMode::Acgan),
            other => Err(Error::Config(format!("unknown mode `{other}` (expected cgan or acgan)"))),
        }
    }
}

impl std::fmt::Display for GanMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Problem dimensions: assets, history length, future length, latent size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GanDims {
    pub assets: usize,
    pub h: usize,
    pub f: usize,
    pub latent: usize,
}

impl GanDims {
    pub fn new(assets: usize, window: WindowConfig, latent: usize) -> Result<Self> {
        if assets == 0 || latent == 0 {
            return Err(Error::Config(format!(
                "need at least one asset and latent dimension, got N={assets}, m={latent}"
            )));
        }
        Ok(GanDims {
            assets,
            h: window.h,
            f: window.f,
            latent,
        })
    }

    pub fn window(&self) -> WindowConfig {
        WindowConfig { h: self.h, f: self.f }
    }

    pub fn history_width(&self) -> usize {
        self.assets * self.h
    }

    pub fn future_width(&self) -> usize {
        self.assets * self.f
    }
}

/// Hidden-layer widths of the four networks.
///
/// Encoder and decoder apply dropout after their last hidden layer; the
/// critic applies it after hidden layer `critic_dropout_after`.
#[derive(Clone, Debug, PartialEq)]
pub struct Architecture {
    pub code: usize,
    pub encoder_hidden: Vec<usize>,
    pub simulator_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub critic_dropout_after: usize,
    pub slope: f64,
    pub dropout: f64,
}

impl Architecture {
    /// Full-size networks. The critic's `512 -> 256` layer fills the gap
    /// between the dropout and the `256 -> 512` layer.
    pub fn standard() -> Self {
        Architecture {
            code: 16,
            encoder_hidden: vec![512, 512],
            simulator_hidden: vec![128, 256, 512, 1024],
            critic_hidden: vec![512, 512, 256, 512],
            critic_dropout_after: 1,
            slope: 0.2,
            dropout: 0.4,
        }
    }

    /// Same topology with every hidden width capped at `width`.
    pub fn compact(width: usize) -> Self {
        let cap = |v: Vec<usize>| v.into_iter().map(|x| x.min(width)).collect();
        let std = Self::standard();
        Architecture {
            code: std.code.min(width),
            encoder_hidden: cap(std.encoder_hidden),
            simulator_hidden: cap(std.simulator_hidden),
            critic_hidden: cap(std.critic_hidden),
            ..std
        }
    }

    fn stack(
        &self,
        input: usize,
        hidden: &[usize],
        output: usize,
        out_act: Activation,
        dropout_after: Option<usize>,
    ) -> Result<NetworkSpec> {
        let lr = Activation::LeakyRelu(self.slope);
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input;
        for (i, &w) in hidden.iter().enumerate() {
            let mut l = LayerSpec::new(prev, w, lr);
            if dropout_after == Some(i) {
                l = l.with_dropout(self.dropout);
            }
            layers.push(l);
            prev = w;
        }
        layers.push(LayerSpec::new(prev, output, out_act));
        NetworkSpec::new(layers)
    }

    pub fn encoder(&self, dims: &GanDims) -> Result<NetworkSpec> {
        let last = self.encoder_hidden.len().checked_sub(1);
        self.stack(dims.history_width(), &self.encoder_hidden, self.code, Activation::Identity, last)
    }

    pub fn decoder(&self, dims: &GanDims) -> Result<NetworkSpec> {
        let last = self.encoder_hidden.len().checked_sub(1);
        self.stack(self.code, &self.encoder_hidden, dims.history_width(), Activation::Identity, last)
    }

    pub fn simulator(&self, dims: &GanDims) -> Result<NetworkSpec> {
        self.stack(
            dims.latent + self.code,
            &self.simulator_hidden,
            dims.future_width(),
            Activation::Tanh,
            None,
        )
    }

    pub fn critic(&self, dims: &GanDims) -> Result<NetworkSpec> {
        self.stack(
            dims.history_width() + dims.future_width(),
            &self.critic_hidden,
            1,
            Activation::Identity,
            Some(self.critic_dropout_after),
        )
    }
}

impl Default for Architecture {
    fn default() -> Self {
        Self::standard()
    }
}

/// Encoder (conditioner) `E`, decoder `F` (ACGAN only), simulator `G` and
/// critic `D`.
#[derive(Clone, Debug, PartialEq)]
pub struct GanBundle<S> {
    pub mode: GanMode,
    pub dims: GanDims,
    pub encoder: ParamSet<S>,
    pub decoder: Option<ParamSet<S>>,
    pub simulator: ParamSet<S>,
    pub discriminator: ParamSet<S>,
    pub trained_epochs: usize,
    /// Free-form `key=value` provenance carried into checkpoints.
    pub config_echo: Vec<(String, String)>,
}

pub fn build_networks<S: Scalar>(
    dims: GanDims,
    arch: &Architecture,
    mode: GanMode,
    adam: AdamConfig,
    rng: &mut RandomSource,
) -> Result<GanBundle<S>> {
    // Each network gets its own stream so CGAN and ACGAN builds with the same
    // seed share E, G and D initial weights.
    let seeds: Vec<u64> = (0..4).map(|_| rng.next_u64()).collect();
    let child = |k: usize| RandomSource::seeded(seeds[k]);
    let encoder = ParamSet::init(arch.encoder(&dims)?, adam, &mut child(0));
    let decoder = match mode {
        GanMode::Acgan => Some(ParamSet::init(arch.decoder(&dims)?, adam, &mut child(1))),
        GanMode::Cgan => None,
    };
    let simulator = ParamSet::init(arch.simulator(&dims)?, adam, &mut child(2));
    let discriminator = ParamSet::init(arch.critic(&dims)?, adam, &mut child(3));
    let bundle = GanBundle {
        mode,
        dims,
        encoder,
        decoder,
        simulator,
        discriminator,
        trained_epochs: 0,
        config_echo: Vec::new(),
    };
    bundle.validate()?;
    Ok(bundle)
}

fn width_error(op: &'static str, expected: usize, found: usize) -> Error {
    Error::Dimension {
        op,
        left: (1, expected),
        right: (1, found),
    }
}

impl<S: Scalar> GanBundle<S> {
    /// Checks that the four networks chain as the mode requires.
    pub fn validate(&self) -> Result<()> {
        let d = &self.dims;
        let e = self.encoder.spec();
        if e.input_width() != d.history_width() {
            return Err(width_error("encoder input", d.history_width(), e.input_width()));
        }
        let code = e.output_width();
        let g = self.simulator.spec();
        if g.input_width() != d.latent + code {
            return Err(width_error("simulator input", d.latent + code, g.input_width()));
        }
        if g.output_width() != d.future_width() {
            return Err(width_error("simulator output", d.future_width(), g.output_width()));
        }
        let c = self.discriminator.spec();
        if c.input_width() != d.history_width() + d.future_width() || c.output_width() != 1 {
            return Err(Error::Dimension {
                op: "discriminator",
                left: (d.history_width() + d.future_width(), 1),
                right: (c.input_width(), c.output_width()),
            });
        }
        match (self.mode, &self.decoder) {
            (GanMode::Acgan, Some(f)) => {
                if f.spec().input_width() != code || f.spec().output_width() != d.history_width() {
                    return Err(Error::Dimension {
                        op: "decoder",
                        left: (code, d.history_width()),
                        right: (f.spec().input_width(), f.spec().output_width()),
                    });
                }
            }
            (GanMode::Acgan, None) => return Err(Error::Mode("ACGAN bundle without decoder".into())),
            (GanMode::Cgan, Some(_)) => return Err(Error::Mode("CGAN bundle with a decoder".into())),
            (GanMode::Cgan, None) => {}
        }
        Ok(())
    }

    pub fn code_width(&self) -> usize {
        self.encoder.spec().output_width()
    }

    /// Simulator output for a batch: `history` is `B x N*h`, `z` is `B x m`,
    /// the result `B x N*f`.
    pub fn generate_batch(
        &self,
        z: &Tensor<S>,
        history: &Tensor<S>,
        mode: DropoutMode,
        rng: &mut RandomSource,
    ) -> Result<Tensor<S>> {
        if z.cols() != self.dims.latent || z.rows() != history.rows() {
            return Err(Error::Dimension {
                op: "generate (latent)",
                left: z.shape(),
                right: (history.rows(), self.dims.latent),
            });
        }
        let code = self.encoder.infer(history, mode, rng)?;
        self.simulator.infer(&Tensor::concat_cols(z, &code)?, mode, rng)
    }

    /// `G(z, E(A_h))` for a single `N x h` history, returned as `N x f`.
    pub fn generate(
        &self,
        z: &[S],
        history: &Tensor<S>,
        mode: DropoutMode,
        rng: &mut RandomSource,
    ) -> Result<Tensor<S>> {
        let d = self.dims;
        if history.shape() != (d.assets, d.h) {
            return Err(Error::Dimension {
                op: "generate (history)",
                left: history.shape(),
                right: (d.assets, d.h),
            });
        }
        let z = Tensor::new(1, z.len(), z.to_vec())?;
        let flat = history.clone().reshape(1, d.history_width())?;
        self.generate_batch(&z, &flat, mode, rng)?.reshape(d.assets, d.f)
    }

    /// `F(E(A_h))` for a single `N x h` history.
    pub fn reconstruct(&self, history: &Tensor<S>, mode: DropoutMode, rng: &mut RandomSource) -> Result<Tensor<S>> {
        let decoder = self
            .decoder
            .as_ref()
            .ok_or_else(|| Error::Mode("reconstruction needs an ACGAN bundle".into()))?;
        let d = self.dims;
        if history.shape() != (d.assets, d.h) {
            return Err(Error::Dimension {
                op: "reconstruct",
                left: history.shape(),
                right: (d.assets, d.h),
            });
        }
        let flat = history.clone().reshape(1, d.history_width())?;
        let code = self.encoder.infer(&flat, mode, rng)?;
        decoder.infer(&code, mode, rng)?.reshape(d.assets, d.h)
    }

    /// Digest of all parameters of the generator side (E, F, G).
    pub fn generator_fingerprint(&self) -> u64 {
        let mut h = self.encoder.fingerprint() ^ self.simulator.fingerprint().rotate_left(21);
        if let Some(f) = &self.decoder {
            h ^= f.fingerprint().rotate_left(42);
        }
        h
    }
}

/// Critic loss value, its terms, and parameter gradients for `D`.
#[derive(Clone, Debug)]
pub struct CriticStep<S> {
    pub loss: S,
    /// `mean D(real) - mean D(fake)`.
    pub wasserstein: S,
    /// `mean (||grad D(x_bar)|| - 1)^2`, before weighting by `lambda1`.
    pub penalty: S,
    pub gradients: Vec<Tensor<S>>,
}

/// `-(mean D(real) - mean D(fake)) + lambda1 * mean (||grad D(x_bar)|| - 1)^2`
/// with `x_bar = eps * real + (1 - eps) * fake`, one `eps` per row.
pub fn discriminator_loss<S: Scalar>(
    critic: &ParamSet<S>,
    real: &Tensor<S>,
    fake: &Tensor<S>,
    eps: &[S],
    lambda1: S,
    mode: DropoutMode,
    rng: &mut RandomSource,
) -> Result<CriticStep<S>> {
    real.same_shape(fake, "discriminator_loss")?;
    if eps.len() != real.rows() {
        return Err(width_error("discriminator_loss (eps)", real.rows(), eps.len()));
    }
    let x_bar = Tensor::from_fn(real.rows(), real.cols(), |r, c| {
        eps[r] * real.get(r, c) + (S::one() - eps[r]) * fake.get(r, c)
    });

    let mut tape = Tape::new();
    let net = critic.bind(&mut tape, true)?;
    let real_id = tape.constant(real.clone())?;
    let fake_id = tape.constant(fake.clone())?;
    let d_real = net.forward(&mut tape, real_id, mode, rng)?;
    let d_fake = net.forward(&mut tape, fake_id, mode, rng)?;
    let mean_real = tape.mean(d_real)?;
    let mean_fake = tape.mean(d_fake)?;
    let neg_w = tape.sub(mean_fake, mean_real)?;

    let x_id = tape.leaf(x_bar, true)?;
    let grad = net.input_gradient(&mut tape, x_id, mode, rng)?;
    let norms = tape.row_norm(grad)?;
    let gap = tape.add_scalar(norms, -S::one())?;
    let sq = tape.square(gap)?;
    let penalty = tape.mean(sq)?;
    let weighted = tape.scale(penalty, lambda1)?;
    let loss = tape.add(neg_w, weighted)?;

    let mut grads = tape.backward(loss)?;
    Ok(CriticStep {
        loss: tape.value(loss).item()?,
        wasserstein: -tape.value(neg_w).item()?,
        penalty: tape.value(penalty).item()?,
        gradients: net.gradients(&tape, &mut grads),
    })
}

/// What the decoder is asked to reproduce from the code of `A_h`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ReconstructionTarget {
    /// `A_h` itself.
    #[default]
    Identity,
}

impl ReconstructionTarget {
    pub fn target<S: Scalar>(&self, history: &Tensor<S>) -> Tensor<S> {
        match self {
            ReconstructionTarget::Identity => history.clone(),
        }
    }
}

/// Generator-side loss value, its terms, and gradients for E, F and G.
#[derive(Clone, Debug)]
pub struct GeneratorStep<S> {
    pub loss: S,
    /// `mean D([A_h, G(z, E(A_h))])`.
    pub score: S,
    /// Unweighted reconstruction MSE; `None` in CGAN mode.
    pub autoencoding: Option<S>,
    pub encoder_grads: Vec<Tensor<S>>,
    pub decoder_grads: Option<Vec<Tensor<S>>>,
    pub simulator_grads: Vec<Tensor<S>>,
    /// The fake futures produced in this pass, `B x N*f`.
    pub fake: Tensor<S>,
}

/// `-mean D([A_h, G(z, E(A_h))]) + lambda2 * MSE(F(E(A_h)), target)`; the
/// reconstruction term only exists in ACGAN mode. Critic parameters are
/// constants here.
pub fn generator_loss<S: Scalar>(
    bundle: &GanBundle<S>,
    history: &Tensor<S>,
    z: &Tensor<S>,
    lambda2: S,
    target: ReconstructionTarget,
    mode: DropoutMode,
    rng: &mut RandomSource,
) -> Result<GeneratorStep<S>> {
    let d = bundle.dims;
    if history.cols() != d.history_width() || z.cols() != d.latent || z.rows() != history.rows() {
        return Err(Error::Dimension {
            op: "generator_loss",
            left: history.shape(),
            right: z.shape(),
        });
    }
    let mut tape = Tape::new();
    let enc = bundle.encoder.bind(&mut tape, true)?;
    let sim = bundle.simulator.bind(&mut tape, true)?;
    let dec = match &bundle.decoder {
        Some(f) if bundle.mode == GanMode::Acgan => Some(f.bind(&mut tape, true)?),
        _ => None,
    };
    let critic = bundle.discriminator.bind(&mut tape, false)?;

    let hist = tape.constant(history.clone())?;
    let z_id = tape.constant(z.clone())?;
    let code = enc.forward(&mut tape, hist, mode, rng)?;
    let sim_in = tape.concat_cols(z_id, code)?;
    let fake = sim.forward(&mut tape, sim_in, mode, rng)?;
    let critic_in = tape.concat_cols(hist, fake)?;
    let scores = critic.forward(&mut tape, critic_in, mode, rng)?;
    let score = tape.mean(scores)?;
    let mut loss = tape.scale(score, -S::one())?;

    let mut ap = None;
    if let Some(dec) = &dec {
        let recon = dec.forward(&mut tape, code, mode, rng)?;
        let tgt = tape.constant(target.target(history))?;
        let mse = tape.mse(recon, tgt)?;
        let weighted = tape.scale(mse, lambda2)?;
        loss = tape.add(loss, weighted)?;
        ap = Some(mse);
    }

    let mut grads = tape.backward(loss)?;
    Ok(GeneratorStep {
        loss: tape.value(loss).item()?,
        score: tape.value(score).item()?,
        autoencoding: ap.map(|id| tape.value(id).item()).transpose()?,
        encoder_grads: enc.gradients(&tape, &mut grads),
        decoder_grads: dec.as_ref().map(|n| n.gradients(&tape, &mut grads)),
        simulator_grads: sim.gradients(&tape, &mut grads),
        fake: tape.value(fake).clone(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epochs: usize,
    pub latent: usize,
    pub seed: u64,
    pub critic_steps: usize,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda1: 10.0,
            lambda2: 3.0,
            learning_rate: 2e-5,
            beta1: 0.5,
            beta2: 0.999,
            epochs: 1000,
            latent: 100,
            seed: 0,
            critic_steps: 1,
            batch_size: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return bad("lambda1 must be finite and >= 0");
        }
        if !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return bad("lambda2 must be finite and >= 0");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if self.latent == 0 || self.epochs == 0 || self.critic_steps == 0 || self.batch_size == 0 {
            return bad("latent dimension, epochs, critic steps and batch size must be >= 1");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
        }
    }
}

/// Per-epoch means of the loss terms over all minibatches.
#[derive(Clone, Debug, PartialEq)]
pub struct LossRecord {
    pub epoch: usize,
    pub wasserstein: f64,
    pub gradient_penalty: f64,
    pub generator_score: f64,
    pub autoencoding: Option<f64>,
    pub batches: usize,
}

/// Normalized training windows stacked as rows.
#[derive(Clone, Debug)]
pub struct TrainingSet<S> {
    pub histories: Tensor<S>,
    pub futures: Tensor<S>,
}

impl<S: Scalar> TrainingSet<S> {
    pub fn from_prices(prices: &PriceMatrix<S>, window: WindowConfig) -> Result<Self> {
        let idx = training_indices(prices.n_days(), window.w())?;
        let n = prices.n_assets();
        let mut hist = Vec::with_capacity(idx.len() * n * window.h);
        let mut fut = Vec::with_capacity(idx.len() * n * window.f);
        for &i in &idx {
            let w = extract_window(prices, i, window, true)?;
            hist.extend_from_slice(w.history.data());
            fut.extend_from_slice(w.future.as_ref().map(Tensor::data).unwrap_or(&[]));
        }
        Ok(TrainingSet {
            histories: Tensor::new(idx.len(), n * window.h, hist)?,
            futures: Tensor::new(idx.len(), n * window.f, fut)?,
        })
    }

    pub fn len(&self) -> usize {
        self.histories.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn gather(src: &Tensor<S>, rows: &[usize]) -> Tensor<S> {
        let cols = src.cols();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for &r in rows {
            data.extend_from_slice(src.row(r));
        }
        Tensor::from_fn(rows.len(), cols, |r, c| data[r * cols + c])
    }
}

fn apply_step<S: Scalar>(p: &mut ParamSet<S>, grads: &[Tensor<S>], epoch: usize, batch: usize) -> Result<()> {
    p.apply_gradients(grads).map_err(|e| abort(epoch, batch, e))
}

fn abort(epoch: usize, batch: usize, e: Error) -> Error {
    match e {
        Error::TrainingAborted { .. } => e,
        other => Error::TrainingAborted {
            epoch,
            batch,
            reason: other.to_string(),
        },
    }
}

/// Trains for `cfg.epochs` epochs; see [`train_with`].
pub fn train<S: Scalar>(
    bundle: &mut GanBundle<S>,
    prices: &PriceMatrix<S>,
    cfg: &TrainConfig,
) -> Result<Vec<LossRecord>> {
    train_with(bundle, prices, cfg, |_, _| Ok(()))
}

/// Each epoch visits every training window once in a fresh random order. Per
/// minibatch: one generator update, regeneration of the fakes with the updated
/// generator and the same latent draws, then `critic_steps` critic updates.
/// `on_epoch` runs after each epoch with the bundle and that epoch's record.
pub fn train_with<S: Scalar>(
    bundle: &mut GanBundle<S>,
    prices: &PriceMatrix<S>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&GanBundle<S>, &LossRecord) -> Result<()>,
) -> Result<Vec<LossRecord>> {
    cfg.validate()?;
    bundle.validate()?;
    let d = bundle.dims;
    if prices.n_assets() != d.assets {
        return Err(width_error("train (assets)", d.assets, prices.n_assets()));
    }
    if cfg.latent != d.latent {
        return Err(Error::Config(format!(
            "latent dimension {} does not match the bundle's {}",
            cfg.latent, d.latent
        )));
    }
    let data = TrainingSet::from_prices(prices, d.window())?;
    let adam = cfg.adam();
    for p in bundle_params_mut(bundle) {
        p.adam.learning_rate = S::lit(adam.learning_rate);
        p.adam.beta1 = S::lit(adam.beta1);
        p.adam.beta2 = S::lit(adam.beta2);
    }

    let lambda1 = S::lit(cfg.lambda1);
    let lambda2 = S::lit(cfg.lambda2);
    let mut rng = RandomSource::stream(cfg.seed, 1 + bundle.trained_epochs as u64);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        let epoch = bundle.trained_epochs + 1;
        rng.shuffle(&mut order);
        let mut sums = [0.0f64; 4];
        let mut batches = 0usize;
        for (b, rows) in order.chunks(cfg.batch_size).enumerate() {
            let hist = TrainingSet::gather(&data.histories, rows);
            let fut = TrainingSet::gather(&data.futures, rows);
            let z = Tensor::new(rows.len(), d.latent, rng.normals(rows.len() * d.latent))?;

            let g = generator_loss(
                bundle,
                &hist,
                &z,
                lambda2,
                ReconstructionTarget::Identity,
                DropoutMode::Train,
                &mut rng,
            )
            .map_err(|err| abort(epoch, b, err))?;
            apply_step(&mut bundle.encoder, &g.encoder_grads, epoch, b)?;
            apply_step(&mut bundle.simulator, &g.simulator_grads, epoch, b)?;
            if let (Some(dec), Some(grads)) = (bundle.decoder.as_mut(), g.decoder_grads.as_ref()) {
                apply_step(dec, grads, epoch, b)?;
            }

            let fake_future = bundle
                .generate_batch(&z, &hist, DropoutMode::Train, &mut rng)
                .map_err(|err| abort(epoch, b, err))?;
            let real = Tensor::concat_cols(&hist, &fut)?;
            let fake = Tensor::concat_cols(&hist, &fake_future)?;
            let mut c_w = 0.0;
            let mut c_p = 0.0;
            for _ in 0..cfg.critic_steps {
                let eps: Vec<S> = (0..rows.len()).map(|_| rng.uniform()).collect();
                let c = discriminator_loss(
                    &bundle.discriminator,
                    &real,
                    &fake,
                    &eps,
                    lambda1,
                    DropoutMode::Train,
                    &mut rng,
                )
                .map_err(|err| abort(epoch, b, err))?;
                apply_step(&mut bundle.discriminator, &c.gradients, epoch, b)?;
                c_w += c.wasserstein.as_f64();
                c_p += c.penalty.as_f64();
            }
            let k = cfg.critic_steps as f64;
            sums[0] += c_w / k;
            sums[1] += c_p / k;
            sums[2] += g.score.as_f64();
            sums[3] += g.autoencoding.map_or(0.0, S::as_f64);
            batches += 1;
        }
        let n = batches as f64;
        let record = LossRecord {
            epoch,
            wasserstein: sums[0] / n,
            gradient_penalty: sums[1] / n,
            generator_score: sums[2] / n,
            autoencoding: (bundle.mode == GanMode::Acgan).then_some(sums[3] / n),
            batches,
        };
        debug!(
            "epoch {epoch}: W={:.5} GP={:.5} score={:.5} AP={:?}",
            record.wasserstein, record.gradient_penalty, record.generator_score, record.autoencoding
        );
        bundle.trained_epochs = epoch;
        on_epoch(bundle, &record)?;
        history.push(record);
    }
    Ok(history)
}

fn bundle_params_mut<S>(b: &mut GanBundle<S>) -> Vec<&mut ParamSet<S>> {
    let mut v = vec![&mut b.encoder, &mut b.simulator, &mut b.discriminator];
    if let Some(f) = b.decoder.as_mut() {
        v.push(f);
    }
    v
}

/// Mean reconstruction error over the given normalized histories (`B x N*h`).
pub fn autoencoding_error<S: Scalar>(bundle: &GanBundle<S>, histories: &Tensor<S>) -> Result<S> {
    let decoder = bundle
        .decoder
        .as_ref()
        .ok_or_else(|| Error::Mode("reconstruction needs an ACGAN bundle".into()))?;
    let mut rng = RandomSource::seeded(0);
    let code = bundle.encoder.infer(histories, DropoutMode::Infer, &mut rng)?;
    let recon = decoder.infer(&code, DropoutMode::Infer, &mut rng)?;
    let diff = recon.zip_map(histories, "autoencoding_error", |a, b| (a - b) * (a - b))?;
    Ok(diff.sum() / S::from_usize_lossy(diff.len()))
}
