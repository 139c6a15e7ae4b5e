mod common;

use acgan::gan::{train, GanMode, TrainConfig};
use acgan::random::RandomSource;
use acgan::tape::{DropoutMode, Tape};
use acgan::tensor::Tensor;
use common::*;
use proptest::prelude::*;

#[test]
fn critic_gradient_with_penalty_matches_differences() {
    for seed in [1, 2] {
        let case = gradient_case(seed, GanMode::Acgan, 3);
        let c = case.critic_error(DropoutMode::Infer, 1e-5);
        assert!(c.error < 1e-4 && c.kinks == 0, "seed {seed}: {c:?}");
        let c = case.critic_error(DropoutMode::Train, 1e-5);
        assert!(c.error < 1e-4 && c.kinks == 0, "seed {seed} (dropout): {c:?}");
    }
}

#[test]
fn generator_gradient_matches_differences() {
    for (seed, mode) in [(3, GanMode::Acgan), (4, GanMode::Cgan)] {
        let case = gradient_case(seed, mode, 3);
        let c = case.generator_error(DropoutMode::Train, 1e-5);
        assert!(c.error < 1e-4 && c.kinks == 0, "{mode} seed {seed}: {c:?}");
    }
}

#[test]
fn training_steps_keep_their_own_parameters() {
    let prices = gbm(3, 30, 5);
    let mut b = small_bundle(GanMode::Acgan, 9);
    let cfg = TrainConfig {
        epochs: 1,
        latent: 8,
        batch_size: 4,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    let before = b.clone();
    train(&mut b, &prices, &cfg).unwrap();
    // Every network moves, and each Adam state counts exactly its own steps.
    let batches = (30 - 12 + 1usize).div_ceil(4) as u64;
    for (old, new) in [
        (&before.encoder, &b.encoder),
        (&before.simulator, &b.simulator),
        (&before.discriminator, &b.discriminator),
        (before.decoder.as_ref().unwrap(), b.decoder.as_ref().unwrap()),
    ] {
        assert_ne!(old.flatten(), new.flatten());
        assert_eq!(new.adam.step, batches);
    }
}

#[test]
fn generator_loss_leaves_critic_gradient_out() {
    let case = gradient_case(11, GanMode::Acgan, 2);
    let mut rng = RandomSource::seeded(1);
    let g = acgan::gan::generator_loss(
        &case.bundle,
        &case.history,
        &case.z,
        2.0,
        acgan::gan::ReconstructionTarget::Identity,
        DropoutMode::Infer,
        &mut rng,
    )
    .unwrap();
    assert_eq!(g.encoder_grads.len(), case.bundle.encoder.tensors().len());
    assert_eq!(g.simulator_grads.len(), case.bundle.simulator.tensors().len());
    assert_eq!(g.decoder_grads.unwrap().len(), case.bundle.decoder.as_ref().unwrap().tensors().len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Tape gradient of sum(leaky(x W + b) * tanh(x W + b)) against central
    /// differences in every input entry.
    #[test]
    fn tape_ops_match_differences(
        xs in prop::collection::vec(-2.0f64..2.0, 6),
        ws in prop::collection::vec(-1.0f64..1.0, 6),
        bs in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let f = |x: &Tensor<f64>, grad: bool| -> (f64, Option<Tensor<f64>>) {
            let mut t = Tape::new();
            let xi = t.leaf(x.clone(), grad).unwrap();
            let wi = t.constant(Tensor::new(2, 3, ws.clone()).unwrap()).unwrap();
            let bi = t.constant(Tensor::new(1, 3, bs.clone()).unwrap()).unwrap();
            let a = t.affine(xi, wi, bi).unwrap();
            let l = t.leaky_relu(a, 0.2).unwrap();
            let th = t.tanh(a).unwrap();
            let p = t.mul(l, th).unwrap();
            let n = t.row_norm(p).unwrap();
            let s = t.sum(n).unwrap();
            let v = t.value(s).item().unwrap();
            let g = grad.then(|| t.backward(s).unwrap().get(xi).unwrap().clone());
            (v, g)
        };
        let x = Tensor::new(3, 2, xs.clone()).unwrap();
        let (_, g) = f(&x, true);
        let g = g.unwrap();
        let h = 1e-6;
        for i in 0..6 {
            let mut up = xs.clone();
            up[i] += h;
            let mut dn = xs.clone();
            dn[i] -= h;
            let num = (f(&Tensor::new(3, 2, up).unwrap(), false).0 - f(&Tensor::new(3, 2, dn).unwrap(), false).0) / (2.0 * h);
            let ana = g.data()[i];
            // Kinks of the leaky ReLU and the norm at zero are skipped.
            let pre = Tensor::matmul(&x, false, &Tensor::new(2, 3, ws.clone()).unwrap(), false).unwrap();
            let near_kink = pre.row(i / 2).iter().zip(&bs).any(|(p, b)| (p + b).abs() < 1e-4);
            prop_assume!(!near_kink);
            prop_assert!((num - ana).abs() <= 1e-5 * (1.0 + ana.abs()), "entry {i}: {num} vs {ana}");
        }
    }
}
