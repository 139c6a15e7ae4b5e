//! Fully connected networks described as layer lists, with their parameters
//! and optimizer state.

use crate::adam::{adam_step, AdamState};
use crate::error::{Error, Result};
use crate::random::RandomSource;
use crate::scalar::Scalar;
use crate::tape::{DropoutMode, NodeId, Tape};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    Tanh,
    Identity,
}

/// One fully connected layer: affine map, activation, then optional dropout.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
    pub dropout: Option<f64>,
}

impl LayerSpec {
    pub fn new(input: usize, output: usize, activation: Activation) -> Self {
        LayerSpec {
            input,
            output,
            activation,
            dropout: None,
        }
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout = Some(rate);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output != pair[1].input {
                return Err(Error::Config(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].output,
                    i + 1,
                    pair[1].input
                )));
            }
        }
        for l in &layers {
            if l.input == 0 || l.output == 0 {
                return Err(Error::Config("zero-width layer".into()));
            }
            if let Activation::LeakyRelu(p) = l.activation {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::Config(format!("leaky slope {p} outside (0, 1)")));
                }
            }
            if let Some(r) = l.dropout {
                if !(0.0..1.0).contains(&r) {
                    return Err(Error::Config(format!("dropout rate {r} outside [0, 1)")));
                }
            }
        }
        Ok(NetworkSpec { layers })
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].output
    }

    /// Shapes of the parameter tensors in storage order (w0, b0, w1, b1, ...).
    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        self.layers
            .iter()
            .flat_map(|l| [(l.input, l.output), (1, l.output)])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes().iter().map(|(r, c)| r * c).sum()
    }
}

/// Learnable weights and biases of one network plus its Adam state.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet<S> {
    spec: NetworkSpec,
    /// Layer `i` weight at `2i` (input x output) and bias at `2i + 1` (1 x output).
    tensors: Vec<Tensor<S>>,
    pub adam: AdamState<S>,
}

/// Optimizer hyperparameters attached to a fresh [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 2e-5,
            beta1: 0.5,
            beta2: 0.999,
        }
    }
}

impl<S: Scalar> ParamSet<S> {
    /// Fan-in scaled uniform initialization: every weight and bias of a layer
    /// with `n` inputs is drawn from `U(-1/sqrt(n), 1/sqrt(n))`.
    pub fn init(spec: NetworkSpec, adam: AdamConfig, rng: &mut RandomSource) -> Self {
        let mut tensors = Vec::with_capacity(spec.layers.len() * 2);
        for l in &spec.layers {
            let bound = S::one() / S::from_usize_lossy(l.input).sqrt();
            tensors.push(Tensor::from_fn(l.input, l.output, |_, _| {
                rng.uniform_range(-bound, bound)
            }));
            tensors.push(Tensor::from_fn(1, l.output, |_, _| rng.uniform_range(-bound, bound)));
        }
        let state = AdamState::new(
            S::lit(adam.learning_rate),
            S::lit(adam.beta1),
            S::lit(adam.beta2),
            &spec.param_shapes(),
        );
        ParamSet {
            spec,
            tensors,
            adam: state,
        }
    }

    /// Assembles a parameter set from explicit tensors.
    pub fn from_tensors(spec: NetworkSpec, tensors: Vec<Tensor<S>>, adam: AdamState<S>) -> Result<Self> {
        let shapes = spec.param_shapes();
        if shapes.len() != tensors.len() {
            return Err(Error::Dimension {
                op: "param set",
                left: (shapes.len(), 1),
                right: (tensors.len(), 1),
            });
        }
        for (shape, t) in shapes.iter().zip(&tensors) {
            if *shape != t.shape() {
                return Err(Error::Dimension {
                    op: "param set",
                    left: *shape,
                    right: t.shape(),
                });
            }
            t.ensure_finite("param set")?;
        }
        if adam.first_moment.len() != shapes.len() || adam.second_moment.len() != shapes.len() {
            return Err(Error::Dimension {
                op: "adam state",
                left: (shapes.len(), 1),
                right: (adam.first_moment.len(), adam.second_moment.len()),
            });
        }
        for ((shape, m), v) in shapes.iter().zip(&adam.first_moment).zip(&adam.second_moment) {
            if *shape != m.shape() || *shape != v.shape() {
                return Err(Error::Dimension {
                    op: "adam state",
                    left: *shape,
                    right: m.shape(),
                });
            }
        }
        Ok(ParamSet { spec, tensors, adam })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn tensors(&self) -> &[Tensor<S>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<S>] {
        &mut self.tensors
    }

    pub fn weights(&self, layer: usize) -> &Tensor<S> {
        &self.tensors[2 * layer]
    }

    pub fn bias(&self, layer: usize) -> &Tensor<S> {
        &self.tensors[2 * layer + 1]
    }

    /// All parameters flattened in storage order.
    pub fn flatten(&self) -> Vec<S> {
        self.tensors.iter().flat_map(|t| t.data().iter().copied()).collect()
    }

    /// Overwrites all parameters from a flat vector in storage order.
    pub fn assign_flat(&mut self, values: &[S]) -> Result<()> {
        let total: usize = self.tensors.iter().map(Tensor::len).sum();
        if values.len() != total {
            return Err(Error::Dimension {
                op: "assign_flat",
                left: (total, 1),
                right: (values.len(), 1),
            });
        }
        let mut offset = 0;
        for t in &mut self.tensors {
            let n = t.len();
            t.data_mut().copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Order-sensitive digest of the parameter bits, for change detection.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.flatten() {
            for b in v.as_f64().to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    /// Registers the parameters as tape leaves.
    pub fn bind(&self, tape: &mut Tape<S>, requires_grad: bool) -> Result<BoundNetwork> {
        let ids = self
            .tensors
            .iter()
            .map(|t| tape.leaf(t.clone(), requires_grad))
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundNetwork { spec: self.spec.clone(), ids })
    }

    pub fn apply_gradients(&mut self, grads: &[Tensor<S>]) -> Result<()> {
        adam_step(&mut self.tensors, grads, &mut self.adam)
    }

    /// Forward pass without recording.
    pub fn infer(&self, input: &Tensor<S>, mode: DropoutMode, rng: &mut RandomSource) -> Result<Tensor<S>> {
        if input.cols() != self.spec.input_width() {
            return Err(Error::Dimension {
                op: "network input",
                left: input.shape(),
                right: (input.rows(), self.spec.input_width()),
            });
        }
        let mut x = input.clone();
        for (i, layer) in self.spec.layers.iter().enumerate() {
            x = Tensor::matmul(&x, false, self.weights(i), false)?.add_row_bias(self.bias(i))?;
            x = match layer.activation {
                Activation::LeakyRelu(p) => x.leaky_relu(S::lit(p)),
                Activation::Tanh => x.map(S::tanh),
                Activation::Identity => x,
            };
            if let (Some(rate), DropoutMode::Train) = (layer.dropout, mode) {
                let rate = S::lit(rate);
                if rate > S::zero() {
                    let keep = S::one() / (S::one() - rate);
                    for v in x.data_mut() {
                        *v *= if rng.uniform::<S>() < rate { S::zero() } else { keep };
                    }
                }
            }
            x.ensure_finite("network forward")?;
        }
        Ok(x)
    }

    /// Gradient of the (scalar-output) network with respect to each input row,
    /// evaluated in inference mode.
    pub fn input_gradient(&self, input: &Tensor<S>) -> Result<Tensor<S>> {
        let mut tape = Tape::new();
        let net = self.bind(&mut tape, false)?;
        let x = tape.leaf(input.clone(), true)?;
        let mut rng = RandomSource::seeded(0);
        let g = net.input_gradient(&mut tape, x, DropoutMode::Infer, &mut rng)?;
        Ok(tape.value(g).clone())
    }
}

/// Parameters registered on a particular tape.
#[derive(Clone, Debug)]
pub struct BoundNetwork {
    spec: NetworkSpec,
    ids: Vec<NodeId>,
}

impl BoundNetwork {
    pub fn param_ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn forward<S: Scalar>(
        &self,
        tape: &mut Tape<S>,
        input: NodeId,
        mode: DropoutMode,
        rng: &mut RandomSource,
    ) -> Result<NodeId> {
        let width = tape.value(input).cols();
        if width != self.spec.input_width() {
            return Err(Error::Dimension {
                op: "network input",
                left: tape.value(input).shape(),
                right: (tape.value(input).rows(), self.spec.input_width()),
            });
        }
        let mut x = input;
        for (i, layer) in self.spec.layers.iter().enumerate() {
            x = tape.affine(x, self.ids[2 * i], self.ids[2 * i + 1])?;
            x = match layer.activation {
                Activation::LeakyRelu(p) => tape.leaky_relu(x, S::lit(p))?,
                Activation::Tanh => tape.tanh(x)?,
                Activation::Identity => x,
            };
            if let Some(rate) = layer.dropout {
                x = tape.dropout(x, S::lit(rate), mode, rng)?;
            }
        }
        Ok(x)
    }

    /// Records `d sum(D(x)) / dx` for a network with one output unit. Rows are
    /// independent samples, so row `b` of the result is `dD(x_b)/dx_b`.
    pub fn input_gradient<S: Scalar>(
        &self,
        tape: &mut Tape<S>,
        input: NodeId,
        mode: DropoutMode,
        rng: &mut RandomSource,
    ) -> Result<NodeId> {
        if self.spec.output_width() != 1 {
            return Err(Error::Dimension {
                op: "input_gradient (scalar output required)",
                left: (1, self.spec.output_width()),
                right: (1, 1),
            });
        }
        let out = self.forward(tape, input, mode, rng)?;
        let total = tape.sum(out)?;
        Ok(tape.grad_graph(total, &[input])?[0])
    }

    /// Pulls this network's parameter gradients out of a backward pass.
    pub fn gradients<S: Scalar>(&self, tape: &Tape<S>, grads: &mut crate::tape::Gradients<S>) -> Vec<Tensor<S>> {
        self.ids
            .iter()
            .map(|&id| grads.take_or_zeros(id, tape.value(id).shape()))
            .collect()
    }
}
