//! Reverse-mode differentiation over a linear tape.
//!
//! Nodes are appended in evaluation order, so every operation refers only to
//! nodes with smaller ids and descending id order is a reverse topological
//! order. Two backward passes are provided:
//!
//! * [`Tape::backward`] computes numeric adjoints of a scalar root.
//! * [`Tape::grad_graph`] records the adjoint computation as new tape nodes,
//!   so the resulting gradient can itself be differentiated. The WGAN-GP
//!   penalty (a function of an input gradient) relies on this.

use crate::error::{Error, Result};
use crate::random::RandomSource;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Whether stochastic layers sample (training) or pass through (inference).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Infer,
}

#[derive(Clone, Debug)]
enum Op<S> {
    Leaf,
    MatMul {
        a: NodeId,
        b: NodeId,
        trans_a: bool,
        trans_b: bool,
    },
    AddRowBias {
        x: NodeId,
        bias: NodeId,
    },
    LeakyRelu {
        x: NodeId,
        slope: S,
    },
    Tanh {
        x: NodeId,
    },
    /// Multiplication by a constant tensor (dropout masks, rectifier slopes).
    MaskMul {
        x: NodeId,
        mask: Tensor<S>,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Sub {
        a: NodeId,
        b: NodeId,
    },
    Mul {
        a: NodeId,
        b: NodeId,
    },
    Scale {
        x: NodeId,
        factor: S,
    },
    AddScalar {
        x: NodeId,
        shift: S,
    },
    Square {
        x: NodeId,
    },
    ConcatCols {
        a: NodeId,
        b: NodeId,
    },
    SliceCols {
        x: NodeId,
        start: usize,
        len: usize,
    },
    EmbedCols {
        x: NodeId,
        start: usize,
        total: usize,
    },
    ColSum {
        x: NodeId,
    },
    BroadcastRows {
        x: NodeId,
        rows: usize,
    },
    Sum {
        x: NodeId,
    },
    Fill {
        x: NodeId,
        rows: usize,
        cols: usize,
    },
    RowNorm {
        x: NodeId,
    },
}

impl<S: Scalar> Op<S> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul { .. } => "matmul",
            Op::AddRowBias { .. } => "add_row_bias",
            Op::LeakyRelu { .. } => "leaky_relu",
            Op::Tanh { .. } => "tanh",
            Op::MaskMul { .. } => "mask_mul",
            Op::Add { .. } => "add",
            Op::Sub { .. } => "sub",
            Op::Mul { .. } => "mul",
            Op::Scale { .. } => "scale",
            Op::AddScalar { .. } => "add_scalar",
            Op::Square { .. } => "square",
            Op::ConcatCols { .. } => "concat_cols",
            Op::SliceCols { .. } => "slice_cols",
            Op::EmbedCols { .. } => "embed_cols",
            Op::ColSum { .. } => "col_sum",
            Op::BroadcastRows { .. } => "broadcast_rows",
            Op::Sum { .. } => "sum",
            Op::Fill { .. } => "fill",
            Op::RowNorm { .. } => "row_norm",
        }
    }

    fn inputs(&self) -> [Option<NodeId>; 2] {
        match *self {
            Op::Leaf => [None, None],
            Op::MatMul { a, b, .. }
            | Op::Add { a, b }
            | Op::Sub { a, b }
            | Op::Mul { a, b }
            | Op::ConcatCols { a, b } => [Some(a), Some(b)],
            Op::AddRowBias { x, bias } => [Some(x), Some(bias)],
            Op::LeakyRelu { x, .. }
            | Op::Tanh { x }
            | Op::MaskMul { x, .. }
            | Op::Scale { x, .. }
            | Op::AddScalar { x, .. }
            | Op::Square { x }
            | Op::SliceCols { x, .. }
            | Op::EmbedCols { x, .. }
            | Op::ColSum { x }
            | Op::BroadcastRows { x, .. }
            | Op::Sum { x }
            | Op::Fill { x, .. }
            | Op::RowNorm { x } => [Some(x), None],
        }
    }
}

#[derive(Clone, Debug)]
struct Node<S> {
    op: Op<S>,
    value: Tensor<S>,
    requires_grad: bool,
}

/// Recorded computation with value slots per node.
#[derive(Clone, Debug, Default)]
pub struct Tape<S> {
    nodes: Vec<Node<S>>,
}

/// Numeric adjoints produced by [`Tape::backward`].
#[derive(Clone, Debug)]
pub struct Gradients<S> {
    adjoints: Vec<Option<Tensor<S>>>,
    order: Vec<NodeId>,
}

impl<S: Scalar> Gradients<S> {
    pub fn get(&self, id: NodeId) -> Option<&Tensor<S>> {
        self.adjoints.get(id.0).and_then(Option::as_ref)
    }

    /// Adjoint of `id`, or zeros of `shape` when it does not influence the root.
    pub fn take_or_zeros(&mut self, id: NodeId, shape: (usize, usize)) -> Tensor<S> {
        self.adjoints
            .get_mut(id.0)
            .and_then(Option::take)
            .unwrap_or_else(|| Tensor::zeros(shape.0, shape.1))
    }

    /// Nodes in the order the backward pass processed them.
    pub fn visit_order(&self) -> &[NodeId] {
        &self.order
    }
}

fn eval<S: Scalar>(op: &Op<S>, nodes: &[Node<S>]) -> Result<Tensor<S>> {
    let v = |id: NodeId| &nodes[id.0].value;
    Ok(match op {
        Op::Leaf => unreachable!("leaves carry their own value"),
        Op::MatMul {
            a,
            b,
            trans_a,
            trans_b,
        } => Tensor::matmul(v(*a), *trans_a, v(*b), *trans_b)?,
        Op::AddRowBias { x, bias } => v(*x).add_row_bias(v(*bias))?,
        Op::LeakyRelu { x, slope } => v(*x).leaky_relu(*slope),
        Op::Tanh { x } => v(*x).map(S::tanh),
        Op::MaskMul { x, mask } => v(*x).zip_map(mask, "mask_mul", |a, m| a * m)?,
        Op::Add { a, b } => v(*a).zip_map(v(*b), "add", |x, y| x + y)?,
        Op::Sub { a, b } => v(*a).zip_map(v(*b), "sub", |x, y| x - y)?,
        Op::Mul { a, b } => v(*a).zip_map(v(*b), "mul", |x, y| x * y)?,
        Op::Scale { x, factor } => v(*x).map(|a| a * *factor),
        Op::AddScalar { x, shift } => v(*x).map(|a| a + *shift),
        Op::Square { x } => v(*x).map(|a| a * a),
        Op::ConcatCols { a, b } => Tensor::concat_cols(v(*a), v(*b))?,
        Op::SliceCols { x, start, len } => v(*x).slice_cols(*start, *len)?,
        Op::EmbedCols { x, start, total } => v(*x).embed_cols(*start, *total)?,
        Op::ColSum { x } => v(*x).col_sum(),
        Op::BroadcastRows { x, rows } => v(*x).broadcast_rows(*rows)?,
        Op::Sum { x } => Tensor::scalar(v(*x).sum()),
        Op::Fill { x, rows, cols } => Tensor::filled(*rows, *cols, v(*x).item()?),
        Op::RowNorm { x } => v(*x).row_norms(),
    })
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<S> {
        &self.nodes[id.0].value
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Leaf node; `requires_grad` marks it as a differentiation target.
    pub fn leaf(&mut self, value: Tensor<S>, requires_grad: bool) -> Result<NodeId> {
        value.ensure_finite("leaf")?;
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
            requires_grad,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: Tensor<S>) -> Result<NodeId> {
        self.leaf(value, false)
    }

    fn push(&mut self, op: Op<S>) -> Result<NodeId> {
        let value = eval(&op, &self.nodes)?;
        value.ensure_finite(op.name())?;
        let requires_grad = op
            .inputs()
            .iter()
            .flatten()
            .any(|id| self.nodes[id.0].requires_grad);
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.matmul_t(a, false, b, false)
    }

    pub fn matmul_t(&mut self, a: NodeId, trans_a: bool, b: NodeId, trans_b: bool) -> Result<NodeId> {
        self.push(Op::MatMul {
            a,
            b,
            trans_a,
            trans_b,
        })
    }

    /// `input * weights + bias`, the bias broadcast over rows.
    pub fn affine(&mut self, input: NodeId, weights: NodeId, bias: NodeId) -> Result<NodeId> {
        let (xr, xc) = self.value(input).shape();
        let (wr, wc) = self.value(weights).shape();
        let (br, bc) = self.value(bias).shape();
        if xc != wr {
            return Err(Error::Dimension {
                op: "affine (input vs weights)",
                left: (xr, xc),
                right: (wr, wc),
            });
        }
        if br != 1 || bc != wc {
            return Err(Error::Dimension {
                op: "affine (bias vs weights)",
                left: (br, bc),
                right: (wr, wc),
            });
        }
        let xw = self.matmul(input, weights)?;
        self.push(Op::AddRowBias { x: xw, bias })
    }

    pub fn add_row_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        self.push(Op::AddRowBias { x, bias })
    }

    pub fn leaky_relu(&mut self, x: NodeId, slope: S) -> Result<NodeId> {
        if !(slope > S::zero() && slope < S::one()) {
            return Err(Error::Parameter(format!(
                "leaky rectifier slope {slope} outside (0, 1)"
            )));
        }
        self.push(Op::LeakyRelu { x, slope })
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::Tanh { x })
    }

    pub fn mask_mul(&mut self, x: NodeId, mask: Tensor<S>) -> Result<NodeId> {
        self.push(Op::MaskMul { x, mask })
    }

    /// Inverted dropout: in training each element is zeroed with probability
    /// `rate` and survivors are scaled by `1 / (1 - rate)`; inference is the
    /// identity. Masks are drawn independently per element, hence per sample.
    pub fn dropout(
        &mut self,
        x: NodeId,
        rate: S,
        mode: DropoutMode,
        rng: &mut RandomSource,
    ) -> Result<NodeId> {
        if !(rate >= S::zero() && rate < S::one()) {
            return Err(Error::Parameter(format!("dropout rate {rate} outside [0, 1)")));
        }
        if mode == DropoutMode::Infer || rate == S::zero() {
            return Ok(x);
        }
        let keep = S::one() / (S::one() - rate);
        let (r, c) = self.value(x).shape();
        let mask = Tensor::from_fn(r, c, |_, _| {
            if rng.uniform::<S>() < rate {
                S::zero()
            } else {
                keep
            }
        });
        self.mask_mul(x, mask)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Add { a, b })
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Mul { a, b })
    }

    pub fn scale(&mut self, x: NodeId, factor: S) -> Result<NodeId> {
        self.push(Op::Scale { x, factor })
    }

    pub fn add_scalar(&mut self, x: NodeId, shift: S) -> Result<NodeId> {
        self.push(Op::AddScalar { x, shift })
    }

    pub fn square(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::Square { x })
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::ConcatCols { a, b })
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        self.push(Op::SliceCols { x, start, len })
    }

    pub fn col_sum(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::ColSum { x })
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::Sum { x })
    }

    pub fn mean(&mut self, x: NodeId) -> Result<NodeId> {
        let n = self.value(x).len();
        if n == 0 {
            return Err(Error::Parameter("mean of empty tensor".into()));
        }
        let s = self.sum(x)?;
        self.scale(s, S::one() / S::from_usize_lossy(n))
    }

    /// Euclidean norm of each row (`rows x 1`). The gradient at a zero row is
    /// taken as zero.
    pub fn row_norm(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::RowNorm { x })
    }

    /// Mean squared error between two equally shaped nodes.
    pub fn mse(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let d = self.sub(a, b)?;
        let sq = self.square(d)?;
        self.mean(sq)
    }

    /// Re-evaluates every non-leaf node from the recorded leaves.
    pub fn replay(&self) -> Result<Vec<Tensor<S>>> {
        let mut replayed: Vec<Node<S>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let value = match node.op {
                Op::Leaf => node.value.clone(),
                ref op => eval(op, &replayed)?,
            };
            replayed.push(Node {
                op: Op::Leaf,
                value,
                requires_grad: false,
            });
        }
        Ok(replayed.into_iter().map(|n| n.value).collect())
    }

    /// Numeric adjoints of the scalar `root` with respect to every node that
    /// requires a gradient.
    pub fn backward(&self, root: NodeId) -> Result<Gradients<S>> {
        let shape = self.value(root).shape();
        if shape != (1, 1) {
            return Err(Error::Dimension {
                op: "backward root",
                left: shape,
                right: (1, 1),
            });
        }
        let mut adj: Vec<Option<Tensor<S>>> = vec![None; root.0 + 1];
        let mut order = Vec::new();
        adj[root.0] = Some(Tensor::scalar(S::one()));

        for id in (0..=root.0).rev() {
            let Some(g) = adj[id].take() else { continue };
            order.push(NodeId(id));
            let node = &self.nodes[id];
            let needs = |n: NodeId| self.nodes[n.0].requires_grad;
            let val = |n: NodeId| &self.nodes[n.0].value;
            let acc = |adj: &mut Vec<Option<Tensor<S>>>, n: NodeId, t: Tensor<S>| -> Result<()> {
                t.ensure_finite("backward")?;
                match &mut adj[n.0] {
                    Some(existing) => existing.add_assign(&t),
                    slot @ None => {
                        *slot = Some(t);
                        Ok(())
                    }
                }
            };
            match &node.op {
                Op::Leaf => {}
                &Op::MatMul {
                    a,
                    b,
                    trans_a,
                    trans_b,
                } => {
                    if needs(a) {
                        let da = if trans_a {
                            Tensor::matmul(val(b), trans_b, &g, true)?
                        } else {
                            Tensor::matmul(&g, false, val(b), !trans_b)?
                        };
                        acc(&mut adj, a, da)?;
                    }
                    if needs(b) {
                        let db = if trans_b {
                            Tensor::matmul(&g, true, val(a), trans_a)?
                        } else {
                            Tensor::matmul(val(a), !trans_a, &g, false)?
                        };
                        acc(&mut adj, b, db)?;
                    }
                }
                &Op::AddRowBias { x, bias } => {
                    if needs(bias) {
                        acc(&mut adj, bias, g.col_sum())?;
                    }
                    if needs(x) {
                        acc(&mut adj, x, g.clone())?;
                    }
                }
                &Op::LeakyRelu { x, slope } => {
                    if needs(x) {
                        let d = g.zip_map(val(x), "leaky_relu'", |gi, xi| {
                            if xi >= S::zero() {
                                gi
                            } else {
                                gi * slope
                            }
                        })?;
                        acc(&mut adj, x, d)?;
                    }
                }
                &Op::Tanh { x } => {
                    if needs(x) {
                        let d = g.zip_map(&node.value, "tanh'", |gi, yi| gi * (S::one() - yi * yi))?;
                        acc(&mut adj, x, d)?;
                    }
                }
                Op::MaskMul { x, mask } => {
                    if needs(*x) {
                        acc(&mut adj, *x, g.zip_map(mask, "mask_mul'", |a, m| a * m)?)?;
                    }
                }
                &Op::Add { a, b } => {
                    if needs(a) {
                        acc(&mut adj, a, g.clone())?;
                    }
                    if needs(b) {
                        acc(&mut adj, b, g.clone())?;
                    }
                }
                &Op::Sub { a, b } => {
                    if needs(a) {
                        acc(&mut adj, a, g.clone())?;
                    }
                    if needs(b) {
                        acc(&mut adj, b, g.map(|x| -x))?;
                    }
                }
                &Op::Mul { a, b } => {
                    if needs(a) {
                        acc(&mut adj, a, g.zip_map(val(b), "mul'", |x, y| x * y)?)?;
                    }
                    if needs(b) {
                        acc(&mut adj, b, g.zip_map(val(a), "mul'", |x, y| x * y)?)?;
                    }
                }
                &Op::Scale { x, factor } => {
                    if needs(x) {
                        acc(&mut adj, x, g.map(|v| v * factor))?;
                    }
                }
                &Op::AddScalar { x, .. } => {
                    if needs(x) {
                        acc(&mut adj, x, g.clone())?;
                    }
                }
                &Op::Square { x } => {
                    if needs(x) {
                        let two = S::lit(2.0);
                        acc(&mut adj, x, g.zip_map(val(x), "square'", |gi, xi| two * xi * gi)?)?;
                    }
                }
                &Op::ConcatCols { a, b } => {
                    let ca = val(a).cols();
                    if needs(a) {
                        acc(&mut adj, a, g.slice_cols(0, ca)?)?;
                    }
                    if needs(b) {
                        acc(&mut adj, b, g.slice_cols(ca, val(b).cols())?)?;
                    }
                }
                &Op::SliceCols { x, start, .. } => {
                    if needs(x) {
                        acc(&mut adj, x, g.embed_cols(start, val(x).cols())?)?;
                    }
                }
                &Op::EmbedCols { x, start, .. } => {
                    if needs(x) {
                        acc(&mut adj, x, g.slice_cols(start, val(x).cols())?)?;
                    }
                }
                &Op::ColSum { x } => {
                    if needs(x) {
                        acc(&mut adj, x, g.broadcast_rows(val(x).rows())?)?;
                    }
                }
                &Op::BroadcastRows { x, .. } => {
                    if needs(x) {
                        acc(&mut adj, x, g.col_sum())?;
                    }
                }
                &Op::Sum { x } => {
                    if needs(x) {
                        let (r, c) = val(x).shape();
                        acc(&mut adj, x, Tensor::filled(r, c, g.item()?))?;
                    }
                }
                &Op::Fill { x, .. } => {
                    if needs(x) {
                        acc(&mut adj, x, Tensor::scalar(g.sum()))?;
                    }
                }
                &Op::RowNorm { x } => {
                    if needs(x) {
                        let xv = val(x);
                        let norms = &node.value;
                        let d = Tensor::from_fn(xv.rows(), xv.cols(), |r, c| {
                            let n = norms.get(r, 0);
                            if n > S::zero() {
                                g.get(r, 0) * xv.get(r, c) / n
                            } else {
                                S::zero()
                            }
                        });
                        acc(&mut adj, x, d)?;
                    }
                }
            }
            adj[id] = Some(g);
        }
        Ok(Gradients {
            adjoints: adj,
            order,
        })
    }

    /// Records the gradient of `sum(root)` with respect to each of `wrt` as new
    /// tape nodes and returns their ids. The returned nodes depend on every
    /// parameter the original path depends on, so a later [`Tape::backward`]
    /// through them yields second-order terms.
    pub fn grad_graph(&mut self, root: NodeId, wrt: &[NodeId]) -> Result<Vec<NodeId>> {
        let n = root.0 + 1;
        let mut depends = vec![false; n];
        for w in wrt {
            if w.0 < n {
                depends[w.0] = true;
            }
        }
        for id in 0..n {
            if !depends[id] {
                depends[id] = self.nodes[id]
                    .op
                    .inputs()
                    .iter()
                    .flatten()
                    .any(|i| depends[i.0]);
            }
        }

        let (rr, rc) = self.value(root).shape();
        let seed = self.constant(Tensor::filled(rr, rc, S::one()))?;
        let mut adj: Vec<Option<NodeId>> = vec![None; n];
        adj[root.0] = Some(seed);

        for id in (0..n).rev() {
            if !depends[id] {
                continue;
            }
            let Some(g) = adj[id] else { continue };
            let op = self.nodes[id].op.clone();
            let mut contributions: Vec<(NodeId, NodeId)> = Vec::with_capacity(2);
            let dep = |x: NodeId| depends[x.0];
            match op {
                Op::Leaf => {}
                Op::MatMul {
                    a,
                    b,
                    trans_a,
                    trans_b,
                } => {
                    if dep(a) {
                        let da = if trans_a {
                            self.matmul_t(b, trans_b, g, true)?
                        } else {
                            self.matmul_t(g, false, b, !trans_b)?
                        };
                        contributions.push((a, da));
                    }
                    if dep(b) {
                        let db = if trans_b {
                            self.matmul_t(g, true, a, trans_a)?
                        } else {
                            self.matmul_t(a, !trans_a, g, false)?
                        };
                        contributions.push((b, db));
                    }
                }
                Op::AddRowBias { x, bias } => {
                    if dep(x) {
                        contributions.push((x, g));
                    }
                    if dep(bias) {
                        contributions.push((bias, self.col_sum(g)?));
                    }
                }
                Op::LeakyRelu { x, slope } => {
                    if dep(x) {
                        let mask = self.value(x).leaky_relu_mask(slope);
                        contributions.push((x, self.mask_mul(g, mask)?));
                    }
                }
                Op::Tanh { x } => {
                    if dep(x) {
                        let y = NodeId(id);
                        let y2 = self.square(y)?;
                        let neg = self.scale(y2, -S::one())?;
                        let deriv = self.add_scalar(neg, S::one())?;
                        contributions.push((x, self.mul(g, deriv)?));
                    }
                }
                Op::MaskMul { x, mask } => {
                    if dep(x) {
                        contributions.push((x, self.mask_mul(g, mask)?));
                    }
                }
                Op::Add { a, b } => {
                    if dep(a) {
                        contributions.push((a, g));
                    }
                    if dep(b) {
                        contributions.push((b, g));
                    }
                }
                Op::Sub { a, b } => {
                    if dep(a) {
                        contributions.push((a, g));
                    }
                    if dep(b) {
                        contributions.push((b, self.scale(g, -S::one())?));
                    }
                }
                Op::Mul { a, b } => {
                    if dep(a) {
                        contributions.push((a, self.mul(g, b)?));
                    }
                    if dep(b) {
                        contributions.push((b, self.mul(g, a)?));
                    }
                }
                Op::Scale { x, factor } => {
                    if dep(x) {
                        contributions.push((x, self.scale(g, factor)?));
                    }
                }
                Op::AddScalar { x, .. } => {
                    if dep(x) {
                        contributions.push((x, g));
                    }
                }
                Op::Square { x } => {
                    if dep(x) {
                        let two_x = self.scale(x, S::lit(2.0))?;
                        contributions.push((x, self.mul(g, two_x)?));
                    }
                }
                Op::ConcatCols { a, b } => {
                    let ca = self.value(a).cols();
                    let cb = self.value(b).cols();
                    if dep(a) {
                        contributions.push((a, self.slice_cols(g, 0, ca)?));
                    }
                    if dep(b) {
                        contributions.push((b, self.slice_cols(g, ca, cb)?));
                    }
                }
                Op::SliceCols { x, start, .. } => {
                    if dep(x) {
                        let total = self.value(x).cols();
                        contributions.push((x, self.push(Op::EmbedCols { x: g, start, total })?));
                    }
                }
                Op::EmbedCols { x, start, .. } => {
                    if dep(x) {
                        let len = self.value(x).cols();
                        contributions.push((x, self.slice_cols(g, start, len)?));
                    }
                }
                Op::ColSum { x } => {
                    if dep(x) {
                        let rows = self.value(x).rows();
                        contributions.push((x, self.push(Op::BroadcastRows { x: g, rows })?));
                    }
                }
                Op::BroadcastRows { x, .. } => {
                    if dep(x) {
                        contributions.push((x, self.col_sum(g)?));
                    }
                }
                Op::Sum { x } => {
                    if dep(x) {
                        let (rows, cols) = self.value(x).shape();
                        contributions.push((x, self.push(Op::Fill { x: g, rows, cols })?));
                    }
                }
                Op::Fill { x, .. } => {
                    if dep(x) {
                        contributions.push((x, self.sum(g)?));
                    }
                }
                Op::RowNorm { .. } => {
                    return Err(Error::Unsupported(
                        "recorded gradient through row_norm".into(),
                    ));
                }
            }
            for (target, grad) in contributions {
                adj[target.0] = Some(match adj[target.0] {
                    Some(prev) => self.add(prev, grad)?,
                    None => grad,
                });
            }
        }

        let mut out = Vec::with_capacity(wrt.len());
        for &w in wrt {
            let id = match adj.get(w.0).copied().flatten() {
                Some(id) => id,
                None => {
                    let (r, c) = self.value(w).shape();
                    self.constant(Tensor::zeros(r, c))?
                }
            };
            out.push(id);
        }
        Ok(out)
    }
}
