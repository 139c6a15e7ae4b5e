//! Adam with bias-corrected moment estimates.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<S> {
    pub learning_rate: S,
    pub beta1: S,
    pub beta2: S,
    pub epsilon: S,
    pub step: u64,
    /// One accumulator per parameter tensor, same shapes.
    pub first_moment: Vec<Tensor<S>>,
    pub second_moment: Vec<Tensor<S>>,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(learning_rate: S, beta1: S, beta2: S, shapes: &[(usize, usize)]) -> Self {
        let zeros: Vec<Tensor<S>> = shapes.iter().map(|&(r, c)| Tensor::zeros(r, c)).collect();
        AdamState {
            learning_rate,
            beta1,
            beta2,
            epsilon: S::lit(1e-8),
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    pub fn reset(&mut self) {
        self.step = 0;
        for t in self.first_moment.iter_mut().chain(self.second_moment.iter_mut()) {
            t.data_mut().iter_mut().for_each(|x| *x = S::zero());
        }
    }
}

/// One Adam update of `params` in place.
pub fn adam_step<S: Scalar>(
    params: &mut [Tensor<S>],
    grads: &[Tensor<S>],
    state: &mut AdamState<S>,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::Dimension {
            op: "adam_step (tensor count)",
            left: (params.len(), 1),
            right: (grads.len(), state.first_moment.len()),
        });
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.first_moment) {
        p.same_shape(g, "adam_step (gradient)")?;
        p.same_shape(m, "adam_step (moment)")?;
    }

    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let t = i32::try_from(state.step).unwrap_or(i32::MAX);
    let c1 = S::one() - b1.powi(t);
    let c2 = S::one() - b2.powi(t);
    let (lr, eps) = (state.learning_rate, state.epsilon);

    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.first_moment[i].data_mut();
        let v = state.second_moment[i].data_mut();
        for (((pj, &gj), mj), vj) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
            *mj = b1 * *mj + (S::one() - b1) * gj;
            *vj = b2 * *vj + (S::one() - b2) * gj * gj;
            let m_hat = *mj / c1;
            let v_hat = *vj / c2;
            *pj -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        p.ensure_finite("adam_step")?;
    }
    Ok(())
}
