//! The small fully connected network behind the encoding layer.
//!
//! Hidden layers use the rectifier; the output layer is linear. Weights are
//! stored row-major (`out x in`), one flat vector per layer.

use crate::error::{Error, Result};
use crate::Real;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden_layers: usize,
    pub neurons: usize,
    /// Output width D (1 for scalar fields, 3 for vector fields).
    pub output_dim: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_layers: 4,
            neurons: 64,
            output_dim: 1,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers == 0 {
            return Err(Error::config("mlp needs at least one hidden layer"));
        }
        if self.neurons == 0 {
            return Err(Error::config("mlp hidden width must be positive"));
        }
        if self.output_dim == 0 {
            return Err(Error::config("mlp output width must be positive"));
        }
        Ok(())
    }

    /// `(in, out)` widths of every affine layer for a given input width.
    pub fn layer_dims(&self, input_len: usize) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_layers + 1);
        dims.push((input_len, self.neurons));
        for _ in 1..self.hidden_layers {
            dims.push((self.neurons, self.neurons));
        }
        dims.push((self.neurons, self.output_dim));
        dims
    }
}

/// Forward pass. `acts[i]` receives layer `i`'s post-activation output;
/// the last entry is the linear network output.
pub fn forward<T: Real>(
    weights: &[Vec<T>],
    biases: &[Vec<T>],
    dims: &[(usize, usize)],
    input: &[T],
    acts: &mut [Vec<T>],
) -> Result<()> {
    if input.len() != dims[0].0 {
        return Err(Error::shape(format!(
            "mlp input width {} does not match expected {}",
            input.len(),
            dims[0].0
        )));
    }
    let layers = dims.len();
    for i in 0..layers {
        let (n_in, n_out) = dims[i];
        let w = &weights[i];
        let b = &biases[i];
        debug_assert_eq!(w.len(), n_in * n_out);
        // split borrow: previous activation vs current output
        let (prev, cur) = if i == 0 {
            (input, &mut acts[i])
        } else {
            let (a, b) = acts.split_at_mut(i);
            (&a[i - 1][..], &mut b[0])
        };
        cur.resize(n_out, T::zero());
        let last = i + 1 == layers;
        for o in 0..n_out {
            let row = &w[o * n_in..(o + 1) * n_in];
            let mut acc = b[o];
            for (wi, xi) in row.iter().zip(prev) {
                acc += *wi * *xi;
            }
            cur[o] = if last { acc } else { acc.max(T::zero()) };
        }
    }
    Ok(())
}

/// Backward pass given `d loss / d output`. Accumulates into the gradient
/// buffers and writes the gradient w.r.t. the network input into
/// `input_grad`. `acts` must hold the forward activations of the same
/// sample; rectifier masks are recovered from the positive activations.
#[allow(clippy::too_many_arguments)]
pub fn backward<T: Real>(
    weights: &[Vec<T>],
    dims: &[(usize, usize)],
    input: &[T],
    acts: &[Vec<T>],
    out_grad: &[T],
    weight_grads: &mut [Vec<T>],
    bias_grads: &mut [Vec<T>],
    input_grad: &mut [T],
    delta: &mut Vec<T>,
    delta_prev: &mut Vec<T>,
) {
    let layers = dims.len();
    delta.clear();
    delta.extend_from_slice(out_grad);
    for i in (0..layers).rev() {
        let (n_in, n_out) = dims[i];
        let prev: &[T] = if i == 0 { input } else { &acts[i - 1] };
        let w = &weights[i];
        let wg = &mut weight_grads[i];
        let bg = &mut bias_grads[i];
        delta_prev.clear();
        delta_prev.resize(n_in, T::zero());
        for o in 0..n_out {
            let d = delta[o];
            if d != T::zero() {
                let row = &w[o * n_in..(o + 1) * n_in];
                let grow = &mut wg[o * n_in..(o + 1) * n_in];
                for k in 0..n_in {
                    grow[k] += d * prev[k];
                    delta_prev[k] += d * row[k];
                }
                bg[o] += d;
            }
        }
        if i == 0 {
            input_grad.copy_from_slice(delta_prev);
        } else {
            // rectifier mask of the previous hidden layer
            for (dp, &a) in delta_prev.iter_mut().zip(&acts[i - 1]) {
                if a <= T::zero() {
                    *dp = T::zero();
                }
            }
            std::mem::swap(delta, delta_prev);
        }
    }
}
