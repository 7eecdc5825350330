//! Adam with bias correction, operating on the model's parameter blocks.

use super::{InrGradients, InrModel};
use crate::error::{Error, Result};
use crate::{real, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig<T> {
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Real> Default for AdamConfig<T> {
    fn default() -> Self {
        AdamConfig {
            beta1: real(0.9),
            beta2: real(0.999),
            epsilon: real(1e-8),
        }
    }
}

/// First/second moment estimates, mirroring the model's parameter blocks.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn for_model(model: &InrModel<T>) -> Self {
        let shapes: Vec<usize> = model.param_blocks().map(|b| b.len()).collect();
        AdamState {
            m: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update of every trainable parameter. `lr` is supplied per call
/// so a schedule can drive it.
pub fn adam_step<T: Real>(
    model: &mut InrModel<T>,
    grads: &InrGradients<T>,
    state: &mut AdamState<T>,
    cfg: &AdamConfig<T>,
    lr: T,
) -> Result<()> {
    state.step += 1;
    let t = state.step as i32;
    let c1 = T::one() - cfg.beta1.powi(t);
    let c2 = T::one() - cfg.beta2.powi(t);

    // parameter, gradient, and moment blocks share the checkpoint order
    for (block, (p, g)) in model.param_blocks_mut().zip(grads.blocks()).enumerate() {
        if p.len() != g.len() {
            return Err(Error::shape(format!(
                "adam block {block}: {} params vs {} gradients",
                p.len(),
                g.len()
            )));
        }
        let m = &mut state.m[block];
        let v = &mut state.v[block];
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = cfg.beta1 * m[i] + (T::one() - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (T::one() - cfg.beta2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inr::{EncodingConfig, MlpConfig};

    fn tiny_model() -> InrModel<f64> {
        let enc = EncodingConfig {
            levels: 1,
            features_per_level: 1,
            table_size: 8,
            base_resolution: 1,
            per_level_scale: 2.0,
        };
        let mlp = MlpConfig {
            hidden_layers: 1,
            neurons: 2,
            output_dim: 1,
        };
        InrModel::zeroed(enc, mlp).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut model = tiny_model();
        model.weights[0][0] = 0.7;
        let before = model.clone();
        let grads = InrGradients::zeroed_like(&model);
        let mut state = AdamState::for_model(&model);
        adam_step(&mut model, &grads, &mut state, &AdamConfig::default(), 1e-2).unwrap();
        assert_eq!(model.weights, before.weights);
        assert_eq!(model.tables, before.tables);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut model = tiny_model();
        let mut grads = InrGradients::zeroed_like(&model);
        grads.weights[0][0] = 0.37;
        grads.weights[0][1] = -2.0;
        let mut state = AdamState::for_model(&model);
        let lr = 1e-2;
        adam_step(&mut model, &grads, &mut state, &AdamConfig::default(), lr).unwrap();
        // t=1: m_hat = g, v_hat = g^2, update = -lr * g / (|g| + eps)
        let expect = |g: f64| -lr * g / (g.abs() + 1e-8);
        assert!((model.weights[0][0] - expect(0.37)).abs() < 1e-12);
        assert!((model.weights[0][1] - expect(-2.0)).abs() < 1e-12);
    }

    #[test]
    fn two_steps_match_scalar_reference_trace() {
        let mut model = tiny_model();
        let mut grads = InrGradients::zeroed_like(&model);
        let g = 0.8;
        grads.biases[0][1] = g;
        let mut state = AdamState::for_model(&model);
        let cfg = AdamConfig::default();
        let lr = 3e-3;
        adam_step(&mut model, &grads, &mut state, &cfg, lr).unwrap();
        adam_step(&mut model, &grads, &mut state, &cfg, lr).unwrap();

        // independent scalar Adam on the same gradient sequence
        let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
        let mut p = 0.0;
        let mut m = 0.0;
        let mut v = 0.0;
        for t in 1..=2i32 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t));
            let v_hat = v / (1.0 - b2.powi(t));
            p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        assert!((model.biases[0][1] - p).abs() < 1e-15);
    }
}
