//! Single-partition implicit neural representation: a multi-resolution
//! hash-grid encoding feeding a small MLP, with hand-written
//! backpropagation and Adam, trained toward a PSNR target.

mod adam;
mod checkpoint;
mod encoding;
mod loss;
mod mlp;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_model, save_model, CheckpointMeta, PartitionMeta};
pub use encoding::{
    backward_tables, encode_with_stencil, level_layouts, EncodeStencil, EncodingConfig,
    LevelLayout,
};
pub use loss::{l1_mean, loss_total};
pub use mlp::MlpConfig;
pub use train::{lr_at, train, HistoryRow, TrainConfig, TrainReport, TrainingField};

use crate::error::Result;
use crate::math::Vec3;
use crate::{real, Real};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Initialization recipe recorded in checkpoints for reproducibility.
pub const INIT_SCHEME: &str = "tables~U(-1e-4,1e-4); mlp~U(+-sqrt(6/fan_in)); biases=0";

/// A named network-size preset. The desk profile is small enough for CPU
/// runs and tests; the paper profile is the full published configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Desk,
    Paper,
}

impl Profile {
    pub fn encoding(&self) -> EncodingConfig {
        match self {
            Profile::Desk => EncodingConfig {
                levels: 8,
                features_per_level: 2,
                table_size: 1 << 13,
                base_resolution: 4,
                per_level_scale: 2.0,
            },
            Profile::Paper => EncodingConfig::default(),
        }
    }

    pub fn mlp(&self) -> MlpConfig {
        match self {
            Profile::Desk => MlpConfig {
                hidden_layers: 2,
                neurons: 32,
                output_dim: 1,
            },
            Profile::Paper => MlpConfig::default(),
        }
    }

    pub fn batch_sizes(&self) -> (usize, usize) {
        match self {
            Profile::Desk => (2048, 512),
            Profile::Paper => (16384, 4096),
        }
    }

    /// A training config seeded with this profile's batch sizes.
    pub fn train_config(&self) -> TrainConfig {
        let (bu, bb) = self.batch_sizes();
        TrainConfig {
            batch_uniform: bu,
            batch_boundary: bb,
            ..TrainConfig::default()
        }
    }
}

/// The trainable field network: encoding tables plus MLP parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct InrModel<T> {
    pub encoding: EncodingConfig,
    pub mlp: MlpConfig,
    levels: Vec<LevelLayout>,
    layer_dims: Vec<(usize, usize)>,
    /// One flat table per level, `entries * features_per_level` long.
    pub tables: Vec<Vec<T>>,
    /// Row-major `out x in` weight matrix per affine layer.
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Real> InrModel<T> {
    /// All-zero parameters (useful for tests; training starts from
    /// [`InrModel::initialized`]).
    pub fn zeroed(encoding: EncodingConfig, mlp: MlpConfig) -> Result<Self> {
        encoding.validate()?;
        mlp.validate()?;
        let levels = level_layouts(&encoding)?;
        let layer_dims = mlp.layer_dims(encoding.feature_len());
        let tables = levels
            .iter()
            .map(|l| vec![T::zero(); l.entries * encoding.features_per_level])
            .collect();
        let weights = layer_dims.iter().map(|&(i, o)| vec![T::zero(); i * o]).collect();
        let biases = layer_dims.iter().map(|&(_, o)| vec![T::zero(); o]).collect();
        Ok(InrModel {
            encoding,
            mlp,
            levels,
            layer_dims,
            tables,
            weights,
            biases,
        })
    }

    /// Random initialization: tables uniform in `[-1e-4, 1e-4]`, weights
    /// uniform with a fan-in scale, biases zero.
    pub fn initialized(
        encoding: EncodingConfig,
        mlp: MlpConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let mut model = Self::zeroed(encoding, mlp)?;
        for table in &mut model.tables {
            for v in table.iter_mut() {
                *v = real(rng.gen_range(-1e-4..=1e-4));
            }
        }
        for (layer, &(n_in, _)) in model.layer_dims.clone().iter().enumerate() {
            let bound = (6.0 / n_in as f64).sqrt();
            for v in model.weights[layer].iter_mut() {
                *v = real(rng.gen_range(-bound..=bound));
            }
        }
        Ok(model)
    }

    pub fn levels(&self) -> &[LevelLayout] {
        &self.levels
    }

    pub fn layer_dims(&self) -> &[(usize, usize)] {
        &self.layer_dims
    }

    pub fn output_dim(&self) -> usize {
        self.mlp.output_dim
    }

    pub fn param_count(&self) -> usize {
        self.param_blocks().map(|b| b.len()).sum()
    }

    /// Bytes of the parameter payload in the on-disk (f32) format.
    pub fn param_bytes(&self) -> usize {
        self.param_count() * 4
    }

    /// All parameter blocks in checkpoint order: tables by level, then per
    /// layer weights and biases.
    pub fn param_blocks(&self) -> impl Iterator<Item = &[T]> {
        self.tables
            .iter()
            .map(|v| v.as_slice())
            .chain(
                self.weights
                    .iter()
                    .zip(&self.biases)
                    .flat_map(|(w, b)| [w.as_slice(), b.as_slice()]),
            )
    }

    pub fn param_blocks_mut(&mut self) -> impl Iterator<Item = &mut Vec<T>> {
        self.tables.iter_mut().chain(
            self.weights
                .iter_mut()
                .zip(self.biases.iter_mut())
                .flat_map(|(w, b)| [w, b]),
        )
    }

    /// Encode a (clamped) normalized coordinate into the `L * F` feature
    /// vector.
    pub fn encode_features(&self, x: Vec3<T>) -> Vec<T> {
        let mut features = vec![T::zero(); self.encoding.feature_len()];
        let mut stencil = EncodeStencil::with_levels(self.encoding.levels);
        encode_with_stencil(
            &self.encoding,
            &self.levels,
            &self.tables,
            x,
            &mut features,
            &mut stencil,
        );
        features
    }

    /// Run the MLP on an encoded feature vector.
    pub fn mlp_forward(&self, features: &[T]) -> Result<Vec<T>> {
        let mut acts = vec![Vec::new(); self.layer_dims.len()];
        mlp::forward(&self.weights, &self.biases, &self.layer_dims, features, &mut acts)?;
        Ok(acts.pop().unwrap())
    }

    /// Full forward pass: encode then MLP.
    pub fn forward(&self, x: Vec3<T>, out: &mut [T]) {
        let mut scratch = Scratch::for_model(self);
        self.forward_cached(x, &mut scratch);
        out.copy_from_slice(scratch.output());
    }

    /// Forward pass retaining activations and the encode stencil in
    /// `scratch` for a subsequent backward pass.
    pub fn forward_cached(&self, x: Vec3<T>, scratch: &mut Scratch<T>) {
        encode_with_stencil(
            &self.encoding,
            &self.levels,
            &self.tables,
            x,
            &mut scratch.features,
            &mut scratch.stencil,
        );
        mlp::forward(
            &self.weights,
            &self.biases,
            &self.layer_dims,
            &scratch.features,
            &mut scratch.acts,
        )
        .expect("scratch feature width matches model");
    }

    /// Backward pass for the sample held in `scratch`, accumulating into
    /// `grads`. `out_grad` is the loss gradient w.r.t. the model output.
    pub fn backward_cached(
        &self,
        scratch: &mut Scratch<T>,
        out_grad: &[T],
        grads: &mut InrGradients<T>,
    ) {
        let Scratch {
            features,
            stencil,
            acts,
            feature_grad,
            delta,
            delta_prev,
        } = scratch;
        mlp::backward(
            &self.weights,
            &self.layer_dims,
            features,
            acts,
            out_grad,
            &mut grads.weights,
            &mut grads.biases,
            feature_grad,
            delta,
            delta_prev,
        );
        backward_tables(&self.encoding, stencil, feature_grad, &mut grads.tables);
    }
}

/// Per-sample forward/backward workspace, reused across a batch.
#[derive(Debug, Clone)]
pub struct Scratch<T> {
    features: Vec<T>,
    stencil: EncodeStencil<T>,
    acts: Vec<Vec<T>>,
    feature_grad: Vec<T>,
    delta: Vec<T>,
    delta_prev: Vec<T>,
}

impl<T: Real> Scratch<T> {
    pub fn for_model(model: &InrModel<T>) -> Self {
        Scratch {
            features: vec![T::zero(); model.encoding.feature_len()],
            stencil: EncodeStencil::with_levels(model.encoding.levels),
            acts: vec![Vec::new(); model.layer_dims.len()],
            feature_grad: vec![T::zero(); model.encoding.feature_len()],
            delta: Vec::new(),
            delta_prev: Vec::new(),
        }
    }

    /// Network output of the last [`InrModel::forward_cached`] call.
    pub fn output(&self) -> &[T] {
        self.acts.last().unwrap()
    }
}

/// Gradient buffers mirroring a model's parameter blocks.
#[derive(Debug, Clone)]
pub struct InrGradients<T> {
    pub tables: Vec<Vec<T>>,
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Real> InrGradients<T> {
    pub fn zeroed_like(model: &InrModel<T>) -> Self {
        InrGradients {
            tables: model.tables.iter().map(|t| vec![T::zero(); t.len()]).collect(),
            weights: model.weights.iter().map(|w| vec![T::zero(); w.len()]).collect(),
            biases: model.biases.iter().map(|b| vec![T::zero(); b.len()]).collect(),
        }
    }

    /// Gradient blocks in the model's checkpoint order.
    pub fn blocks(&self) -> impl Iterator<Item = &Vec<T>> {
        self.tables.iter().chain(
            self.weights
                .iter()
                .zip(&self.biases)
                .flat_map(|(w, b)| [w, b]),
        )
    }

    pub fn zero(&mut self) {
        for block in self
            .tables
            .iter_mut()
            .chain(self.weights.iter_mut())
            .chain(self.biases.iter_mut())
        {
            for v in block.iter_mut() {
                *v = T::zero();
            }
        }
    }
}

/// Loss and exact gradients of the blended L1 objective over a uniform
/// batch and an optional boundary batch. Reference values are flat
/// `samples x channels` arrays. This is the single code path both the
/// training loop and the finite-difference tests exercise.
pub fn loss_and_gradients<T: Real>(
    model: &InrModel<T>,
    uniform: (&[Vec3<T>], &[T]),
    boundary: Option<(&[Vec3<T>], &[T])>,
    lambda: T,
    grads: &mut InrGradients<T>,
    scratch: &mut Scratch<T>,
) -> Result<(T, Option<T>)> {
    let boundary = match boundary {
        Some((pos, refs)) if !pos.is_empty() => Some((pos, refs)),
        _ => None,
    };
    let (w_uniform, w_boundary) = match boundary {
        // empty boundary set: the uniform term carries full weight
        None => (T::one(), T::zero()),
        Some(_) => (T::one() - lambda, lambda),
    };

    let l1_u = accumulate_term(model, uniform.0, uniform.1, w_uniform, grads, scratch)?;
    let l1_b = match boundary {
        None => None,
        Some((pos, refs)) => Some(accumulate_term(model, pos, refs, w_boundary, grads, scratch)?),
    };
    Ok((l1_u, l1_b))
}

/// One L1 term: accumulates `term_weight * dL1/dparam` into `grads` and
/// returns the term's mean absolute error.
fn accumulate_term<T: Real>(
    model: &InrModel<T>,
    positions: &[Vec3<T>],
    refs: &[T],
    term_weight: T,
    grads: &mut InrGradients<T>,
    scratch: &mut Scratch<T>,
) -> Result<T> {
    let d = model.output_dim();
    if refs.len() != positions.len() * d {
        return Err(crate::Error::shape(format!(
            "{} reference values for {} samples x {} channels",
            refs.len(),
            positions.len(),
            d
        )));
    }
    if positions.is_empty() {
        return Ok(T::zero());
    }
    let count = T::from_usize(positions.len() * d).unwrap();
    let gscale = term_weight / count;
    let mut abs_sum = T::zero();
    let mut out_grad = vec![T::zero(); d];
    for (i, &p) in positions.iter().enumerate() {
        model.forward_cached(p, scratch);
        let pred = scratch.output();
        let target = &refs[i * d..(i + 1) * d];
        let mut any = false;
        for c in 0..d {
            let r = pred[c] - target[c];
            abs_sum += r.abs();
            // L1 subgradient at zero is zero
            out_grad[c] = if r > T::zero() {
                gscale
            } else if r < T::zero() {
                -gscale
            } else {
                T::zero()
            };
            any |= out_grad[c] != T::zero();
        }
        if any && term_weight != T::zero() {
            model.backward_cached(scratch, &out_grad, grads);
        }
    }
    Ok(abs_sum / count)
}
