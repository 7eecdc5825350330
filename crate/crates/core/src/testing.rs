//! Shared test oracles. Exposed (hidden from docs) so both the crate's own
//! tests and downstream acceptance suites can run the same checks.

#![doc(hidden)]

use crate::inr::{
    loss_and_gradients, loss_total, EncodingConfig, InrGradients, InrModel, MlpConfig, Scratch,
};
use crate::math::{vec3, Vec3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOutcome {
    pub params_checked: usize,
    pub max_rel_err: f64,
}

/// Compare every analytic parameter gradient of a small random model
/// against central finite differences of the blended loss (h = 1e-4).
///
/// The fixture keeps all rectifier pre-activations and residuals away from
/// their kinks so the loss is locally linear in each parameter and the
/// central difference is exact up to rounding.
pub fn gradient_check_tiny(seed: u64) -> GradCheckOutcome {
    let enc = EncodingConfig {
        levels: 2,
        features_per_level: 2,
        table_size: 16,
        base_resolution: 2,
        per_level_scale: 2.0,
    };
    let mlp = MlpConfig {
        hidden_layers: 2,
        neurons: 8,
        output_dim: 1,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = InrModel::<f64>::initialized(enc, mlp, &mut rng).unwrap();
    // larger tables and non-zero biases give O(1) pre-activations
    for table in &mut model.tables {
        for v in table.iter_mut() {
            *v = rng.gen_range(-0.8..0.8);
        }
    }
    for b in &mut model.biases {
        for v in b.iter_mut() {
            *v = rng.gen_range(-0.05..0.05);
        }
    }

    let h = 1e-4;
    // pre-activation margin comfortably larger than any h-induced shift
    let margin = 1e-2;
    let draw_point = |on_face: bool, rng: &mut ChaCha8Rng| -> Vec3<f64> {
        loop {
            let p = vec3(
                if on_face { 0.0 } else { rng.gen_range(0.0..1.0) },
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..1.0),
            );
            if preact_margin(&model, p) > margin {
                return p;
            }
        }
    };

    let n_u = 10;
    let n_b = 6;
    let mut upos = Vec::new();
    let mut bpos = Vec::new();
    for _ in 0..n_u {
        upos.push(draw_point(false, &mut rng));
    }
    for _ in 0..n_b {
        bpos.push(draw_point(true, &mut rng));
    }

    // residual targets at a fixed distance from the predictions, so the
    // L1 sign never flips under the FD perturbation
    let mut out = [0.0];
    let mut make_refs = |pos: &[Vec3<f64>], rng: &mut ChaCha8Rng| -> Vec<f64> {
        pos.iter()
            .map(|&p| {
                model.forward(p, &mut out);
                let delta = rng.gen_range(0.15..0.5);
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                out[0] + sign * delta
            })
            .collect()
    };
    let urefs = make_refs(&upos, &mut rng);
    let brefs = make_refs(&bpos, &mut rng);
    let lambda = 0.3;

    let mut grads = InrGradients::zeroed_like(&model);
    let mut scratch = Scratch::for_model(&model);
    loss_and_gradients(
        &model,
        (&upos, &urefs),
        Some((&bpos, &brefs)),
        lambda,
        &mut grads,
        &mut scratch,
    )
    .unwrap();

    let loss_of = |m: &InrModel<f64>| -> f64 {
        let mut o = [0.0];
        let pu: Vec<f64> = upos
            .iter()
            .map(|&p| {
                m.forward(p, &mut o);
                o[0]
            })
            .collect();
        let pb: Vec<f64> = bpos
            .iter()
            .map(|&p| {
                m.forward(p, &mut o);
                o[0]
            })
            .collect();
        loss_total(&pu, &urefs, &pb, &brefs, lambda).unwrap()
    };

    let mut max_rel = 0.0_f64;
    let mut checked = 0;
    let n_blocks = model.param_blocks().count();
    for block in 0..n_blocks {
        let len = model.param_blocks().nth(block).unwrap().len();
        for i in 0..len {
            let analytic = grads.blocks().nth(block).unwrap()[i];
            let orig = model.param_blocks().nth(block).unwrap()[i];

            set_param(&mut model, block, i, orig + h);
            let fp = loss_of(&model);
            set_param(&mut model, block, i, orig - h);
            let fm = loss_of(&model);
            set_param(&mut model, block, i, orig);

            let fd = (fp - fm) / (2.0 * h);
            let rel = (analytic - fd).abs() / (analytic.abs() + fd.abs()).max(1e-6);
            max_rel = max_rel.max(rel);
            checked += 1;
        }
    }

    GradCheckOutcome {
        params_checked: checked,
        max_rel_err: max_rel,
    }
}

fn set_param(model: &mut InrModel<f64>, block: usize, i: usize, value: f64) {
    let slot = model
        .param_blocks_mut()
        .nth(block)
        .expect("block index in range");
    slot[i] = value;
}

/// Smallest |pre-activation| across the hidden layers for one input; an
/// independent naive forward pass over the model's weights.
fn preact_margin(model: &InrModel<f64>, p: Vec3<f64>) -> f64 {
    let features = model.encode_features(p);
    let dims = model.layer_dims().to_vec();
    let mut margin = f64::INFINITY;
    let mut cur = features;
    for (layer, &(n_in, n_out)) in dims.iter().enumerate() {
        let mut next = vec![0.0; n_out];
        for o in 0..n_out {
            let mut acc = model.biases[layer][o];
            for k in 0..n_in {
                acc += model.weights[layer][o * n_in + k] * cur[k];
            }
            next[o] = acc;
        }
        if layer + 1 < dims.len() {
            for v in &mut next {
                margin = margin.min(v.abs());
                *v = v.max(0.0);
            }
        }
        cur = next;
    }
    margin
}
