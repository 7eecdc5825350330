//! Rank workers and the two-phase distributed training orchestration.
//!
//! Ranks are simulated as in-process workers. Communication happens at
//! exactly two collective points — the value-range all-reduce before
//! training and the metadata gather after — and never in between. Both
//! points, and the (unused) point-to-point endpoints, are instrumented so
//! tests can assert the zero-communication contract.

use super::{reduce_value_range, CommStats, DnrModel, RankSummary};
use crate::error::{Error, Result};
use crate::inr::{self, EncodingConfig, InrModel, MlpConfig, TrainConfig, TrainingField};
use crate::math::{mix_seed, vec3, Aabb, Vec3};
use crate::volume::{
    decompose_domain, faces_of_rank, normalize_values, sample_trilinear_clamped, Face, GridVolume,
    Partition, ValueRange,
};
use crate::{real, Real};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

#[derive(Debug, Clone)]
pub struct DnrTrainOptions {
    pub rank_grid: [usize; 3],
    pub ghost_width: usize,
    pub encoding: EncodingConfig,
    /// `output_dim` is overridden by the volume's channel count.
    pub mlp: MlpConfig,
    pub train: TrainConfig,
    /// Fixed normalization range instead of the reduced per-rank ranges
    /// (useful for degenerate constant fields and cross-run consistency).
    pub value_range_override: Option<(Vec<f64>, Vec<f64>)>,
    /// Cap on concurrently running rank workers; defaults to the host
    /// parallelism.
    pub max_workers: Option<usize>,
}

impl DnrTrainOptions {
    pub fn new(rank_grid: [usize; 3], ghost_width: usize) -> Self {
        DnrTrainOptions {
            rank_grid,
            ghost_width,
            encoding: EncodingConfig::default(),
            mlp: MlpConfig::default(),
            train: TrainConfig::default(),
            value_range_override: None,
            max_workers: None,
        }
    }
}

/// Shared collective bus: counts phases and payload bytes.
struct Collectives {
    stats: Mutex<CommStats>,
}

impl Collectives {
    fn new() -> Self {
        Collectives {
            stats: Mutex::new(CommStats::default()),
        }
    }

    fn record_phase(&self, payload_bytes: usize) {
        let mut s = self.stats.lock().unwrap();
        s.collective_phases += 1;
        s.collective_bytes += payload_bytes;
    }
}

/// Point-to-point endpoint handed to each worker. Training never sends,
/// which is exactly what the counters prove.
pub(crate) struct Endpoint<'a> {
    messages: &'a AtomicUsize,
    bytes: &'a AtomicUsize,
}

impl Endpoint<'_> {
    #[allow(dead_code)]
    pub(crate) fn send(&self, _to: usize, payload: &[u8]) {
        self.messages.fetch_add(1, Ordering::Relaxed);
        self.bytes.fetch_add(payload.len(), Ordering::Relaxed);
    }
}

/// One rank's training view: the ghost-extended normalized local grid, its
/// partition, and the faces it shares with neighbors. Uniform samples are
/// drawn over the ghost-extended extent; boundary samples land exactly on
/// the shared face planes; reference values come from the rank's own
/// ghost-inclusive sampler, so both neighbors regress toward identical
/// targets without communicating.
pub struct PartitionField<T> {
    local: GridVolume<T>,
    partition: Partition<T>,
    faces: Vec<Face<T>>,
    face_cdf: Vec<f64>,
    uniform_extent: Aabb<T>,
}

impl<T: Real> PartitionField<T> {
    pub fn new(local_normalized: GridVolume<T>, partition: Partition<T>, faces: Vec<Face<T>>) -> Self {
        let local_bounds = local_normalized.bounds();
        let uniform_extent = Aabb::new(
            partition.normalize_coords_unchecked(local_bounds.lo),
            partition.normalize_coords_unchecked(local_bounds.hi),
        );
        let mut face_cdf = Vec::with_capacity(faces.len());
        let mut acc = 0.0;
        for f in &faces {
            let e = f.rect.extent();
            let t1 = (f.axis + 1) % 3;
            let t2 = (f.axis + 2) % 3;
            acc += (e[t1] * e[t2]).to_f64().unwrap().max(f64::MIN_POSITIVE);
            face_cdf.push(acc);
        }
        PartitionField {
            local: local_normalized,
            partition,
            faces,
            face_cdf,
            uniform_extent,
        }
    }

    pub fn partition(&self) -> &Partition<T> {
        &self.partition
    }
}

impl<T: Real> TrainingField<T> for PartitionField<T> {
    fn channels(&self) -> usize {
        self.local.channels()
    }

    fn value_at(&self, u: Vec3<T>, out: &mut [T]) {
        let p = self.partition.denormalize_coords(u);
        sample_trilinear_clamped(&self.local, p, out);
    }

    fn uniform_extent(&self) -> Aabb<T> {
        self.uniform_extent
    }

    fn has_boundary(&self) -> bool {
        !self.faces.is_empty()
    }

    fn boundary_pos(&self, rng: &mut ChaCha8Rng) -> Vec3<T> {
        let total = *self.face_cdf.last().unwrap();
        let pick = rng.gen::<f64>() * total;
        let fi = self.face_cdf.partition_point(|&c| c < pick).min(self.faces.len() - 1);
        let face = &self.faces[fi];
        let mut p = vec3(T::zero(), T::zero(), T::zero());
        p[face.axis] = face.plane;
        for off in 1..3 {
            let a = (face.axis + off) % 3;
            let lo = face.rect.lo[a];
            let hi = face.rect.hi[a];
            p[a] = lo + (hi - lo) * real(rng.gen::<f64>());
        }
        self.partition.normalize_coords_unchecked(p)
    }
}

/// Train one network per partition. Two collective phases frame the run:
/// the value-range all-reduce first, the metadata gather last; in between
/// each worker trains purely on its own ghost-extended data.
pub fn train_distributed<T: Real>(
    volume: &GridVolume<T>,
    opts: &DnrTrainOptions,
) -> Result<DnrModel<T>> {
    opts.train.validate()?;
    let decomposition = decompose_domain(
        volume.dims(),
        opts.rank_grid,
        opts.ghost_width,
        volume.mesh(),
    )?;
    let n_ranks = decomposition.num_ranks();
    let ch = volume.channels();

    // local ghost-extended views, one per rank
    let locals: Vec<GridVolume<T>> = decomposition
        .partitions
        .iter()
        .map(|p| volume.subvolume(p.ghost_box.lo, p.ghost_box.hi))
        .collect::<Result<_>>()?;

    let collectives = Collectives::new();
    let p2p_messages = AtomicUsize::new(0);
    let p2p_bytes = AtomicUsize::new(0);

    // collective phase 1: all-reduce of per-rank core value ranges
    let local_ranges: Vec<ValueRange<T>> = match &opts.value_range_override {
        Some((min, max)) => {
            let vr = ValueRange::new(
                min.iter().map(|&v| real(v)).collect(),
                max.iter().map(|&v| real(v)).collect(),
            )?;
            vec![vr; n_ranks]
        }
        None => decomposition
            .partitions
            .iter()
            .map(|p| {
                volume
                    .subvolume(p.core_box.lo, p.core_box.hi)
                    .map(|v| v.value_range())
            })
            .collect::<Result<_>>()?,
    };
    // each rank contributes min+max per channel and receives the result
    collectives.record_phase(n_ranks * ch * 2 * 8 * 2);
    let value_range = reduce_value_range(&local_ranges)?;

    // independent per-rank training between the collectives
    let mlp = MlpConfig {
        output_dim: ch,
        ..opts.mlp
    };
    let worker_cap = opts
        .max_workers
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
        .clamp(1, n_ranks);

    let mut outcomes: Vec<(usize, Result<(InrModel<T>, RankSummary)>)> = {
        let decomposition = &decomposition;
        let locals = &locals;
        let value_range = &value_range;
        let opts_ref = &*opts;
        let mlp_ref = &mlp;
        let p2p_messages = &p2p_messages;
        let p2p_bytes = &p2p_bytes;
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..worker_cap)
                .map(|tid| {
                    scope.spawn(move || {
                        let mut done = Vec::new();
                        for rank in (tid..n_ranks).step_by(worker_cap) {
                            let endpoint = Endpoint {
                                messages: p2p_messages,
                                bytes: p2p_bytes,
                            };
                            let result = run_worker(
                                rank,
                                decomposition.partitions[rank].clone(),
                                &locals[rank],
                                decomposition,
                                value_range,
                                opts_ref,
                                mlp_ref,
                                endpoint,
                            );
                            done.push((rank, result));
                        }
                        done
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("rank worker panicked"))
                .collect()
        })
    };
    outcomes.sort_by_key(|(rank, _)| *rank);

    let mut models = Vec::with_capacity(n_ranks);
    let mut ranks = Vec::with_capacity(n_ranks);
    for (_, outcome) in outcomes {
        let (model, summary) = outcome?;
        models.push(model);
        ranks.push(summary);
    }

    // collective phase 2: metadata gather (achieved PSNRs and step counts)
    collectives.record_phase(n_ranks * std::mem::size_of::<RankSummary>());

    let mut comm = *collectives.stats.lock().unwrap();
    comm.p2p_messages = p2p_messages.load(Ordering::Relaxed);
    comm.p2p_bytes = p2p_bytes.load(Ordering::Relaxed);

    Ok(DnrModel {
        decomposition,
        models,
        value_range: value_range.clone(),
        ranks,
        train_config: opts.train.clone(),
        comm,
    })
}

/// Deterministic per-rank training seed.
pub fn rank_seed(base: u64, rank: usize) -> u64 {
    mix_seed(base, rank as u64)
}

#[allow(clippy::too_many_arguments)]
fn run_worker<T: Real>(
    rank: usize,
    partition: Partition<T>,
    local: &GridVolume<T>,
    decomposition: &crate::volume::Decomposition<T>,
    value_range: &ValueRange<T>,
    opts: &DnrTrainOptions,
    mlp: &MlpConfig,
    _endpoint: Endpoint<'_>,
) -> Result<(InrModel<T>, RankSummary)> {
    let normalized = normalize_values(local, value_range)?.volume;
    let faces = faces_of_rank(decomposition, rank);
    let field = PartitionField::new(normalized, partition.clone(), faces);

    let mut cfg = opts.train.clone();
    cfg.seed = rank_seed(opts.train.seed, rank);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = InrModel::initialized(opts.encoding, *mlp, &mut rng)?;

    let report = inr::train(&mut model, &field, &cfg).map_err(|e| match e {
        Error::TrainAborted { step, reason, .. } => Error::TrainAborted { rank, step, reason },
        other => other,
    })?;

    let achieved = core_grid_psnr(&model, &partition, &field);
    let summary = RankSummary {
        rank,
        achieved_psnr: achieved,
        probe_psnr: report.achieved_psnr,
        steps_taken: report.steps_taken,
        budget_exhausted: cfg.target_psnr.is_some() && !report.reached_target,
        wall_time_s: report.wall_time_s,
    };
    Ok((model, summary))
}

/// Full-grid PSNR over the partition's core nodes, in normalized value
/// space (the training stop criterion uses the cheaper probe lattice).
fn core_grid_psnr<T: Real>(
    model: &InrModel<T>,
    partition: &Partition<T>,
    field: &PartitionField<T>,
) -> f64 {
    let core = partition.core_box;
    let glo = partition.ghost_box.lo;
    let local = &field.local;
    let ch = local.channels();
    let mut scratch = inr::Scratch::for_model(model);
    let mut acc = 0.0_f64;
    let mut count = 0usize;
    for gz in core.lo[2]..=core.hi[2] {
        for gy in core.lo[1]..=core.hi[1] {
            for gx in core.lo[0]..=core.hi[0] {
                let p = local.node_pos(gx - glo[0], gy - glo[1], gz - glo[2]);
                let u = partition.normalize_coords_unchecked(p);
                model.forward_cached(u, &mut scratch);
                let pred = scratch.output();
                let truth = local.node_value(gx - glo[0], gy - glo[1], gz - glo[2]);
                for c in 0..ch {
                    let e = pred[c].to_f64().unwrap() - truth[c].to_f64().unwrap();
                    acc += e * e;
                }
                count += ch;
            }
        }
    }
    crate::volume::psnr_from_mse(acc / count as f64)
}
