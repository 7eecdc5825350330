//! The distributed representation: one network per partition trained
//! independently, a shared value range, query routing, decode-to-grid, and
//! boundary-continuity metrics.

mod bundle;
mod worker;

pub use bundle::{load_bundle, save_bundle};
pub use worker::{rank_seed, train_distributed, DnrTrainOptions, PartitionField};

use crate::error::{Error, Result};
use crate::inr::{InrModel, TrainConfig};
use crate::math::Vec3;
use crate::volume::{
    face_lattice, psnr_values, sample_trilinear, Decomposition, Face, GridVolume, Partition,
    ValueRange,
};
use crate::Real;
use serde::{Deserialize, Serialize};

/// Per-rank training outcome gathered at the metadata collective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub rank: usize,
    /// PSNR of the decoded core grid against the ground-truth core.
    pub achieved_psnr: f64,
    /// PSNR on the held-out probe lattice at the stop check.
    pub probe_psnr: f64,
    pub steps_taken: u64,
    /// True when the step budget ran out before the target was reached.
    pub budget_exhausted: bool,
    pub wall_time_s: f64,
}

/// Message traffic observed by the instrumented endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CommStats {
    /// Barrier-synchronized collective phases (range reduction, metadata
    /// gather).
    pub collective_phases: usize,
    pub collective_bytes: usize,
    /// Point-to-point messages between workers outside the collectives.
    pub p2p_messages: usize,
    pub p2p_bytes: usize,
}

/// A frozen distributed model: the decomposition, one network per rank,
/// and the shared normalization range.
#[derive(Debug, Clone, PartialEq)]
pub struct DnrModel<T> {
    pub decomposition: Decomposition<T>,
    pub models: Vec<InrModel<T>>,
    pub value_range: ValueRange<T>,
    pub ranks: Vec<RankSummary>,
    pub train_config: TrainConfig,
    pub comm: CommStats,
}

impl<T: Real> DnrModel<T> {
    pub fn channels(&self) -> usize {
        self.value_range.channels()
    }

    pub fn num_ranks(&self) -> usize {
        self.models.len()
    }

    /// Total parameter bytes across all rank models (on-disk f32 format).
    pub fn param_bytes(&self) -> usize {
        self.models.iter().map(|m| m.param_bytes()).sum()
    }

    /// Smallest achieved core PSNR across ranks.
    pub fn min_achieved_psnr(&self) -> f64 {
        self.ranks
            .iter()
            .map(|r| r.achieved_psnr)
            .fold(f64::INFINITY, f64::min)
    }

    /// Evaluate the owning rank's network at a global physical coordinate
    /// and return the denormalized value. Points on shared planes route to
    /// the lower rank.
    pub fn query(&self, p: Vec3<T>, out: &mut [T]) -> Result<()> {
        let rank = self.decomposition.owner_of(p)?;
        self.query_in_rank(rank, p, out);
        Ok(())
    }

    /// Evaluate a specific rank's network at a global coordinate (callers
    /// guarantee `p` lies in that rank's extent or accept clamping).
    pub fn query_in_rank(&self, rank: usize, p: Vec3<T>, out: &mut [T]) {
        let part = &self.decomposition.partitions[rank];
        let u = part.normalize_coords_unchecked(p);
        self.models[rank].forward(u, out);
        for (c, v) in out.iter_mut().enumerate() {
            *v = self.value_range.denormalize(c, *v);
        }
    }

    /// Evaluate a rank's network in its normalized frame without
    /// denormalizing (values stay in `[0, 1]`).
    pub fn query_normalized_in_rank(&self, rank: usize, p: Vec3<T>, out: &mut [T]) {
        let part = &self.decomposition.partitions[rank];
        let u = part.normalize_coords_unchecked(p);
        self.models[rank].forward(u, out);
    }

    /// Decode one partition's core grid by evaluating the network at every
    /// core node. Node values equal [`DnrModel::query`] at those points.
    pub fn decode_to_grid(&self, rank: usize) -> Result<GridVolume<T>> {
        let part = self
            .decomposition
            .partitions
            .get(rank)
            .ok_or_else(|| Error::domain(format!("rank {rank} out of range")))?;
        let lo = part.core_box.lo;
        let dims = part.core_box.dims();
        let mesh = self.decomposition.mesh.submesh(lo, part.core_box.hi);
        let ch = self.channels();
        let model = &self.models[rank];
        let mut scratch = crate::inr::Scratch::for_model(model);
        let mut values = vec![T::zero(); dims[0] * dims[1] * dims[2] * ch];
        let mut idx = 0;
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let p = crate::math::vec3(
                        self.decomposition.mesh.node_pos(0, lo[0] + x),
                        self.decomposition.mesh.node_pos(1, lo[1] + y),
                        self.decomposition.mesh.node_pos(2, lo[2] + z),
                    );
                    let u = part.normalize_coords_unchecked(p);
                    model.forward_cached(u, &mut scratch);
                    for (c, &v) in scratch.output().iter().enumerate() {
                        values[idx + c] = self.value_range.denormalize(c, v);
                    }
                    idx += ch;
                }
            }
        }
        GridVolume::new(dims, mesh, ch, values)
    }

    /// Decode every partition and assemble the full global grid.
    pub fn decode_full(&self) -> Result<GridVolume<T>> {
        let dims = self.decomposition.dims;
        let ch = self.channels();
        let mut values = vec![T::zero(); dims[0] * dims[1] * dims[2] * ch];
        for rank in 0..self.num_ranks() {
            let part = &self.decomposition.partitions[rank];
            let block = self.decode_to_grid(rank)?;
            let lo = part.core_box.lo;
            let bdims = block.dims();
            for z in 0..bdims[2] {
                for y in 0..bdims[1] {
                    let src = block.linear_index(0, y, z);
                    let dst = (((lo[2] + z) * dims[1] + (lo[1] + y)) * dims[0] + lo[0]) * ch;
                    values[dst..dst + bdims[0] * ch]
                        .copy_from_slice(&block.values()[src..src + bdims[0] * ch]);
                }
            }
        }
        GridVolume::new(dims, self.decomposition.mesh.clone(), ch, values)
    }
}

/// Elementwise min of mins and max of maxes over the ranks' local ranges;
/// the result every rank receives from the first collective.
pub fn reduce_value_range<T: Real>(ranges: &[ValueRange<T>]) -> Result<ValueRange<T>> {
    let first = ranges
        .first()
        .ok_or_else(|| Error::config("value-range reduction needs at least one rank"))?;
    Ok(ranges[1..].iter().fold(first.clone(), |acc, r| acc.merge(r)))
}

/// Both adjacent networks evaluated on a shared face's node lattice, in
/// normalized value space. Returned as flat `point x channel` arrays
/// (lower rank first).
pub fn boundary_slices<T: Real>(dnr: &DnrModel<T>, face: &Face<T>) -> Result<(Vec<T>, Vec<T>)> {
    if face.lo_rank == face.hi_rank || face.hi_rank >= dnr.num_ranks() {
        return Err(Error::domain("not an interior face of this decomposition"));
    }
    let (_, _, pts) = face_lattice(&dnr.decomposition, face);
    let ch = dnr.channels();
    let mut lo = vec![T::zero(); pts.len() * ch];
    let mut hi = vec![T::zero(); pts.len() * ch];
    for (i, &p) in pts.iter().enumerate() {
        dnr.query_normalized_in_rank(face.lo_rank, p, &mut lo[i * ch..(i + 1) * ch]);
        dnr.query_normalized_in_rank(face.hi_rank, p, &mut hi[i * ch..(i + 1) * ch]);
    }
    Ok((lo, hi))
}

/// Average PSNR of the two adjacent networks' face slices against the
/// ground-truth slice sampled from `truth` (normalized by the model's
/// shared range).
pub fn boundary_slice_psnr<T: Real>(
    dnr: &DnrModel<T>,
    truth: &GridVolume<T>,
    face: &Face<T>,
) -> Result<f64> {
    let (lo, hi) = boundary_slices(dnr, face)?;
    let (_, _, pts) = face_lattice(&dnr.decomposition, face);
    let ch = dnr.channels();
    let mut reference = vec![T::zero(); pts.len() * ch];
    for (i, &p) in pts.iter().enumerate() {
        let out = &mut reference[i * ch..(i + 1) * ch];
        sample_trilinear(truth, p, out)?;
        for (c, v) in out.iter_mut().enumerate() {
            *v = dnr.value_range.normalize(c, *v);
        }
    }
    let a = psnr_values(&lo, &reference)?.to_f64().unwrap();
    let b = psnr_values(&hi, &reference)?.to_f64().unwrap();
    Ok(0.5 * (a + b))
}

/// Convenience accessor pairing partitions with their models.
pub fn rank_views<'a, T: Real>(
    dnr: &'a DnrModel<T>,
) -> impl Iterator<Item = (&'a Partition<T>, &'a InrModel<T>)> {
    dnr.decomposition.partitions.iter().zip(&dnr.models)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduce_value_range_examples() {
        let a = ValueRange::new(vec![0.0], vec![1.0]).unwrap();
        let b = ValueRange::new(vec![-2.0], vec![0.5]).unwrap();
        let r = reduce_value_range(&[a.clone(), b]).unwrap();
        assert_eq!(r.min, vec![-2.0]);
        assert_eq!(r.max, vec![1.0]);

        let single = reduce_value_range(&[a.clone()]).unwrap();
        assert_eq!(single, a);

        assert!(reduce_value_range::<f64>(&[]).is_err());
    }
}
