//! DNR bundles on disk: a directory with a layout manifest plus one model
//! checkpoint per rank.

use super::{CommStats, DnrModel, RankSummary};
use crate::error::{Error, Result};
use crate::inr::{self, CheckpointMeta, PartitionMeta, TrainConfig, INIT_SCHEME};
use crate::math::vec3;
use crate::volume::{decompose_domain, Mesh, ValueRange};
use crate::Real;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

const LAYOUT_FILE: &str = "layout.json";

#[derive(Debug, Serialize, Deserialize)]
struct LayoutManifest {
    dims: [usize; 3],
    rank_grid: [usize; 3],
    ghost_width: usize,
    mesh: MeshSer,
    channels: usize,
    value_min: Vec<f64>,
    value_max: Vec<f64>,
    train_config: TrainConfig,
    ranks: Vec<RankSummary>,
    comm: CommStats,
    model_files: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum MeshSer {
    Uniform { origin: [f64; 3], spacing: [f64; 3] },
    Rectilinear { x: Vec<f64>, y: Vec<f64>, z: Vec<f64> },
}

fn mesh_to_ser<T: Real>(mesh: &Mesh<T>) -> MeshSer {
    match mesh {
        Mesh::Uniform { origin, spacing } => MeshSer::Uniform {
            origin: [
                origin.x.to_f64().unwrap(),
                origin.y.to_f64().unwrap(),
                origin.z.to_f64().unwrap(),
            ],
            spacing: [
                spacing.x.to_f64().unwrap(),
                spacing.y.to_f64().unwrap(),
                spacing.z.to_f64().unwrap(),
            ],
        },
        Mesh::Rectilinear { coords } => MeshSer::Rectilinear {
            x: coords[0].iter().map(|v| v.to_f64().unwrap()).collect(),
            y: coords[1].iter().map(|v| v.to_f64().unwrap()).collect(),
            z: coords[2].iter().map(|v| v.to_f64().unwrap()).collect(),
        },
    }
}

fn mesh_from_ser<T: Real>(ser: &MeshSer) -> Mesh<T> {
    match ser {
        MeshSer::Uniform { origin, spacing } => Mesh::Uniform {
            origin: vec3(
                crate::real(origin[0]),
                crate::real(origin[1]),
                crate::real(origin[2]),
            ),
            spacing: vec3(
                crate::real(spacing[0]),
                crate::real(spacing[1]),
                crate::real(spacing[2]),
            ),
        },
        MeshSer::Rectilinear { x, y, z } => Mesh::Rectilinear {
            coords: [
                x.iter().copied().map(crate::real).collect(),
                y.iter().copied().map(crate::real).collect(),
                z.iter().copied().map(crate::real).collect(),
            ],
        },
    }
}

/// Write the bundle directory (layout manifest plus per-rank checkpoints).
pub fn save_bundle<T: Real>(dir: &Path, dnr: &DnrModel<T>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let model_files: Vec<String> = (0..dnr.num_ranks())
        .map(|r| format!("rank_{r:03}.inr"))
        .collect();
    let manifest = LayoutManifest {
        dims: dnr.decomposition.dims,
        rank_grid: dnr.decomposition.rank_grid,
        ghost_width: dnr.decomposition.ghost_width,
        mesh: mesh_to_ser(&dnr.decomposition.mesh),
        channels: dnr.channels(),
        value_min: dnr.value_range.min.iter().map(|v| v.to_f64().unwrap()).collect(),
        value_max: dnr.value_range.max.iter().map(|v| v.to_f64().unwrap()).collect(),
        train_config: dnr.train_config.clone(),
        ranks: dnr.ranks.clone(),
        comm: dnr.comm,
        model_files: model_files.clone(),
    };
    fs::write(dir.join(LAYOUT_FILE), serde_json::to_vec_pretty(&manifest)?)?;

    for (rank, name) in model_files.iter().enumerate() {
        let part = &dnr.decomposition.partitions[rank];
        let meta = CheckpointMeta {
            value_min: Some(manifest.value_min.clone()),
            value_max: Some(manifest.value_max.clone()),
            partition: Some(PartitionMeta {
                rank,
                cell: part.cell,
                core_lo: part.core_box.lo,
                core_hi: part.core_box.hi,
                ghost_width: part.ghost_width,
                world_lo: [
                    part.world_bounds.lo.x.to_f64().unwrap(),
                    part.world_bounds.lo.y.to_f64().unwrap(),
                    part.world_bounds.lo.z.to_f64().unwrap(),
                ],
                world_hi: [
                    part.world_bounds.hi.x.to_f64().unwrap(),
                    part.world_bounds.hi.y.to_f64().unwrap(),
                    part.world_bounds.hi.z.to_f64().unwrap(),
                ],
            }),
            init: INIT_SCHEME.to_string(),
            seed: super::worker::rank_seed(dnr.train_config.seed, rank),
            achieved_psnr: Some(dnr.ranks[rank].achieved_psnr),
        };
        inr::save_model(&dir.join(name), &dnr.models[rank], &meta)?;
    }
    Ok(())
}

/// Load a bundle saved by [`save_bundle`].
pub fn load_bundle<T: Real>(dir: &Path) -> Result<DnrModel<T>> {
    let layout_path = dir.join(LAYOUT_FILE);
    let manifest: LayoutManifest = serde_json::from_str(&fs::read_to_string(&layout_path)?)?;
    let mesh: Mesh<T> = mesh_from_ser(&manifest.mesh);
    let decomposition = decompose_domain(
        manifest.dims,
        manifest.rank_grid,
        manifest.ghost_width,
        &mesh,
    )?;
    if manifest.model_files.len() != decomposition.num_ranks() {
        return Err(Error::format(
            layout_path.display().to_string(),
            format!(
                "{} model files for {} ranks",
                manifest.model_files.len(),
                decomposition.num_ranks()
            ),
        ));
    }
    let mut models = Vec::with_capacity(manifest.model_files.len());
    for (rank, name) in manifest.model_files.iter().enumerate() {
        let (model, meta) = inr::load_model::<T>(&dir.join(name))?;
        if let Some(pm) = &meta.partition {
            if pm.rank != rank {
                return Err(Error::format(
                    dir.join(name).display().to_string(),
                    format!("checkpoint records rank {}, expected {rank}", pm.rank),
                ));
            }
        }
        if model.output_dim() != manifest.channels {
            return Err(Error::format(
                dir.join(name).display().to_string(),
                "model output width does not match bundle channels",
            ));
        }
        models.push(model);
    }
    let value_range = ValueRange::new(
        manifest.value_min.iter().copied().map(crate::real).collect(),
        manifest.value_max.iter().copied().map(crate::real).collect(),
    )?;
    Ok(DnrModel {
        decomposition,
        models,
        value_range,
        ranks: manifest.ranks,
        train_config: manifest.train_config,
        comm: manifest.comm,
    })
}
