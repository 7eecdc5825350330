//! Model checkpoint files.
//!
//! Layout: magic, format version, a length-prefixed JSON header (configs,
//! value range, partition metadata, init recipe), then the parameter blobs
//! as little-endian `f32` in declared order — encoding tables by level,
//! then per MLP layer weights and biases. Files round-trip bit-exactly.

use super::{EncodingConfig, InrModel, MlpConfig};
use crate::error::{Error, Result};
use crate::Real;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 6] = b"NVINR\0";
const VERSION: u32 = 1;

/// Everything stored in the header besides the network configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CheckpointMeta {
    /// Shared per-channel value range the outputs are normalized by.
    pub value_min: Option<Vec<f64>>,
    pub value_max: Option<Vec<f64>>,
    /// Partition slot: rank and box metadata, present for DNR members.
    pub partition: Option<PartitionMeta>,
    /// Initialization recipe used for the run.
    pub init: String,
    pub seed: u64,
    pub achieved_psnr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionMeta {
    pub rank: usize,
    pub cell: [usize; 3],
    pub core_lo: [usize; 3],
    pub core_hi: [usize; 3],
    pub ghost_width: usize,
    pub world_lo: [f64; 3],
    pub world_hi: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    encoding: EncodingConfig,
    mlp: MlpConfig,
    meta: CheckpointMeta,
    param_count: usize,
}

pub fn save_model<T: Real>(path: &Path, model: &InrModel<T>, meta: &CheckpointMeta) -> Result<()> {
    let header = Header {
        encoding: model.encoding,
        mlp: model.mlp,
        meta: meta.clone(),
        param_count: model.param_count(),
    };
    let header_json = serde_json::to_vec(&header)?;

    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(MAGIC)?;
    f.write_all(&VERSION.to_le_bytes())?;
    f.write_all(&(header_json.len() as u64).to_le_bytes())?;
    f.write_all(&header_json)?;

    let mut blob = Vec::with_capacity(model.param_count() * 4);
    for block in model.param_blocks() {
        for &v in block {
            blob.extend_from_slice(&v.to_f32().unwrap().to_le_bytes());
        }
    }
    f.write_all(&blob)?;
    Ok(())
}

pub fn load_model<T: Real>(path: &Path) -> Result<(InrModel<T>, CheckpointMeta)> {
    let display = path.display().to_string();
    let mut f = fs::File::open(path)?;
    let mut magic = [0u8; 6];
    f.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::format(&display, "bad magic bytes"));
    }
    let mut word = [0u8; 4];
    f.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::format(
            &display,
            format!("unsupported version {version}"),
        ));
    }
    let mut len8 = [0u8; 8];
    f.read_exact(&mut len8)?;
    let header_len = u64::from_le_bytes(len8) as usize;
    let mut header_json = vec![0u8; header_len];
    f.read_exact(&mut header_json)?;
    let header: Header = serde_json::from_slice(&header_json)?;

    let mut model = InrModel::zeroed(header.encoding, header.mlp)?;
    if model.param_count() != header.param_count {
        return Err(Error::format(
            &display,
            format!(
                "config implies {} parameters, header records {}",
                model.param_count(),
                header.param_count
            ),
        ));
    }
    let mut blob = vec![0u8; header.param_count * 4];
    f.read_exact(&mut blob).map_err(|_| {
        Error::format(&display, "parameter blob shorter than declared")
    })?;
    let mut trailing = [0u8; 1];
    if f.read(&mut trailing)? != 0 {
        return Err(Error::format(&display, "trailing bytes after parameters"));
    }

    let mut offset = 0;
    for block in model.param_blocks_mut() {
        for v in block.iter_mut() {
            let raw = f32::from_le_bytes([
                blob[offset],
                blob[offset + 1],
                blob[offset + 2],
                blob[offset + 3],
            ]);
            *v = crate::real(raw as f64);
            offset += 4;
        }
    }
    Ok((model, header.meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inr::INIT_SCHEME;
    use rand_chacha::rand_core::SeedableRng;

    fn model() -> InrModel<f32> {
        let enc = EncodingConfig {
            levels: 3,
            features_per_level: 2,
            table_size: 64,
            base_resolution: 2,
            per_level_scale: 1.7,
        };
        let mlp = MlpConfig {
            hidden_layers: 2,
            neurons: 8,
            output_dim: 3,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        InrModel::initialized(enc, mlp, &mut rng).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.inr");
        let m = model();
        let meta = CheckpointMeta {
            value_min: Some(vec![-1.0, 0.0, 2.5]),
            value_max: Some(vec![1.0, 4.0, 3.5]),
            partition: Some(PartitionMeta {
                rank: 3,
                cell: [1, 1, 0],
                core_lo: [16, 16, 0],
                core_hi: [31, 31, 15],
                ghost_width: 2,
                world_lo: [15.5, 15.5, 0.0],
                world_hi: [31.0, 31.0, 15.0],
            }),
            init: INIT_SCHEME.to_string(),
            seed: 77,
            achieved_psnr: Some(41.25),
        };
        save_model(&path, &m, &meta).unwrap();
        let (back, meta2): (InrModel<f32>, _) = load_model(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(meta2, meta);

        let path2 = dir.path().join("model2.inr");
        save_model(&path2, &back, &meta2).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn rejects_corrupt_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.inr");
        save_model(&path, &model(), &CheckpointMeta::default()).unwrap();

        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        let bad = dir.path().join("bad.inr");
        fs::write(&bad, &bytes).unwrap();
        assert!(load_model::<f32>(&bad).is_err());

        let full = fs::read(&path).unwrap();
        let short = dir.path().join("short.inr");
        fs::write(&short, &full[..full.len() - 10]).unwrap();
        assert!(load_model::<f32>(&short).is_err());
    }
}
