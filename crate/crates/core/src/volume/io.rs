//! Volume files: a JSON manifest plus a raw little-endian float32 array.
//!
//! The manifest records dims, mesh, channel count, and the value layout
//! ("x-fastest"); the raw file holds the values in exactly that order.

use super::{GridVolume, Mesh};
use crate::error::{Error, Result};
use crate::math::vec3;
use crate::Real;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

const LAYOUT: &str = "x-fastest";
const DTYPE: &str = "float32";

#[derive(Debug, Serialize, Deserialize)]
struct VolumeManifest {
    dims: [usize; 3],
    channels: usize,
    layout: String,
    dtype: String,
    /// Raw file name, relative to the manifest.
    data: String,
    mesh: MeshManifest,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum MeshManifest {
    Uniform {
        origin: [f64; 3],
        spacing: [f64; 3],
    },
    Rectilinear {
        x: Vec<f64>,
        y: Vec<f64>,
        z: Vec<f64>,
    },
}

/// Write `vol` as `<path>` (JSON manifest) plus a sibling `.raw` file.
/// Values are converted to `f32` on disk regardless of the working scalar.
pub fn save_volume<T: Real>(manifest_path: &Path, vol: &GridVolume<T>) -> Result<()> {
    let raw_name = raw_name_for(manifest_path)?;
    let mesh = match vol.mesh() {
        Mesh::Uniform { origin, spacing } => MeshManifest::Uniform {
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
        Mesh::Rectilinear { coords } => MeshManifest::Rectilinear {
            x: coords[0].iter().map(|v| v.to_f64().unwrap()).collect(),
            y: coords[1].iter().map(|v| v.to_f64().unwrap()).collect(),
            z: coords[2].iter().map(|v| v.to_f64().unwrap()).collect(),
        },
    };
    let manifest = VolumeManifest {
        dims: vol.dims(),
        channels: vol.channels(),
        layout: LAYOUT.to_string(),
        dtype: DTYPE.to_string(),
        data: raw_name.clone(),
        mesh,
    };
    if let Some(dir) = manifest_path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(manifest_path, serde_json::to_vec_pretty(&manifest)?)?;

    let mut bytes = Vec::with_capacity(vol.values().len() * 4);
    for &v in vol.values() {
        bytes.extend_from_slice(&(v.to_f32().unwrap()).to_le_bytes());
    }
    let raw_path = manifest_path.with_file_name(&raw_name);
    let mut f = fs::File::create(raw_path)?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Load a volume saved by [`save_volume`].
pub fn load_volume<T: Real>(manifest_path: &Path) -> Result<GridVolume<T>> {
    let text = fs::read_to_string(manifest_path)?;
    let manifest: VolumeManifest = serde_json::from_str(&text)?;
    let display = manifest_path.display().to_string();
    if manifest.layout != LAYOUT {
        return Err(Error::format(
            &display,
            format!("unsupported layout {:?}", manifest.layout),
        ));
    }
    if manifest.dtype != DTYPE {
        return Err(Error::format(
            &display,
            format!("unsupported dtype {:?}", manifest.dtype),
        ));
    }
    let mesh = match manifest.mesh {
        MeshManifest::Uniform { origin, spacing } => Mesh::Uniform {
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
        MeshManifest::Rectilinear { x, y, z } => Mesh::Rectilinear {
            coords: [
                x.into_iter().map(crate::real).collect(),
                y.into_iter().map(crate::real).collect(),
                z.into_iter().map(crate::real).collect(),
            ],
        },
    };

    let raw_path = manifest_path.with_file_name(&manifest.data);
    let mut bytes = Vec::new();
    fs::File::open(&raw_path)?.read_to_end(&mut bytes)?;
    let expect = manifest.dims[0] * manifest.dims[1] * manifest.dims[2] * manifest.channels * 4;
    if bytes.len() != expect {
        return Err(Error::format(
            raw_path.display().to_string(),
            format!("raw file has {} bytes, manifest requires {}", bytes.len(), expect),
        ));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| crate::real(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
        .collect();
    GridVolume::new(manifest.dims, mesh, manifest.channels, values)
}

fn raw_name_for(manifest_path: &Path) -> Result<String> {
    let stem = manifest_path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::config("volume manifest path needs a file name"))?;
    Ok(format!("{stem}.raw"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::vec3;

    #[test]
    fn round_trip_is_bit_exact_for_f32() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vol.json");
        let mesh = Mesh::Uniform {
            origin: vec3(0.0f32, 1.0, 2.0),
            spacing: vec3(0.5, 0.25, 1.0),
        };
        let vol = GridVolume::from_fn([3, 4, 5], mesh, 2, |p, out| {
            out[0] = p.x * 0.37 + p.y;
            out[1] = (p.z - 1.7).sin();
        })
        .unwrap();
        save_volume(&path, &vol).unwrap();
        let back: GridVolume<f32> = load_volume(&path).unwrap();
        assert_eq!(back, vol);

        // saving the loaded volume again reproduces identical files
        let path2 = dir.path().join("vol2.json");
        save_volume(&path2, &back).unwrap();
        let raw1 = std::fs::read(dir.path().join("vol.raw")).unwrap();
        let raw2 = std::fs::read(dir.path().join("vol2.raw")).unwrap();
        assert_eq!(raw1, raw2);
    }

    #[test]
    fn rectilinear_axes_survive_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rect.json");
        let mesh = Mesh::Rectilinear {
            coords: [vec![0.0, 0.5, 2.0], vec![0.0, 1.0], vec![-1.0, 0.0, 0.25, 1.0]],
        };
        let vol = GridVolume::from_fn([3, 2, 4], mesh, 1, |p, out| out[0] = p.x + p.y + p.z)
            .unwrap();
        save_volume(&path, &vol).unwrap();
        let back: GridVolume<f64> = load_volume(&path).unwrap();
        assert_eq!(back.dims(), vol.dims());
        match back.mesh() {
            Mesh::Rectilinear { coords } => assert_eq!(coords[0], vec![0.0, 0.5, 2.0]),
            _ => panic!("expected rectilinear mesh"),
        }
    }

    #[test]
    fn truncated_raw_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.json");
        let mesh = Mesh::Uniform {
            origin: vec3(0.0f32, 0.0, 0.0),
            spacing: vec3(1.0, 1.0, 1.0),
        };
        let vol = GridVolume::new([2, 2, 2], mesh, 1, vec![0.0f32; 8]).unwrap();
        save_volume(&path, &vol).unwrap();
        std::fs::write(dir.path().join("v.raw"), [0u8; 12]).unwrap();
        let err: Result<GridVolume<f32>> = load_volume(&path);
        assert!(matches!(err, Err(Error::Format { .. })));
    }
}
