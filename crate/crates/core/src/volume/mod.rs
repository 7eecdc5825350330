//! Grid volume storage, domain decomposition, samplers, and quality metrics.

mod decompose;
mod io;
mod sampler;

pub use decompose::{
    decompose_domain, extract_boundary_coords, face_lattice, faces_of_rank, interior_faces,
    Decomposition, Face, IndexBox, Partition,
};
pub use io::{load_volume, save_volume};
pub use sampler::{sample_trilinear, sample_trilinear_clamped};

use crate::error::{Error, Result};
use crate::math::{vec3, Aabb, Vec3};
use crate::{real, Real};

/// Hard ceiling on reported PSNR; returned when the error is exactly zero.
pub const PSNR_CAP_DB: f64 = 200.0;

/// Node coordinates of a structured grid: either uniform spacing or
/// per-axis strictly increasing coordinate arrays.
#[derive(Debug, Clone, PartialEq)]
pub enum Mesh<T> {
    Uniform { origin: Vec3<T>, spacing: Vec3<T> },
    Rectilinear { coords: [Vec<T>; 3] },
}

impl<T: Real> Mesh<T> {
    /// Physical position of node `i` along `axis`.
    pub fn node_pos(&self, axis: usize, i: usize) -> T {
        match self {
            Mesh::Uniform { origin, spacing } => {
                origin[axis] + spacing[axis] * T::from_usize(i).unwrap()
            }
            Mesh::Rectilinear { coords } => coords[axis][i],
        }
    }

    /// Midplane between nodes `i` and `i+1` along `axis`.
    pub fn midplane(&self, axis: usize, i: usize) -> T {
        (self.node_pos(axis, i) + self.node_pos(axis, i + 1)) * real(0.5)
    }

    /// Node-extent bounding box for a grid with `dims` nodes per axis.
    pub fn bounds(&self, dims: [usize; 3]) -> Aabb<T> {
        let lo = vec3(
            self.node_pos(0, 0),
            self.node_pos(1, 0),
            self.node_pos(2, 0),
        );
        let hi = vec3(
            self.node_pos(0, dims[0] - 1),
            self.node_pos(1, dims[1] - 1),
            self.node_pos(2, dims[2] - 1),
        );
        Aabb::new(lo, hi)
    }

    /// Locate the interpolation cell for coordinate `x` along `axis`:
    /// returns `(i, frac)` with `x ≈ lerp(node[i], node[i+1], frac)`.
    /// Assumes `x` within node extent; clamps to the border cells.
    fn locate(&self, axis: usize, n: usize, x: T) -> (usize, T) {
        if n == 1 {
            return (0, T::zero());
        }
        match self {
            Mesh::Uniform { origin, spacing } => {
                let u = (x - origin[axis]) / spacing[axis];
                let mut i = u.floor().to_isize().unwrap_or(0);
                i = i.clamp(0, n as isize - 2);
                let i = i as usize;
                (i, u - T::from_usize(i).unwrap())
            }
            Mesh::Rectilinear { coords } => {
                let c = &coords[axis];
                // first index with c[i] > x, then step back one cell
                let mut i = c.partition_point(|&v| v <= x);
                i = i.clamp(1, n - 1) - 1;
                let w = c[i + 1] - c[i];
                (i, (x - c[i]) / w)
            }
        }
    }

    /// Restriction of the mesh to an inclusive node range per axis.
    pub fn submesh(&self, lo: [usize; 3], hi: [usize; 3]) -> Mesh<T> {
        match self {
            Mesh::Uniform { origin, spacing } => Mesh::Uniform {
                origin: vec3(
                    origin.x + spacing.x * T::from_usize(lo[0]).unwrap(),
                    origin.y + spacing.y * T::from_usize(lo[1]).unwrap(),
                    origin.z + spacing.z * T::from_usize(lo[2]).unwrap(),
                ),
                spacing: *spacing,
            },
            Mesh::Rectilinear { coords } => Mesh::Rectilinear {
                coords: [
                    coords[0][lo[0]..=hi[0]].to_vec(),
                    coords[1][lo[1]..=hi[1]].to_vec(),
                    coords[2][lo[2]..=hi[2]].to_vec(),
                ],
            },
        }
    }

    pub fn cast<U: Real>(&self) -> Mesh<U> {
        match self {
            Mesh::Uniform { origin, spacing } => Mesh::Uniform {
                origin: origin.cast(),
                spacing: spacing.cast(),
            },
            Mesh::Rectilinear { coords } => Mesh::Rectilinear {
                coords: [
                    coords[0].iter().map(|&v| crate::real(v.to_f64().unwrap())).collect(),
                    coords[1].iter().map(|&v| crate::real(v.to_f64().unwrap())).collect(),
                    coords[2].iter().map(|&v| crate::real(v.to_f64().unwrap())).collect(),
                ],
            },
        }
    }
}

/// Dense scalar or vector field on a structured grid.
///
/// Values are stored x-fastest: the linear index of node `(x, y, z)` is
/// `((z * ny + y) * nx + x) * channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridVolume<T> {
    dims: [usize; 3],
    mesh: Mesh<T>,
    channels: usize,
    values: Vec<T>,
}

impl<T: Real> GridVolume<T> {
    pub fn new(dims: [usize; 3], mesh: Mesh<T>, channels: usize, values: Vec<T>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::config("volume dims must be positive"));
        }
        if channels == 0 {
            return Err(Error::config("volume needs at least one channel"));
        }
        let expect = dims[0] * dims[1] * dims[2] * channels;
        if values.len() != expect {
            return Err(Error::shape(format!(
                "value array has {} entries, dims x channels require {}",
                values.len(),
                expect
            )));
        }
        match &mesh {
            Mesh::Uniform { spacing, .. } => {
                if (0..3).any(|a| spacing[a] <= T::zero()) {
                    return Err(Error::config("uniform mesh spacing must be positive"));
                }
            }
            Mesh::Rectilinear { coords } => {
                for a in 0..3 {
                    if coords[a].len() != dims[a] {
                        return Err(Error::shape(format!(
                            "axis {a} has {} coordinates for {} nodes",
                            coords[a].len(),
                            dims[a]
                        )));
                    }
                    if coords[a].windows(2).any(|w| w[1] <= w[0]) {
                        return Err(Error::config(format!(
                            "axis {a} coordinates must be strictly increasing"
                        )));
                    }
                }
            }
        }
        Ok(GridVolume {
            dims,
            mesh,
            channels,
            values,
        })
    }

    /// Build a volume by evaluating `f` at every node position.
    /// `f` writes one value per channel into its output slice.
    pub fn from_fn(
        dims: [usize; 3],
        mesh: Mesh<T>,
        channels: usize,
        mut f: impl FnMut(Vec3<T>, &mut [T]),
    ) -> Result<Self> {
        let mut values = vec![T::zero(); dims[0] * dims[1] * dims[2] * channels];
        {
            let mut idx = 0;
            for z in 0..dims[2] {
                let pz = mesh.node_pos(2, z);
                for y in 0..dims[1] {
                    let py = mesh.node_pos(1, y);
                    for x in 0..dims[0] {
                        let p = vec3(mesh.node_pos(0, x), py, pz);
                        f(p, &mut values[idx..idx + channels]);
                        idx += channels;
                    }
                }
            }
        }
        GridVolume::new(dims, mesh, channels, values)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn node_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn linear_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        debug_assert!(ix < self.dims[0] && iy < self.dims[1] && iz < self.dims[2]);
        ((iz * self.dims[1] + iy) * self.dims[0] + ix) * self.channels
    }

    pub fn node_value(&self, ix: usize, iy: usize, iz: usize) -> &[T] {
        let i = self.linear_index(ix, iy, iz);
        &self.values[i..i + self.channels]
    }

    pub fn node_pos(&self, ix: usize, iy: usize, iz: usize) -> Vec3<T> {
        vec3(
            self.mesh.node_pos(0, ix),
            self.mesh.node_pos(1, iy),
            self.mesh.node_pos(2, iz),
        )
    }

    /// Physical node-extent bounds.
    pub fn bounds(&self) -> Aabb<T> {
        self.mesh.bounds(self.dims)
    }

    /// Per-channel min/max over all nodes.
    pub fn value_range(&self) -> ValueRange<T> {
        let mut min = vec![T::infinity(); self.channels];
        let mut max = vec![T::neg_infinity(); self.channels];
        for chunk in self.values.chunks_exact(self.channels) {
            for (c, &v) in chunk.iter().enumerate() {
                if v < min[c] {
                    min[c] = v;
                }
                if v > max[c] {
                    max[c] = v;
                }
            }
        }
        ValueRange { min, max }
    }

    /// Copy of the inclusive node box `[lo, hi]` with its restricted mesh.
    pub fn subvolume(&self, lo: [usize; 3], hi: [usize; 3]) -> Result<Self> {
        if (0..3).any(|a| hi[a] < lo[a] || hi[a] >= self.dims[a]) {
            return Err(Error::domain(format!(
                "subvolume box {lo:?}..{hi:?} outside dims {:?}",
                self.dims
            )));
        }
        let sdims = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
        let mut values = Vec::with_capacity(sdims[0] * sdims[1] * sdims[2] * self.channels);
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                let start = self.linear_index(lo[0], y, z);
                let end = self.linear_index(hi[0], y, z) + self.channels;
                values.extend_from_slice(&self.values[start..end]);
            }
        }
        GridVolume::new(sdims, self.mesh.submesh(lo, hi), self.channels, values)
    }

    pub fn cast<U: Real>(&self) -> GridVolume<U> {
        GridVolume {
            dims: self.dims,
            mesh: self.mesh.cast(),
            channels: self.channels,
            values: self
                .values
                .iter()
                .map(|&v| crate::real(v.to_f64().unwrap()))
                .collect(),
        }
    }
}

/// Global per-channel value range shared by all partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueRange<T> {
    pub min: Vec<T>,
    pub max: Vec<T>,
}

impl<T: Real> ValueRange<T> {
    pub fn new(min: Vec<T>, max: Vec<T>) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::shape("value range min/max channel mismatch"));
        }
        if min.iter().zip(&max).any(|(a, b)| a > b) {
            return Err(Error::config("value range requires min <= max"));
        }
        Ok(ValueRange { min, max })
    }

    pub fn channels(&self) -> usize {
        self.min.len()
    }

    /// Elementwise min of mins and max of maxes.
    pub fn merge(&self, other: &ValueRange<T>) -> ValueRange<T> {
        ValueRange {
            min: self
                .min
                .iter()
                .zip(&other.min)
                .map(|(&a, &b)| a.min(b))
                .collect(),
            max: self
                .max
                .iter()
                .zip(&other.max)
                .map(|(&a, &b)| a.max(b))
                .collect(),
        }
    }

    /// Channel whose span is zero (constant field).
    pub fn is_degenerate(&self, c: usize) -> bool {
        self.max[c] == self.min[c]
    }

    pub fn normalize(&self, c: usize, v: T) -> T {
        if self.is_degenerate(c) {
            T::zero()
        } else {
            (v - self.min[c]) / (self.max[c] - self.min[c])
        }
    }

    pub fn denormalize(&self, c: usize, v: T) -> T {
        self.min[c] + v * (self.max[c] - self.min[c])
    }

    pub fn cast<U: Real>(&self) -> ValueRange<U> {
        ValueRange {
            min: self.min.iter().map(|&v| crate::real(v.to_f64().unwrap())).collect(),
            max: self.max.iter().map(|&v| crate::real(v.to_f64().unwrap())).collect(),
        }
    }
}

/// Result of [`normalize_values`]: the rescaled volume plus the channels
/// that were constant (those are mapped to all zeros).
#[derive(Debug, Clone)]
pub struct NormalizedVolume<T> {
    pub volume: GridVolume<T>,
    pub constant_channels: Vec<usize>,
}

/// Rescale every channel to `[0, 1]` using the shared global range.
/// A degenerate channel (vmax == vmin) maps to all zeros and is flagged.
pub fn normalize_values<T: Real>(
    vol: &GridVolume<T>,
    range: &ValueRange<T>,
) -> Result<NormalizedVolume<T>> {
    if range.channels() != vol.channels() {
        return Err(Error::shape(format!(
            "range has {} channels, volume has {}",
            range.channels(),
            vol.channels()
        )));
    }
    let ch = vol.channels();
    let mut out = vol.clone();
    for chunk in out.values_mut().chunks_exact_mut(ch) {
        for (c, v) in chunk.iter_mut().enumerate() {
            *v = range.normalize(c, *v);
        }
    }
    let constant_channels = (0..ch).filter(|&c| range.is_degenerate(c)).collect();
    Ok(NormalizedVolume {
        volume: out,
        constant_channels,
    })
}

/// Invert [`normalize_values`] for a non-degenerate range.
pub fn denormalize_values<T: Real>(
    vol: &GridVolume<T>,
    range: &ValueRange<T>,
) -> Result<GridVolume<T>> {
    if range.channels() != vol.channels() {
        return Err(Error::shape("range/volume channel mismatch"));
    }
    let ch = vol.channels();
    let mut out = vol.clone();
    for chunk in out.values_mut().chunks_exact_mut(ch) {
        for (c, v) in chunk.iter_mut().enumerate() {
            *v = range.denormalize(c, *v);
        }
    }
    Ok(out)
}

/// PSNR in decibels between two flat value arrays in the normalized `[0,1]`
/// domain: `-10 log10(MSE)` with peak 1.0, capped at [`PSNR_CAP_DB`].
/// The MSE is accumulated in `f64` regardless of the working scalar.
pub fn psnr_values<T: Real>(pred: &[T], reference: &[T]) -> Result<T> {
    if pred.len() != reference.len() {
        return Err(Error::shape(format!(
            "psnr inputs differ in length: {} vs {}",
            pred.len(),
            reference.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::shape("psnr of empty arrays"));
    }
    let mut acc = 0.0_f64;
    for (&p, &r) in pred.iter().zip(reference) {
        let d = p.to_f64().unwrap() - r.to_f64().unwrap();
        acc += d * d;
    }
    let mse = acc / pred.len() as f64;
    Ok(real(psnr_from_mse(mse)))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (-10.0 * mse.log10()).min(PSNR_CAP_DB)
}

/// PSNR between two volumes of identical shape, pooled over all voxels and
/// channels. Both are expected in the normalized `[0,1]` value domain.
pub fn psnr<T: Real>(pred: &GridVolume<T>, reference: &GridVolume<T>) -> Result<T> {
    if pred.dims() != reference.dims() || pred.channels() != reference.channels() {
        return Err(Error::shape(format!(
            "psnr shape mismatch: {:?}x{} vs {:?}x{}",
            pred.dims(),
            pred.channels(),
            reference.dims(),
            reference.channels()
        )));
    }
    psnr_values(pred.values(), reference.values())
}
