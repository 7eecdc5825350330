//! Trilinear interpolation over structured grids.

use super::GridVolume;
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::Real;

/// Trilinear interpolation of the 8 nodes surrounding `p`, per channel.
/// `out` must have one slot per channel. Errors if `p` lies outside the
/// volume's node extent.
pub fn sample_trilinear<T: Real>(vol: &GridVolume<T>, p: Vec3<T>, out: &mut [T]) -> Result<()> {
    let b = vol.bounds();
    if !b.contains(p) {
        return Err(Error::domain(format!(
            "sample point ({}, {}, {}) outside volume bounds",
            p.x, p.y, p.z
        )));
    }
    sample_trilinear_clamped(vol, p, out);
    Ok(())
}

/// Same as [`sample_trilinear`] but clamps `p` into the node extent first;
/// never fails. Used where callers intentionally probe the ghost margin.
pub fn sample_trilinear_clamped<T: Real>(vol: &GridVolume<T>, p: Vec3<T>, out: &mut [T]) {
    debug_assert_eq!(out.len(), vol.channels());
    let dims = vol.dims();
    let b = vol.bounds();
    let mesh = vol.mesh();

    let mut cell = [0usize; 3];
    let mut frac = [T::zero(); 3];
    for a in 0..3 {
        let x = p[a].max(b.lo[a]).min(b.hi[a]);
        let (i, f) = mesh.locate(a, dims[a], x);
        cell[a] = i;
        frac[a] = f.max(T::zero()).min(T::one());
    }

    let ch = vol.channels();
    for o in out.iter_mut() {
        *o = T::zero();
    }
    for corner in 0..8 {
        let dx = corner & 1;
        let dy = (corner >> 1) & 1;
        let dz = (corner >> 2) & 1;
        let wx = if dx == 1 { frac[0] } else { T::one() - frac[0] };
        let wy = if dy == 1 { frac[1] } else { T::one() - frac[1] };
        let wz = if dz == 1 { frac[2] } else { T::one() - frac[2] };
        let w = wx * wy * wz;
        if w == T::zero() {
            continue;
        }
        let ix = (cell[0] + dx).min(dims[0] - 1);
        let iy = (cell[1] + dy).min(dims[1] - 1);
        let iz = (cell[2] + dz).min(dims[2] - 1);
        let node = vol.node_value(ix, iy, iz);
        for c in 0..ch {
            out[c] += w * node[c];
        }
    }
}
