//! Multi-resolution hash-grid encoding.
//!
//! Each level lays a virtual grid of resolution `N_l = floor(N_min * b^l)`
//! over the unit cube and stores one feature vector per grid corner. Levels
//! whose corner count fits in the table are indexed densely; finer levels
//! hash the corner coordinates into the table. A query point is encoded by
//! trilinearly blending the 8 corner features of its cell at every level
//! and concatenating the per-level results.

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::Real;
use serde::{Deserialize, Serialize};

/// Spatial hash primes; the x-axis factor is 1 so dense and hashed layouts
/// agree on the lowest-resolution levels.
const HASH_PRIMES: [u64; 3] = [1, 2_654_435_761, 805_459_861];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingConfig {
    /// Number of resolution levels (L).
    pub levels: usize,
    /// Features stored per table entry (F).
    pub features_per_level: usize,
    /// Hash table entries per level (T); must be a power of two.
    pub table_size: usize,
    /// Coarsest grid resolution (N_min).
    pub base_resolution: usize,
    /// Geometric growth factor between levels (b).
    pub per_level_scale: f64,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig {
            levels: 16,
            features_per_level: 4,
            table_size: 1 << 19,
            base_resolution: 4,
            per_level_scale: 2.0,
        }
    }
}

impl EncodingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::config("encoding needs at least one level"));
        }
        if self.features_per_level == 0 {
            return Err(Error::config("encoding needs at least one feature per level"));
        }
        if !self.table_size.is_power_of_two() {
            return Err(Error::config("hash table size must be a power of two"));
        }
        if self.table_size > u32::MAX as usize {
            return Err(Error::config("hash table size exceeds u32 index range"));
        }
        if self.base_resolution == 0 {
            return Err(Error::config("base resolution must be at least 1"));
        }
        if self.per_level_scale <= 1.0 {
            return Err(Error::config("per-level scale must exceed 1"));
        }
        Ok(())
    }

    /// Grid resolution of level `l`: `floor(N_min * b^l)`.
    pub fn level_resolution(&self, l: usize) -> Result<usize> {
        if l >= self.levels {
            return Err(Error::config(format!(
                "level {l} out of range for {} levels",
                self.levels
            )));
        }
        let r = self.base_resolution as f64 * self.per_level_scale.powi(l as i32);
        Ok(r.floor() as usize)
    }

    /// Table entries actually allocated for level `l`:
    /// `min(T, (N_l + 1)^3)`.
    pub fn level_entries(&self, l: usize) -> Result<usize> {
        let n = self.level_resolution(l)? as u128 + 1;
        let corners = n * n * n;
        Ok(corners.min(self.table_size as u128) as usize)
    }

    /// Encoded feature vector length: `L * F`.
    pub fn feature_len(&self) -> usize {
        self.levels * self.features_per_level
    }
}

/// Precomputed per-level layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelLayout {
    pub resolution: usize,
    pub entries: usize,
    /// Dense corner indexing when every corner fits in the table.
    pub dense: bool,
}

pub fn level_layouts(cfg: &EncodingConfig) -> Result<Vec<LevelLayout>> {
    cfg.validate()?;
    (0..cfg.levels)
        .map(|l| {
            let resolution = cfg.level_resolution(l)?;
            let entries = cfg.level_entries(l)?;
            let corners = (resolution as u128 + 1).pow(3);
            Ok(LevelLayout {
                resolution,
                entries,
                dense: corners <= cfg.table_size as u128,
            })
        })
        .collect()
}

/// Interpolation stencil of one encoded point: per level, the 8 corner
/// table indices and trilinear weights. Retained by the training loop so
/// the backward pass can scatter feature gradients into the tables.
#[derive(Debug, Clone, Default)]
pub struct EncodeStencil<T> {
    pub corners: Vec<[(u32, T); 8]>,
}

impl<T: Real> EncodeStencil<T> {
    pub fn with_levels(levels: usize) -> Self {
        EncodeStencil {
            corners: vec![[(0, T::zero()); 8]; levels],
        }
    }
}

fn corner_index(layout: &LevelLayout, g: [usize; 3]) -> u32 {
    if layout.dense {
        let n1 = layout.resolution + 1;
        (g[0] + n1 * (g[1] + n1 * g[2])) as u32
    } else {
        let h = (g[0] as u64).wrapping_mul(HASH_PRIMES[0])
            ^ (g[1] as u64).wrapping_mul(HASH_PRIMES[1])
            ^ (g[2] as u64).wrapping_mul(HASH_PRIMES[2]);
        (h & (layout.entries as u64 - 1)) as u32
    }
}

/// Encode `x` into `features` (length `L * F`), filling `stencil` for the
/// backward pass. Out-of-range coordinates are clamped to the unit cube,
/// which is what ghost-margin training samples rely on.
pub fn encode_with_stencil<T: Real>(
    cfg: &EncodingConfig,
    layouts: &[LevelLayout],
    tables: &[Vec<T>],
    x: Vec3<T>,
    features: &mut [T],
    stencil: &mut EncodeStencil<T>,
) {
    debug_assert_eq!(features.len(), cfg.feature_len());
    debug_assert_eq!(tables.len(), cfg.levels);
    let f = cfg.features_per_level;
    let clamped = Vec3 {
        x: x.x.max(T::zero()).min(T::one()),
        y: x.y.max(T::zero()).min(T::one()),
        z: x.z.max(T::zero()).min(T::one()),
    };

    for (l, layout) in layouts.iter().enumerate() {
        let res_t = T::from_usize(layout.resolution).unwrap();
        let mut cell = [0usize; 3];
        let mut frac = [T::zero(); 3];
        for a in 0..3 {
            let pos = clamped[a] * res_t;
            let mut c = pos.floor().to_isize().unwrap_or(0);
            c = c.clamp(0, layout.resolution as isize - 1);
            cell[a] = c as usize;
            frac[a] = pos - T::from_usize(cell[a]).unwrap();
        }

        let out = &mut features[l * f..(l + 1) * f];
        for o in out.iter_mut() {
            *o = T::zero();
        }
        let table = &tables[l];
        for corner in 0..8usize {
            let dx = corner & 1;
            let dy = (corner >> 1) & 1;
            let dz = (corner >> 2) & 1;
            let wx = if dx == 1 { frac[0] } else { T::one() - frac[0] };
            let wy = if dy == 1 { frac[1] } else { T::one() - frac[1] };
            let wz = if dz == 1 { frac[2] } else { T::one() - frac[2] };
            let w = wx * wy * wz;
            let idx = corner_index(layout, [cell[0] + dx, cell[1] + dy, cell[2] + dz]);
            stencil.corners[l][corner] = (idx, w);
            let base = idx as usize * f;
            for (o, &t) in out.iter_mut().zip(&table[base..base + f]) {
                *o += w * t;
            }
        }
    }
}

/// Scatter the gradient of the loss w.r.t. the encoded features back into
/// per-entry table gradients, using the stencil captured by the forward
/// pass. Entries touched by several corners or samples accumulate.
pub fn backward_tables<T: Real>(
    cfg: &EncodingConfig,
    stencil: &EncodeStencil<T>,
    feature_grad: &[T],
    table_grads: &mut [Vec<T>],
) {
    let f = cfg.features_per_level;
    for (l, corners) in stencil.corners.iter().enumerate() {
        let g = &feature_grad[l * f..(l + 1) * f];
        let grad = &mut table_grads[l];
        for &(idx, w) in corners {
            if w == T::zero() {
                continue;
            }
            let base = idx as usize * f;
            for (slot, &gf) in grad[base..base + f].iter_mut().zip(g) {
                *slot += w * gf;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::vec3;

    fn tiny_cfg() -> EncodingConfig {
        // level 0 (27 corners) is dense, level 1 (125 corners) hashes
        EncodingConfig {
            levels: 2,
            features_per_level: 2,
            table_size: 32,
            base_resolution: 2,
            per_level_scale: 2.0,
        }
    }

    #[test]
    fn level_resolution_follows_geometric_schedule() {
        let cfg = EncodingConfig::default();
        assert_eq!(cfg.level_resolution(0).unwrap(), 4);
        assert_eq!(cfg.level_resolution(1).unwrap(), 8);
        assert_eq!(cfg.level_resolution(15).unwrap(), 131_072);
        assert!(cfg.level_resolution(16).is_err());
    }

    #[test]
    fn entries_cap_at_table_size() {
        let cfg = EncodingConfig::default();
        // level 0: (4+1)^3 = 125 corners, dense
        assert_eq!(cfg.level_entries(0).unwrap(), 125);
        // level 5: resolution 128 -> (129)^3 > 2^19, hashed
        assert_eq!(cfg.level_entries(5).unwrap(), 1 << 19);
        let layouts = level_layouts(&cfg).unwrap();
        assert!(layouts[0].dense);
        assert!(!layouts[5].dense);
    }

    #[test]
    fn default_feature_vector_has_length_64() {
        assert_eq!(EncodingConfig::default().feature_len(), 64);
    }

    #[test]
    fn rejects_non_power_of_two_table() {
        let cfg = EncodingConfig {
            table_size: 100,
            ..EncodingConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_tables_encode_to_zero() {
        let cfg = tiny_cfg();
        let layouts = level_layouts(&cfg).unwrap();
        let tables: Vec<Vec<f64>> = layouts
            .iter()
            .map(|l| vec![0.0; l.entries * cfg.features_per_level])
            .collect();
        let mut features = vec![1.0; cfg.feature_len()];
        let mut stencil = EncodeStencil::with_levels(cfg.levels);
        encode_with_stencil(
            &cfg,
            &layouts,
            &tables,
            vec3(0.3, 0.7, 0.2),
            &mut features,
            &mut stencil,
        );
        assert!(features.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grid_node_reproduces_corner_entry_exactly() {
        let cfg = tiny_cfg();
        let layouts = level_layouts(&cfg).unwrap();
        let mut tables: Vec<Vec<f64>> = layouts
            .iter()
            .map(|l| (0..l.entries * 2).map(|i| i as f64 * 0.01).collect())
            .collect();
        tables[0][6] = -3.5; // entry 3, feature 0 on level 0
        let mut features = vec![0.0; cfg.feature_len()];
        let mut stencil = EncodeStencil::with_levels(cfg.levels);
        // level 0 has resolution 2; node (1, 1, 0) is at x = (0.5, 0.5, 0.0)
        encode_with_stencil(
            &cfg,
            &layouts,
            &tables,
            vec3(0.5, 0.5, 0.0),
            &mut features,
            &mut stencil,
        );
        // dense index of (1,1,0) on level 0: 1 + 3*1 = 4
        assert_eq!(features[0], tables[0][8]);
        assert_eq!(features[1], tables[0][9]);
    }

    #[test]
    fn out_of_range_input_clamps_to_unit_cube() {
        let cfg = tiny_cfg();
        let layouts = level_layouts(&cfg).unwrap();
        let tables: Vec<Vec<f64>> = layouts
            .iter()
            .map(|l| (0..l.entries * 2).map(|i| (i as f64).sin()).collect())
            .collect();
        let mut a = vec![0.0; cfg.feature_len()];
        let mut b = vec![0.0; cfg.feature_len()];
        let mut st = EncodeStencil::with_levels(cfg.levels);
        encode_with_stencil(&cfg, &layouts, &tables, vec3(1.2, -0.4, 0.5), &mut a, &mut st);
        encode_with_stencil(&cfg, &layouts, &tables, vec3(1.0, 0.0, 0.5), &mut b, &mut st);
        assert_eq!(a, b);
    }

    #[test]
    fn backward_scatters_weighted_gradients() {
        let cfg = tiny_cfg();
        let layouts = level_layouts(&cfg).unwrap();
        let tables: Vec<Vec<f64>> = layouts
            .iter()
            .map(|l| vec![0.0; l.entries * 2])
            .collect();
        let mut features = vec![0.0; cfg.feature_len()];
        let mut stencil = EncodeStencil::with_levels(cfg.levels);
        let x = vec3(0.25, 0.5, 0.75);
        encode_with_stencil(&cfg, &layouts, &tables, x, &mut features, &mut stencil);

        let fg = vec![1.0; cfg.feature_len()];
        let mut grads: Vec<Vec<f64>> = layouts.iter().map(|l| vec![0.0; l.entries * 2]).collect();
        backward_tables(&cfg, &stencil, &fg, &mut grads);
        // total scattered weight per level and feature slot is 1
        for g in &grads {
            let total: f64 = g.iter().sum();
            assert!((total - 2.0).abs() < 1e-12, "sum {total}");
        }
    }
}
