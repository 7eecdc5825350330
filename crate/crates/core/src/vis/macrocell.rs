//! Macro-cell acceleration: a coarse per-partition grid of conservative
//! network value ranges, used to skip samples the transfer function maps
//! to zero opacity.

use crate::dnr::DnrModel;
use crate::error::{Error, Result};
use crate::inr::{InrModel, Scratch};
use crate::math::{vec3, Vec3};
use crate::{real, Real};

pub const DEFAULT_MACROCELL_RESOLUTION: usize = 16;
pub const DEFAULT_MACROCELL_PROBES: usize = 4;
pub const DEFAULT_MACROCELL_PAD: f64 = 1e-3;

/// Per-cell `[min, max]` of probed network outputs (normalized values),
/// padded by a safety margin. Cells cover the partition's `[0,1]^3` frame.
#[derive(Debug, Clone)]
pub struct MacroCellGrid<T> {
    pub resolution: usize,
    pub pad: T,
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Real> MacroCellGrid<T> {
    /// Conservative value range of the cell containing normalized
    /// coordinate `u`.
    pub fn cell_range(&self, u: Vec3<T>) -> (T, T) {
        let res = self.resolution;
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let c = (u[a] * T::from_usize(res).unwrap())
                .floor()
                .to_isize()
                .unwrap_or(0)
                .clamp(0, res as isize - 1);
            idx[a] = c as usize;
        }
        let i = (idx[2] * res + idx[1]) * res + idx[0];
        (self.lo[i], self.hi[i])
    }

    pub fn cells(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.lo.iter().copied().zip(self.hi.iter().copied())
    }

    /// Probe one rank's network on a dense sub-lattice per cell and record
    /// padded min/max ranges. `probes` points per cell axis (at least 2,
    /// spanning the cell faces).
    pub fn build(
        model: &InrModel<T>,
        resolution: usize,
        probes: usize,
        pad: f64,
    ) -> Result<MacroCellGrid<T>> {
        if model.output_dim() != 1 {
            return Err(Error::shape("macro cells expect a scalar network"));
        }
        if resolution == 0 || probes < 2 {
            return Err(Error::config("macro-cell grid needs resolution >= 1, probes >= 2"));
        }
        let pad_t: T = real(pad);
        let res_t = T::from_usize(resolution).unwrap();
        let n = resolution * resolution * resolution;
        let mut lo = vec![T::infinity(); n];
        let mut hi = vec![T::neg_infinity(); n];
        let mut scratch = Scratch::for_model(model);
        let steps = probes - 1;
        for cz in 0..resolution {
            for cy in 0..resolution {
                for cx in 0..resolution {
                    let i = (cz * resolution + cy) * resolution + cx;
                    for pz in 0..probes {
                        for py in 0..probes {
                            for px in 0..probes {
                                let frac = |k: usize| {
                                    T::from_usize(k).unwrap() / T::from_usize(steps).unwrap()
                                };
                                let u = vec3(
                                    (T::from_usize(cx).unwrap() + frac(px)) / res_t,
                                    (T::from_usize(cy).unwrap() + frac(py)) / res_t,
                                    (T::from_usize(cz).unwrap() + frac(pz)) / res_t,
                                );
                                model.forward_cached(u, &mut scratch);
                                let v = scratch.output()[0];
                                if v < lo[i] {
                                    lo[i] = v;
                                }
                                if v > hi[i] {
                                    hi[i] = v;
                                }
                            }
                        }
                    }
                    lo[i] -= pad_t;
                    hi[i] += pad_t;
                }
            }
        }
        Ok(MacroCellGrid {
            resolution,
            pad: pad_t,
            lo,
            hi,
        })
    }
}

/// Build the macro-cell grid of every rank with the default probe density.
pub fn build_macrocells<T: Real>(
    dnr: &DnrModel<T>,
    resolution: usize,
) -> Result<Vec<MacroCellGrid<T>>> {
    dnr.models
        .iter()
        .map(|m| MacroCellGrid::build(m, resolution, DEFAULT_MACROCELL_PROBES, DEFAULT_MACROCELL_PAD))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inr::{EncodingConfig, MlpConfig};

    fn constant_model(c: f64) -> InrModel<f64> {
        let enc = EncodingConfig {
            levels: 2,
            features_per_level: 2,
            table_size: 64,
            base_resolution: 2,
            per_level_scale: 2.0,
        };
        let mlp = MlpConfig {
            hidden_layers: 1,
            neurons: 4,
            output_dim: 1,
        };
        let mut m = InrModel::zeroed(enc, mlp).unwrap();
        *m.biases.last_mut().unwrap() = vec![c];
        m
    }

    #[test]
    fn constant_network_gives_zero_width_cells() {
        let m = constant_model(0.42);
        let grid = MacroCellGrid::build(&m, 4, 3, 1e-3).unwrap();
        for (lo, hi) in grid.cells() {
            assert!((lo - (0.42 - 1e-3)).abs() < 1e-12);
            assert!((hi - (0.42 + 1e-3)).abs() < 1e-12);
        }
    }

    #[test]
    fn reprobing_the_build_lattice_stays_inside_padded_ranges() {
        // random-ish network: tables filled with a deterministic pattern
        let enc = EncodingConfig {
            levels: 3,
            features_per_level: 2,
            table_size: 128,
            base_resolution: 2,
            per_level_scale: 2.0,
        };
        let mlp = MlpConfig {
            hidden_layers: 2,
            neurons: 8,
            output_dim: 1,
        };
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let m = InrModel::<f64>::initialized(enc, mlp, &mut rng).unwrap();
        let grid = MacroCellGrid::build(&m, 8, 4, 1e-3).unwrap();
        let res = 8.0;
        let mut out = [0.0];
        for cz in 0..8 {
            for cy in 0..8 {
                for cx in 0..8 {
                    for k in 0..4 {
                        let f = k as f64 / 3.0;
                        let u = vec3(
                            (cx as f64 + f) / res,
                            (cy as f64 + f) / res,
                            (cz as f64 + f) / res,
                        );
                        m.forward(u, &mut out);
                        let (lo, hi) = grid.cell_range(vec3(
                            (cx as f64 + 0.5) / res,
                            (cy as f64 + 0.5) / res,
                            (cz as f64 + 0.5) / res,
                        ));
                        assert!(out[0] >= lo && out[0] <= hi);
                    }
                }
            }
        }
    }
}
