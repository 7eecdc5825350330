//! Synthetic simulation drivers: deterministic time-varying fields that
//! stand in for a running solver, plus a raw-file sequence reader.

use crate::error::{Error, Result};
use crate::math::{vec3, Vec3};
use crate::volume::{GridVolume, Mesh};
use crate::{real, Real};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Driver selection as it appears in workflow configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DriverConfig {
    GaussianBlobs {
        dims: [usize; 3],
        #[serde(default = "default_dt")]
        dt: f64,
        #[serde(default = "default_blobs")]
        blobs: usize,
        #[serde(default)]
        seed: u64,
    },
    TaylorGreen {
        dims: [usize; 3],
        #[serde(default = "default_dt")]
        dt: f64,
        /// Amplitude of the vortex velocity.
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        /// Viscous decay rate; velocity scales by `exp(-2 nu t)`.
        #[serde(default = "default_viscosity")]
        viscosity: f64,
    },
    RawSequence {
        /// Volume manifest per timestep, in order.
        manifests: Vec<PathBuf>,
        #[serde(default = "default_dt")]
        dt: f64,
    },
}

fn default_dt() -> f64 {
    0.005
}

fn default_blobs() -> usize {
    4
}

fn default_amplitude() -> f64 {
    1.0
}

fn default_viscosity() -> f64 {
    0.1
}

/// A deterministic field source advanced step by step.
#[derive(Debug, Clone)]
pub enum SyntheticDriver<T> {
    GaussianBlobs(GaussianBlobs<T>),
    TaylorGreen(TaylorGreen<T>),
    RawSequence { manifests: Vec<PathBuf>, dt: f64 },
}

impl<T: Real> SyntheticDriver<T> {
    pub fn from_config(cfg: &DriverConfig) -> Result<Self> {
        Ok(match cfg {
            DriverConfig::GaussianBlobs {
                dims,
                dt,
                blobs,
                seed,
            } => SyntheticDriver::GaussianBlobs(GaussianBlobs::new(*dims, *dt, *blobs, *seed)?),
            DriverConfig::TaylorGreen {
                dims,
                dt,
                amplitude,
                viscosity,
            } => SyntheticDriver::TaylorGreen(TaylorGreen::new(*dims, *dt, *amplitude, *viscosity)?),
            DriverConfig::RawSequence { manifests, dt } => {
                if manifests.is_empty() {
                    return Err(Error::config("raw sequence driver needs at least one file"));
                }
                SyntheticDriver::RawSequence {
                    manifests: manifests.clone(),
                    dt: *dt,
                }
            }
        })
    }

    pub fn dt(&self) -> f64 {
        match self {
            SyntheticDriver::GaussianBlobs(g) => g.dt,
            SyntheticDriver::TaylorGreen(t) => t.dt,
            SyntheticDriver::RawSequence { dt, .. } => *dt,
        }
    }

    pub fn time_at(&self, step: u64) -> f64 {
        step as f64 * self.dt()
    }

    pub fn channels(&self) -> usize {
        match self {
            SyntheticDriver::GaussianBlobs(_) => 1,
            SyntheticDriver::TaylorGreen(_) => 3,
            SyntheticDriver::RawSequence { .. } => 1,
        }
    }

    /// Materialize the field of one simulation step.
    pub fn field_at(&self, step: u64) -> Result<GridVolume<T>> {
        let t = self.time_at(step);
        match self {
            SyntheticDriver::GaussianBlobs(g) => g.field(t),
            SyntheticDriver::TaylorGreen(tg) => tg.field(t),
            SyntheticDriver::RawSequence { manifests, .. } => {
                let path = manifests.get(step as usize).ok_or_else(|| {
                    Error::config(format!(
                        "raw sequence has {} steps, step {step} requested",
                        manifests.len()
                    ))
                })?;
                crate::volume::load_volume(path)
            }
        }
    }
}

/// A handful of smooth moving bumps; scalar, analytic, controllable.
#[derive(Debug, Clone)]
pub struct GaussianBlobs<T> {
    pub dims: [usize; 3],
    pub dt: f64,
    mesh: Mesh<T>,
    centers: Vec<[f64; 3]>,
    wobble_amp: Vec<[f64; 3]>,
    wobble_freq: Vec<[f64; 3]>,
    sigma: Vec<f64>,
    amplitude: Vec<f64>,
}

impl<T: Real> GaussianBlobs<T> {
    pub fn new(dims: [usize; 3], dt: f64, blobs: usize, seed: u64) -> Result<Self> {
        if blobs == 0 {
            return Err(Error::config("need at least one blob"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centers = Vec::new();
        let mut wobble_amp = Vec::new();
        let mut wobble_freq = Vec::new();
        let mut sigma = Vec::new();
        let mut amplitude = Vec::new();
        for _ in 0..blobs {
            centers.push([
                rng.gen_range(0.25..0.75),
                rng.gen_range(0.25..0.75),
                rng.gen_range(0.25..0.75),
            ]);
            wobble_amp.push([
                rng.gen_range(0.05..0.15),
                rng.gen_range(0.05..0.15),
                rng.gen_range(0.05..0.15),
            ]);
            wobble_freq.push([
                rng.gen_range(0.5..2.0),
                rng.gen_range(0.5..2.0),
                rng.gen_range(0.5..2.0),
            ]);
            sigma.push(rng.gen_range(0.12..0.25));
            amplitude.push(rng.gen_range(0.5..1.0));
        }
        Ok(GaussianBlobs {
            dims,
            dt,
            mesh: unit_mesh(dims),
            centers,
            wobble_amp,
            wobble_freq,
            sigma,
            amplitude,
        })
    }

    /// Analytic field value at a physical point (domain `[0,1]^3`).
    pub fn value(&self, p: Vec3<T>, t: f64) -> f64 {
        let px = p.x.to_f64().unwrap();
        let py = p.y.to_f64().unwrap();
        let pz = p.z.to_f64().unwrap();
        let mut acc = 0.0;
        for k in 0..self.centers.len() {
            let mut r2 = 0.0;
            for (a, pa) in [px, py, pz].into_iter().enumerate() {
                let c = self.centers[k][a]
                    + self.wobble_amp[k][a] * (self.wobble_freq[k][a] * t * 6.0).sin();
                let d = pa - c;
                r2 += d * d;
            }
            acc += self.amplitude[k] * (-r2 / (2.0 * self.sigma[k] * self.sigma[k])).exp();
        }
        acc
    }

    pub fn field(&self, t: f64) -> Result<GridVolume<T>> {
        GridVolume::from_fn(self.dims, self.mesh.clone(), 1, |p, out| {
            out[0] = real(self.value(p, t));
        })
    }
}

/// The classical single-mode vortex lattice on `[0, 2pi]^3`, decaying in
/// time: `u = A F(t) sin x cos y cos z`, `v = -A F(t) cos x sin y cos z`,
/// `w = 0` with `F(t) = exp(-2 nu t)`.
#[derive(Debug, Clone)]
pub struct TaylorGreen<T> {
    pub dims: [usize; 3],
    pub dt: f64,
    pub amplitude: f64,
    pub viscosity: f64,
    mesh: Mesh<T>,
}

impl<T: Real> TaylorGreen<T> {
    pub fn new(dims: [usize; 3], dt: f64, amplitude: f64, viscosity: f64) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::config("taylor-green needs at least 2 nodes per axis"));
        }
        let two_pi = std::f64::consts::TAU;
        let mesh = Mesh::Uniform {
            origin: vec3(T::zero(), T::zero(), T::zero()),
            spacing: vec3(
                real(two_pi / (dims[0] - 1) as f64),
                real(two_pi / (dims[1] - 1) as f64),
                real(two_pi / (dims[2] - 1) as f64),
            ),
        };
        Ok(TaylorGreen {
            dims,
            dt,
            amplitude,
            viscosity,
            mesh,
        })
    }

    /// Analytic velocity at a physical point and time.
    pub fn velocity(&self, p: Vec3<T>, t: f64) -> [f64; 3] {
        let x = p.x.to_f64().unwrap();
        let y = p.y.to_f64().unwrap();
        let z = p.z.to_f64().unwrap();
        let f = self.amplitude * (-2.0 * self.viscosity * t).exp();
        [
            f * x.sin() * y.cos() * z.cos(),
            -f * x.cos() * y.sin() * z.cos(),
            0.0,
        ]
    }

    pub fn field(&self, t: f64) -> Result<GridVolume<T>> {
        GridVolume::from_fn(self.dims, self.mesh.clone(), 3, |p, out| {
            let v = self.velocity(p, t);
            out[0] = real(v[0]);
            out[1] = real(v[1]);
            out[2] = real(v[2]);
        })
    }
}

fn unit_mesh<T: Real>(dims: [usize; 3]) -> Mesh<T> {
    Mesh::Uniform {
        origin: vec3(T::zero(), T::zero(), T::zero()),
        spacing: vec3(
            real(1.0 / (dims[0].max(2) - 1) as f64),
            real(1.0 / (dims[1].max(2) - 1) as f64),
            real(1.0 / (dims[2].max(2) - 1) as f64),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn blobs_are_deterministic_per_seed() {
        let a: GaussianBlobs<f64> = GaussianBlobs::new([8, 8, 8], 0.01, 3, 7).unwrap();
        let b: GaussianBlobs<f64> = GaussianBlobs::new([8, 8, 8], 0.01, 3, 7).unwrap();
        let c: GaussianBlobs<f64> = GaussianBlobs::new([8, 8, 8], 0.01, 3, 8).unwrap();
        let fa = a.field(0.25).unwrap();
        let fb = b.field(0.25).unwrap();
        let fc = c.field(0.25).unwrap();
        assert_eq!(fa.values(), fb.values());
        assert_ne!(fa.values(), fc.values());
    }

    #[test]
    fn taylor_green_matches_closed_form() {
        let tg: TaylorGreen<f64> = TaylorGreen::new([8, 8, 8], 0.01, 2.0, 0.0).unwrap();
        let v = tg.velocity(vec3(FRAC_PI_2, 0.0, 0.0), 0.0);
        assert!((v[0] - 2.0).abs() < 1e-12);
        assert!(v[1].abs() < 1e-12);
        assert_eq!(v[2], 0.0);

        // decay factor
        let tg: TaylorGreen<f64> = TaylorGreen::new([8, 8, 8], 0.01, 1.0, 0.5).unwrap();
        let v = tg.velocity(vec3(FRAC_PI_2, 0.0, 0.0), 1.0);
        assert!((v[0] - (-1.0f64).exp()).abs() < 1e-12);

        // stagnation at cell corners
        let v = tg.velocity(vec3(PI, PI, FRAC_PI_2), 0.0);
        assert!(v[0].abs() < 1e-12 && v[1].abs() < 1e-12);
    }

    #[test]
    fn driver_field_shapes_match_config() {
        let cfg = DriverConfig::TaylorGreen {
            dims: [6, 6, 6],
            dt: 0.1,
            amplitude: 1.0,
            viscosity: 0.1,
        };
        let d: SyntheticDriver<f32> = SyntheticDriver::from_config(&cfg).unwrap();
        let f = d.field_at(3).unwrap();
        assert_eq!(f.dims(), [6, 6, 6]);
        assert_eq!(f.channels(), 3);
        assert_eq!(d.time_at(3), 0.1 * 3.0);
    }
}
