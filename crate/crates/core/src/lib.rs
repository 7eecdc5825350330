//! Distributed implicit neural representations for partitioned volume fields.
//!
//! The crate is organized around five layers:
//!
//! - [`volume`]: grid volume storage, domain decomposition with ghost
//!   regions, interpolation samplers, value normalization, and PSNR.
//! - [`inr`]: a single-partition implicit neural representation built from a
//!   multi-resolution hash-grid encoding and a small MLP, trained with
//!   hand-written backpropagation and Adam.
//! - [`dnr`]: the distributed layer — one network per partition, trained
//!   independently between two collective phases, queried by routing global
//!   coordinates to the owning partition.
//! - [`cache`]: reactive temporal caching — neural volume signals, a bounded
//!   FIFO window, triggers, and lazy workflow evaluation.
//! - [`vis`]: consumers of the cached representation — a sort-last
//!   ray-marching volume renderer and an RK4 pathline tracer.
//!
//! All numeric kernels are generic over the scalar type through the [`Real`]
//! trait; concrete aliases for the common instantiations live at the crate
//! root. On-disk formats always store `f32` regardless of the in-memory
//! scalar.

pub mod cache;
pub mod dnr;
pub mod driver;
pub mod error;
pub mod inr;
pub mod math;
pub mod testing;
pub mod vis;
pub mod volume;

pub use error::{Error, Result};
pub use math::{vec3, Aabb, Vec3};

/// Floating-point scalar the numeric kernels are generic over: `f32` or `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Send
    + Sync
    + 'static
{
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any Real")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for converting an `f64` literal into the working scalar.
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64_lossy(x)
}

// Concrete aliases for the two supported precisions. The command-line tools
// use the `f32` family (it matches the on-disk parameter format bit for
// bit); tests that need tight tolerances instantiate the `f64` family.
pub type GridVolume32 = volume::GridVolume<f32>;
pub type GridVolume64 = volume::GridVolume<f64>;
pub type InrModel32 = inr::InrModel<f32>;
pub type InrModel64 = inr::InrModel<f64>;
pub type DnrModel32 = dnr::DnrModel<f32>;
pub type DnrModel64 = dnr::DnrModel<f64>;
