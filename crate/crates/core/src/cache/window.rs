//! Neural volumes, the bounded FIFO window, and its reversed/negated views.

use crate::dnr::DnrModel;
use crate::error::{Error, Result};
use crate::math::{Aabb, Vec3};
use crate::volume::{sample_trilinear, GridVolume};
use crate::vis::VolumeSequence;
use crate::Real;
use std::collections::VecDeque;
use std::sync::Arc;

/// A trained, frozen distributed model of one timestep. Construction
/// freezes the model; the original field data is released by the caller.
#[derive(Debug, Clone)]
pub struct NeuralVolume<T> {
    pub dnr: Arc<DnrModel<T>>,
    pub timestep: u64,
    pub sim_time: f64,
    /// Smallest per-rank core PSNR.
    pub achieved_psnr: f64,
    /// The step budget ran out before the PSNR target was met.
    pub budget_exhausted: bool,
    pub param_bytes: usize,
}

impl<T: Real> NeuralVolume<T> {
    pub fn new(dnr: DnrModel<T>, timestep: u64, sim_time: f64) -> Self {
        let achieved_psnr = dnr.min_achieved_psnr();
        let budget_exhausted = dnr.ranks.iter().any(|r| r.budget_exhausted);
        let param_bytes = dnr.param_bytes();
        NeuralVolume {
            dnr: Arc::new(dnr),
            timestep,
            sim_time,
            achieved_psnr,
            budget_exhausted,
            param_bytes,
        }
    }
}

/// One cached timestep: either a frozen neural volume or a raw grid (the
/// memory-hungry baseline behind the same interface).
#[derive(Debug, Clone)]
pub enum CachedVolume<T> {
    Neural(Arc<NeuralVolume<T>>),
    Raw {
        grid: Arc<GridVolume<T>>,
        timestep: u64,
        sim_time: f64,
    },
}

impl<T: Real> CachedVolume<T> {
    pub fn timestep(&self) -> u64 {
        match self {
            CachedVolume::Neural(nv) => nv.timestep,
            CachedVolume::Raw { timestep, .. } => *timestep,
        }
    }

    pub fn sim_time(&self) -> f64 {
        match self {
            CachedVolume::Neural(nv) => nv.sim_time,
            CachedVolume::Raw { sim_time, .. } => *sim_time,
        }
    }

    pub fn channels(&self) -> usize {
        match self {
            CachedVolume::Neural(nv) => nv.dnr.channels(),
            CachedVolume::Raw { grid, .. } => grid.channels(),
        }
    }

    /// Cached bytes of this element (parameter payload for neural volumes,
    /// f32 value payload for raw grids).
    pub fn byte_size(&self) -> usize {
        match self {
            CachedVolume::Neural(nv) => nv.param_bytes,
            CachedVolume::Raw { grid, .. } => grid.values().len() * 4,
        }
    }

    pub fn domain(&self) -> Aabb<T> {
        match self {
            CachedVolume::Neural(nv) => nv.dnr.decomposition.domain_bounds(),
            CachedVolume::Raw { grid, .. } => grid.bounds(),
        }
    }
}

/// Bounded FIFO of cached volumes, oldest first. When full, admitting a
/// new element evicts exactly the oldest. An optional admission filter
/// keeps only every k-th timestep.
#[derive(Debug, Clone)]
pub struct Window<T> {
    capacity: usize,
    admit_every: u64,
    items: VecDeque<CachedVolume<T>>,
}

impl<T: Real> Window<T> {
    pub fn new(capacity: usize, admit_every: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("window size must be at least 1"));
        }
        if admit_every == 0 {
            return Err(Error::config("window admission stride must be at least 1"));
        }
        Ok(Window {
            capacity,
            admit_every,
            items: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Offer one timestep's value. Returns true when admitted. Timesteps
    /// must arrive in strictly increasing order.
    pub fn offer(&mut self, value: CachedVolume<T>) -> Result<bool> {
        if let Some(last) = self.items.back() {
            if value.timestep() <= last.timestep() {
                return Err(Error::config(format!(
                    "window admission out of order: {} after {}",
                    value.timestep(),
                    last.timestep()
                )));
            }
        }
        if value.timestep() % self.admit_every != 0 {
            return Ok(false);
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(value);
        Ok(true)
    }

    pub fn timesteps(&self) -> Vec<u64> {
        self.items.iter().map(|v| v.timestep()).collect()
    }

    /// Total cached bytes across elements.
    pub fn byte_size(&self) -> usize {
        self.items.iter().map(|v| v.byte_size()).sum()
    }

    /// Immutable snapshot view (cheap: elements are reference-counted).
    pub fn view(&self) -> WindowView<T> {
        WindowView {
            items: self.items.iter().cloned().collect(),
            reversed: false,
            negated: false,
        }
    }
}

/// An index-remapped, optionally sign-flipped view of a window. Reversal
/// maps element `i` to `n - i - 1`; negation flips every channel of every
/// queried or materialized value. Neither copies the cached data.
#[derive(Debug, Clone)]
pub struct WindowView<T> {
    items: Vec<CachedVolume<T>>,
    reversed: bool,
    negated: bool,
}

impl<T: Real> WindowView<T> {
    pub fn reverse(&self) -> WindowView<T> {
        WindowView {
            items: self.items.clone(),
            reversed: !self.reversed,
            negated: self.negated,
        }
    }

    /// Negate all field values; only meaningful for vector fields.
    pub fn negate(&self) -> Result<WindowView<T>> {
        if let Some(first) = self.items.first() {
            if first.channels() != 3 {
                return Err(Error::shape(
                    "negate expects a window of vector (3-channel) volumes",
                ));
            }
        }
        Ok(WindowView {
            items: self.items.clone(),
            reversed: self.reversed,
            negated: !self.negated,
        })
    }

    pub fn is_negated(&self) -> bool {
        self.negated
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    fn map_index(&self, i: usize) -> usize {
        if self.reversed {
            self.items.len() - 1 - i
        } else {
            i
        }
    }

    pub fn get(&self, i: usize) -> &CachedVolume<T> {
        &self.items[self.map_index(i)]
    }

    pub fn timesteps(&self) -> Vec<u64> {
        (0..self.len()).map(|i| self.get(i).timestep()).collect()
    }

    /// Query one element at a physical point (denormalized value, sign
    /// applied).
    pub fn query(&self, i: usize, p: Vec3<T>, out: &mut [T]) -> Result<()> {
        match self.get(i) {
            CachedVolume::Neural(nv) => nv.dnr.query(p, out)?,
            CachedVolume::Raw { grid, .. } => sample_trilinear(grid, p, out)?,
        }
        if self.negated {
            for v in out.iter_mut() {
                *v = -*v;
            }
        }
        Ok(())
    }
}

impl<T: Real> VolumeSequence<T> for WindowView<T> {
    fn len(&self) -> usize {
        self.items.len()
    }

    fn sim_time(&self, i: usize) -> f64 {
        self.get(i).sim_time()
    }

    fn channels(&self) -> usize {
        self.items.first().map_or(0, |v| v.channels())
    }

    fn domain(&self) -> Aabb<T> {
        self.items[0].domain()
    }

    /// Decode one element to a full grid on demand, applying the view's
    /// sign. Raw elements are shared (no copy) unless negated.
    fn materialize(&self, i: usize) -> Result<Arc<GridVolume<T>>> {
        let negate = |mut g: GridVolume<T>| {
            for v in g.values_mut() {
                *v = -*v;
            }
            Arc::new(g)
        };
        match self.get(i) {
            CachedVolume::Neural(nv) => {
                let grid = nv.dnr.decode_full()?;
                Ok(if self.negated { negate(grid) } else { Arc::new(grid) })
            }
            CachedVolume::Raw { grid, .. } => Ok(if self.negated {
                negate(grid.as_ref().clone())
            } else {
                grid.clone()
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::vec3;
    use crate::volume::Mesh;

    fn raw(ts: u64, channels: usize) -> CachedVolume<f64> {
        let mesh = Mesh::Uniform {
            origin: vec3(0.0, 0.0, 0.0),
            spacing: vec3(1.0, 1.0, 1.0),
        };
        let grid = GridVolume::from_fn([2, 2, 2], mesh, channels, |p, out| {
            for (c, o) in out.iter_mut().enumerate() {
                *o = p.x + c as f64 + ts as f64;
            }
        })
        .unwrap();
        CachedVolume::Raw {
            grid: Arc::new(grid),
            timestep: ts,
            sim_time: ts as f64 * 0.1,
        }
    }

    #[test]
    fn fifo_keeps_the_last_n_admitted() {
        let mut w: Window<f64> = Window::new(3, 1).unwrap();
        for ts in 1..=4 {
            w.offer(raw(ts, 1)).unwrap();
        }
        assert_eq!(w.timesteps(), vec![2, 3, 4]);
        assert_eq!(w.len(), 3);
    }

    #[test]
    fn admission_filter_keeps_every_kth_step() {
        let mut w: Window<f64> = Window::new(3, 2).unwrap();
        for ts in 1..=8 {
            w.offer(raw(ts, 1)).unwrap();
        }
        assert_eq!(w.timesteps(), vec![4, 6, 8]);
    }

    #[test]
    fn out_of_order_admission_is_rejected() {
        let mut w: Window<f64> = Window::new(3, 1).unwrap();
        w.offer(raw(5, 1)).unwrap();
        assert!(w.offer(raw(5, 1)).is_err());
        assert!(w.offer(raw(3, 1)).is_err());
    }

    #[test]
    fn zero_capacity_is_rejected() {
        assert!(Window::<f64>::new(0, 1).is_err());
    }

    #[test]
    fn reverse_is_an_involution() {
        let mut w: Window<f64> = Window::new(4, 1).unwrap();
        for ts in 1..=3 {
            w.offer(raw(ts, 3)).unwrap();
        }
        let v = w.view();
        assert_eq!(v.reverse().timesteps(), vec![3, 2, 1]);
        assert_eq!(v.reverse().reverse().timesteps(), v.timesteps());

        let empty: Window<f64> = Window::new(2, 1).unwrap();
        assert!(empty.view().reverse().timesteps().is_empty());
    }

    #[test]
    fn negate_flips_queries_and_commutes_with_reverse() {
        let mut w: Window<f64> = Window::new(4, 1).unwrap();
        for ts in 1..=3 {
            w.offer(raw(ts, 3)).unwrap();
        }
        let v = w.view();
        let p = vec3(0.5, 0.5, 0.5);
        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        v.query(0, p, &mut a).unwrap();
        v.negate().unwrap().query(0, p, &mut b).unwrap();
        assert_eq!(a.map(|x| -x), b);

        // involution
        let back = v.negate().unwrap().negate().unwrap();
        back.query(0, p, &mut b).unwrap();
        assert_eq!(a, b);

        // commutes with reverse
        let nr = v.negate().unwrap().reverse();
        let rn = v.reverse().negate().unwrap();
        assert_eq!(nr.timesteps(), rn.timesteps());
        let mut x = [0.0; 3];
        let mut y = [0.0; 3];
        nr.query(1, p, &mut x).unwrap();
        rn.query(1, p, &mut y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn negate_rejects_scalar_windows() {
        let mut w: Window<f64> = Window::new(2, 1).unwrap();
        w.offer(raw(1, 1)).unwrap();
        assert!(w.view().negate().is_err());
    }

    #[test]
    fn materialize_applies_sign_without_copying_when_plain() {
        let mut w: Window<f64> = Window::new(2, 1).unwrap();
        w.offer(raw(1, 3)).unwrap();
        let v = w.view();
        let plain = v.materialize(0).unwrap();
        let negated = v.negate().unwrap().materialize(0).unwrap();
        for (a, b) in plain.values().iter().zip(negated.values()) {
            assert_eq!(*a, -*b);
        }
    }
}
