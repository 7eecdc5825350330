//! Small 3-vector and axis-aligned box helpers shared across the crate.

use crate::Real;
use std::ops::{Add, AddAssign, Div, Index, IndexMut, Mul, Neg, Sub};

/// A 3-component vector of the working scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

pub fn vec3<T>(x: T, y: T, z: T) -> Vec3<T> {
    Vec3 { x, y, z }
}

impl<T: Real> Vec3<T> {
    pub fn splat(v: T) -> Self {
        vec3(v, v, v)
    }

    pub fn zero() -> Self {
        Self::splat(T::zero())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        vec3(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        vec3(self.x / n, self.y / n, self.z / n)
    }

    pub fn scale(self, s: T) -> Self {
        vec3(self.x * s, self.y * s, self.z * s)
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [T; 3]) -> Self {
        vec3(a[0], a[1], a[2])
    }

    /// Componentwise conversion between scalar types (used at I/O borders).
    pub fn cast<U: Real>(self) -> Vec3<U> {
        vec3(
            U::from_f64_lossy(self.x.to_f64().unwrap()),
            U::from_f64_lossy(self.y.to_f64().unwrap()),
            U::from_f64_lossy(self.z.to_f64().unwrap()),
        )
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        vec3(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        vec3(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

impl<T: Real> Div<T> for Vec3<T> {
    type Output = Self;
    fn div(self, s: T) -> Self {
        vec3(self.x / s, self.y / s, self.z / s)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        vec3(-self.x, -self.y, -self.z)
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index out of range: {i}"),
        }
    }
}

impl<T> IndexMut<usize> for Vec3<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        match i {
            0 => &mut self.x,
            1 => &mut self.y,
            2 => &mut self.z,
            _ => panic!("Vec3 index out of range: {i}"),
        }
    }
}

/// Axis-aligned box in physical space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<T> {
    pub lo: Vec3<T>,
    pub hi: Vec3<T>,
}

impl<T: Real> Aabb<T> {
    pub fn new(lo: Vec3<T>, hi: Vec3<T>) -> Self {
        Aabb { lo, hi }
    }

    pub fn contains(&self, p: Vec3<T>) -> bool {
        (0..3).all(|a| p[a] >= self.lo[a] && p[a] <= self.hi[a])
    }

    pub fn extent(&self) -> Vec3<T> {
        self.hi - self.lo
    }

    pub fn center(&self) -> Vec3<T> {
        (self.lo + self.hi).scale(crate::real(0.5))
    }

    /// Intersection of a ray with the box; returns `(t_enter, t_exit)` with
    /// `t_enter <= t_exit` when the ray hits, clamped to `t >= 0`.
    pub fn ray_range(&self, origin: Vec3<T>, dir: Vec3<T>) -> Option<(T, T)> {
        let mut t0 = T::zero();
        let mut t1 = T::infinity();
        for a in 0..3 {
            if dir[a] == T::zero() {
                if origin[a] < self.lo[a] || origin[a] > self.hi[a] {
                    return None;
                }
                continue;
            }
            let inv = T::one() / dir[a];
            let mut ta = (self.lo[a] - origin[a]) * inv;
            let mut tb = (self.hi[a] - origin[a]) * inv;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }

    pub fn cast<U: Real>(&self) -> Aabb<U> {
        Aabb::new(self.lo.cast(), self.hi.cast())
    }
}

/// Deterministic 64-bit mix used to derive per-rank and per-step RNG seeds.
pub fn mix_seed(base: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base.wrapping_add(salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
