//! Piecewise-linear transfer functions mapping normalized scalars to RGBA.

use crate::error::{Error, Result};
use crate::{real, Real};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunctionConfig {
    /// Control points: normalized scalar in `[0,1]` to RGBA.
    pub points: Vec<TfPoint>,
    #[serde(default = "default_scale")]
    pub opacity_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfPoint {
    pub value: f64,
    pub rgba: [f64; 4],
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone)]
pub struct TransferFunction<T> {
    values: Vec<T>,
    colors: Vec<[T; 4]>,
    opacity_scale: T,
}

impl<T: Real> TransferFunction<T> {
    pub fn new(points: &[(f64, [f64; 4])], opacity_scale: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::config("transfer function needs at least two control points"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::config("transfer function control points must be sorted"));
        }
        for (v, rgba) in points {
            if !(0.0..=1.0).contains(v) {
                return Err(Error::config("control point values must lie in [0,1]"));
            }
            if !(0.0..=1.0).contains(&rgba[3]) {
                return Err(Error::config("control point alpha must lie in [0,1]"));
            }
        }
        if !(0.0..=1.0).contains(&opacity_scale) {
            return Err(Error::config("opacity scale must lie in [0,1]"));
        }
        Ok(TransferFunction {
            values: points.iter().map(|p| real(p.0)).collect(),
            colors: points.iter().map(|p| p.1.map(real)).collect(),
            opacity_scale: real(opacity_scale),
        })
    }

    pub fn from_config(cfg: &TransferFunctionConfig) -> Result<Self> {
        let pts: Vec<(f64, [f64; 4])> = cfg.points.iter().map(|p| (p.value, p.rgba)).collect();
        TransferFunction::new(&pts, cfg.opacity_scale)
    }

    /// A simple white ramp: transparent at 0, opaque at 1.
    pub fn white_ramp() -> Self {
        TransferFunction::new(
            &[(0.0, [1.0, 1.0, 1.0, 0.0]), (1.0, [1.0, 1.0, 1.0, 1.0])],
            1.0,
        )
        .unwrap()
    }

    /// RGBA at a normalized scalar; out-of-range input is clamped. Alpha is
    /// multiplied by the global opacity scale.
    pub fn lookup(&self, v: T) -> [T; 4] {
        let v = v.max(T::zero()).min(T::one());
        let n = self.values.len();
        let i = match self.values.partition_point(|&x| x <= v) {
            0 => {
                let mut c = self.colors[0];
                c[3] *= self.opacity_scale;
                return c;
            }
            i if i >= n => {
                let mut c = self.colors[n - 1];
                c[3] *= self.opacity_scale;
                return c;
            }
            i => i - 1,
        };
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        let t = (v - v0) / (v1 - v0);
        let mut out = [T::zero(); 4];
        for c in 0..4 {
            out[c] = self.colors[i][c] + (self.colors[i + 1][c] - self.colors[i][c]) * t;
        }
        out[3] *= self.opacity_scale;
        out
    }

    /// Largest (scaled) alpha the transfer function can produce for any
    /// scalar in `[v0, v1]`: piecewise-linear alpha peaks at interval
    /// endpoints or interior control points.
    pub fn max_alpha(&self, v0: T, v1: T) -> T {
        let lo = v0.min(v1);
        let hi = v0.max(v1);
        let mut a = self.lookup(lo)[3].max(self.lookup(hi)[3]);
        for (i, &v) in self.values.iter().enumerate() {
            if v > lo && v < hi {
                a = a.max(self.colors[i][3] * self.opacity_scale);
            }
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> TransferFunction<f64> {
        TransferFunction::new(
            &[
                (0.0, [0.0, 0.0, 1.0, 0.0]),
                (0.5, [0.0, 1.0, 0.0, 0.8]),
                (1.0, [1.0, 0.0, 0.0, 0.2]),
            ],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn lookup_interpolates_and_clamps() {
        let tf = ramp();
        assert_eq!(tf.lookup(0.25), [0.0, 0.5, 0.5, 0.4]);
        assert_eq!(tf.lookup(0.0), [0.0, 0.0, 1.0, 0.0]);
        assert_eq!(tf.lookup(-3.0), [0.0, 0.0, 1.0, 0.0]);
        assert_eq!(tf.lookup(7.0), [1.0, 0.0, 0.0, 0.2]);
    }

    #[test]
    fn max_alpha_considers_interior_peaks() {
        let tf = ramp();
        // peak at the 0.5 control point
        assert_eq!(tf.max_alpha(0.1, 0.9), 0.8);
        assert!((tf.max_alpha(0.0, 0.1) - tf.lookup(0.1)[3]).abs() < 1e-15);
        // zero interval
        assert_eq!(tf.max_alpha(0.0, 0.0), 0.0);
    }

    #[test]
    fn opacity_scale_multiplies_alpha() {
        let tf = TransferFunction::new(
            &[(0.0, [1.0, 1.0, 1.0, 0.0]), (1.0, [1.0, 1.0, 1.0, 1.0])],
            0.5,
        )
        .unwrap();
        assert_eq!(tf.lookup(1.0)[3], 0.5);
        assert_eq!(tf.max_alpha(0.0, 1.0), 0.5);
    }

    #[test]
    fn unsorted_points_are_rejected() {
        assert!(TransferFunction::<f64>::new(
            &[(0.5, [0.0; 4]), (0.5, [0.0; 4])],
            1.0
        )
        .is_err());
    }
}
