//! Pinhole camera.

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::{real, Real};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub position: [f64; 3],
    pub look_at: [f64; 3],
    #[serde(default = "default_up")]
    pub up: [f64; 3],
    #[serde(default = "default_fov")]
    pub fov_y_deg: f64,
    pub width: usize,
    pub height: usize,
}

fn default_up() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

fn default_fov() -> f64 {
    45.0
}

/// Validated camera with a precomputed orthonormal basis.
#[derive(Debug, Clone)]
pub struct Camera<T> {
    pub position: Vec3<T>,
    pub width: usize,
    pub height: usize,
    forward: Vec3<T>,
    right: Vec3<T>,
    up: Vec3<T>,
    tan_half_fov: T,
    aspect: T,
}

impl<T: Real> Camera<T> {
    pub fn new(
        position: Vec3<T>,
        look_at: Vec3<T>,
        up_hint: Vec3<T>,
        fov_y_deg: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::config("image dimensions must be positive"));
        }
        if !(0.0..180.0).contains(&fov_y_deg) || fov_y_deg == 0.0 {
            return Err(Error::config("field of view must lie in (0, 180) degrees"));
        }
        let gaze = look_at - position;
        if gaze.norm() == T::zero() {
            return Err(Error::config("camera position equals look-at point"));
        }
        let forward = gaze.normalized();
        let right = forward.cross(up_hint);
        if right.norm() < real(1e-12) {
            return Err(Error::config("camera up vector is parallel to the view direction"));
        }
        let right = right.normalized();
        let up = right.cross(forward);
        Ok(Camera {
            position,
            width,
            height,
            forward,
            right,
            up,
            tan_half_fov: real((fov_y_deg.to_radians() * 0.5).tan()),
            aspect: real(width as f64 / height as f64),
        })
    }

    pub fn from_config(cfg: &CameraConfig) -> Result<Self> {
        Camera::new(
            Vec3::from_array(cfg.position.map(real)),
            Vec3::from_array(cfg.look_at.map(real)),
            Vec3::from_array(cfg.up.map(real)),
            cfg.fov_y_deg,
            cfg.width,
            cfg.height,
        )
    }

    /// Normalized ray direction through pixel center `(px, py)`;
    /// `py` grows downward.
    pub fn ray_dir(&self, px: usize, py: usize) -> Vec3<T> {
        let half = real::<T>(0.5);
        let two = real::<T>(2.0);
        let sx = (two * (T::from_usize(px).unwrap() + half) / T::from_usize(self.width).unwrap()
            - T::one())
            * self.tan_half_fov
            * self.aspect;
        let sy = (T::one()
            - two * (T::from_usize(py).unwrap() + half) / T::from_usize(self.height).unwrap())
            * self.tan_half_fov;
        (self.forward + self.right.scale(sx) + self.up.scale(sy)).normalized()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::vec3;

    #[test]
    fn center_pixel_looks_forward() {
        let cam: Camera<f64> = Camera::new(
            vec3(0.0, 0.0, -5.0),
            vec3(0.0, 0.0, 0.0),
            vec3(0.0, 1.0, 0.0),
            60.0,
            64,
            64,
        )
        .unwrap();
        // with an even pixel count the two central pixels straddle the axis
        let d = cam.ray_dir(31, 31);
        assert!(d.z > 0.999);
    }

    #[test]
    fn degenerate_configs_are_rejected() {
        let p = vec3(0.0, 0.0, -5.0);
        assert!(Camera::new(p, p, vec3(0.0, 1.0, 0.0), 60.0, 8, 8).is_err());
        assert!(
            Camera::new(p, vec3(0.0, 0.0, 0.0), vec3(0.0, 0.0, 1.0), 60.0, 8, 8).is_err(),
            "up parallel to gaze"
        );
        assert!(Camera::new(p, vec3(0.0, 0.0, 0.0), vec3(0.0, 1.0, 0.0), 0.0, 8, 8).is_err());
        assert!(Camera::new(p, vec3(0.0, 0.0, 0.0), vec3(0.0, 1.0, 0.0), 180.0, 8, 8).is_err());
    }
}
