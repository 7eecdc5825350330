//! RGBA framebuffer with PPM (P6) and PNG output.

use crate::error::{Error, Result};
use crate::volume::psnr_from_mse;
use crate::Real;
use std::fs;
use std::io::Write;
use std::path::Path;

/// Float RGBA image; fragments accumulate premultiplied alpha, the final
/// composite (after background blending) has alpha 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[T; 4]>,
}

impl<T: Real> Image<T> {
    pub fn new(width: usize, height: usize) -> Self {
        Image {
            width,
            height,
            pixels: vec![[T::zero(); 4]; width * height],
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [T; 4] {
        self.pixels[y * self.width + x]
    }

    fn to_rgba8(&self) -> Vec<u8> {
        let mut bytes = Vec::with_capacity(self.pixels.len() * 4);
        for p in &self.pixels {
            for c in p {
                let v = c.to_f64().unwrap().clamp(0.0, 1.0);
                bytes.push((v * 255.0).round() as u8);
            }
        }
        bytes
    }

    /// Binary PPM (P6), RGB only.
    pub fn save_ppm(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut f = fs::File::create(path)?;
        write!(f, "P6\n{} {}\n255\n", self.width, self.height)?;
        let rgba = self.to_rgba8();
        let mut rgb = Vec::with_capacity(self.pixels.len() * 3);
        for px in rgba.chunks_exact(4) {
            rgb.extend_from_slice(&px[..3]);
        }
        f.write_all(&rgb)?;
        Ok(())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let buf: image::RgbaImage =
            image::ImageBuffer::from_raw(self.width as u32, self.height as u32, self.to_rgba8())
                .ok_or_else(|| Error::shape("pixel buffer does not match image dimensions"))?;
        buf.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    /// Largest absolute per-channel RGB difference against another image.
    pub fn max_abs_diff(&self, other: &Image<T>) -> Result<f64> {
        self.check_shape(other)?;
        let mut worst = 0.0_f64;
        for (a, b) in self.pixels.iter().zip(&other.pixels) {
            for c in 0..3 {
                let d = (a[c].to_f64().unwrap() - b[c].to_f64().unwrap()).abs();
                worst = worst.max(d);
            }
        }
        Ok(worst)
    }

    /// PSNR over the RGB channels (peak 1.0).
    pub fn rgb_psnr(&self, other: &Image<T>) -> Result<f64> {
        self.check_shape(other)?;
        let mut acc = 0.0_f64;
        for (a, b) in self.pixels.iter().zip(&other.pixels) {
            for c in 0..3 {
                let d = a[c].to_f64().unwrap() - b[c].to_f64().unwrap();
                acc += d * d;
            }
        }
        Ok(psnr_from_mse(acc / (self.pixels.len() * 3) as f64))
    }

    fn check_shape(&self, other: &Image<T>) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::shape(format!(
                "image shapes differ: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_bytes_are_deterministic() {
        let mut img: Image<f64> = Image::new(2, 1);
        img.pixels[0] = [1.0, 0.5, 0.0, 1.0];
        img.pixels[1] = [0.0, 0.0, 0.0, 1.0];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("img.ppm");
        img.save_ppm(&p).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[..9], b"P6\n2 1\n25");
        assert_eq!(&bytes[bytes.len() - 6..], &[255, 128, 0, 0, 0, 0]);
    }

    #[test]
    fn png_round_trips_through_the_decoder() {
        let mut img: Image<f32> = Image::new(3, 2);
        for (i, p) in img.pixels.iter_mut().enumerate() {
            *p = [i as f32 / 8.0, 0.25, 1.0 - i as f32 / 8.0, 1.0];
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("img.png");
        img.save_png(&p).unwrap();
        let back = image::open(&p).unwrap().to_rgba8();
        assert_eq!(back.width(), 3);
        assert_eq!(back.get_pixel(1, 0).0[1], 64); // 0.25 * 255 rounded
    }

    #[test]
    fn psnr_of_identical_images_caps() {
        let img: Image<f64> = Image::new(4, 4);
        assert_eq!(img.rgb_psnr(&img).unwrap(), crate::volume::PSNR_CAP_DB);
    }
}
