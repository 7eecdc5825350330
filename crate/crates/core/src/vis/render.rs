//! Front-to-back emission-absorption ray marching and sort-last
//! compositing.
//!
//! Samples sit on a global lattice along each ray (`t = (k + 1/2) * step`),
//! so splitting a ray at any plane and compositing the half-intervals
//! reproduces the unsplit march exactly. The distributed renderer marches
//! each rank's brick over its own `[t_enter, t_exit)` interval of that
//! lattice and composites the per-pixel fragments in entry-depth order.

use super::macrocell::MacroCellGrid;
use super::{Camera, Image, TransferFunction};
use crate::dnr::DnrModel;
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::volume::{sample_trilinear_clamped, GridVolume, ValueRange};
use crate::{real, Real};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderParams {
    /// World-space distance between samples along a ray.
    pub step_size: f64,
    /// Reference step for opacity correction:
    /// `a = 1 - (1 - a_tf)^(step_size / base_step)`.
    #[serde(default)]
    pub base_step: Option<f64>,
    /// Terminate a ray once accumulated alpha reaches this value.
    #[serde(default = "default_early_exit")]
    pub early_exit_alpha: f64,
    #[serde(default = "default_background")]
    pub background: [f64; 4],
}

fn default_early_exit() -> f64 {
    0.99
}

fn default_background() -> [f64; 4] {
    [0.0, 0.0, 0.0, 1.0]
}

impl RenderParams {
    pub fn new(step_size: f64) -> Self {
        RenderParams {
            step_size,
            base_step: None,
            early_exit_alpha: default_early_exit(),
            background: default_background(),
        }
    }

    fn opacity_exponent(&self) -> f64 {
        match self.base_step {
            Some(b) => self.step_size / b,
            None => 1.0,
        }
    }
}

/// One rank's contribution to one pixel.
#[derive(Debug, Clone, Copy)]
pub struct Fragment<T> {
    pub pixel: u32,
    pub rank: u32,
    /// Ray parameter where the brick interval starts.
    pub depth: T,
    /// Premultiplied color.
    pub color: [T; 3],
    pub alpha: T,
}

/// March the global sample lattice over `[t0, t1)`. The sampler returns a
/// normalized scalar, or `None` for samples known to be empty (macro-cell
/// skipping); skipped samples contribute nothing.
pub fn ray_march<T: Real>(
    mut sample: impl FnMut(Vec3<T>) -> Option<T>,
    origin: Vec3<T>,
    dir: Vec3<T>,
    t0: T,
    t1: T,
    tf: &TransferFunction<T>,
    params: &RenderParams,
) -> ([T; 3], T) {
    let step = real::<T>(params.step_size);
    let half = real::<T>(0.5);
    let exponent = params.opacity_exponent();
    let early = real::<T>(params.early_exit_alpha);

    let mut color = [T::zero(); 3];
    let mut alpha = T::zero();

    let mut k = (t0 / step - half).ceil().to_i64().unwrap_or(0).max(0);
    loop {
        let t = (T::from_i64(k).unwrap() + half) * step;
        k += 1;
        if t < t0 {
            continue;
        }
        if t >= t1 {
            break;
        }
        let p = origin + dir.scale(t);
        let Some(v) = sample(p) else { continue };
        let rgba = tf.lookup(v);
        let mut a = rgba[3];
        if exponent != 1.0 {
            a = T::one() - (T::one() - a).powf(real(exponent));
        }
        if a == T::zero() {
            continue;
        }
        let w = (T::one() - alpha) * a;
        for c in 0..3 {
            color[c] += w * rgba[c];
        }
        alpha += w;
        if alpha >= early {
            break;
        }
    }
    (color, alpha)
}

/// Order fragments per pixel by entry depth and blend front to back, then
/// blend the background last.
pub fn composite_fragments<T: Real>(
    width: usize,
    height: usize,
    mut fragments: Vec<Fragment<T>>,
    background: [f64; 4],
) -> Image<T> {
    fragments.sort_by(|a, b| {
        a.pixel
            .cmp(&b.pixel)
            .then(a.depth.partial_cmp(&b.depth).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.rank.cmp(&b.rank))
    });

    let mut img = Image::new(width, height);
    let bg: [T; 4] = background.map(real);
    let mut apply_bg = |px: &mut [T; 4]| {
        let w = (T::one() - px[3]) * bg[3];
        for c in 0..3 {
            px[c] += w * bg[c];
        }
        px[3] += w;
    };

    let mut i = 0;
    while i < fragments.len() {
        let pixel = fragments[i].pixel;
        let mut color = [T::zero(); 3];
        let mut alpha = T::zero();
        while i < fragments.len() && fragments[i].pixel == pixel {
            let f = &fragments[i];
            let w = T::one() - alpha;
            for c in 0..3 {
                color[c] += w * f.color[c];
            }
            alpha += w * f.alpha;
            i += 1;
        }
        img.pixels[pixel as usize] = [color[0], color[1], color[2], alpha];
    }
    for px in img.pixels.iter_mut() {
        apply_bg(px);
    }
    img
}

/// Render a scalar grid volume directly (the ground-truth path).
pub fn render_grid<T: Real>(
    vol: &GridVolume<T>,
    range: &ValueRange<T>,
    camera: &Camera<T>,
    tf: &TransferFunction<T>,
    params: &RenderParams,
) -> Result<Image<T>> {
    if vol.channels() != 1 {
        return Err(Error::shape("volume rendering expects a scalar field"));
    }
    let bounds = vol.bounds();
    let mut fragments = Vec::new();
    let mut buf = [T::zero()];
    for py in 0..camera.height {
        for px in 0..camera.width {
            let dir = camera.ray_dir(px, py);
            let Some((t0, t1)) = bounds.ray_range(camera.position, dir) else {
                continue;
            };
            let (color, alpha) = ray_march(
                |p| {
                    sample_trilinear_clamped(vol, p, &mut buf);
                    Some(range.normalize(0, buf[0]))
                },
                camera.position,
                dir,
                t0,
                t1,
                tf,
                params,
            );
            if alpha > T::zero() {
                fragments.push(Fragment {
                    pixel: (py * camera.width + px) as u32,
                    rank: 0,
                    depth: t0,
                    color,
                    alpha,
                });
            }
        }
    }
    Ok(composite_fragments(
        camera.width,
        camera.height,
        fragments,
        params.background,
    ))
}

/// One rank's fragment stream: rays are clipped to the rank's brick and
/// marched with direct network queries (no decoding).
pub fn render_rank_fragments<T: Real>(
    dnr: &DnrModel<T>,
    rank: usize,
    camera: &Camera<T>,
    tf: &TransferFunction<T>,
    params: &RenderParams,
    macrocells: Option<&MacroCellGrid<T>>,
) -> Result<Vec<Fragment<T>>> {
    if dnr.channels() != 1 {
        return Err(Error::shape("volume rendering expects a scalar field"));
    }
    let part = &dnr.decomposition.partitions[rank];
    let bounds = part.world_bounds;
    let model = &dnr.models[rank];
    let mut scratch = crate::inr::Scratch::for_model(model);
    let mut fragments = Vec::new();
    for py in 0..camera.height {
        for px in 0..camera.width {
            let dir = camera.ray_dir(px, py);
            let Some((t0, t1)) = bounds.ray_range(camera.position, dir) else {
                continue;
            };
            if t1 <= t0 {
                continue;
            }
            let (color, alpha) = ray_march(
                |p| {
                    let u = part.normalize_coords_unchecked(p);
                    if let Some(mc) = macrocells {
                        let (lo, hi) = mc.cell_range(u);
                        if tf.max_alpha(lo, hi) == T::zero() {
                            return None;
                        }
                    }
                    model.forward_cached(u, &mut scratch);
                    Some(scratch.output()[0])
                },
                camera.position,
                dir,
                t0,
                t1,
                tf,
                params,
            );
            if alpha > T::zero() || color.iter().any(|&c| c > T::zero()) {
                fragments.push(Fragment {
                    pixel: (py * camera.width + px) as u32,
                    rank: rank as u32,
                    depth: t0,
                    color,
                    alpha,
                });
            }
        }
    }
    Ok(fragments)
}

/// Sort-last distributed rendering: every rank marches its own brick, the
/// per-pixel fragments are composited in entry-depth order, background
/// blended last. Pass one macro-cell grid per rank to enable empty-space
/// skipping.
pub fn render_dnr<T: Real>(
    dnr: &DnrModel<T>,
    camera: &Camera<T>,
    tf: &TransferFunction<T>,
    params: &RenderParams,
    macrocells: Option<&[MacroCellGrid<T>]>,
) -> Result<Image<T>> {
    if let Some(mc) = macrocells {
        if mc.len() != dnr.num_ranks() {
            return Err(Error::shape(format!(
                "{} macro-cell grids for {} ranks",
                mc.len(),
                dnr.num_ranks()
            )));
        }
    }
    let mut fragments = Vec::new();
    for rank in 0..dnr.num_ranks() {
        fragments.extend(render_rank_fragments(
            dnr,
            rank,
            camera,
            tf,
            params,
            macrocells.map(|m| &m[rank]),
        )?);
    }
    Ok(composite_fragments(
        camera.width,
        camera.height,
        fragments,
        params.background,
    ))
}

/// The normalized scalar the renderer feeds the transfer function at `p`,
/// evaluated on the grid path. Exposed for tests that compare the two
/// sampling backends.
pub fn grid_sample_normalized<T: Real>(vol: &GridVolume<T>, range: &ValueRange<T>, p: Vec3<T>) -> T {
    let mut buf = [T::zero()];
    sample_trilinear_clamped(vol, p, &mut buf);
    range.normalize(0, buf[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::vec3;
    use crate::volume::Mesh;

    fn test_tf() -> TransferFunction<f64> {
        TransferFunction::new(
            &[(0.0, [0.2, 0.4, 0.8, 0.0]), (1.0, [0.9, 0.5, 0.1, 0.6])],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn transparent_tf_gives_empty_result() {
        let tf = TransferFunction::new(
            &[(0.0, [1.0, 1.0, 1.0, 0.0]), (1.0, [1.0, 1.0, 1.0, 0.0])],
            1.0,
        )
        .unwrap();
        let params = RenderParams::new(0.05);
        let (c, a) = ray_march(
            |_| Some(0.7),
            vec3(0.0, 0.0, 0.0),
            vec3(0.0, 0.0, 1.0),
            0.0,
            1.0,
            &tf,
            &params,
        );
        assert_eq!(c, [0.0; 3]);
        assert_eq!(a, 0.0);
    }

    #[test]
    fn single_opaque_sample_saturates() {
        let tf = TransferFunction::new(
            &[(0.0, [0.3, 0.6, 0.9, 1.0]), (1.0, [0.3, 0.6, 0.9, 1.0])],
            1.0,
        )
        .unwrap();
        let params = RenderParams::new(1.0);
        // exactly one lattice sample (t = 0.5) in [0, 1)
        let (c, a) = ray_march(
            |_| Some(0.5),
            vec3(0.0, 0.0, 0.0),
            vec3(0.0, 0.0, 1.0),
            0.0,
            1.0,
            &tf,
            &params,
        );
        assert_eq!(a, 1.0);
        assert_eq!(c, [0.3, 0.6, 0.9]);
    }

    #[test]
    fn split_intervals_compose_to_the_unsplit_result() {
        // smooth sample function of t only; early exit disabled because
        // truncating a ray mid-flight is the one non-associative step
        let f = |p: Vec3<f64>| Some(0.5 + 0.4 * (3.0 * p.z).sin());
        let tf = test_tf();
        let mut params = RenderParams::new(0.013);
        params.early_exit_alpha = 1.0;
        let o = vec3(0.0, 0.0, 0.0);
        let d = vec3(0.0, 0.0, 1.0);
        let (c_full, a_full) = ray_march(f, o, d, 0.1, 2.3, &tf, &params);
        for split in [0.1, 0.4, 0.77, 1.9, 2.3] {
            let (c0, a0) = ray_march(f, o, d, 0.1, split, &tf, &params);
            let (c1, a1) = ray_march(f, o, d, split, 2.3, &tf, &params);
            // over-compose the two halves
            let mut c = c0;
            for i in 0..3 {
                c[i] += (1.0 - a0) * c1[i];
            }
            let a = a0 + (1.0 - a0) * a1;
            for i in 0..3 {
                assert!((c[i] - c_full[i]).abs() < 1e-12, "split {split}");
            }
            assert!((a - a_full).abs() < 1e-12);
        }
    }

    #[test]
    fn fragment_order_does_not_change_the_image() {
        let frags = vec![
            Fragment { pixel: 0, rank: 1, depth: 0.8, color: [0.1, 0.0, 0.0], alpha: 0.5 },
            Fragment { pixel: 0, rank: 0, depth: 0.2, color: [0.0, 0.2, 0.0], alpha: 0.4 },
            Fragment { pixel: 1, rank: 0, depth: 0.5, color: [0.0, 0.0, 0.3], alpha: 0.9 },
        ];
        let a = composite_fragments(2, 1, frags.clone(), [0.0, 0.0, 0.0, 1.0]);
        let mut shuffled = frags;
        shuffled.reverse();
        let b = composite_fragments(2, 1, shuffled, [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(a, b);
    }

    #[test]
    fn halving_step_size_converges() {
        let mesh: Mesh<f64> = Mesh::Uniform {
            origin: vec3(0.0, 0.0, 0.0),
            spacing: vec3(1.0 / 15.0, 1.0 / 15.0, 1.0 / 15.0),
        };
        let vol = GridVolume::from_fn([16, 16, 16], mesh, 1, |p, out| {
            let dx = p.x - 0.5;
            let dy = p.y - 0.5;
            let dz = p.z - 0.5;
            out[0] = (-(dx * dx + dy * dy + dz * dz) / 0.08).exp();
        })
        .unwrap();
        let range = crate::volume::ValueRange::new(vec![0.0], vec![1.0]).unwrap();
        let cam = Camera::new(
            vec3(0.5, 0.5, -1.6),
            vec3(0.5, 0.5, 0.5),
            vec3(0.0, 1.0, 0.0),
            35.0,
            24,
            24,
        )
        .unwrap();
        let tf = test_tf();
        let mut p1 = RenderParams::new(0.01);
        p1.base_step = Some(0.01);
        let mut p2 = RenderParams::new(0.005);
        p2.base_step = Some(0.01);
        let img1 = render_grid(&vol, &range, &cam, &tf, &p1).unwrap();
        let img2 = render_grid(&vol, &range, &cam, &tf, &p2).unwrap();
        let diff = img1.max_abs_diff(&img2).unwrap();
        assert!(diff < 1e-2, "step halving changed pixels by {diff}");
    }
}
