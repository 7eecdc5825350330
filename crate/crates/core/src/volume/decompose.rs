//! Domain decomposition into per-rank partitions with ghost regions.
//!
//! Core boxes are inclusive voxel-index ranges that tile the global grid.
//! In physical space ownership is split at the midplane between the last
//! node of one partition and the first node of the next, so the partitions'
//! `world_bounds` tile the domain exactly and every interior face is one
//! shared plane. Points exactly on a shared plane belong to the lower rank.

use super::Mesh;
use crate::error::{Error, Result};
use crate::math::{vec3, Aabb, Vec3};
use crate::Real;

/// Inclusive voxel-index box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl IndexBox {
    pub fn dims(&self) -> [usize; 3] {
        [
            self.hi[0] - self.lo[0] + 1,
            self.hi[1] - self.lo[1] + 1,
            self.hi[2] - self.lo[2] + 1,
        ]
    }

    pub fn contains(&self, idx: [usize; 3]) -> bool {
        (0..3).all(|a| idx[a] >= self.lo[a] && idx[a] <= self.hi[a])
    }

    pub fn node_count(&self) -> usize {
        let d = self.dims();
        d[0] * d[1] * d[2]
    }
}

/// One rank's share of the global grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition<T> {
    pub rank: usize,
    /// Grid coordinates of this partition in the rank grid.
    pub cell: [usize; 3],
    pub core_box: IndexBox,
    pub ghost_width: usize,
    /// Core box dilated by the ghost width, clamped to the global domain.
    pub ghost_box: IndexBox,
    /// Physical region owned by this rank; world bounds of all ranks tile
    /// the global domain.
    pub world_bounds: Aabb<T>,
}

impl<T: Real> Partition<T> {
    /// Affine map of the partition's physical bounds to the unit cube.
    /// Errors when `p` lies outside the owned extent.
    pub fn normalize_coords(&self, p: Vec3<T>) -> Result<Vec3<T>> {
        if !self.world_bounds.contains(p) {
            return Err(Error::domain(format!(
                "point ({}, {}, {}) outside partition {} bounds",
                p.x, p.y, p.z, self.rank
            )));
        }
        Ok(self.normalize_coords_unchecked(p))
    }

    /// Same affine map without the bounds check. Ghost-margin training
    /// samples use this and may land slightly outside `[0,1]^3`; the
    /// encoder clamps them.
    pub fn normalize_coords_unchecked(&self, p: Vec3<T>) -> Vec3<T> {
        let lo = self.world_bounds.lo;
        let ext = self.world_bounds.extent();
        vec3(
            (p.x - lo.x) / ext.x,
            (p.y - lo.y) / ext.y,
            (p.z - lo.z) / ext.z,
        )
    }

    /// Inverse of [`Partition::normalize_coords`].
    pub fn denormalize_coords(&self, u: Vec3<T>) -> Vec3<T> {
        let lo = self.world_bounds.lo;
        let ext = self.world_bounds.extent();
        vec3(lo.x + u.x * ext.x, lo.y + u.y * ext.y, lo.z + u.z * ext.z)
    }
}

/// A full decomposition: the rank grid, all partitions in row-major rank
/// order (x fastest), and the per-axis ownership planes.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<T> {
    pub dims: [usize; 3],
    pub rank_grid: [usize; 3],
    pub ghost_width: usize,
    pub mesh: Mesh<T>,
    pub partitions: Vec<Partition<T>>,
    /// `planes[a]` has `rank_grid[a] + 1` entries; cell `i` of axis `a`
    /// owns `[planes[a][i], planes[a][i+1]]`.
    pub planes: [Vec<T>; 3],
}

impl<T: Real> Decomposition<T> {
    pub fn num_ranks(&self) -> usize {
        self.rank_grid[0] * self.rank_grid[1] * self.rank_grid[2]
    }

    pub fn rank_of_cell(&self, cell: [usize; 3]) -> usize {
        (cell[2] * self.rank_grid[1] + cell[1]) * self.rank_grid[0] + cell[0]
    }

    /// Physical bounds of the whole domain (node extent).
    pub fn domain_bounds(&self) -> Aabb<T> {
        self.mesh.bounds(self.dims)
    }

    /// Rank owning physical point `p`; ties on shared planes go to the
    /// lower cell index, hence the lower rank.
    pub fn owner_of(&self, p: Vec3<T>) -> Result<usize> {
        if !self.domain_bounds().contains(p) {
            return Err(Error::domain(format!(
                "point ({}, {}, {}) outside domain",
                p.x, p.y, p.z
            )));
        }
        let mut cell = [0usize; 3];
        for a in 0..3 {
            let planes = &self.planes[a];
            // first plane >= p, minus one; a point on an interior plane
            // lands in the lower cell
            let idx = planes.partition_point(|&v| v < p[a]);
            cell[a] = idx.saturating_sub(1).min(self.rank_grid[a] - 1);
        }
        Ok(self.rank_of_cell(cell))
    }
}

/// Split `dims` voxels over a `rank_grid` of ranks with `ghost_width` ghost
/// layers. Each axis must divide evenly (irregular bricks are rejected).
pub fn decompose_domain<T: Real>(
    dims: [usize; 3],
    rank_grid: [usize; 3],
    ghost_width: usize,
    mesh: &Mesh<T>,
) -> Result<Decomposition<T>> {
    for a in 0..3 {
        if rank_grid[a] == 0 {
            return Err(Error::config("rank grid entries must be positive"));
        }
        if dims[a] % rank_grid[a] != 0 {
            return Err(Error::config(format!(
                "axis {a}: {} voxels not divisible by {} ranks",
                dims[a], rank_grid[a]
            )));
        }
        if dims[a] / rank_grid[a] < 1 {
            return Err(Error::config(format!("axis {a}: empty partitions")));
        }
    }

    let per = [
        dims[0] / rank_grid[0],
        dims[1] / rank_grid[1],
        dims[2] / rank_grid[2],
    ];

    let mut planes: [Vec<T>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for a in 0..3 {
        let mut v = Vec::with_capacity(rank_grid[a] + 1);
        v.push(mesh.node_pos(a, 0));
        for r in 1..rank_grid[a] {
            // midplane between the last node of cell r-1 and first of cell r
            v.push(mesh.midplane(a, r * per[a] - 1));
        }
        v.push(mesh.node_pos(a, dims[a] - 1));
        planes[a] = v;
    }

    let mut partitions = Vec::with_capacity(rank_grid.iter().product());
    for cz in 0..rank_grid[2] {
        for cy in 0..rank_grid[1] {
            for cx in 0..rank_grid[0] {
                let cell = [cx, cy, cz];
                let lo = [cx * per[0], cy * per[1], cz * per[2]];
                let hi = [
                    lo[0] + per[0] - 1,
                    lo[1] + per[1] - 1,
                    lo[2] + per[2] - 1,
                ];
                let core_box = IndexBox { lo, hi };
                let ghost_box = IndexBox {
                    lo: [
                        lo[0].saturating_sub(ghost_width),
                        lo[1].saturating_sub(ghost_width),
                        lo[2].saturating_sub(ghost_width),
                    ],
                    hi: [
                        (hi[0] + ghost_width).min(dims[0] - 1),
                        (hi[1] + ghost_width).min(dims[1] - 1),
                        (hi[2] + ghost_width).min(dims[2] - 1),
                    ],
                };
                let world_bounds = Aabb::new(
                    vec3(planes[0][cx], planes[1][cy], planes[2][cz]),
                    vec3(planes[0][cx + 1], planes[1][cy + 1], planes[2][cz + 1]),
                );
                partitions.push(Partition {
                    rank: partitions.len(),
                    cell,
                    core_box,
                    ghost_width,
                    ghost_box,
                    world_bounds,
                });
            }
        }
    }

    Ok(Decomposition {
        dims,
        rank_grid,
        ghost_width,
        mesh: mesh.clone(),
        partitions,
        planes,
    })
}

/// An interior face shared by two adjacent partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Face<T> {
    /// Axis the face is perpendicular to.
    pub axis: usize,
    pub lo_rank: usize,
    pub hi_rank: usize,
    /// Plane coordinate along `axis`.
    pub plane: T,
    /// Face rectangle in the two tangent axes (indexed 0..3, the `axis`
    /// entries equal `plane`).
    pub rect: Aabb<T>,
}

/// All interior faces of the decomposition, in deterministic order.
pub fn interior_faces<T: Real>(decomp: &Decomposition<T>) -> Vec<Face<T>> {
    let mut faces = Vec::new();
    let rg = decomp.rank_grid;
    for axis in 0..3 {
        for s in 1..rg[axis] {
            let plane = decomp.planes[axis][s];
            let t1 = (axis + 1) % 3;
            let t2 = (axis + 2) % 3;
            for c2 in 0..rg[t2] {
                for c1 in 0..rg[t1] {
                    let mut lo_cell = [0usize; 3];
                    lo_cell[axis] = s - 1;
                    lo_cell[t1] = c1;
                    lo_cell[t2] = c2;
                    let mut hi_cell = lo_cell;
                    hi_cell[axis] = s;
                    let lo_rank = decomp.rank_of_cell(lo_cell);
                    let hi_rank = decomp.rank_of_cell(hi_cell);
                    let wb = decomp.partitions[lo_rank].world_bounds;
                    let mut rect_lo = wb.lo;
                    let mut rect_hi = wb.hi;
                    rect_lo[axis] = plane;
                    rect_hi[axis] = plane;
                    faces.push(Face {
                        axis,
                        lo_rank,
                        hi_rank,
                        plane,
                        rect: Aabb::new(rect_lo, rect_hi),
                    });
                }
            }
        }
    }
    faces
}

/// Faces of the decomposition touching a given rank.
pub fn faces_of_rank<T: Real>(decomp: &Decomposition<T>, rank: usize) -> Vec<Face<T>> {
    interior_faces(decomp)
        .into_iter()
        .filter(|f| f.lo_rank == rank || f.hi_rank == rank)
        .collect()
}

/// Node lattice of a face: global grid node positions in the tangent axes
/// within the face rectangle, at the face plane. Returns the lattice shape
/// `(n1, n2)` for the tangent axes `(axis+1)%3, (axis+2)%3` and the points
/// in n1-fastest order.
pub fn face_lattice<T: Real>(
    decomp: &Decomposition<T>,
    face: &Face<T>,
) -> (usize, usize, Vec<Vec3<T>>) {
    let t1 = (face.axis + 1) % 3;
    let t2 = (face.axis + 2) % 3;
    let nodes_in = |axis: usize| -> Vec<T> {
        (0..decomp.dims[axis])
            .map(|i| decomp.mesh.node_pos(axis, i))
            .filter(|&x| x >= face.rect.lo[axis] && x <= face.rect.hi[axis])
            .collect()
    };
    let n1 = nodes_in(t1);
    let n2 = nodes_in(t2);
    let mut pts = Vec::with_capacity(n1.len() * n2.len());
    for &b in &n2 {
        for &a in &n1 {
            let mut p = Vec3::splat(T::zero());
            p[face.axis] = face.plane;
            p[t1] = a;
            p[t2] = b;
            pts.push(p);
        }
    }
    (n1.len(), n2.len(), pts)
}

/// Coordinates on all faces a partition shares with its neighbors; empty
/// for a single-partition decomposition. These are the face lattice points
/// used by the boundary loss metric.
pub fn extract_boundary_coords<T: Real>(
    decomp: &Decomposition<T>,
    rank: usize,
) -> Vec<Vec3<T>> {
    let mut out = Vec::new();
    for face in faces_of_rank(decomp, rank) {
        let (_, _, pts) = face_lattice(decomp, &face);
        out.extend(pts);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_mesh() -> Mesh<f64> {
        Mesh::Uniform {
            origin: vec3(0.0, 0.0, 0.0),
            spacing: vec3(1.0, 1.0, 1.0),
        }
    }

    #[test]
    fn eight_way_split_of_64_cube() {
        let d = decompose_domain([64, 64, 64], [2, 2, 2], 2, &unit_mesh()).unwrap();
        assert_eq!(d.partitions.len(), 8);
        for p in &d.partitions {
            assert_eq!(p.core_box.dims(), [32, 32, 32]);
        }
        // interior corner of rank 0 grows by the ghost width; domain faces clamp
        let p0 = &d.partitions[0];
        assert_eq!(p0.ghost_box.lo, [0, 0, 0]);
        assert_eq!(p0.ghost_box.hi, [33, 33, 33]);
        assert_eq!(p0.ghost_box.dims(), [34, 34, 34]);
        let p7 = &d.partitions[7];
        assert_eq!(p7.ghost_box.lo, [30, 30, 30]);
        assert_eq!(p7.ghost_box.hi, [63, 63, 63]);
    }

    #[test]
    fn single_rank_ghost_box_clamps_to_core() {
        let d = decompose_domain([64, 64, 64], [1, 1, 1], 2, &unit_mesh()).unwrap();
        assert_eq!(d.partitions.len(), 1);
        let p = &d.partitions[0];
        assert_eq!(p.ghost_box, p.core_box);
        assert_eq!(p.world_bounds, d.domain_bounds());
    }

    #[test]
    fn non_divisible_axis_is_rejected() {
        let err = decompose_domain([60, 64, 64], [8, 1, 1], 0, &unit_mesh());
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn core_boxes_tile_every_voxel_once() {
        for rg in [[2, 2, 2], [4, 1, 2], [1, 1, 1]] {
            let d = decompose_domain([8, 8, 8], rg, 1, &unit_mesh()).unwrap();
            for z in 0..8 {
                for y in 0..8 {
                    for x in 0..8 {
                        let owners = d
                            .partitions
                            .iter()
                            .filter(|p| p.core_box.contains([x, y, z]))
                            .count();
                        assert_eq!(owners, 1, "voxel ({x},{y},{z}) in grid {rg:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn world_bounds_tile_with_shared_planes() {
        let d = decompose_domain([64, 64, 64], [2, 1, 1], 2, &unit_mesh()).unwrap();
        let p0 = &d.partitions[0];
        let p1 = &d.partitions[1];
        // split midway between nodes 31 and 32
        assert_eq!(p0.world_bounds.hi.x, 31.5);
        assert_eq!(p1.world_bounds.lo.x, 31.5);
        assert_eq!(p0.world_bounds.lo.x, 0.0);
        assert_eq!(p1.world_bounds.hi.x, 63.0);
    }

    #[test]
    fn owner_routing_uses_lower_rank_on_shared_plane() {
        let d = decompose_domain([64, 64, 64], [2, 1, 1], 2, &unit_mesh()).unwrap();
        assert_eq!(d.owner_of(vec3(10.0, 5.0, 5.0)).unwrap(), 0);
        assert_eq!(d.owner_of(vec3(40.0, 5.0, 5.0)).unwrap(), 1);
        assert_eq!(d.owner_of(vec3(31.5, 5.0, 5.0)).unwrap(), 0);
        assert!(d.owner_of(vec3(-1.0, 5.0, 5.0)).is_err());
    }

    #[test]
    fn normalize_coords_affine_map() {
        let mesh = Mesh::Uniform {
            origin: vec3(10.0, 10.0, 10.0),
            spacing: vec3(10.0, 10.0, 10.0),
        };
        let d = decompose_domain([2, 2, 2], [1, 1, 1], 0, &mesh).unwrap();
        let p = &d.partitions[0];
        // bounds [10,20]^3
        assert_eq!(
            p.normalize_coords(vec3(15.0, 15.0, 15.0)).unwrap(),
            vec3(0.5, 0.5, 0.5)
        );
        assert_eq!(
            p.normalize_coords(vec3(10.0, 10.0, 10.0)).unwrap(),
            vec3(0.0, 0.0, 0.0)
        );
        assert!(p.normalize_coords(vec3(25.0, 15.0, 15.0)).is_err());
    }

    #[test]
    fn boundary_coords_empty_for_single_partition() {
        let d = decompose_domain([16, 16, 16], [1, 1, 1], 1, &unit_mesh()).unwrap();
        assert!(extract_boundary_coords(&d, 0).is_empty());
    }

    #[test]
    fn two_way_split_has_one_face_at_constant_x() {
        let d = decompose_domain([64, 64, 64], [2, 1, 1], 1, &unit_mesh()).unwrap();
        let faces = interior_faces(&d);
        assert_eq!(faces.len(), 1);
        let coords = extract_boundary_coords(&d, 0);
        assert!(!coords.is_empty());
        assert!(coords.iter().all(|c| c.x == 31.5));
        assert_eq!(coords, extract_boundary_coords(&d, 1));
    }

    #[test]
    fn two_by_two_split_gives_each_rank_two_faces() {
        let d = decompose_domain([64, 64, 64], [2, 2, 1], 1, &unit_mesh()).unwrap();
        // brute-force neighbor enumeration: two cells are neighbors when
        // their grid coordinates differ by one along exactly one axis
        for p in &d.partitions {
            let mut expected = 0;
            for q in &d.partitions {
                let diff: usize = (0..3)
                    .map(|a| (p.cell[a] as isize - q.cell[a] as isize).unsigned_abs())
                    .sum();
                if diff == 1 {
                    expected += 1;
                }
            }
            assert_eq!(expected, 2);
            assert_eq!(faces_of_rank(&d, p.rank).len(), 2);
        }
    }

    #[test]
    fn face_lattice_matches_grid_resolution() {
        let d = decompose_domain([8, 8, 8], [2, 1, 1], 1, &unit_mesh()).unwrap();
        let faces = interior_faces(&d);
        let (n1, n2, pts) = face_lattice(&d, &faces[0]);
        assert_eq!((n1, n2), (8, 8));
        assert_eq!(pts.len(), 64);
    }
}
