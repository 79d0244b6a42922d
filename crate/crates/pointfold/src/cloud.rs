//! Point clouds, triangle meshes, and the augmentations applied during
//! training: unit-sphere normalization, the 24 axis-aligned rotations, and
//! bounded random point shifts.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::rng::Stream;

/// An ordered list of 3D points, stored as an n x 3 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Matrix,
    /// Optional category id carried through dataset plumbing.
    pub label: Option<u32>,
}

impl PointCloud {
    /// Wraps an n x 3 matrix; n must be at least 1.
    pub fn new(points: Matrix) -> Result<Self> {
        if points.rows() == 0 {
            return Err(Error::Empty { op: "PointCloud::new" });
        }
        if points.cols() != 3 {
            return Err(Error::ShapeMismatch {
                op: "PointCloud::new",
                lhs_rows: points.rows(),
                lhs_cols: points.cols(),
                rhs_rows: points.rows(),
                rhs_cols: 3,
            });
        }
        Ok(PointCloud { points, label: None })
    }

    pub fn from_points(points: &[[f64; 3]]) -> Result<Self> {
        let mut data = Vec::with_capacity(points.len() * 3);
        for p in points {
            data.extend_from_slice(p);
        }
        Self::new(Matrix::from_vec(points.len(), 3, data)?)
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    #[inline]
    pub fn point(&self, i: usize) -> [f64; 3] {
        let r = self.points.row(i);
        [r[0], r[1], r[2]]
    }

    pub fn with_label(mut self, label: u32) -> Self {
        self.label = Some(label);
        self
    }

    /// Centers the cloud at its centroid and scales so the farthest point
    /// sits on the unit sphere. A cloud of coincident points collapses to
    /// the origin.
    pub fn normalize_unit_sphere(&self) -> PointCloud {
        let n = self.len();
        let mut centroid = [0.0f64; 3];
        for i in 0..n {
            let p = self.points.row(i);
            centroid[0] += p[0];
            centroid[1] += p[1];
            centroid[2] += p[2];
        }
        for c in &mut centroid {
            *c /= n as f64;
        }
        let mut max_norm2 = 0.0f64;
        for i in 0..n {
            let p = self.points.row(i);
            let d = [p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]];
            let n2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            if n2 > max_norm2 {
                max_norm2 = n2;
            }
        }
        let scale = if max_norm2 > 0.0 {
            1.0 / math::sqrt(max_norm2)
        } else {
            1.0
        };
        let mut out = Matrix::zeros(n, 3);
        for i in 0..n {
            let p = self.points.row(i);
            let o = out.row_mut(i);
            o[0] = (p[0] - centroid[0]) * scale;
            o[1] = (p[1] - centroid[1]) * scale;
            o[2] = (p[2] - centroid[2]) * scale;
        }
        PointCloud {
            points: out,
            label: self.label,
        }
    }

    /// Applies the `index`-th of the 24 axis-aligned rotations (the rotation
    /// group of the cube). Exact: coordinates are only permuted and negated.
    pub fn axis_aligned_rotation(&self, index: usize) -> Result<PointCloud> {
        let (perm, sign) = rotation24(index)?;
        let n = self.len();
        let mut out = Matrix::zeros(n, 3);
        for i in 0..n {
            let p = self.points.row(i);
            let o = out.row_mut(i);
            for axis in 0..3 {
                let v = p[perm[axis]];
                o[axis] = if sign[axis] < 0 { -v } else { v };
            }
        }
        Ok(PointCloud {
            points: out,
            label: self.label,
        })
    }

    /// Replaces `ceil(fraction * n)` randomly chosen points with uniform
    /// samples inside the cloud's axis-aligned bounding box.
    pub fn shift_noise(&self, fraction: f64, rng: &mut Stream) -> Result<PointCloud> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidConfig(alloc::format!(
                "noise fraction {fraction} outside [0, 1]"
            )));
        }
        let n = self.len();
        let moved = math::ceil(fraction * n as f64) as usize;
        let mut out = self.clone();
        if moved == 0 {
            return Ok(out);
        }
        let (lo, hi) = self.bounding_box();
        // partial Fisher-Yates picks `moved` distinct indices
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..moved {
            let j = rng.gen_range(i..n);
            idx.swap(i, j);
        }
        for &i in &idx[..moved] {
            let row = out.points.row_mut(i);
            for axis in 0..3 {
                row[axis] = rng.gen_range(lo[axis]..=hi[axis]);
            }
        }
        Ok(out)
    }

    /// Per-axis (min, max) over all points.
    pub fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = self.point(0);
        let mut hi = lo;
        for i in 1..self.len() {
            let p = self.points.row(i);
            for axis in 0..3 {
                if p[axis] < lo[axis] {
                    lo[axis] = p[axis];
                }
                if p[axis] > hi[axis] {
                    hi[axis] = p[axis];
                }
            }
        }
        (lo, hi)
    }
}

/// The rotation group of the cube: for each index in `0..24`, the axis
/// permutation and signs of a determinant +1 signed permutation matrix.
/// Index 0 is the identity; enumeration order is fixed (permutations in
/// lexicographic order, sign patterns in binary order, keeping det +1).
pub fn rotation24(index: usize) -> Result<([usize; 3], [i8; 3])> {
    if index >= 24 {
        return Err(Error::OutOfRange {
            what: "rotation index",
            got: index,
            limit: 24,
        });
    }
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut count = 0;
    for perm in PERMS {
        let perm_sign = permutation_parity(perm);
        for bits in 0..8u8 {
            let sign = [
                if bits & 4 == 0 { 1i8 } else { -1 },
                if bits & 2 == 0 { 1 } else { -1 },
                if bits & 1 == 0 { 1 } else { -1 },
            ];
            let det = perm_sign * (sign[0] * sign[1] * sign[2]) as i32;
            if det == 1 {
                if count == index {
                    return Ok((perm, sign));
                }
                count += 1;
            }
        }
    }
    unreachable!("24 rotations enumerated");
}

/// The full 3x3 matrix of rotation `index`, entries in {-1, 0, 1}.
pub fn rotation24_matrix(index: usize) -> Result<[[i8; 3]; 3]> {
    let (perm, sign) = rotation24(index)?;
    let mut m = [[0i8; 3]; 3];
    for axis in 0..3 {
        m[axis][perm[axis]] = sign[axis];
    }
    Ok(m)
}

fn permutation_parity(p: [usize; 3]) -> i32 {
    let mut inversions = 0;
    for i in 0..3 {
        for j in i + 1..3 {
            if p[i] > p[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

/// A triangle mesh: vertex positions plus vertex-index triples.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Matrix,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Matrix, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.cols() != 3 {
            return Err(Error::ShapeMismatch {
                op: "TriMesh::new",
                lhs_rows: vertices.rows(),
                lhs_cols: vertices.cols(),
                rhs_rows: vertices.rows(),
                rhs_cols: 3,
            });
        }
        let v = vertices.rows();
        for t in &triangles {
            for &i in t {
                if i >= v {
                    return Err(Error::OutOfRange {
                        what: "triangle vertex index",
                        got: i,
                        limit: v,
                    });
                }
            }
        }
        Ok(TriMesh {
            vertices,
            triangles,
        })
    }

    fn triangle_area(&self, t: [usize; 3]) -> f64 {
        let a = self.vertices.row(t[0]);
        let b = self.vertices.row(t[1]);
        let c = self.vertices.row(t[2]);
        let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let ac = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let cross = [
            ab[1] * ac[2] - ab[2] * ac[1],
            ab[2] * ac[0] - ab[0] * ac[2],
            ab[0] * ac[1] - ab[1] * ac[0],
        ];
        0.5 * math::sqrt(cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2])
    }
}

/// Samples `n` points on the mesh surface: triangle chosen with probability
/// proportional to area, position uniform via barycentric coordinates.
pub fn sample_mesh(mesh: &TriMesh, n: usize, rng: &mut Stream) -> Result<PointCloud> {
    let areas: Vec<f64> = mesh
        .triangles
        .iter()
        .map(|&t| mesh.triangle_area(t))
        .collect();
    let mut cumulative = Vec::with_capacity(areas.len());
    let mut total = 0.0;
    for &a in &areas {
        total += a;
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::DegenerateMesh);
    }
    let mut out = Matrix::zeros(n, 3);
    for i in 0..n {
        let r = rng.gen_range(0.0..total);
        let ti = cumulative.partition_point(|&c| c <= r).min(areas.len() - 1);
        let t = mesh.triangles[ti];
        let a = mesh.vertices.row(t[0]);
        let b = mesh.vertices.row(t[1]);
        let c = mesh.vertices.row(t[2]);
        let mut u: f64 = rng.gen();
        let mut v: f64 = rng.gen();
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        let row = out.row_mut(i);
        for axis in 0..3 {
            row[axis] = a[axis] + u * (b[axis] - a[axis]) + v * (c[axis] - a[axis]);
        }
    }
    PointCloud::new(out)
}
