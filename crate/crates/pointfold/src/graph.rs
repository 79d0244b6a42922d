//! K-nearest-neighbor graphs over point clouds, per-point covariance
//! features, and the neighborhood max-pooling used by the encoder's graph
//! layers.

use alloc::vec;
use alloc::vec::Vec;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Exact k-NN graph: for each point, the indices of its k nearest neighbors
/// (self excluded), sorted by ascending distance with ties broken by
/// ascending index.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    k: usize,
    n: usize,
    neighbors: Vec<usize>, // n * k, row-major
}

impl KnnGraph {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i * self.k..(i + 1) * self.k]
    }
}

/// Builds the exact Euclidean k-NN graph by brute-force scan. Requires
/// `k < n`; deterministic under distance ties (lower index wins).
pub fn build_knn(cloud: &PointCloud, k: usize) -> Result<KnnGraph> {
    let n = cloud.len();
    if k >= n {
        return Err(Error::OutOfRange {
            what: "neighbor count k",
            got: k,
            limit: n,
        });
    }
    let pts = cloud.points();
    let mut neighbors = vec![0usize; n * k];
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        scratch.clear();
        let pi = pts.row(i);
        for j in 0..n {
            if j == i {
                continue;
            }
            let pj = pts.row(j);
            let dx = pi[0] - pj[0];
            let dy = pi[1] - pj[1];
            let dz = pi[2] - pj[2];
            scratch.push((dx * dx + dy * dy + dz * dz, j));
        }
        scratch.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        for (slot, &(_, j)) in neighbors[i * k..(i + 1) * k].iter_mut().zip(&scratch) {
            *slot = j;
        }
    }
    Ok(KnnGraph { k, n, neighbors })
}

/// Per-point 3x3 covariance of `{v} ∪ N(v)` positions, vectorized row-major
/// into an n x 9 matrix. Uses the population divisor k+1.
pub fn local_covariance(cloud: &PointCloud, graph: &KnnGraph) -> Result<Matrix> {
    let n = cloud.len();
    if graph.len() != n {
        return Err(Error::ShapeMismatch {
            op: "local_covariance",
            lhs_rows: n,
            lhs_cols: 3,
            rhs_rows: graph.len(),
            rhs_cols: graph.k(),
        });
    }
    let pts = cloud.points();
    let count = (graph.k() + 1) as f64;
    let mut out = Matrix::zeros(n, 9);
    for i in 0..n {
        let mut mean = [0.0f64; 3];
        let members = core::iter::once(i).chain(graph.neighbors(i).iter().copied());
        for j in members.clone() {
            let p = pts.row(j);
            mean[0] += p[0];
            mean[1] += p[1];
            mean[2] += p[2];
        }
        for m in &mut mean {
            *m /= count;
        }
        let mut cov = [0.0f64; 9];
        for j in members {
            let p = pts.row(j);
            let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
            for a in 0..3 {
                for b in 0..3 {
                    cov[a * 3 + b] += d[a] * d[b];
                }
            }
        }
        let row = out.row_mut(i);
        for (slot, c) in row.iter_mut().zip(&cov) {
            *slot = c / count;
        }
    }
    Ok(out)
}

/// Concatenates point positions with their covariance features into the
/// n x 12 encoder input.
pub fn concat_input_features(cloud: &PointCloud, cov: &Matrix) -> Result<Matrix> {
    cloud.points().rowwise_concat(cov)
}

/// Neighborhood max: `out[i][j] = max over {i} ∪ N(i) of x[·][j]`.
///
/// Returns the pooled matrix and the flat argmax table (`n * f` point
/// indices) used to route gradients. Iteration order is self first, then
/// neighbors in stored order; strict `>` keeps the first maximiser on ties.
pub fn neighborhood_max(
    x: &Matrix,
    graph: &KnnGraph,
    include_self: bool,
) -> Result<(Matrix, Vec<usize>)> {
    let n = x.rows();
    let f = x.cols();
    if graph.len() != n {
        return Err(Error::ShapeMismatch {
            op: "neighborhood_max",
            lhs_rows: n,
            lhs_cols: f,
            rhs_rows: graph.len(),
            rhs_cols: graph.k(),
        });
    }
    if !include_self && graph.k() == 0 {
        return Err(Error::Empty {
            op: "neighborhood_max",
        });
    }
    let mut out = Matrix::zeros(n, f);
    let mut argmax = vec![0usize; n * f];
    for i in 0..n {
        let neigh = graph.neighbors(i);
        let first = if include_self { i } else { neigh[0] };
        let rest = if include_self {
            neigh
        } else {
            &neigh[1..]
        };
        out.row_mut(i).copy_from_slice(x.row(first));
        for a in &mut argmax[i * f..(i + 1) * f] {
            *a = first;
        }
        for &j in rest {
            let xr = x.row(j);
            let or = out.row_mut(i);
            for c in 0..f {
                if xr[c] > or[c] {
                    or[c] = xr[c];
                    argmax[i * f + c] = j;
                }
            }
        }
    }
    Ok((out, argmax))
}

/// One full graph layer: neighborhood max-pool, ReLU, then the feature map
/// `k_map`. This is the inference-only path; training uses the same pieces
/// through the tape.
pub fn graph_max_pool(
    x: &Matrix,
    graph: &KnnGraph,
    k_map: &Matrix,
    include_self: bool,
) -> Result<Matrix> {
    let (pooled, _) = neighborhood_max(x, graph, include_self)?;
    pooled.relu().matmul(k_map)
}
