//! The extended Chamfer distance: the larger of the two directed mean
//! nearest-neighbor distances between two point sets, with a subgradient
//! for the reconstructed side.

use alloc::vec::Vec;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

/// Which directed term attained the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActiveSide {
    /// mean over S of the distance to its nearest reconstruction
    Forward,
    /// mean over the reconstruction of the distance to its nearest original
    Backward,
    /// both directed means equal; subgradients are averaged
    Tied,
}

/// Result of a Chamfer evaluation, carrying enough to replay the gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ChamferResult {
    /// max(forward mean, backward mean), unsquared Euclidean norms.
    pub value: f64,
    pub side: ActiveSide,
    pub forward_mean: f64,
    pub backward_mean: f64,
    /// For each original point, the index of its nearest reconstructed point.
    pub forward_matches: Vec<usize>,
    /// For each reconstructed point, the index of its nearest original point.
    pub backward_matches: Vec<usize>,
}

/// Extended Chamfer distance between `s` (original) and `s_hat`
/// (reconstruction). Exact O(n*m) pairwise search; nearest-neighbor ties
/// resolve to the first index.
pub fn chamfer(s: &PointCloud, s_hat: &PointCloud) -> Result<ChamferResult> {
    chamfer_points(s.points(), s_hat.points())
}

/// Matrix-level entry point (both arguments are n x 3 / m x 3).
pub fn chamfer_points(s: &Matrix, s_hat: &Matrix) -> Result<ChamferResult> {
    if s.rows() == 0 || s_hat.rows() == 0 {
        return Err(Error::Empty { op: "chamfer" });
    }
    let (fwd_sum, forward_matches) = directed(s, s_hat);
    let (bwd_sum, backward_matches) = directed(s_hat, s);
    let forward_mean = fwd_sum / s.rows() as f64;
    let backward_mean = bwd_sum / s_hat.rows() as f64;
    let (value, side) = if forward_mean > backward_mean {
        (forward_mean, ActiveSide::Forward)
    } else if backward_mean > forward_mean {
        (backward_mean, ActiveSide::Backward)
    } else {
        (forward_mean, ActiveSide::Tied)
    };
    Ok(ChamferResult {
        value,
        side,
        forward_mean,
        backward_mean,
        forward_matches,
        backward_matches,
    })
}

/// Sum over rows of `from` of the distance to the nearest row of `to`,
/// plus the match indices.
fn directed(from: &Matrix, to: &Matrix) -> (f64, Vec<usize>) {
    let mut total = 0.0;
    let mut matches = Vec::with_capacity(from.rows());
    for i in 0..from.rows() {
        let p = from.row(i);
        let mut best = f64::INFINITY;
        let mut best_j = 0;
        for j in 0..to.rows() {
            let q = to.row(j);
            let dx = p[0] - q[0];
            let dy = p[1] - q[1];
            let dz = p[2] - q[2];
            let d2 = dx * dx + dy * dy + dz * dz;
            if d2 < best {
                best = d2;
                best_j = j;
            }
        }
        total += math::sqrt(best);
        matches.push(best_j);
    }
    (total, matches)
}

/// Subgradient of the Chamfer value with respect to the reconstructed
/// points, scaled by `seed` (the incoming gradient of the loss node).
///
/// Only the active directed term contributes; an exact tie averages both.
/// A zero-distance match contributes nothing (the norm's kink at 0).
pub fn chamfer_backward(
    result: &ChamferResult,
    s: &Matrix,
    s_hat: &Matrix,
    seed: f64,
) -> Matrix {
    let mut grad = Matrix::zeros(s_hat.rows(), 3);
    let (wf, wb) = match result.side {
        ActiveSide::Forward => (1.0, 0.0),
        ActiveSide::Backward => (0.0, 1.0),
        ActiveSide::Tied => (0.5, 0.5),
    };
    if wf != 0.0 {
        // forward term: each original point pulls its matched reconstruction
        let scale = seed * wf / s.rows() as f64;
        for (i, &j) in result.forward_matches.iter().enumerate() {
            accumulate(&mut grad, j, s.row(i), s_hat.row(j), scale);
        }
    }
    if wb != 0.0 {
        let scale = seed * wb / s_hat.rows() as f64;
        for (j, &i) in result.backward_matches.iter().enumerate() {
            accumulate(&mut grad, j, s.row(i), s_hat.row(j), scale);
        }
    }
    grad
}

/// Adds `scale * d/d(s_hat_j) ||x - s_hat_j||` into row j of the gradient.
fn accumulate(grad: &mut Matrix, j: usize, x: &[f64], y: &[f64], scale: f64) {
    let d = [y[0] - x[0], y[1] - x[1], y[2] - x[2]];
    let norm = math::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    if norm == 0.0 {
        return;
    }
    let row = grad.row_mut(j);
    for axis in 0..3 {
        row[axis] += scale * d[axis] / norm;
    }
}
