//! Finite-difference verification utilities.
//!
//! Central differences are only meaningful away from the kinks of ReLU,
//! max-pooling and nearest-neighbor matching, so alongside the numerical
//! differentiator this module inspects a recorded tape and reports how far
//! an evaluation point sits from the nearest kink. Entries that are exactly
//! zero because an upstream ReLU clamped them are locally constant and do
//! not count as kinks.

use alloc::vec::Vec;

use crate::graph::KnnGraph;
use crate::math;
use crate::matrix::Matrix;
use crate::tape::{NodeInfo, Tape};

/// Central finite differences of `f` with respect to every entry of `at`.
pub fn finite_diff_grad(f: &mut dyn FnMut(&Matrix) -> f64, at: &Matrix, step: f64) -> Matrix {
    let mut out = Matrix::zeros(at.rows(), at.cols());
    for r in 0..at.rows() {
        for c in 0..at.cols() {
            let mut plus = at.clone();
            plus.set(r, c, plus.get(r, c) + step);
            let mut minus = at.clone();
            minus.set(r, c, minus.get(r, c) - step);
            out.set(r, c, (f(&plus) - f(&minus)) / (2.0 * step));
        }
    }
    out
}

/// Worst relative disagreement between two gradients, with denominators
/// floored to keep near-zero entries meaningful.
pub fn max_rel_err(analytic: &Matrix, numeric: &Matrix, floor: f64) -> f64 {
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(a, n)| {
            let denom = math::abs(*a).max(math::abs(*n)).max(floor);
            math::abs(a - n) / denom
        })
        .fold(0.0, f64::max)
}

/// Distances from the nearest nonsmooth point of a recorded forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinkMargins {
    /// Smallest |pre-activation| over ReLU inputs (exact zeros excluded).
    pub relu: f64,
    /// Smallest winner-to-runner-up gap over pooled entries (all-zero
    /// neighborhoods excluded).
    pub pool: f64,
}

impl KinkMargins {
    pub fn min(&self) -> f64 {
        self.relu.min(self.pool)
    }
}

/// Scans every ReLU, neighborhood-max and column-max node of `tape`.
/// `graph` must be the graph the pooled nodes were built with.
pub fn kink_margins(tape: &Tape, graph: Option<&KnnGraph>, include_self: bool) -> KinkMargins {
    let mut margins = KinkMargins {
        relu: f64::INFINITY,
        pool: f64::INFINITY,
    };
    for id in tape.ids() {
        match tape.node_info(id) {
            NodeInfo::Relu { x } => {
                // An exactly-zero pre-activation under a pooling node comes
                // from clamped (strictly negative, hence locally constant)
                // members and is not a kink. Under an affine node it is a
                // genuine kink: the bias term moves it directly.
                let zeros_are_immobile = matches!(
                    tape.node_info(x),
                    NodeInfo::NeighborhoodMax { .. } | NodeInfo::ColumnMax { .. }
                );
                for &v in tape.value(x).data() {
                    if v != 0.0 {
                        margins.relu = margins.relu.min(math::abs(v));
                    } else if !zeros_are_immobile {
                        margins.relu = 0.0;
                    }
                }
            }
            NodeInfo::ColumnMax { x, .. } => {
                let xv = tape.value(x);
                for c in 0..xv.cols() {
                    let mut column = Vec::with_capacity(xv.rows());
                    for r in 0..xv.rows() {
                        column.push(xv.get(r, c));
                    }
                    update_gap(&mut margins.pool, &column);
                }
            }
            NodeInfo::NeighborhoodMax { x, .. } => {
                let graph = graph.expect("pooled tape needs its graph for margin inspection");
                let xv = tape.value(x);
                for i in 0..xv.rows() {
                    let members: Vec<usize> = if include_self {
                        core::iter::once(i)
                            .chain(graph.neighbors(i).iter().copied())
                            .collect()
                    } else {
                        graph.neighbors(i).to_vec()
                    };
                    for c in 0..xv.cols() {
                        let vals: Vec<f64> =
                            members.iter().map(|&j| xv.get(j, c)).collect();
                        update_gap(&mut margins.pool, &vals);
                    }
                }
            }
            _ => {}
        }
    }
    margins
}

/// Winner-to-runner-up gap. Bitwise-equal members are copies of the same
/// upstream value (pooling duplicates rows, ReLU clamps to exactly zero),
/// so they move together under perturbations and do not count as
/// competitors; the runner-up is the best strictly smaller member.
fn update_gap(slot: &mut f64, vals: &[f64]) {
    let mut best = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &v in vals {
        if v > best {
            second = best;
            best = v;
        } else if v > second && v < best {
            second = v;
        }
    }
    if second == f64::NEG_INFINITY {
        // all members identical: a shared source, locally smooth
        return;
    }
    *slot = slot.min(best - second);
}

/// Kink distances of a Chamfer evaluation: the smallest nearest-neighbor
/// distance (the norm's kink at zero), the smallest gap between the best
/// and second-best match of any query, and the gap between the two
/// directed means (the max branch).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChamferMargins {
    pub min_distance: f64,
    pub min_match_gap: f64,
    pub branch_gap: f64,
}

impl ChamferMargins {
    pub fn min(&self) -> f64 {
        self.min_distance.min(self.min_match_gap).min(self.branch_gap)
    }
}

pub fn chamfer_margins(s: &Matrix, s_hat: &Matrix) -> ChamferMargins {
    let mut min_distance = f64::INFINITY;
    let mut min_match_gap = f64::INFINITY;
    let mut directed = |from: &Matrix, to: &Matrix| -> f64 {
        let mut sum = 0.0;
        for i in 0..from.rows() {
            let p = from.row(i);
            let mut best = f64::INFINITY;
            let mut second = f64::INFINITY;
            for j in 0..to.rows() {
                let q = to.row(j);
                let d2 = (p[0] - q[0]) * (p[0] - q[0])
                    + (p[1] - q[1]) * (p[1] - q[1])
                    + (p[2] - q[2]) * (p[2] - q[2]);
                let d = math::sqrt(d2);
                if d < best {
                    second = best;
                    best = d;
                } else if d < second {
                    second = d;
                }
            }
            min_distance = min_distance.min(best);
            if second.is_finite() {
                min_match_gap = min_match_gap.min(second - best);
            }
            sum += best;
        }
        sum / from.rows() as f64
    };
    let fwd = directed(s, s_hat);
    let bwd = directed(s_hat, s);
    ChamferMargins {
        min_distance,
        min_match_gap,
        branch_gap: math::abs(fwd - bwd),
    }
}
