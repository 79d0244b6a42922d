//! Define-by-run reverse-mode differentiation over [`Matrix`] values.
//!
//! A [`Tape`] records every primitive as it executes; [`Tape::backward`]
//! replays the record in reverse creation order (a reverse topological
//! order, since an operation can only reference earlier nodes) and
//! accumulates gradients. The tape is rebuilt for every forward pass.

use alloc::vec;
use alloc::vec::Vec;

use crate::chamfer::{chamfer_backward, chamfer_points, ChamferResult};
use crate::error::{Error, Result};
use crate::graph::{neighborhood_max, KnnGraph};
use crate::matrix::Matrix;

/// Handle to a value recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

/// Read-only structure of a recorded node (see [`Tape::node_info`]).
pub enum NodeInfo<'a> {
    Leaf,
    Matmul { a: NodeId, b: NodeId },
    AddRowBias { x: NodeId, bias: NodeId },
    Relu { x: NodeId },
    RowConcat { a: NodeId, b: NodeId },
    ColumnMax { x: NodeId, argmax: &'a [usize] },
    NeighborhoodMax { x: NodeId, argmax: &'a [usize] },
    ReplicateRows { x: NodeId },
    Reshape { x: NodeId },
    WeightedSum { x: NodeId },
    ChamferTo { x: NodeId, result: &'a ChamferResult },
}

/// Per-layer activation of the shared perceptrons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

enum Op {
    Leaf,
    Matmul { a: NodeId, b: NodeId },
    AddRowBias { x: NodeId, bias: NodeId },
    Relu { x: NodeId },
    RowConcat { a: NodeId, b: NodeId },
    ColumnMax { x: NodeId, argmax: Vec<usize> },
    NeighborhoodMax { x: NodeId, argmax: Vec<usize> },
    ReplicateRows { x: NodeId },
    Reshape { x: NodeId },
    WeightedSum { x: NodeId, weights: Matrix },
    ChamferTo { x: NodeId, target: Matrix, result: ChamferResult },
}

struct Node {
    value: Matrix,
    op: Op,
}

/// The recorded forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input (parameter or data) node.
    pub fn leaf(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Leaf)
    }

    /// The forward value of a node.
    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    /// The forward value of a 1 x 1 node as a scalar.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value.get(0, 0)
    }

    /// The Chamfer bookkeeping of a `chamfer_to` node.
    pub fn chamfer_result(&self, id: NodeId) -> Option<&ChamferResult> {
        match &self.nodes[id.0].op {
            Op::ChamferTo { result, .. } => Some(result),
            _ => None,
        }
    }

    /// All node ids in creation order.
    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    /// Structural view of one node, for diagnostics such as kink-margin
    /// inspection.
    pub fn node_info(&self, id: NodeId) -> NodeInfo<'_> {
        match &self.nodes[id.0].op {
            Op::Leaf => NodeInfo::Leaf,
            Op::Matmul { a, b } => NodeInfo::Matmul { a: *a, b: *b },
            Op::AddRowBias { x, bias } => NodeInfo::AddRowBias { x: *x, bias: *bias },
            Op::Relu { x } => NodeInfo::Relu { x: *x },
            Op::RowConcat { a, b } => NodeInfo::RowConcat { a: *a, b: *b },
            Op::ColumnMax { x, argmax } => NodeInfo::ColumnMax { x: *x, argmax },
            Op::NeighborhoodMax { x, argmax } => NodeInfo::NeighborhoodMax { x: *x, argmax },
            Op::ReplicateRows { x } => NodeInfo::ReplicateRows { x: *x },
            Op::Reshape { x } => NodeInfo::Reshape { x: *x },
            Op::WeightedSum { x, .. } => NodeInfo::WeightedSum { x: *x },
            Op::ChamferTo { x, result, .. } => NodeInfo::ChamferTo { x: *x, result },
        }
    }

    fn push(&mut self, value: Matrix, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    /// `a * b`; backward accumulates dA += G * B^T and dB += A^T * G.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::Matmul { a, b }))
    }

    /// Adds a 1 x c bias row to every row of `x`.
    pub fn add_row_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        let bv = self.value(bias);
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(Error::ShapeMismatch {
                op: "add_row_bias",
                lhs_rows: xv.rows(),
                lhs_cols: xv.cols(),
                rhs_rows: bv.rows(),
                rhs_cols: bv.cols(),
            });
        }
        let mut value = xv.clone();
        for r in 0..value.rows() {
            let row = value.row_mut(r);
            for (v, b) in row.iter_mut().zip(bv.row(0)) {
                *v += b;
            }
        }
        Ok(self.push(value, Op::AddRowBias { x, bias }))
    }

    /// Elementwise max(0, x); the subgradient at exactly 0 is 0.
    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).relu();
        self.push(value, Op::Relu { x })
    }

    /// Rows of the output are `[a_i | b_i]`; backward splits the gradient.
    pub fn rowwise_concat(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).rowwise_concat(self.value(b))?;
        Ok(self.push(value, Op::RowConcat { a, b }))
    }

    /// Per-column maximum (1 x cols); gradient flows to the first argmax row.
    pub fn column_max(&mut self, x: NodeId) -> Result<NodeId> {
        let (value, argmax) = self.value(x).column_max()?;
        Ok(self.push(value, Op::ColumnMax { x, argmax }))
    }

    /// Neighborhood max over `{i} ∪ N(i)`; gradient flows to the argmax
    /// entries (first in scan order on ties).
    pub fn neighborhood_max(
        &mut self,
        x: NodeId,
        graph: &KnnGraph,
        include_self: bool,
    ) -> Result<NodeId> {
        let (value, argmax) = neighborhood_max(self.value(x), graph, include_self)?;
        Ok(self.push(value, Op::NeighborhoodMax { x, argmax }))
    }

    /// Replicates a 1 x c row `m` times; backward sums incoming rows.
    pub fn replicate_rows(&mut self, x: NodeId, m: usize) -> Result<NodeId> {
        let value = self.value(x).replicate_rows(m)?;
        Ok(self.push(value, Op::ReplicateRows { x }))
    }

    /// Reinterprets the row-major data as a `rows x cols` matrix.
    pub fn reshape(&mut self, x: NodeId, rows: usize, cols: usize) -> Result<NodeId> {
        let xv = self.value(x);
        let value = Matrix::from_vec(rows, cols, xv.data().to_vec())?;
        Ok(self.push(value, Op::Reshape { x }))
    }

    /// Scalar head `sum(x ⊙ weights)` as a 1 x 1 node.
    pub fn weighted_sum(&mut self, x: NodeId, weights: Matrix) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.shape() != weights.shape() {
            return Err(Error::ShapeMismatch {
                op: "weighted_sum",
                lhs_rows: xv.rows(),
                lhs_cols: xv.cols(),
                rhs_rows: weights.rows(),
                rhs_cols: weights.cols(),
            });
        }
        let s: f64 = xv
            .data()
            .iter()
            .zip(weights.data())
            .map(|(a, b)| a * b)
            .sum();
        let value = Matrix::from_vec(1, 1, vec![s]).expect("1x1");
        Ok(self.push(value, Op::WeightedSum { x, weights }))
    }

    /// Chamfer distance from `x` (rows are reconstructed points) to the
    /// constant `target`, as a 1 x 1 loss node.
    pub fn chamfer_to(&mut self, x: NodeId, target: Matrix) -> Result<NodeId> {
        let result = chamfer_points(&target, self.value(x))?;
        let value = Matrix::from_vec(1, 1, vec![result.value]).expect("1x1");
        Ok(self.push(value, Op::ChamferTo { x, target, result }))
    }

    /// Shared per-row perceptron: for each `(weights, bias, activation)`
    /// layer, `x <- act(x * w + b)`. Layer width mismatches are rejected by
    /// the underlying primitives.
    pub fn per_row_mlp(
        &mut self,
        mut x: NodeId,
        layers: &[(NodeId, NodeId, Activation)],
    ) -> Result<NodeId> {
        for &(w, b, act) in layers {
            x = self.matmul(x, w)?;
            x = self.add_row_bias(x, b)?;
            if act == Activation::Relu {
                x = self.relu(x);
            }
        }
        Ok(x)
    }

    /// Runs the backward pass from `from` (seed gradient 1 on every entry,
    /// normally a 1 x 1 loss). Nodes that `from` does not depend on keep a
    /// zero gradient.
    pub fn backward(&self, from: NodeId) -> Gradients {
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        let seed = self.nodes[from.0].value.map(|_| 1.0);
        grads[from.0] = Some(seed);
        for idx in (0..=from.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients {
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
            grads,
        }
    }

    fn propagate(&self, idx: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::Matmul { a, b } => {
                let av = &self.nodes[a.0].value;
                let bv = &self.nodes[b.0].value;
                let da = g.matmul_nt(bv).expect("recorded shapes");
                let db = av.matmul_tn(g).expect("recorded shapes");
                add_grad(grads, *a, &da);
                add_grad(grads, *b, &db);
            }
            Op::AddRowBias { x, bias } => {
                add_grad(grads, *x, g);
                let mut db = Matrix::zeros(1, g.cols());
                for r in 0..g.rows() {
                    let row = g.row(r);
                    let dst = db.row_mut(0);
                    for (d, v) in dst.iter_mut().zip(row) {
                        *d += v;
                    }
                }
                add_grad(grads, *bias, &db);
            }
            Op::Relu { x } => {
                let xv = &self.nodes[x.0].value;
                let mut dx = g.clone();
                for (d, &v) in dx.data_mut().iter_mut().zip(xv.data()) {
                    if v <= 0.0 {
                        *d = 0.0;
                    }
                }
                add_grad(grads, *x, &dx);
            }
            Op::RowConcat { a, b } => {
                let ac = self.nodes[a.0].value.cols();
                let bc = self.nodes[b.0].value.cols();
                let mut da = Matrix::zeros(g.rows(), ac);
                let mut db = Matrix::zeros(g.rows(), bc);
                for r in 0..g.rows() {
                    let row = g.row(r);
                    da.row_mut(r).copy_from_slice(&row[..ac]);
                    db.row_mut(r).copy_from_slice(&row[ac..]);
                }
                add_grad(grads, *a, &da);
                add_grad(grads, *b, &db);
            }
            Op::ColumnMax { x, argmax } => {
                let xv = &self.nodes[x.0].value;
                let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                for (c, &r) in argmax.iter().enumerate() {
                    dx.set(r, c, g.get(0, c));
                }
                add_grad(grads, *x, &dx);
            }
            Op::NeighborhoodMax { x, argmax } => {
                let xv = &self.nodes[x.0].value;
                let f = xv.cols();
                let mut dx = Matrix::zeros(xv.rows(), f);
                for i in 0..g.rows() {
                    for c in 0..f {
                        let src = argmax[i * f + c];
                        dx.set(src, c, dx.get(src, c) + g.get(i, c));
                    }
                }
                add_grad(grads, *x, &dx);
            }
            Op::ReplicateRows { x } => {
                let mut dx = Matrix::zeros(1, g.cols());
                for r in 0..g.rows() {
                    let row = g.row(r);
                    let dst = dx.row_mut(0);
                    for (d, v) in dst.iter_mut().zip(row) {
                        *d += v;
                    }
                }
                add_grad(grads, *x, &dx);
            }
            Op::Reshape { x } => {
                let (r, c) = self.nodes[x.0].value.shape();
                let dx = Matrix::from_vec(r, c, g.data().to_vec()).expect("same length");
                add_grad(grads, *x, &dx);
            }
            Op::WeightedSum { x, weights } => {
                let dx = weights.scale(g.get(0, 0));
                add_grad(grads, *x, &dx);
            }
            Op::ChamferTo { x, target, result } => {
                let xv = &self.nodes[x.0].value;
                let dx = chamfer_backward(result, target, xv, g.get(0, 0));
                add_grad(grads, *x, &dx);
            }
        }
    }
}

fn add_grad(grads: &mut [Option<Matrix>], id: NodeId, delta: &Matrix) {
    match &mut grads[id.0] {
        Some(g) => {
            for (a, b) in g.data_mut().iter_mut().zip(delta.data()) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(delta.clone()),
    }
}

/// Gradients produced by [`Tape::backward`]. Unvisited nodes read as zero.
pub struct Gradients {
    shapes: Vec<(usize, usize)>,
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient of the seeded output with respect to node `id`.
    pub fn get(&self, id: NodeId) -> Matrix {
        match &self.grads[id.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[id.0];
                Matrix::zeros(r, c)
            }
        }
    }

    /// Like [`Gradients::get`] but consumes the stored buffer.
    pub fn take(&mut self, id: NodeId) -> Matrix {
        match self.grads[id.0].take() {
            Some(g) => g,
            None => {
                let (r, c) = self.shapes[id.0];
                Matrix::zeros(r, c)
            }
        }
    }
}
