//! Wengert-list reverse-mode differentiation.
//!
//! Each operation appends a node holding its forward value and enough
//! context to replay the chain rule. [`Tape::backward`] walks the list in
//! reverse, keeping per-node gradients on the tape and accumulating
//! parameter gradients into the [`ParamStore`].

use super::store::{ParamId, ParamStore, TableId};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

/// Sparse linear read of embedding rows: for each batch row and each table,
/// `corners` weighted rows are summed into that table's output slot.
///
/// `rows` and `weights` are laid out `[batch][table][corner]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpStencil {
    pub tables: usize,
    pub corners: usize,
    pub rows: Vec<u32>,
    pub weights: Vec<f32>,
}

impl InterpStencil {
    pub fn batch(&self) -> usize {
        self.rows.len().checked_div(self.tables * self.corners).unwrap_or(0)
    }
}

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    Linear { x: NodeId, w: NodeId, b: NodeId },
    Relu(NodeId),
    Concat(NodeId, NodeId),
    Interp { tables: Vec<TableId>, width: usize, stencil: InterpStencil },
    SoftmaxCe { logits: NodeId, targets: Vec<Option<usize>>, probs: Vec<f32>, count: usize },
    ClampedL1 { pred: NodeId, target: Vec<f32>, truncation: f32 },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f32),
    AddScalar(NodeId),
    Sum(NodeId),
    Mean(NodeId),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Records one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f32>>>,
}

fn scalar(v: f32) -> Tensor {
    Tensor::new(Vec::new(), vec![v]).expect("scalar shape")
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient of the last `backward` target with respect to a node.
    pub fn grad(&self, id: NodeId) -> Option<&[f32]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    /// Constant or differentiable input (gradient readable via [`Tape::grad`]).
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Input)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        let mut v = store.tensor(id).clone();
        v.zero_grad();
        self.push(v, Op::Param(id))
    }

    /// `x[B×I] · w[I×O] + b[O]`.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if xv.shape().len() != 2 {
            return Err(Error::Dimension { axis: "input rank", expected: 2, found: xv.shape().len() });
        }
        if wv.shape().len() != 2 {
            return Err(Error::Dimension { axis: "weight rank", expected: 2, found: wv.shape().len() });
        }
        let (batch, inp) = (xv.shape()[0], xv.shape()[1]);
        let (w_in, out) = (wv.shape()[0], wv.shape()[1]);
        if w_in != inp {
            return Err(Error::Dimension { axis: "weight rows (input features)", expected: inp, found: w_in });
        }
        if bv.len() != out {
            return Err(Error::Dimension { axis: "bias length (output features)", expected: out, found: bv.len() });
        }
        let (xs, ws, bs) = (xv.values(), wv.values(), bv.values());
        let mut y = vec![0.0f32; batch * out];
        for r in 0..batch {
            let yr = &mut y[r * out..(r + 1) * out];
            yr.copy_from_slice(bs);
            for (i, &xi) in xs[r * inp..(r + 1) * inp].iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                for (yo, &wio) in yr.iter_mut().zip(&ws[i * out..(i + 1) * out]) {
                    *yo += xi * wio;
                }
            }
        }
        let value = Tensor::new(vec![batch, out], y)?;
        Ok(self.push(value, Op::Linear { x, w, b }))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let vals = xv.values().iter().map(|&v| v.max(0.0)).collect();
        let value = Tensor::new(xv.shape().to_vec(), vals).expect("same shape");
        self.push(value, Op::Relu(x))
    }

    /// Column-wise concatenation of two `B×_` tensors.
    pub fn concat(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows() != bv.rows() {
            return Err(Error::Dimension { axis: "concat rows", expected: av.rows(), found: bv.rows() });
        }
        let (rows, ca, cb) = (av.rows(), av.cols(), bv.cols());
        let mut vals = Vec::with_capacity(rows * (ca + cb));
        for r in 0..rows {
            vals.extend_from_slice(av.row(r));
            vals.extend_from_slice(bv.row(r));
        }
        let value = Tensor::new(vec![rows, ca + cb], vals)?;
        Ok(self.push(value, Op::Concat(a, b)))
    }

    /// Weighted gather from embedding tables; output is `B × (tables·width)`.
    pub fn interpolate(&mut self, store: &ParamStore, tables: &[TableId], stencil: InterpStencil) -> Result<NodeId> {
        if stencil.tables != tables.len() {
            return Err(Error::Dimension { axis: "stencil tables", expected: tables.len(), found: stencil.tables });
        }
        if stencil.rows.len() != stencil.weights.len() {
            return Err(Error::Dimension { axis: "stencil weights", expected: stencil.rows.len(), found: stencil.weights.len() });
        }
        let width = tables.first().map_or(0, |&t| store.table(t).width());
        if let Some(&bad) = tables.iter().find(|&&t| store.table(t).width() != width) {
            return Err(Error::Dimension { axis: "table width", expected: width, found: store.table(bad).width() });
        }
        let batch = stencil.batch();
        let out_cols = tables.len() * width;
        let mut out = vec![0.0f32; batch * out_cols];
        let mut row_buf = vec![0.0f32; width];
        for b in 0..batch {
            for (l, &tid) in tables.iter().enumerate() {
                let table = store.table(tid);
                let base = (b * stencil.tables + l) * stencil.corners;
                let dst = &mut out[b * out_cols + l * width..b * out_cols + (l + 1) * width];
                for k in 0..stencil.corners {
                    let w = stencil.weights[base + k];
                    if w == 0.0 {
                        continue;
                    }
                    let row = stencil.rows[base + k];
                    if row >= table.rows() {
                        return Err(Error::Index { context: "interpolation row", index: row as usize, limit: table.rows() as usize });
                    }
                    table.read(row, &mut row_buf);
                    for (d, &v) in dst.iter_mut().zip(&row_buf) {
                        *d += w * v;
                    }
                }
            }
        }
        let value = Tensor::new(vec![batch, out_cols], out)?;
        Ok(self.push(value, Op::Interp { tables: tables.to_vec(), width, stencil }))
    }

    /// Mean softmax cross-entropy over all rows.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
        let t: Vec<Option<usize>> = targets.iter().copied().map(Some).collect();
        self.masked_softmax_cross_entropy(logits, &t)
    }

    /// Mean softmax cross-entropy over rows with `Some` target; rows with
    /// `None` contribute neither loss nor gradient. Zero when no row is labeled.
    pub fn masked_softmax_cross_entropy(&mut self, logits: NodeId, targets: &[Option<usize>]) -> Result<NodeId> {
        let lv = self.value(logits);
        let (rows, classes) = (lv.rows(), lv.cols());
        if targets.len() != rows {
            return Err(Error::Dimension { axis: "targets", expected: rows, found: targets.len() });
        }
        let mut probs = vec![0.0f32; rows * classes];
        let mut total = 0.0f64;
        let mut count = 0usize;
        for (r, target) in targets.iter().enumerate() {
            let row = lv.row(r);
            let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(f64::from(v)));
            let sum: f64 = row.iter().map(|&v| (f64::from(v) - max).exp()).sum();
            let lse = max + sum.ln();
            for (p, &v) in probs[r * classes..(r + 1) * classes].iter_mut().zip(row) {
                *p = (f64::from(v) - lse).exp() as f32;
            }
            if let Some(t) = *target {
                if t >= classes {
                    return Err(Error::Index { context: "class target", index: t, limit: classes });
                }
                total += lse - f64::from(row[t]);
                count += 1;
            }
        }
        let loss = if count == 0 { 0.0 } else { (total / count as f64) as f32 };
        Ok(self.push(scalar(loss), Op::SoftmaxCe { logits, targets: targets.to_vec(), probs, count }))
    }

    /// `mean |clamp(pred) − clamp(target)|` with clamping to `±truncation`.
    pub fn clamped_l1(&mut self, pred: NodeId, target: &[f32], truncation: f32) -> Result<NodeId> {
        let pv = self.value(pred);
        if pv.len() != target.len() {
            return Err(Error::Dimension { axis: "sdf targets", expected: pv.len(), found: target.len() });
        }
        if !(truncation > 0.0) {
            return Err(Error::contract("truncation must be positive"));
        }
        let n = target.len();
        let total: f64 = pv
            .values()
            .iter()
            .zip(target)
            .map(|(&p, &t)| f64::from((p.clamp(-truncation, truncation) - t.clamp(-truncation, truncation)).abs()))
            .sum();
        let loss = if n == 0 { 0.0 } else { (total / n as f64) as f32 };
        Ok(self.push(scalar(loss), Op::ClampedL1 { pred, target: target.to_vec(), truncation }))
    }

    fn binary(&mut self, a: NodeId, b: NodeId, f: impl Fn(f32, f32) -> f32, op: Op) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.len() != bv.len() {
            return Err(Error::Dimension { axis: "elementwise operand", expected: av.len(), found: bv.len() });
        }
        let vals = av.values().iter().zip(bv.values()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(av.shape().to_vec(), vals)?;
        Ok(self.push(value, op))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: NodeId, factor: f32) -> NodeId {
        let av = self.value(a);
        let vals = av.values().iter().map(|&v| v * factor).collect();
        let value = Tensor::new(av.shape().to_vec(), vals).expect("same shape");
        self.push(value, Op::Scale(a, factor))
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f32) -> NodeId {
        let av = self.value(a);
        let vals = av.values().iter().map(|&v| v + c).collect();
        let value = Tensor::new(av.shape().to_vec(), vals).expect("same shape");
        self.push(value, Op::AddScalar(a))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self.value(a).values().iter().map(|&v| f64::from(v)).sum();
        self.push(scalar(s as f32), Op::Sum(a))
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let av = self.value(a);
        let n = av.len().max(1);
        let s: f64 = av.values().iter().map(|&v| f64::from(v)).sum();
        self.push(scalar((s / n as f64) as f32), Op::Mean(a))
    }

    fn accumulate(grads: &mut [Option<Vec<f32>>], id: NodeId, len: usize, f: impl FnOnce(&mut [f32])) {
        let g = grads[id.0].get_or_insert_with(|| vec![0.0; len]);
        f(g);
    }

    /// Back-propagates from a scalar node. Parameter gradients accumulate
    /// into `store` across calls; node gradients are replaced.
    pub fn backward(&mut self, loss: NodeId, store: &mut ParamStore) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f32>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for node in &self.nodes {
            if let Op::Param(pid) = node.op {
                store.tensor_mut(pid).ensure_grad();
            }
        }
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Param(pid) => store.tensor_mut(*pid).accumulate_grad(&g)?,
                Op::Linear { x, w, b } => {
                    let xv = &self.nodes[x.0].value;
                    let wv = &self.nodes[w.0].value;
                    let (batch, inp) = (xv.shape()[0], xv.shape()[1]);
                    let out = wv.shape()[1];
                    let (xs, ws) = (xv.values(), wv.values());
                    Self::accumulate(&mut grads, *x, batch * inp, |dx| {
                        for r in 0..batch {
                            let gr = &g[r * out..(r + 1) * out];
                            for i in 0..inp {
                                let wr = &ws[i * out..(i + 1) * out];
                                dx[r * inp + i] += gr.iter().zip(wr).map(|(a, b)| a * b).sum::<f32>();
                            }
                        }
                    });
                    Self::accumulate(&mut grads, *w, inp * out, |dw| {
                        for r in 0..batch {
                            let gr = &g[r * out..(r + 1) * out];
                            for i in 0..inp {
                                let xi = xs[r * inp + i];
                                if xi == 0.0 {
                                    continue;
                                }
                                for (d, &go) in dw[i * out..(i + 1) * out].iter_mut().zip(gr) {
                                    *d += xi * go;
                                }
                            }
                        }
                    });
                    Self::accumulate(&mut grads, *b, out, |db| {
                        for r in 0..batch {
                            for (d, &go) in db.iter_mut().zip(&g[r * out..(r + 1) * out]) {
                                *d += go;
                            }
                        }
                    });
                }
                Op::Relu(x) => {
                    let xs = self.nodes[x.0].value.values();
                    Self::accumulate(&mut grads, *x, xs.len(), |dx| {
                        for ((d, &v), &go) in dx.iter_mut().zip(xs).zip(&g) {
                            if v > 0.0 {
                                *d += go;
                            }
                        }
                    });
                }
                Op::Concat(a, b) => {
                    let (rows, ca) = (self.nodes[a.0].value.rows(), self.nodes[a.0].value.cols());
                    let cb = self.nodes[b.0].value.cols();
                    Self::accumulate(&mut grads, *a, rows * ca, |da| {
                        for r in 0..rows {
                            for c in 0..ca {
                                da[r * ca + c] += g[r * (ca + cb) + c];
                            }
                        }
                    });
                    Self::accumulate(&mut grads, *b, rows * cb, |db| {
                        for r in 0..rows {
                            for c in 0..cb {
                                db[r * cb + c] += g[r * (ca + cb) + ca + c];
                            }
                        }
                    });
                }
                Op::Interp { tables, width, stencil } => {
                    let out_cols = tables.len() * width;
                    let mut delta = vec![0.0f32; *width];
                    for b in 0..stencil.batch() {
                        for (l, &tid) in tables.iter().enumerate() {
                            let go = &g[b * out_cols + l * width..b * out_cols + (l + 1) * width];
                            let base = (b * stencil.tables + l) * stencil.corners;
                            let table = store.table_mut(tid);
                            for k in 0..stencil.corners {
                                let w = stencil.weights[base + k];
                                if w == 0.0 {
                                    continue;
                                }
                                for (d, &gv) in delta.iter_mut().zip(go) {
                                    *d = w * gv;
                                }
                                table.accumulate_grad(stencil.rows[base + k], &delta);
                            }
                        }
                    }
                }
                Op::SoftmaxCe { logits, targets, probs, count } => {
                    if *count > 0 {
                        let classes = self.nodes[logits.0].value.cols();
                        let scale = g[0] / *count as f32;
                        Self::accumulate(&mut grads, *logits, probs.len(), |dl| {
                            for (r, t) in targets.iter().enumerate() {
                                let Some(t) = *t else { continue };
                                for c in 0..classes {
                                    let onehot = if c == t { 1.0 } else { 0.0 };
                                    dl[r * classes + c] += scale * (probs[r * classes + c] - onehot);
                                }
                            }
                        });
                    } else {
                        let n = self.nodes[logits.0].value.len();
                        Self::accumulate(&mut grads, *logits, n, |_| {});
                    }
                }
                Op::ClampedL1 { pred, target, truncation } => {
                    let ps = self.nodes[pred.0].value.values();
                    let n = ps.len().max(1) as f32;
                    let tr = *truncation;
                    Self::accumulate(&mut grads, *pred, ps.len(), |dp| {
                        for ((d, &p), &t) in dp.iter_mut().zip(ps).zip(target) {
                            if p.abs() >= tr {
                                continue;
                            }
                            let diff = p - t.clamp(-tr, tr);
                            let sign = if diff > 0.0 {
                                1.0
                            } else if diff < 0.0 {
                                -1.0
                            } else {
                                0.0
                            };
                            *d += g[0] * sign / n;
                        }
                    });
                }
                Op::Add(a, b) => {
                    let n = g.len();
                    Self::accumulate(&mut grads, *a, n, |d| d.iter_mut().zip(&g).for_each(|(d, v)| *d += v));
                    Self::accumulate(&mut grads, *b, n, |d| d.iter_mut().zip(&g).for_each(|(d, v)| *d += v));
                }
                Op::Sub(a, b) => {
                    let n = g.len();
                    Self::accumulate(&mut grads, *a, n, |d| d.iter_mut().zip(&g).for_each(|(d, v)| *d += v));
                    Self::accumulate(&mut grads, *b, n, |d| d.iter_mut().zip(&g).for_each(|(d, v)| *d -= v));
                }
                Op::Mul(a, b) => {
                    let n = g.len();
                    let av = self.nodes[a.0].value.values();
                    let bv = self.nodes[b.0].value.values();
                    Self::accumulate(&mut grads, *a, n, |d| {
                        for i in 0..n {
                            d[i] += g[i] * bv[i];
                        }
                    });
                    Self::accumulate(&mut grads, *b, n, |d| {
                        for i in 0..n {
                            d[i] += g[i] * av[i];
                        }
                    });
                }
                Op::Scale(a, f) => {
                    Self::accumulate(&mut grads, *a, g.len(), |d| d.iter_mut().zip(&g).for_each(|(d, v)| *d += v * f));
                }
                Op::AddScalar(a) => {
                    Self::accumulate(&mut grads, *a, g.len(), |d| d.iter_mut().zip(&g).for_each(|(d, v)| *d += v));
                }
                Op::Sum(a) => {
                    let n = self.nodes[a.0].value.len();
                    Self::accumulate(&mut grads, *a, n, |d| d.iter_mut().for_each(|d| *d += g[0]));
                }
                Op::Mean(a) => {
                    let n = self.nodes[a.0].value.len();
                    let share = g[0] / n.max(1) as f32;
                    Self::accumulate(&mut grads, *a, n, |d| d.iter_mut().for_each(|d| *d += share));
                }
            }
            grads[idx] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }
}
