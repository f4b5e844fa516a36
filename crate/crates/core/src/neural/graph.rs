//! Tape-based reverse-mode autodiff over 2-d nodes.
//!
//! Ops append nodes eagerly, so node index order is a topological order and
//! `backward` is a single reverse sweep. All nodes are matrices; vectors are
//! one row, scalars 1x1. Shape agreement inside the graph is a programmer
//! invariant (asserted); the public wrappers at the bottom validate shapes
//! and return errors.

use super::{NeuralError, ParamId, ParamStore, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const PROB_EPSILON: f64 = 1e-7;
const LAYER_NORM_EPSILON: f64 = 1e-5;
const MASKED_LOGIT: f64 = -1e30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf { param: Option<ParamId> },
    Add(NodeId, NodeId),
    AddBias(NodeId, NodeId),
    Scale(NodeId, f64),
    Mul(NodeId, NodeId),
    Matmul(NodeId, NodeId),
    Transpose(NodeId),
    SliceCols { x: NodeId, start: usize, len: usize },
    ConcatCols(Vec<NodeId>),
    SoftmaxRows(NodeId),
    LayerNorm { x: NodeId, gain: NodeId, bias: NodeId },
    Relu(NodeId),
    Silu(NodeId),
    Sigmoid(NodeId),
    Embedding { table: NodeId, ids: Vec<usize> },
    Dropout { x: NodeId, mask: Vec<f64> },
    SumAll(NodeId),
    CrossEntropyRows { logits: NodeId, targets: Vec<Option<usize>> },
    Bce { probs: NodeId, targets: Vec<f64> },
}

#[derive(Debug, Clone)]
struct Node {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    op: Op,
}

#[derive(Debug)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    dropout_p: f64,
    dropout_rng: Option<ChaCha8Rng>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
            dropout_p: 0.0,
            dropout_rng: None,
        }
    }

    /// Enable dropout for this forward pass (training only).
    pub fn set_dropout(&mut self, p: f64, rng: ChaCha8Rng) {
        self.dropout_p = p;
        self.dropout_rng = Some(rng);
    }

    fn push(&mut self, rows: usize, cols: usize, values: Vec<f64>, op: Op) -> NodeId {
        debug_assert_eq!(values.len(), rows * cols);
        self.nodes.push(Node {
            rows,
            cols,
            values,
            op,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn dims(&self, id: NodeId) -> (usize, usize) {
        let n = &self.nodes[id.0];
        (n.rows, n.cols)
    }

    pub fn values(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].values
    }

    pub fn value_scalar(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.nodes[id.0].values.len(), 1);
        self.nodes[id.0].values[0]
    }

    /// Gradient accumulated by the latest `backward`, if the node was reached.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    pub fn value_tensor(&self, id: NodeId) -> Tensor {
        let n = &self.nodes[id.0];
        Tensor {
            shape: vec![n.rows, n.cols],
            values: n.values.clone(),
            grad: self.grad(id).map(|g| g.to_vec()),
        }
    }

    // ---- leaves ------------------------------------------------------

    pub fn input(&mut self, t: &Tensor) -> NodeId {
        let (rows, cols) = t.matrix_dims();
        self.push(rows, cols, t.values.clone(), Op::Leaf { param: None })
    }

    pub fn constant(&mut self, rows: usize, cols: usize, values: Vec<f64>) -> NodeId {
        self.push(rows, cols, values, Op::Leaf { param: None })
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        let t = store.tensor(id);
        let (rows, cols) = t.matrix_dims();
        self.push(rows, cols, t.values.clone(), Op::Leaf { param: Some(id) })
    }

    // ---- ops ---------------------------------------------------------

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (r, c) = self.dims(a);
        assert_eq!((r, c), self.dims(b), "add shape mismatch");
        let values = self.nodes[a.0]
            .values
            .iter()
            .zip(&self.nodes[b.0].values)
            .map(|(x, y)| x + y)
            .collect();
        self.push(r, c, values, Op::Add(a, b))
    }

    /// `(m,n) + (1,n)` broadcast over rows.
    pub fn add_bias(&mut self, x: NodeId, b: NodeId) -> NodeId {
        let (m, n) = self.dims(x);
        assert_eq!(self.dims(b), (1, n), "bias shape mismatch");
        let bv = &self.nodes[b.0].values;
        let values = self.nodes[x.0]
            .values
            .chunks(n)
            .flat_map(|row| row.iter().zip(bv).map(|(v, b)| v + b))
            .collect();
        self.push(m, n, values, Op::AddBias(x, b))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let (r, cc) = self.dims(a);
        let values = self.nodes[a.0].values.iter().map(|v| v * c).collect();
        self.push(r, cc, values, Op::Scale(a, c))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (r, c) = self.dims(a);
        assert_eq!((r, c), self.dims(b), "mul shape mismatch");
        let values = self.nodes[a.0]
            .values
            .iter()
            .zip(&self.nodes[b.0].values)
            .map(|(x, y)| x * y)
            .collect();
        self.push(r, c, values, Op::Mul(a, b))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (m, k) = self.dims(a);
        let (k2, n) = self.dims(b);
        assert_eq!(k, k2, "matmul inner dims {k} vs {k2}");
        let av = &self.nodes[a.0].values;
        let bv = &self.nodes[b.0].values;
        let mut values = vec![0.0; m * n];
        for i in 0..m {
            for kk in 0..k {
                let aik = av[i * k + kk];
                if aik == 0.0 {
                    continue;
                }
                let brow = &bv[kk * n..(kk + 1) * n];
                let out = &mut values[i * n..(i + 1) * n];
                for (o, bb) in out.iter_mut().zip(brow) {
                    *o += aik * bb;
                }
            }
        }
        self.push(m, n, values, Op::Matmul(a, b))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let (r, c) = self.dims(a);
        let av = &self.nodes[a.0].values;
        let mut values = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                values[j * r + i] = av[i * c + j];
            }
        }
        self.push(c, r, values, Op::Transpose(a))
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let (r, c) = self.dims(x);
        assert!(start + len <= c, "slice range out of bounds");
        let xv = &self.nodes[x.0].values;
        let values = (0..r)
            .flat_map(|i| xv[i * c + start..i * c + start + len].iter().copied())
            .collect();
        self.push(r, len, values, Op::SliceCols { x, start, len })
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let rows = self.dims(parts[0]).0;
        let total: usize = parts.iter().map(|p| self.dims(*p).1).sum();
        let mut values = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for p in parts {
                let (r, c) = self.dims(*p);
                assert_eq!(r, rows, "concat row mismatch");
                values.extend_from_slice(&self.nodes[p.0].values[i * c..(i + 1) * c]);
            }
        }
        self.push(rows, total, values, Op::ConcatCols(parts.to_vec()))
    }

    pub fn softmax_rows(&mut self, x: NodeId) -> NodeId {
        let (r, c) = self.dims(x);
        let xv = &self.nodes[x.0].values;
        let mut values = vec![0.0; r * c];
        for i in 0..r {
            let row = &xv[i * c..(i + 1) * c];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (j, v) in row.iter().enumerate() {
                let e = (v - max).exp();
                values[i * c + j] = e;
                sum += e;
            }
            for v in &mut values[i * c..(i + 1) * c] {
                *v /= sum;
            }
        }
        self.push(r, c, values, Op::SoftmaxRows(x))
    }

    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId) -> NodeId {
        let (r, c) = self.dims(x);
        assert_eq!(self.dims(gain), (1, c), "layer norm gain shape");
        assert_eq!(self.dims(bias), (1, c), "layer norm bias shape");
        let xv = &self.nodes[x.0].values;
        let gv = &self.nodes[gain.0].values;
        let bv = &self.nodes[bias.0].values;
        let mut values = vec![0.0; r * c];
        for i in 0..r {
            let row = &xv[i * c..(i + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let inv = 1.0 / (var + LAYER_NORM_EPSILON).sqrt();
            for j in 0..c {
                values[i * c + j] = gv[j] * (row[j] - mean) * inv + bv[j];
            }
        }
        self.push(r, c, values, Op::LayerNorm { x, gain, bias })
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let (r, c) = self.dims(x);
        let values = self.nodes[x.0].values.iter().map(|v| v.max(0.0)).collect();
        self.push(r, c, values, Op::Relu(x))
    }

    /// `x * sigmoid(x)`; smooth, so finite-difference checks stay clean.
    pub fn silu(&mut self, x: NodeId) -> NodeId {
        let (r, c) = self.dims(x);
        let values = self.nodes[x.0]
            .values
            .iter()
            .map(|v| v / (1.0 + (-v).exp()))
            .collect();
        self.push(r, c, values, Op::Silu(x))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let (r, c) = self.dims(x);
        let values = self.nodes[x.0]
            .values
            .iter()
            .map(|v| 1.0 / (1.0 + (-v).exp()))
            .collect();
        self.push(r, c, values, Op::Sigmoid(x))
    }

    /// Gather rows of an embedding table.
    pub fn embedding(&mut self, table: NodeId, ids: &[usize]) -> NodeId {
        let (vocab, dim) = self.dims(table);
        for &id in ids {
            assert!(id < vocab, "embedding id {id} out of range {vocab}");
        }
        let tv = &self.nodes[table.0].values;
        let values = ids
            .iter()
            .flat_map(|&id| tv[id * dim..(id + 1) * dim].iter().copied())
            .collect();
        self.push(
            ids.len(),
            dim,
            values,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
        )
    }

    /// Inverted dropout; identity when no dropout context is set.
    pub fn dropout(&mut self, x: NodeId) -> NodeId {
        let p = self.dropout_p;
        if p <= 0.0 || self.dropout_rng.is_none() {
            return x;
        }
        let (r, c) = self.dims(x);
        let keep = 1.0 - p;
        let rng = self.dropout_rng.as_mut().unwrap();
        let mask: Vec<f64> = (0..r * c)
            .map(|_| if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 })
            .collect();
        let values = self.nodes[x.0]
            .values
            .iter()
            .zip(&mask)
            .map(|(v, m)| v * m)
            .collect();
        self.push(r, c, values, Op::Dropout { x, mask })
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let sum = self.nodes[x.0].values.iter().sum();
        self.push(1, 1, vec![sum], Op::SumAll(x))
    }

    fn cross_entropy_rows(&mut self, logits: NodeId, targets: Vec<Option<usize>>) -> NodeId {
        let (r, c) = self.dims(logits);
        assert_eq!(targets.len(), r);
        let lv = &self.nodes[logits.0].values;
        let mut total = 0.0;
        let mut n_eff = 0usize;
        for (i, t) in targets.iter().enumerate() {
            let Some(t) = t else { continue };
            let row = &lv[i * c..(i + 1) * c];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[*t];
            n_eff += 1;
        }
        let loss = total / n_eff as f64;
        self.push(1, 1, vec![loss], Op::CrossEntropyRows { logits, targets })
    }

    fn bce(&mut self, probs: NodeId, targets: Vec<f64>) -> NodeId {
        let n = self.nodes[probs.0].values.len();
        assert_eq!(targets.len(), n);
        let pv = &self.nodes[probs.0].values;
        let mut total = 0.0;
        for (p, t) in pv.iter().zip(&targets) {
            let p = p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
            total += t * p.ln() + (1.0 - t) * (1.0 - p).ln();
        }
        let loss = -total / n as f64;
        self.push(1, 1, vec![loss], Op::Bce { probs, targets })
    }

    // ---- backward ----------------------------------------------------

    /// Reverse sweep from a scalar loss node. Gradients are held on the
    /// graph; push parameter gradients to a store with `accumulate_into`.
    pub fn backward(&mut self, loss: NodeId) {
        let node = &self.nodes[loss.0];
        assert_eq!(node.rows * node.cols, 1, "backward needs a scalar loss");
        self.grads = vec![None; self.nodes.len()];
        self.grads[loss.0] = Some(vec![1.0]);

        fn acc(slot: &mut Option<Vec<f64>>, len: usize) -> &mut Vec<f64> {
            slot.get_or_insert_with(|| vec![0.0; len])
        }

        let nodes = &self.nodes;
        let grads = &mut self.grads;
        for idx in (0..=loss.0).rev() {
            if grads[idx].is_none() {
                continue;
            }
            let (before, after) = grads.split_at_mut(idx);
            let g = after[0].as_ref().expect("checked above");
            let node = &nodes[idx];
            let numel = |id: NodeId| nodes[id.0].rows * nodes[id.0].cols;
            match &node.op {
                Op::Leaf { .. } => {}
                Op::Add(a, b) => {
                    let ga = acc(&mut before[a.0], numel(*a));
                    for (x, d) in ga.iter_mut().zip(g) {
                        *x += d;
                    }
                    let gb = acc(&mut before[b.0], numel(*b));
                    for (x, d) in gb.iter_mut().zip(g) {
                        *x += d;
                    }
                }
                Op::AddBias(x, b) => {
                    let n = nodes[b.0].cols;
                    let gx = acc(&mut before[x.0], numel(*x));
                    for (v, d) in gx.iter_mut().zip(g) {
                        *v += d;
                    }
                    let gb = acc(&mut before[b.0], n);
                    for (j, gbj) in gb.iter_mut().enumerate() {
                        let mut s = 0.0;
                        for i in 0..node.rows {
                            s += g[i * n + j];
                        }
                        *gbj += s;
                    }
                }
                Op::Scale(a, c) => {
                    let ga = acc(&mut before[a.0], numel(*a));
                    for (x, d) in ga.iter_mut().zip(g) {
                        *x += c * d;
                    }
                }
                Op::Mul(a, b) => {
                    let av = &nodes[a.0].values;
                    let bv = &nodes[b.0].values;
                    {
                        let ga = acc(&mut before[a.0], numel(*a));
                        for ((x, d), y) in ga.iter_mut().zip(g).zip(bv) {
                            *x += d * y;
                        }
                    }
                    let gb = acc(&mut before[b.0], numel(*b));
                    for ((x, d), y) in gb.iter_mut().zip(g).zip(av) {
                        *x += d * y;
                    }
                }
                Op::Matmul(a, b) => {
                    let (m, k) = (nodes[a.0].rows, nodes[a.0].cols);
                    let n = nodes[b.0].cols;
                    let av = &nodes[a.0].values;
                    let bv = &nodes[b.0].values;
                    {
                        // dA = g . B^T
                        let ga = acc(&mut before[a.0], m * k);
                        for i in 0..m {
                            for kk in 0..k {
                                let mut s = 0.0;
                                for j in 0..n {
                                    s += g[i * n + j] * bv[kk * n + j];
                                }
                                ga[i * k + kk] += s;
                            }
                        }
                    }
                    // dB = A^T . g
                    let gb = acc(&mut before[b.0], k * n);
                    for kk in 0..k {
                        for i in 0..m {
                            let aik = av[i * k + kk];
                            if aik == 0.0 {
                                continue;
                            }
                            for j in 0..n {
                                gb[kk * n + j] += aik * g[i * n + j];
                            }
                        }
                    }
                }
                Op::Transpose(a) => {
                    let (r, c) = (nodes[a.0].rows, nodes[a.0].cols);
                    let ga = acc(&mut before[a.0], r * c);
                    for i in 0..r {
                        for j in 0..c {
                            ga[i * c + j] += g[j * r + i];
                        }
                    }
                }
                Op::SliceCols { x, start, len } => {
                    let (r, c) = (nodes[x.0].rows, nodes[x.0].cols);
                    let gx = acc(&mut before[x.0], r * c);
                    for i in 0..r {
                        for j in 0..*len {
                            gx[i * c + start + j] += g[i * len + j];
                        }
                    }
                }
                Op::ConcatCols(parts) => {
                    let rows = node.rows;
                    let total = node.cols;
                    let mut offset = 0;
                    for p in parts {
                        let c = nodes[p.0].cols;
                        let gp = acc(&mut before[p.0], rows * c);
                        for i in 0..rows {
                            for j in 0..c {
                                gp[i * c + j] += g[i * total + offset + j];
                            }
                        }
                        offset += c;
                    }
                }
                Op::SoftmaxRows(x) => {
                    let (r, c) = (node.rows, node.cols);
                    let p = &node.values;
                    let gx = acc(&mut before[x.0], r * c);
                    for i in 0..r {
                        let prow = &p[i * c..(i + 1) * c];
                        let grow = &g[i * c..(i + 1) * c];
                        let dot: f64 = prow.iter().zip(grow).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            gx[i * c + j] += prow[j] * (grow[j] - dot);
                        }
                    }
                }
                Op::LayerNorm { x, gain, bias } => {
                    let (r, c) = (node.rows, node.cols);
                    let xv = &nodes[x.0].values;
                    let gv = &nodes[gain.0].values;
                    {
                        let gx = acc(&mut before[x.0], r * c);
                        for i in 0..r {
                            let row = &xv[i * c..(i + 1) * c];
                            let mean = row.iter().sum::<f64>() / c as f64;
                            let var =
                                row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
                            let inv = 1.0 / (var + LAYER_NORM_EPSILON).sqrt();
                            let grow = &g[i * c..(i + 1) * c];
                            let mut mean_h = 0.0;
                            let mut mean_hx = 0.0;
                            for j in 0..c {
                                let xhat = (row[j] - mean) * inv;
                                let h = grow[j] * gv[j];
                                mean_h += h;
                                mean_hx += h * xhat;
                            }
                            mean_h /= c as f64;
                            mean_hx /= c as f64;
                            for j in 0..c {
                                let xhat = (row[j] - mean) * inv;
                                let h = grow[j] * gv[j];
                                gx[i * c + j] += inv * (h - mean_h - xhat * mean_hx);
                            }
                        }
                    }
                    {
                        let gg = acc(&mut before[gain.0], c);
                        for i in 0..r {
                            let row = &xv[i * c..(i + 1) * c];
                            let mean = row.iter().sum::<f64>() / c as f64;
                            let var =
                                row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
                            let inv = 1.0 / (var + LAYER_NORM_EPSILON).sqrt();
                            for j in 0..c {
                                gg[j] += g[i * c + j] * (row[j] - mean) * inv;
                            }
                        }
                    }
                    let gb = acc(&mut before[bias.0], c);
                    for i in 0..r {
                        for j in 0..c {
                            gb[j] += g[i * c + j];
                        }
                    }
                }
                Op::Relu(x) => {
                    let xv = &nodes[x.0].values;
                    let gx = acc(&mut before[x.0], xv.len());
                    for ((v, d), xi) in gx.iter_mut().zip(g).zip(xv) {
                        if *xi > 0.0 {
                            *v += d;
                        }
                    }
                }
                Op::Sigmoid(x) => {
                    let s = &node.values;
                    let gx = acc(&mut before[x.0], s.len());
                    for ((v, d), si) in gx.iter_mut().zip(g).zip(s) {
                        *v += d * si * (1.0 - si);
                    }
                }
                Op::Embedding { table, ids } => {
                    let dim = node.cols;
                    let gt = acc(&mut before[table.0], numel(*table));
                    for (r, &id) in ids.iter().enumerate() {
                        for j in 0..dim {
                            gt[id * dim + j] += g[r * dim + j];
                        }
                    }
                }
                Op::Dropout { x, mask } => {
                    let gx = acc(&mut before[x.0], mask.len());
                    for ((v, d), m) in gx.iter_mut().zip(g).zip(mask) {
                        *v += d * m;
                    }
                }
                Op::SumAll(x) => {
                    let gx = acc(&mut before[x.0], numel(*x));
                    for v in gx.iter_mut() {
                        *v += g[0];
                    }
                }
                Op::CrossEntropyRows { logits, targets } => {
                    let c = nodes[logits.0].cols;
                    let lv = &nodes[logits.0].values;
                    let n_eff = targets.iter().flatten().count() as f64;
                    let gl = acc(&mut before[logits.0], lv.len());
                    for (i, t) in targets.iter().enumerate() {
                        let Some(t) = t else { continue };
                        let row = &lv[i * c..(i + 1) * c];
                        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
                        for j in 0..c {
                            let p = (row[j] - max).exp() / sum;
                            let onehot = if j == *t { 1.0 } else { 0.0 };
                            gl[i * c + j] += g[0] * (p - onehot) / n_eff;
                        }
                    }
                }
                Op::Bce { probs, targets } => {
                    let pv = &nodes[probs.0].values;
                    let n = pv.len() as f64;
                    let gp = acc(&mut before[probs.0], pv.len());
                    for (i, (p, t)) in pv.iter().zip(targets).enumerate() {
                        if *p < PROB_EPSILON || *p > 1.0 - PROB_EPSILON {
                            continue; // clamp active: zero slope
                        }
                        gp[i] += g[0] * (p - t) / (n * p * (1.0 - p));
                    }
                }
            }
        }
    }

    /// Add this graph's parameter-leaf gradients into the store.
    pub fn accumulate_into(&self, store: &mut ParamStore) {
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf { param: Some(pid) } = node.op {
                if let Some(Some(g)) = self.grads.get(idx) {
                    store.accumulate_grad(pid, g);
                }
            }
        }
    }

    /// Gradients of parameter leaves keyed by parameter id (summed over
    /// repeated uses), without touching a store.
    pub fn param_grads(&self) -> Vec<(ParamId, Vec<f64>)> {
        let mut out: Vec<(ParamId, Vec<f64>)> = Vec::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf { param: Some(pid) } = node.op {
                if let Some(Some(g)) = self.grads.get(idx) {
                    if let Some(entry) = out.iter_mut().find(|(p, _)| *p == pid) {
                        for (a, b) in entry.1.iter_mut().zip(g) {
                            *a += b;
                        }
                    } else {
                        out.push((pid, g.clone()));
                    }
                }
            }
        }
        out
    }

    /// Additive attention-mask bias: 0 where allowed, a large negative value
    /// where masked (exactly zero weight after softmax).
    pub fn mask_bias(&mut self, rows: usize, cols: usize, allowed: &[bool]) -> NodeId {
        assert_eq!(allowed.len(), rows * cols);
        let values = allowed
            .iter()
            .map(|a| if *a { 0.0 } else { MASKED_LOGIT })
            .collect();
        self.constant(rows, cols, values)
    }
}

// ---- public validated wrappers ---------------------------------------

/// Affine map `x . w + b` with shape validation.
pub fn linear(g: &mut Graph, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId, NeuralError> {
    let (_, in_dim) = g.dims(x);
    let (w_in, w_out) = g.dims(w);
    let (b_rows, b_cols) = g.dims(b);
    if w_in != in_dim {
        return Err(NeuralError::ShapeMismatch {
            op: "linear".into(),
            detail: format!("input cols {in_dim} vs weight rows {w_in}"),
        });
    }
    if (b_rows, b_cols) != (1, w_out) {
        return Err(NeuralError::ShapeMismatch {
            op: "linear".into(),
            detail: format!("bias {b_rows}x{b_cols} vs out dim {w_out}"),
        });
    }
    let h = g.matmul(x, w);
    Ok(g.add_bias(h, b))
}

/// Row-wise softmax (the last axis).
pub fn softmax_rows(g: &mut Graph, x: NodeId) -> NodeId {
    g.softmax_rows(x)
}

/// Column-wise softmax via transposition.
pub fn softmax_cols(g: &mut Graph, x: NodeId) -> NodeId {
    let t = g.transpose(x);
    let s = g.softmax_rows(t);
    g.transpose(s)
}

/// Mean token-level negative log-likelihood over non-ignored positions.
pub fn cross_entropy(
    g: &mut Graph,
    logits: NodeId,
    targets: &[usize],
    ignore_index: Option<usize>,
) -> Result<NodeId, NeuralError> {
    let (rows, vocab) = g.dims(logits);
    if targets.len() != rows {
        return Err(NeuralError::ShapeMismatch {
            op: "cross_entropy".into(),
            detail: format!("{} targets for {rows} rows", targets.len()),
        });
    }
    let mut opts = Vec::with_capacity(targets.len());
    for &t in targets {
        if Some(t) == ignore_index {
            opts.push(None);
        } else if t >= vocab {
            return Err(NeuralError::TargetOutOfRange { index: t, vocab });
        } else {
            opts.push(Some(t));
        }
    }
    if opts.iter().all(|o| o.is_none()) {
        return Err(NeuralError::NoSupervisedPositions);
    }
    Ok(g.cross_entropy_rows(logits, opts))
}

/// Two-term binary cross entropy over clamped probabilities.
pub fn binary_cross_entropy(
    g: &mut Graph,
    probs: NodeId,
    targets: &[f64],
) -> Result<NodeId, NeuralError> {
    let (r, c) = g.dims(probs);
    if targets.len() != r * c {
        return Err(NeuralError::ShapeMismatch {
            op: "binary_cross_entropy".into(),
            detail: format!("{} targets for {} probabilities", targets.len(), r * c),
        });
    }
    Ok(g.bce(probs, targets.to_vec()))
}
