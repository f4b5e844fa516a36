//! Parameterized layers over the graph: affine maps, layer norm, embeddings,
//! multi-head attention and the transformer feed-forward block.

use super::graph::{linear, Graph, NodeId};
use super::{NeuralError, ParamId, ParamStore, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn xavier_uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let values = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor {
        shape: vec![rows, cols],
        values,
        grad: None,
    }
}

/// Affine layer `x . w + b`; parameters are registered under `<name>.w` / `<name>.b`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_dim: usize,
        out_dim: usize,
    ) -> Result<Self, NeuralError> {
        let w = store.add(format!("{name}.w"), xavier_uniform(rng, in_dim, out_dim))?;
        let b = store.add(format!("{name}.b"), Tensor::zeros(vec![out_dim]))?;
        Ok(Self {
            w,
            b,
            in_dim,
            out_dim,
        })
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        x: NodeId,
    ) -> Result<NodeId, NeuralError> {
        let w = g.param(store, self.w);
        let b = g.param(store, self.b);
        linear(g, x, w, b)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
    pub dim: usize,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Result<Self, NeuralError> {
        let gain = store.add(
            format!("{name}.gain"),
            Tensor {
                shape: vec![dim],
                values: vec![1.0; dim],
                grad: None,
            },
        )?;
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(vec![dim]))?;
        Ok(Self { gain, bias, dim })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> NodeId {
        let gain = g.param(store, self.gain);
        let bias = g.param(store, self.bias);
        g.layer_norm(x, gain, bias)
    }
}

/// Learned lookup table mapping ids to rows.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    pub table: ParamId,
    pub vocab: usize,
    pub dim: usize,
}

impl EmbeddingTable {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        vocab: usize,
        dim: usize,
    ) -> Result<Self, NeuralError> {
        let table = store.add(format!("{name}.table"), xavier_uniform(rng, vocab, dim))?;
        Ok(Self { table, vocab, dim })
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        ids: &[usize],
    ) -> Result<NodeId, NeuralError> {
        for &id in ids {
            if id >= self.vocab {
                return Err(NeuralError::TargetOutOfRange {
                    index: id,
                    vocab: self.vocab,
                });
            }
        }
        let table = g.param(store, self.table);
        Ok(g.embedding(table, ids))
    }
}

/// Binary attention mask: `allowed[q * k_len + k]` says query q may attend key k.
#[derive(Debug, Clone)]
pub struct AttnMask {
    pub q_len: usize,
    pub k_len: usize,
    pub allowed: Vec<bool>,
}

impl AttnMask {
    pub fn new(q_len: usize, k_len: usize, allowed: Vec<bool>) -> Result<Self, NeuralError> {
        if allowed.len() != q_len * k_len {
            return Err(NeuralError::ShapeMismatch {
                op: "attention mask".into(),
                detail: format!("{} bits for {q_len}x{k_len}", allowed.len()),
            });
        }
        Ok(Self {
            q_len,
            k_len,
            allowed,
        })
    }

    /// Lower-triangular self-attention mask: no attending to future positions.
    pub fn causal(len: usize) -> Self {
        let mut allowed = vec![false; len * len];
        for q in 0..len {
            for k in 0..=q {
                allowed[q * len + k] = true;
            }
        }
        Self {
            q_len: len,
            k_len: len,
            allowed,
        }
    }

    /// Every query may attend exactly the keys flagged valid.
    pub fn key_padding(q_len: usize, key_valid: &[bool]) -> Self {
        let k_len = key_valid.len();
        let mut allowed = vec![false; q_len * k_len];
        for q in 0..q_len {
            for (k, valid) in key_valid.iter().enumerate() {
                allowed[q * k_len + k] = *valid;
            }
        }
        Self {
            q_len,
            k_len,
            allowed,
        }
    }
}

/// Scaled dot-product attention with per-head projections, concatenation and
/// an output projection. Masked positions get exactly zero attention weight.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub heads: usize,
    pub hidden: usize,
}

impl MultiHeadAttention {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        hidden: usize,
        heads: usize,
    ) -> Result<Self, NeuralError> {
        if heads == 0 || hidden % heads != 0 {
            return Err(NeuralError::InvalidConfig(format!(
                "hidden {hidden} not divisible by heads {heads}"
            )));
        }
        Ok(Self {
            wq: Linear::new(store, rng, &format!("{name}.wq"), hidden, hidden)?,
            wk: Linear::new(store, rng, &format!("{name}.wk"), hidden, hidden)?,
            wv: Linear::new(store, rng, &format!("{name}.wv"), hidden, hidden)?,
            wo: Linear::new(store, rng, &format!("{name}.wo"), hidden, hidden)?,
            heads,
            hidden,
        })
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        q: NodeId,
        k: NodeId,
        v: NodeId,
        mask: Option<&AttnMask>,
    ) -> Result<NodeId, NeuralError> {
        Ok(self.forward_detailed(g, store, q, k, v, mask)?.0)
    }

    /// Forward pass that also returns the per-head attention weight nodes.
    pub fn forward_detailed(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        q: NodeId,
        k: NodeId,
        v: NodeId,
        mask: Option<&AttnMask>,
    ) -> Result<(NodeId, Vec<NodeId>), NeuralError> {
        let (q_len, q_dim) = g.dims(q);
        let (k_len, k_dim) = g.dims(k);
        let (v_len, v_dim) = g.dims(v);
        if q_dim != self.hidden || k_dim != self.hidden || v_dim != self.hidden {
            return Err(NeuralError::ShapeMismatch {
                op: "multi_head_attention".into(),
                detail: format!("inputs must have hidden {}, got {q_dim}/{k_dim}/{v_dim}", self.hidden),
            });
        }
        if k_len != v_len {
            return Err(NeuralError::ShapeMismatch {
                op: "multi_head_attention".into(),
                detail: format!("key length {k_len} != value length {v_len}"),
            });
        }
        if let Some(m) = mask {
            if m.q_len != q_len || m.k_len != k_len {
                return Err(NeuralError::ShapeMismatch {
                    op: "multi_head_attention".into(),
                    detail: format!(
                        "mask {}x{} for attention {q_len}x{k_len}",
                        m.q_len, m.k_len
                    ),
                });
            }
        }

        let qp = self.wq.forward(g, store, q)?;
        let kp = self.wk.forward(g, store, k)?;
        let vp = self.wv.forward(g, store, v)?;
        let head_dim = self.hidden / self.heads;
        let scale = 1.0 / (head_dim as f64).sqrt();
        let bias = mask.map(|m| g.mask_bias(q_len, k_len, &m.allowed));

        let mut outs = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = g.slice_cols(qp, h * head_dim, head_dim);
            let kh = g.slice_cols(kp, h * head_dim, head_dim);
            let vh = g.slice_cols(vp, h * head_dim, head_dim);
            let kt = g.transpose(kh);
            let scores = g.matmul(qh, kt);
            let scaled = g.scale(scores, scale);
            let masked = match bias {
                Some(b) => g.add(scaled, b),
                None => scaled,
            };
            let attn = g.softmax_rows(masked);
            weights.push(attn);
            outs.push(g.matmul(attn, vh));
        }
        let concat = g.concat_cols(&outs);
        Ok((self.wo.forward(g, store, concat)?, weights))
    }
}

/// Two-layer position-wise feed-forward with ReLU.
#[derive(Debug, Clone)]
pub struct FeedForward {
    pub lin1: Linear,
    pub lin2: Linear,
}

impl FeedForward {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        hidden: usize,
        ff_mult: usize,
    ) -> Result<Self, NeuralError> {
        Ok(Self {
            lin1: Linear::new(store, rng, &format!("{name}.lin1"), hidden, hidden * ff_mult)?,
            lin2: Linear::new(store, rng, &format!("{name}.lin2"), hidden * ff_mult, hidden)?,
        })
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        x: NodeId,
    ) -> Result<NodeId, NeuralError> {
        let h = self.lin1.forward(g, store, x)?;
        let a = g.relu(h);
        self.lin2.forward(g, store, a)
    }
}

/// Sinusoidal position encodings, row-major `(len, dim)`.
pub fn sinusoidal_encoding(len: usize, dim: usize) -> Vec<f64> {
    let mut values = vec![0.0; len * dim];
    for pos in 0..len {
        for i in 0..dim {
            let exponent = (2 * (i / 2)) as f64 / dim as f64;
            let angle = pos as f64 / 10000f64.powf(exponent);
            values[pos * dim + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    values
}

/// Add sinusoidal position information to a `(len, dim)` node.
pub fn add_positional(g: &mut Graph, x: NodeId) -> NodeId {
    let (len, dim) = g.dims(x);
    let pe = sinusoidal_encoding(len, dim);
    let pe_node = g.constant(len, dim, pe);
    g.add(x, pe_node)
}
