//! Pre-norm transformer encoder and decoder stacks.
//!
//! A zero-layer stack is the identity (there is no final norm). Decoder
//! blocks run causal self-attention, cross-attention to an encoded memory,
//! then the feed-forward, each behind a residual connection.

use super::graph::{Graph, NodeId};
use super::layers::{AttnMask, FeedForward, LayerNorm, MultiHeadAttention};
use super::{NeuralError, ParamStore, TransformerConfig};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
struct EncoderBlock {
    ln1: LayerNorm,
    attn: MultiHeadAttention,
    ln2: LayerNorm,
    ff: FeedForward,
}

#[derive(Debug, Clone)]
pub struct TransformerEncoder {
    blocks: Vec<EncoderBlock>,
    pub cfg: TransformerConfig,
}

impl TransformerEncoder {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        cfg: TransformerConfig,
    ) -> Result<Self, NeuralError> {
        cfg.validate()?;
        let mut blocks = Vec::with_capacity(cfg.layers);
        for i in 0..cfg.layers {
            let p = format!("{name}.block{i}");
            blocks.push(EncoderBlock {
                ln1: LayerNorm::new(store, &format!("{p}.ln1"), cfg.hidden)?,
                attn: MultiHeadAttention::new(store, rng, &format!("{p}.attn"), cfg.hidden, cfg.heads)?,
                ln2: LayerNorm::new(store, &format!("{p}.ln2"), cfg.hidden)?,
                ff: FeedForward::new(store, rng, &format!("{p}.ff"), cfg.hidden, cfg.ff_mult)?,
            });
        }
        Ok(Self { blocks, cfg })
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        x: NodeId,
        src_mask: Option<&AttnMask>,
    ) -> Result<NodeId, NeuralError> {
        let (_, dim) = g.dims(x);
        if dim != self.cfg.hidden {
            return Err(NeuralError::ShapeMismatch {
                op: "transformer_encoder".into(),
                detail: format!("input dim {dim}, expected {}", self.cfg.hidden),
            });
        }
        let mut h = x;
        for block in &self.blocks {
            let normed = block.ln1.forward(g, store, h);
            let attn = block.attn.forward(g, store, normed, normed, normed, src_mask)?;
            let attn = g.dropout(attn);
            h = g.add(h, attn);
            let normed = block.ln2.forward(g, store, h);
            let ff = block.ff.forward(g, store, normed)?;
            let ff = g.dropout(ff);
            h = g.add(h, ff);
        }
        Ok(h)
    }
}

#[derive(Debug, Clone)]
struct DecoderBlock {
    ln1: LayerNorm,
    self_attn: MultiHeadAttention,
    ln2: LayerNorm,
    cross_attn: MultiHeadAttention,
    ln3: LayerNorm,
    ff: FeedForward,
}

#[derive(Debug, Clone)]
pub struct TransformerDecoder {
    blocks: Vec<DecoderBlock>,
    pub cfg: TransformerConfig,
}

impl TransformerDecoder {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        cfg: TransformerConfig,
    ) -> Result<Self, NeuralError> {
        cfg.validate()?;
        let mut blocks = Vec::with_capacity(cfg.layers);
        for i in 0..cfg.layers {
            let p = format!("{name}.block{i}");
            blocks.push(DecoderBlock {
                ln1: LayerNorm::new(store, &format!("{p}.ln1"), cfg.hidden)?,
                self_attn: MultiHeadAttention::new(
                    store,
                    rng,
                    &format!("{p}.self_attn"),
                    cfg.hidden,
                    cfg.heads,
                )?,
                ln2: LayerNorm::new(store, &format!("{p}.ln2"), cfg.hidden)?,
                cross_attn: MultiHeadAttention::new(
                    store,
                    rng,
                    &format!("{p}.cross_attn"),
                    cfg.hidden,
                    cfg.heads,
                )?,
                ln3: LayerNorm::new(store, &format!("{p}.ln3"), cfg.hidden)?,
                ff: FeedForward::new(store, rng, &format!("{p}.ff"), cfg.hidden, cfg.ff_mult)?,
            });
        }
        Ok(Self { blocks, cfg })
    }

    /// `self_mask` is usually causal for autoregressive decoding; `None`
    /// allows full self-attention (used by non-autoregressive consumers).
    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        y: NodeId,
        memory: NodeId,
        self_mask: Option<&AttnMask>,
        memory_mask: Option<&AttnMask>,
    ) -> Result<NodeId, NeuralError> {
        let (_, dim) = g.dims(y);
        let (_, mem_dim) = g.dims(memory);
        if dim != self.cfg.hidden || mem_dim != self.cfg.hidden {
            return Err(NeuralError::ShapeMismatch {
                op: "transformer_decoder".into(),
                detail: format!(
                    "target dim {dim} / memory dim {mem_dim}, expected {}",
                    self.cfg.hidden
                ),
            });
        }
        let mut h = y;
        for block in &self.blocks {
            let normed = block.ln1.forward(g, store, h);
            let sa = block
                .self_attn
                .forward(g, store, normed, normed, normed, self_mask)?;
            let sa = g.dropout(sa);
            h = g.add(h, sa);

            let normed = block.ln2.forward(g, store, h);
            let ca = block
                .cross_attn
                .forward(g, store, normed, memory, memory, memory_mask)?;
            let ca = g.dropout(ca);
            h = g.add(h, ca);

            let normed = block.ln3.forward(g, store, h);
            let ff = block.ff.forward(g, store, normed)?;
            let ff = g.dropout(ff);
            h = g.add(h, ff);
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn rand_values(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_layer_encoder_is_identity() {
        let mut store = ParamStore::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = TransformerConfig::new(0, 2, 8).unwrap();
        let enc = TransformerEncoder::new(&mut store, &mut rng, "enc", cfg).unwrap();
        let mut g = Graph::new();
        let values = rand_values(&mut rng, 24);
        let x = g.constant(3, 8, values.clone());
        let y = enc.forward(&mut g, &store, x, None).unwrap();
        assert_eq!(g.values(y), values.as_slice());
    }

    #[test]
    fn zero_layer_decoder_is_identity() {
        let mut store = ParamStore::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = TransformerConfig::new(0, 2, 8).unwrap();
        let dec = TransformerDecoder::new(&mut store, &mut rng, "dec", cfg).unwrap();
        let mut g = Graph::new();
        let values = rand_values(&mut rng, 16);
        let y = g.constant(2, 8, values.clone());
        let mem = g.constant(3, 8, rand_values(&mut rng, 24));
        let out = dec.forward(&mut g, &store, y, mem, None, None).unwrap();
        assert_eq!(g.values(out), values.as_slice());
    }

    #[test]
    fn causal_decoder_ignores_future_positions_bitwise() {
        let mut store = ParamStore::new(42);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let cfg = TransformerConfig::new(2, 2, 8).unwrap();
        let dec = TransformerDecoder::new(&mut store, &mut rng, "dec", cfg).unwrap();

        let mem_values = rand_values(&mut rng, 3 * 8);
        let base = rand_values(&mut rng, 4 * 8);
        let mut perturbed = base.clone();
        for v in &mut perturbed[2 * 8..] {
            *v += 7.5; // change target rows 2 and 3
        }

        let run = |vals: &[f64]| -> Vec<f64> {
            let mut g = Graph::new();
            let y = g.constant(4, 8, vals.to_vec());
            let mem = g.constant(3, 8, mem_values.clone());
            let mask = AttnMask::causal(4);
            let out = dec.forward(&mut g, &store, y, mem, Some(&mask), None).unwrap();
            g.values(out).to_vec()
        };
        let a = run(&base);
        let b = run(&perturbed);
        // rows 0 and 1 must match bit for bit
        assert_eq!(&a[..16], &b[..16]);
        assert_ne!(&a[16..], &b[16..]);
    }

    #[test]
    fn encoder_rejects_wrong_width() {
        let mut store = ParamStore::new(1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = TransformerConfig::new(1, 2, 8).unwrap();
        let enc = TransformerEncoder::new(&mut store, &mut rng, "enc", cfg).unwrap();
        let mut g = Graph::new();
        let x = g.constant(3, 6, vec![0.0; 18]);
        assert!(enc.forward(&mut g, &store, x, None).is_err());
    }
}
