//! Text-to-gloss translation: an encoder-decoder transformer trained with
//! teacher forcing, decoded greedily until `<eos>`.

mod metrics;

pub use metrics::{bleu4, bleu4_with_options, rouge_l};

use crate::neural::{
    add_positional, cross_entropy, AttnMask, EmbeddingTable, Graph, Linear, NeuralError, NodeId,
    OptimizerState, ParamStore, Tensor, TransformerConfig, TransformerDecoder, TransformerEncoder,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use thiserror::Error;

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const RESERVED_TOKENS: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

#[derive(Debug, Error)]
pub enum TranslateError {
    #[error("vocabulary error: {0}")]
    Vocabulary(String),
    #[error("invalid token sequence: {0}")]
    InvalidSequence(String),
    #[error("hypothesis/reference count mismatch: {0} vs {1}")]
    CountMismatch(usize, usize),
    #[error("reference {0} is empty")]
    EmptyReference(usize),
    #[error("empty source sequence")]
    EmptySource,
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

/// Token/index bijection with the four reserved control tokens up front.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    /// Build from a token stream: reserved tokens first, then the distinct
    /// content tokens in sorted order.
    pub fn build<I, S>(corpus: I) -> Result<Self, TranslateError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut content: Vec<String> = corpus
            .into_iter()
            .map(|s| s.as_ref().to_string())
            .collect();
        content.sort();
        content.dedup();
        let mut tokens: Vec<String> = RESERVED_TOKENS.iter().map(|s| s.to_string()).collect();
        for t in content {
            if t.chars().any(char::is_whitespace) || t.is_empty() {
                return Err(TranslateError::Vocabulary(format!(
                    "token `{t}` is empty or contains whitespace"
                )));
            }
            if RESERVED_TOKENS.contains(&t.as_str()) {
                continue;
            }
            tokens.push(t);
        }
        Self::from_tokens(tokens)
    }

    /// Rebuild from an explicit token list (index order), e.g. from a
    /// checkpoint sidecar. The reserved prefix must be intact.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, TranslateError> {
        if tokens.len() < RESERVED_TOKENS.len()
            || tokens[..RESERVED_TOKENS.len()]
                .iter()
                .zip(RESERVED_TOKENS)
                .any(|(a, b)| a != b)
        {
            return Err(TranslateError::Vocabulary(
                "vocabulary must start with <pad>, <bos>, <eos>, <unk>".into(),
            ));
        }
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(TranslateError::Vocabulary(format!("duplicate token `{t}`")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(|s| s.as_str())
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Map words to indices, falling back to `<unk>`.
    pub fn encode<S: AsRef<str>>(&self, words: &[S]) -> TokenSequence {
        TokenSequence {
            indices: words
                .iter()
                .map(|w| self.id(w.as_ref()).unwrap_or(UNK))
                .collect(),
        }
    }

    pub fn decode(&self, seq: &TokenSequence) -> Vec<String> {
        seq.indices
            .iter()
            .map(|&i| self.tokens[i].clone())
            .collect()
    }
}

/// Content token indices; control tokens (`<bos>`/`<eos>`) never appear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    indices: Vec<usize>,
}

impl TokenSequence {
    pub fn new(indices: Vec<usize>, vocab_len: usize) -> Result<Self, TranslateError> {
        for &i in &indices {
            if i >= vocab_len {
                return Err(TranslateError::InvalidSequence(format!(
                    "index {i} out of range {vocab_len}"
                )));
            }
            if i == BOS || i == EOS {
                return Err(TranslateError::InvalidSequence(
                    "control tokens are not content".into(),
                ));
            }
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Encoder-decoder translation model with sinusoidal position encodings.
#[derive(Debug)]
pub struct T2GModel {
    pub cfg: TransformerConfig,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
    pub store: ParamStore,
    src_embed: EmbeddingTable,
    tgt_embed: EmbeddingTable,
    encoder: TransformerEncoder,
    decoder: TransformerDecoder,
    out_proj: Linear,
    pub positional_encoding: bool,
    /// Recorded configuration flag; projection weights are untied.
    pub tied_projection: bool,
}

/// The text-to-gloss configuration used throughout: 2 layers, 4 heads,
/// hidden size 128.
pub fn default_t2g_config() -> TransformerConfig {
    TransformerConfig::new(2, 4, 128).expect("static config is valid")
}

impl T2GModel {
    pub fn new(
        src_vocab: Vocabulary,
        tgt_vocab: Vocabulary,
        cfg: TransformerConfig,
        seed: u64,
    ) -> Result<Self, TranslateError> {
        cfg.validate()?;
        let mut store = ParamStore::new(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src_embed =
            EmbeddingTable::new(&mut store, &mut rng, "src_embed", src_vocab.len(), cfg.hidden)?;
        let tgt_embed =
            EmbeddingTable::new(&mut store, &mut rng, "tgt_embed", tgt_vocab.len(), cfg.hidden)?;
        let encoder = TransformerEncoder::new(&mut store, &mut rng, "encoder", cfg)?;
        let decoder = TransformerDecoder::new(&mut store, &mut rng, "decoder", cfg)?;
        let out_proj = Linear::new(&mut store, &mut rng, "out_proj", cfg.hidden, tgt_vocab.len())?;
        Ok(Self {
            cfg,
            src_vocab,
            tgt_vocab,
            store,
            src_embed,
            tgt_embed,
            encoder,
            decoder,
            out_proj,
            positional_encoding: true,
            tied_projection: false,
        })
    }

    fn embed_with_position(
        &self,
        g: &mut Graph,
        table: &EmbeddingTable,
        ids: &[usize],
    ) -> Result<NodeId, NeuralError> {
        let e = table.forward(g, &self.store, ids)?;
        Ok(if self.positional_encoding {
            add_positional(g, e)
        } else {
            e
        })
    }

    /// Build the encoder graph; returns the memory node and per-key validity
    /// (false at `<pad>` positions).
    fn encode_graph(
        &self,
        g: &mut Graph,
        src: &TokenSequence,
    ) -> Result<(NodeId, Vec<bool>), TranslateError> {
        if src.is_empty() {
            return Err(TranslateError::EmptySource);
        }
        let ids = src.indices();
        let key_valid: Vec<bool> = ids.iter().map(|&t| t != PAD).collect();
        let x = self.embed_with_position(g, &self.src_embed, ids)?;
        let mask = AttnMask::key_padding(ids.len(), &key_valid);
        let memory = self.encoder.forward(g, &self.store, x, Some(&mask))?;
        Ok((memory, key_valid))
    }

    /// Decoder + projection over `tgt_in` (usually `<bos>` followed by the
    /// target prefix) attending to `memory`.
    fn decode_graph(
        &self,
        g: &mut Graph,
        memory: NodeId,
        key_valid: &[bool],
        tgt_in: &[usize],
    ) -> Result<NodeId, TranslateError> {
        let y = self.embed_with_position(g, &self.tgt_embed, tgt_in)?;
        let causal = AttnMask::causal(tgt_in.len());
        let mem_mask = AttnMask::key_padding(tgt_in.len(), key_valid);
        let h = self
            .decoder
            .forward(g, &self.store, y, memory, Some(&causal), Some(&mem_mask))?;
        Ok(self.out_proj.forward(g, &self.store, h)?)
    }

    /// One memory vector per source token.
    pub fn encode_source(&self, src: &TokenSequence) -> Result<Tensor, TranslateError> {
        let mut g = Graph::new();
        let (memory, _) = self.encode_graph(&mut g, src)?;
        Ok(g.value_tensor(memory))
    }

    /// Autoregressive argmax decoding from `<bos>`, stopping at `<eos>` or
    /// after `max_len` output tokens. Ties resolve to the smallest index.
    pub fn greedy_translate(
        &self,
        src: &TokenSequence,
        max_len: usize,
    ) -> Result<TokenSequence, TranslateError> {
        let memory_tensor = self.encode_source(src)?;
        let key_valid: Vec<bool> = src.indices().iter().map(|&t| t != PAD).collect();
        let (rows, cols) = memory_tensor.matrix_dims();

        let mut out: Vec<usize> = Vec::new();
        while out.len() < max_len {
            let mut g = Graph::new();
            let memory = g.constant(rows, cols, memory_tensor.values.clone());
            let mut tgt_in = vec![BOS];
            tgt_in.extend_from_slice(&out);
            let logits = self.decode_graph(&mut g, memory, &key_valid, &tgt_in)?;
            let (_, vocab) = g.dims(logits);
            let last = &g.values(logits)[(tgt_in.len() - 1) * vocab..];
            let mut best = 0usize;
            for (i, v) in last.iter().enumerate() {
                if *v > last[best] {
                    best = i;
                }
            }
            if best == EOS {
                break;
            }
            out.push(best);
        }
        Ok(TokenSequence { indices: out })
    }

    /// Teacher-forced loss and argmax hits for one pair, built on `g`.
    fn pair_loss(
        &self,
        g: &mut Graph,
        src: &TokenSequence,
        tgt: &TokenSequence,
    ) -> Result<(NodeId, usize, usize), TranslateError> {
        let (memory, key_valid) = self.encode_graph(g, src)?;
        let mut tgt_in = vec![BOS];
        tgt_in.extend_from_slice(tgt.indices());
        let mut targets = tgt.indices().to_vec();
        targets.push(EOS);
        let logits = self.decode_graph(g, memory, &key_valid, &tgt_in)?;
        let loss = cross_entropy(g, logits, &targets, Some(PAD))?;
        let (_, vocab) = g.dims(logits);
        let values = g.values(logits);
        let mut hits = 0;
        for (row, &t) in targets.iter().enumerate() {
            let slice = &values[row * vocab..(row + 1) * vocab];
            let mut best = 0usize;
            for (i, v) in slice.iter().enumerate() {
                if *v > slice[best] {
                    best = i;
                }
            }
            if best == t {
                hits += 1;
            }
        }
        Ok((loss, hits, targets.len()))
    }

    /// Per-position decoder cross entropy for one pair (the evaluation-path
    /// counterpart of the training loss).
    pub fn teacher_forced_loss(
        &self,
        src: &TokenSequence,
        tgt: &TokenSequence,
    ) -> Result<f64, TranslateError> {
        let mut g = Graph::new();
        let (loss, _, _) = self.pair_loss(&mut g, src, tgt)?;
        Ok(g.value_scalar(loss))
    }
}

pub fn default_max_len(src_len: usize) -> usize {
    2 * src_len + 5
}

#[derive(Debug, Clone)]
pub struct T2GReport {
    pub epoch_loss: Vec<f64>,
    pub epoch_token_accuracy: Vec<f64>,
    pub epochs_run: usize,
}

/// Teacher-forced Adam training, deterministic for a given seed. Stops early
/// once teacher-forced token accuracy saturates.
pub fn train_t2g(
    model: &mut T2GModel,
    pairs: &[(TokenSequence, TokenSequence)],
    epochs: usize,
    seed: u64,
    learning_rate: f64,
) -> Result<T2GReport, TranslateError> {
    if pairs.is_empty() {
        return Err(TranslateError::EmptyCorpus);
    }
    let mut opt = OptimizerState::new(&model.store, learning_rate);
    let mut report = T2GReport {
        epoch_loss: Vec::new(),
        epoch_token_accuracy: Vec::new(),
        epochs_run: 0,
    };
    for epoch in 0..epochs {
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9E3779B97F4A7C15));
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut hits = 0usize;
        let mut total = 0usize;
        for &i in &order {
            let (src, tgt) = &pairs[i];
            let mut g = Graph::new();
            if model.cfg.dropout > 0.0 {
                let dropout_seed = seed
                    ^ (epoch as u64).wrapping_mul(0xA076_1D64_78BD_642F)
                    ^ (i as u64).wrapping_mul(0xE703_7ED1_A0B4_28DB);
                g.set_dropout(model.cfg.dropout, ChaCha8Rng::seed_from_u64(dropout_seed));
            }
            let (loss, h, n) = model.pair_loss(&mut g, src, tgt)?;
            loss_sum += g.value_scalar(loss);
            hits += h;
            total += n;
            g.backward(loss);
            model.store.zero_grads();
            g.accumulate_into(&mut model.store);
            crate::neural::adam_step(&mut model.store, &mut opt)?;
        }
        let acc = hits as f64 / total as f64;
        report.epoch_loss.push(loss_sum / pairs.len() as f64);
        report.epoch_token_accuracy.push(acc);
        report.epochs_run = epoch + 1;
        if acc >= 0.9995 {
            break;
        }
    }
    model.store.clear_grads();
    Ok(report)
}

/// Fraction of pairs whose greedy translation equals the reference exactly.
pub fn exact_sequence_accuracy(
    model: &T2GModel,
    pairs: &[(TokenSequence, TokenSequence)],
) -> Result<f64, TranslateError> {
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for (src, tgt) in pairs {
        let out = model.greedy_translate(src, default_max_len(src.len()))?;
        if out == *tgt {
            hits += 1;
        }
    }
    Ok(hits as f64 / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(tokens: &[&str]) -> Vocabulary {
        Vocabulary::build(tokens.iter().copied()).unwrap()
    }

    fn tiny_model(seed: u64) -> T2GModel {
        let v = vocab(&["a", "b", "c", "d"]);
        let cfg = TransformerConfig::new(1, 2, 16).unwrap();
        T2GModel::new(v.clone(), v, cfg, seed).unwrap()
    }

    #[test]
    fn vocabulary_reserved_tokens_and_bijection() {
        let v = vocab(&["b", "a", "b"]);
        assert_eq!(v.id("<pad>"), Some(PAD));
        assert_eq!(v.id("<bos>"), Some(BOS));
        assert_eq!(v.id("<eos>"), Some(EOS));
        assert_eq!(v.id("<unk>"), Some(UNK));
        assert_eq!(v.id("a"), Some(4));
        assert_eq!(v.id("b"), Some(5));
        assert_eq!(v.token(5), Some("b"));
        assert_eq!(v.len(), 6);
    }

    #[test]
    fn vocabulary_unknown_maps_to_unk() {
        let v = vocab(&["a"]);
        let seq = v.encode(&["a", "zzz"]);
        assert_eq!(seq.indices(), &[4, UNK]);
    }

    #[test]
    fn token_sequence_rejects_control_tokens() {
        assert!(TokenSequence::new(vec![BOS], 10).is_err());
        assert!(TokenSequence::new(vec![EOS], 10).is_err());
        assert!(TokenSequence::new(vec![11], 10).is_err());
        assert!(TokenSequence::new(vec![4, 5], 10).is_ok());
    }

    #[test]
    fn encode_source_shape_and_empty_error() {
        let model = tiny_model(1);
        let src = TokenSequence::new(vec![4], model.src_vocab.len()).unwrap();
        let memory = model.encode_source(&src).unwrap();
        assert_eq!(memory.matrix_dims(), (1, 16));
        let empty = TokenSequence::new(vec![], model.src_vocab.len()).unwrap();
        assert!(matches!(
            model.encode_source(&empty),
            Err(TranslateError::EmptySource)
        ));
    }

    #[test]
    fn encoder_is_position_sensitive() {
        let model = tiny_model(2);
        let a = TokenSequence::new(vec![4, 5], model.src_vocab.len()).unwrap();
        let b = TokenSequence::new(vec![5, 4], model.src_vocab.len()).unwrap();
        let ma = model.encode_source(&a).unwrap();
        let mb = model.encode_source(&b).unwrap();
        assert_ne!(ma.values, mb.values);
    }

    #[test]
    fn pad_extension_leaves_real_memory_rows_unchanged() {
        let model = tiny_model(3);
        let real = TokenSequence::new(vec![4, 6, 5], model.src_vocab.len()).unwrap();
        let padded = TokenSequence::new(vec![4, 6, 5, PAD, PAD], model.src_vocab.len()).unwrap();
        let m_real = model.encode_source(&real).unwrap();
        let m_padded = model.encode_source(&padded).unwrap();
        let width = 16;
        assert_eq!(
            &m_real.values[..3 * width],
            &m_padded.values[..3 * width],
            "real positions must be bitwise invariant to pad extension"
        );
    }

    #[test]
    fn greedy_decoding_is_deterministic_and_capped() {
        let model = tiny_model(4);
        let src = TokenSequence::new(vec![4, 5, 6], model.src_vocab.len()).unwrap();
        let a = model.greedy_translate(&src, 3).unwrap();
        let b = model.greedy_translate(&src, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.len() <= 3);
    }

    #[test]
    fn eos_biased_model_emits_empty_output() {
        let mut model = tiny_model(5);
        // force the projection to always prefer <eos>
        let name = "out_proj.b";
        let mut bias = model.store.get(name).unwrap().values.clone();
        bias.iter_mut().for_each(|v| *v = 0.0);
        bias[EOS] = 1e6;
        model.store.set_values(name, &bias).unwrap();
        let src = TokenSequence::new(vec![4, 5], model.src_vocab.len()).unwrap();
        let out = model.greedy_translate(&src, 10).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn never_eos_model_hits_the_cap() {
        let mut model = tiny_model(6);
        let name = "out_proj.b";
        let mut bias = model.store.get(name).unwrap().values.clone();
        bias.iter_mut().for_each(|v| *v = 0.0);
        bias[EOS] = -1e6;
        bias[4] = 1e6;
        model.store.set_values(name, &bias).unwrap();
        let src = TokenSequence::new(vec![5], model.src_vocab.len()).unwrap();
        let out = model.greedy_translate(&src, 3).unwrap();
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn overfit_single_pair_reaches_full_token_accuracy() {
        let mut model = tiny_model(7);
        let v_len = model.src_vocab.len();
        let pair = (
            TokenSequence::new(vec![4, 5, 6], v_len).unwrap(),
            TokenSequence::new(vec![6, 4], v_len).unwrap(),
        );
        let report = train_t2g(&mut model, &[pair.clone()], 200, 11, 1e-3).unwrap();
        assert!(
            report.epoch_token_accuracy.last().copied().unwrap() >= 1.0,
            "accuracy curve: {:?}",
            report.epoch_token_accuracy
        );
        assert!(report.epochs_run <= 200);
        let out = model.greedy_translate(&pair.0, 10).unwrap();
        assert_eq!(out, pair.1);
    }

    #[test]
    fn zero_epochs_leaves_model_unchanged() {
        let mut model = tiny_model(8);
        let before: Vec<Vec<f64>> = model.store.iter().map(|(_, t)| t.values.clone()).collect();
        let v_len = model.src_vocab.len();
        let pair = (
            TokenSequence::new(vec![4], v_len).unwrap(),
            TokenSequence::new(vec![4], v_len).unwrap(),
        );
        train_t2g(&mut model, &[pair], 0, 1, 1e-3).unwrap();
        let after: Vec<Vec<f64>> = model.store.iter().map(|(_, t)| t.values.clone()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let mut model = tiny_model(9);
        assert!(matches!(
            train_t2g(&mut model, &[], 1, 1, 1e-3),
            Err(TranslateError::EmptyCorpus)
        ));
    }

    #[test]
    fn teacher_forced_loss_matches_training_loss_path() {
        let model = tiny_model(10);
        let v_len = model.src_vocab.len();
        let src = TokenSequence::new(vec![4, 5], v_len).unwrap();
        let tgt = TokenSequence::new(vec![5], v_len).unwrap();
        let direct = model.teacher_forced_loss(&src, &tgt).unwrap();
        let mut g = Graph::new();
        let (loss, _, _) = model.pair_loss(&mut g, &src, &tgt).unwrap();
        assert_eq!(direct, g.value_scalar(loss));
    }
}
