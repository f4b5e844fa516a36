//! Frame selection: learn which frames of an interpolated dictionary
//! sequence survive in continuous signing.
//!
//! Each input frame is represented by its skeleton coordinates, a learned
//! gloss embedding (or the shared interpolation embedding), a within-sign
//! progress counter, and a global progress counter. A transformer encoder
//! with cross-attention to the encoded gloss sequence emits one keep/skip
//! probability per frame; training targets come from collapsing the DTW
//! alignment between the interpolated sequence and the continuous target.

use crate::align::{
    alignment_metrics, apply_selection, collapse_path, cost_matrix, dtw, AlignError, SelectionMask,
};
use crate::neural::{
    add_positional, binary_cross_entropy, load_checkpoint, load_into, save_checkpoint,
    EmbeddingTable, Graph, Linear, NeuralError, NodeId, OptimizerState, ParamStore, Tensor,
    TransformerConfig, TransformerDecoder, TransformerEncoder, PROB_EPSILON,
};
use crate::parallel::par_map;
use crate::pose::{
    build_interpolated_sequence, stack_dictionary, DictionaryStore, FrameProvenance,
    InterpolatedSequence, PoseError, PoseSequence,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

/// Width of the learned per-frame gloss/interpolation embedding.
pub const FRAME_EMBED_DIM: usize = 16;

#[derive(Debug, Error)]
pub enum FsNetError {
    #[error("unknown gloss `{0}`")]
    UnknownGloss(String),
    #[error("representation mismatch: {0}")]
    ReprMismatch(String),
    #[error("empty example set")]
    EmptyExampleSet,
    #[error("model file error: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Gloss identifiers known to a frame-selection model, plus the shared
/// interpolation slot at index `len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlossVocab {
    glosses: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl GlossVocab {
    pub fn new(glosses: Vec<String>) -> Result<Self, FsNetError> {
        let mut index = BTreeMap::new();
        for (i, g) in glosses.iter().enumerate() {
            if g.is_empty() || g.chars().any(char::is_whitespace) {
                return Err(FsNetError::ModelFormat(format!(
                    "gloss `{g}` is empty or contains whitespace"
                )));
            }
            if index.insert(g.clone(), i).is_some() {
                return Err(FsNetError::ModelFormat(format!("duplicate gloss `{g}`")));
            }
        }
        Ok(Self { glosses, index })
    }

    pub fn from_store(store: &DictionaryStore) -> Self {
        let glosses: Vec<String> = store.glosses().map(|g| g.to_string()).collect();
        Self::new(glosses).expect("store keys are unique")
    }

    pub fn id(&self, gloss: &str) -> Option<usize> {
        self.index.get(gloss).copied()
    }

    pub fn gloss(&self, id: usize) -> Option<&str> {
        self.glosses.get(id).map(|s| s.as_str())
    }

    pub fn glosses(&self) -> &[String] {
        &self.glosses
    }

    pub fn len(&self) -> usize {
        self.glosses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.glosses.is_empty()
    }

    /// Embedding slot shared by every interpolation frame.
    pub fn interp_id(&self) -> usize {
        self.glosses.len()
    }

    pub fn ids_for<S: AsRef<str>>(&self, glosses: &[S]) -> Result<Vec<usize>, FsNetError> {
        glosses
            .iter()
            .map(|g| {
                self.id(g.as_ref())
                    .ok_or_else(|| FsNetError::UnknownGloss(g.as_ref().to_string()))
            })
            .collect()
    }
}

/// Per-frame model input: coordinates, embedding slot and the two counters.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousRepr {
    pub coord_dim: usize,
    pub coords: Vec<f64>,
    pub slot_ids: Vec<usize>,
    pub c_sign: Vec<f64>,
    pub c_global: Vec<f64>,
}

impl ContinuousRepr {
    pub fn len(&self) -> usize {
        self.slot_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slot_ids.is_empty()
    }
}

/// Build the per-frame representation from provenance.
///
/// Within a sign: `c_sign = (p-1)/(P-1)` (0 when P = 1); within an
/// interpolation block: `c_sign = j/(n_li+1)` and the slot is the shared
/// interpolation id. Globally: `c_global = (q-1)/(Q-1)`.
pub fn build_representation(
    iseq: &InterpolatedSequence,
    gloss_ids: &[usize],
    vocab: &GlossVocab,
) -> Result<ContinuousRepr, FsNetError> {
    for &id in gloss_ids {
        if id >= vocab.len() {
            return Err(FsNetError::ReprMismatch(format!(
                "gloss id {id} out of range {}",
                vocab.len()
            )));
        }
    }
    let sign_count = iseq
        .provenance
        .iter()
        .filter_map(|p| match p {
            FrameProvenance::Sign { gloss_index, .. } => Some(*gloss_index + 1),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    if sign_count != gloss_ids.len() {
        return Err(FsNetError::ReprMismatch(format!(
            "{} gloss ids for {sign_count} signs in provenance",
            gloss_ids.len()
        )));
    }

    let q_total = iseq.len_q();
    let coord_dim = iseq.seq.spec.coord_count();
    let mut coords = Vec::with_capacity(q_total * coord_dim);
    let mut slot_ids = Vec::with_capacity(q_total);
    let mut c_sign = Vec::with_capacity(q_total);
    let mut c_global = Vec::with_capacity(q_total);

    for (q, (frame, prov)) in iseq.seq.frames.iter().zip(&iseq.provenance).enumerate() {
        coords.extend_from_slice(&frame.coords);
        match *prov {
            FrameProvenance::Sign {
                gloss_index,
                position,
                sign_len,
            } => {
                slot_ids.push(gloss_ids[gloss_index]);
                c_sign.push(if sign_len <= 1 {
                    0.0
                } else {
                    (position - 1) as f64 / (sign_len - 1) as f64
                });
            }
            FrameProvenance::Interp { position, .. } => {
                slot_ids.push(vocab.interp_id());
                c_sign.push(position as f64 / (iseq.n_li + 1) as f64);
            }
        }
        c_global.push(if q_total <= 1 {
            0.0
        } else {
            q as f64 / (q_total - 1) as f64
        });
    }

    Ok(ContinuousRepr {
        coord_dim,
        coords,
        slot_ids,
        c_sign,
        c_global,
    })
}

/// The frame-selection configuration used throughout: 2 layers, 4 heads,
/// hidden size 64.
pub fn default_fsnet_config() -> TransformerConfig {
    TransformerConfig::new(2, 4, 64).expect("static config is valid")
}

#[derive(Debug)]
pub struct FsNetModel {
    pub cfg: TransformerConfig,
    pub gloss_vocab: GlossVocab,
    pub joint_count: usize,
    pub dims: usize,
    pub n_li: usize,
    pub store: ParamStore,
    frame_embed: EmbeddingTable,
    input_proj: Linear,
    gloss_embed: EmbeddingTable,
    gloss_encoder: TransformerEncoder,
    selector: TransformerDecoder,
    head: Linear,
    pub positional_encoding: bool,
}

impl FsNetModel {
    pub fn new(
        gloss_vocab: GlossVocab,
        joint_count: usize,
        dims: usize,
        cfg: TransformerConfig,
        n_li: usize,
        seed: u64,
    ) -> Result<Self, FsNetError> {
        cfg.validate()?;
        let mut store = ParamStore::new(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input_dim = joint_count * dims + FRAME_EMBED_DIM + 2;
        let frame_embed = EmbeddingTable::new(
            &mut store,
            &mut rng,
            "frame_embed",
            gloss_vocab.len() + 1,
            FRAME_EMBED_DIM,
        )?;
        let input_proj = Linear::new(&mut store, &mut rng, "input_proj", input_dim, cfg.hidden)?;
        let gloss_embed = EmbeddingTable::new(
            &mut store,
            &mut rng,
            "gloss_embed",
            gloss_vocab.len(),
            cfg.hidden,
        )?;
        let gloss_encoder = TransformerEncoder::new(&mut store, &mut rng, "gloss_encoder", cfg)?;
        let selector = TransformerDecoder::new(&mut store, &mut rng, "selector", cfg)?;
        let head = Linear::new(&mut store, &mut rng, "head", cfg.hidden, 1)?;
        Ok(Self {
            cfg,
            gloss_vocab,
            joint_count,
            dims,
            n_li,
            store,
            frame_embed,
            input_proj,
            gloss_embed,
            gloss_encoder,
            selector,
            head,
            positional_encoding: true,
        })
    }

    fn encode_gloss_in(
        &self,
        store: &ParamStore,
        g: &mut Graph,
        gloss_ids: &[usize],
    ) -> Result<NodeId, FsNetError> {
        for &id in gloss_ids {
            if id >= self.gloss_vocab.len() {
                return Err(FsNetError::UnknownGloss(format!("id {id}")));
            }
        }
        let e = self.gloss_embed.forward(g, store, gloss_ids)?;
        let e = if self.positional_encoding {
            add_positional(g, e)
        } else {
            e
        };
        Ok(self.gloss_encoder.forward(g, store, e, None)?)
    }

    fn probs_in(
        &self,
        store: &ParamStore,
        g: &mut Graph,
        repr: &ContinuousRepr,
        gloss_memory: NodeId,
    ) -> Result<NodeId, FsNetError> {
        let q = repr.len();
        if q == 0 {
            return Err(FsNetError::ReprMismatch("empty representation".into()));
        }
        if repr.coord_dim != self.joint_count * self.dims {
            return Err(FsNetError::ReprMismatch(format!(
                "representation coord dim {} vs model {}",
                repr.coord_dim,
                self.joint_count * self.dims
            )));
        }
        let coords = g.constant(q, repr.coord_dim, repr.coords.clone());
        let embed = self.frame_embed.forward(g, store, &repr.slot_ids)?;
        let mut counters = Vec::with_capacity(q * 2);
        for i in 0..q {
            counters.push(repr.c_sign[i]);
            counters.push(repr.c_global[i]);
        }
        let counters = g.constant(q, 2, counters);
        let x = g.concat_cols(&[coords, embed, counters]);
        let h = self.input_proj.forward(g, store, x)?;
        let h = if self.positional_encoding {
            add_positional(g, h)
        } else {
            h
        };
        let h = self.selector.forward(g, store, h, gloss_memory, None, None)?;
        let logits = self.head.forward(g, store, h)?;
        Ok(g.sigmoid(logits))
    }

    /// Joint loss graph for one training example; returns (loss, probs).
    fn loss_graph_in(
        &self,
        store: &ParamStore,
        g: &mut Graph,
        repr: &ContinuousRepr,
        gloss_ids: &[usize],
        target: &SelectionMask,
    ) -> Result<(NodeId, NodeId), FsNetError> {
        if target.len() != repr.len() {
            return Err(FsNetError::ReprMismatch(format!(
                "target mask length {} vs representation {}",
                target.len(),
                repr.len()
            )));
        }
        let memory = self.encode_gloss_in(store, g, gloss_ids)?;
        let probs = self.probs_in(store, g, repr, memory)?;
        let targets: Vec<f64> = target
            .bits()
            .iter()
            .map(|b| if *b { 1.0 } else { 0.0 })
            .collect();
        let loss = binary_cross_entropy(g, probs, &targets)?;
        Ok((loss, probs))
    }

    /// Self-attention encoding of the gloss sequence, one row per gloss.
    pub fn encode_gloss(&self, gloss_ids: &[usize]) -> Result<Tensor, FsNetError> {
        let mut g = Graph::new();
        let memory = self.encode_gloss_in(&self.store, &mut g, gloss_ids)?;
        Ok(g.value_tensor(memory))
    }

    /// Per-frame selection probabilities in (0,1), one per input frame.
    pub fn forward(
        &self,
        repr: &ContinuousRepr,
        gloss_memory: &Tensor,
    ) -> Result<Vec<f64>, FsNetError> {
        let (rows, cols) = gloss_memory.matrix_dims();
        if cols != self.cfg.hidden {
            return Err(FsNetError::ReprMismatch(format!(
                "gloss memory width {cols} vs hidden {}",
                self.cfg.hidden
            )));
        }
        let mut g = Graph::new();
        let memory = g.constant(rows, cols, gloss_memory.values.clone());
        let probs = self.probs_in(&self.store, &mut g, repr, memory)?;
        Ok(g.values(probs).to_vec())
    }
}

/// Alignment prediction over a built representation; the probabilistic form
/// of the per-frame keep/skip decisions.
pub fn fsnet_forward(
    model: &FsNetModel,
    repr: &ContinuousRepr,
    gloss_memory: &Tensor,
) -> Result<Vec<f64>, FsNetError> {
    model.forward(repr, gloss_memory)
}

/// Two-term binary cross entropy between predicted probabilities and the
/// target mask, with probabilities clamped to `[eps, 1-eps]`.
pub fn fsnet_loss(probs: &[f64], target_mask: &SelectionMask) -> Result<f64, FsNetError> {
    if probs.len() != target_mask.len() {
        return Err(FsNetError::ReprMismatch(format!(
            "{} probabilities vs mask length {}",
            probs.len(),
            target_mask.len()
        )));
    }
    let mut total = 0.0;
    for (p, b) in probs.iter().zip(target_mask.bits()) {
        let p = p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
        let t = if *b { 1.0 } else { 0.0 };
        total += t * p.ln() + (1.0 - t) * (1.0 - p).ln();
    }
    Ok(-total / probs.len() as f64)
}

/// One supervised alignment example: the interpolated input, the continuous
/// target and the collapsed DTW mask over the input frames.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub glosses: Vec<String>,
    pub iseq: InterpolatedSequence,
    pub target: PoseSequence,
    pub target_mask: SelectionMask,
}

/// Assemble the interpolated sequence, align it to the target with DTW and
/// collapse the path into the supervision mask.
pub fn make_training_example<S: AsRef<str>>(
    glosses: &[S],
    store: &DictionaryStore,
    target: &PoseSequence,
    n_li: usize,
) -> Result<TrainingExample, FsNetError> {
    let stack = stack_dictionary(glosses, store)?;
    let iseq = build_interpolated_sequence(&stack, n_li)?;
    let costs = cost_matrix(&iseq.seq, target)?;
    let path = dtw(&costs);
    let target_mask = collapse_path(&path, &costs);
    Ok(TrainingExample {
        glosses: glosses.iter().map(|g| g.as_ref().to_string()).collect(),
        iseq,
        target: target.clone(),
        target_mask,
    })
}

/// Batch example construction; the DTW precompute is independent per segment
/// and runs through the parallel map.
pub fn make_training_examples(
    segments: &[(Vec<String>, PoseSequence)],
    store: &DictionaryStore,
    n_li: usize,
) -> Result<Vec<TrainingExample>, FsNetError> {
    par_map(segments, |(glosses, target)| {
        make_training_example(glosses, store, target, n_li)
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone)]
pub struct FsNetReport {
    pub epoch_loss: Vec<f64>,
    pub holdout_f1: Vec<f64>,
    pub epochs_run: usize,
}

type Prepared = (ContinuousRepr, Vec<usize>, SelectionMask);

fn prepare(model: &FsNetModel, examples: &[TrainingExample]) -> Result<Vec<Prepared>, FsNetError> {
    examples
        .iter()
        .map(|ex| {
            let ids = model.gloss_vocab.ids_for(&ex.glosses)?;
            let repr = build_representation(&ex.iseq, &ids, &model.gloss_vocab)?;
            Ok((repr, ids, ex.target_mask.clone()))
        })
        .collect()
}

fn mean_mask_f1(model: &FsNetModel, examples: &[Prepared]) -> Result<f64, FsNetError> {
    let results = par_map(examples, |(repr, ids, mask)| -> Result<f64, FsNetError> {
        let memory = model.encode_gloss(ids)?;
        let probs = model.forward(repr, &memory)?;
        let pred = SelectionMask::new(probs.iter().map(|p| *p >= 0.5).collect());
        Ok(alignment_metrics(&pred, mask)?.f1)
    });
    let mut sum = 0.0;
    for r in &results {
        match r {
            Ok(f1) => sum += f1,
            Err(_) => {
                return results.into_iter().collect::<Result<Vec<_>, _>>().map(|_| 0.0);
            }
        }
    }
    Ok(sum / examples.len() as f64)
}

/// Adam training over precomputed examples, deterministic for a given seed.
/// Held-out mask F1 is recorded each epoch (train-set F1 when no held-out
/// examples are given); training stops early once it saturates.
pub fn train_fsnet(
    model: &mut FsNetModel,
    train: &[TrainingExample],
    held_out: &[TrainingExample],
    epochs: usize,
    seed: u64,
    learning_rate: f64,
) -> Result<FsNetReport, FsNetError> {
    if train.is_empty() {
        return Err(FsNetError::EmptyExampleSet);
    }
    let train_prepared = prepare(model, train)?;
    let holdout_prepared = prepare(model, held_out)?;
    let mut opt = OptimizerState::new(&model.store, learning_rate);
    let mut report = FsNetReport {
        epoch_loss: Vec::new(),
        holdout_f1: Vec::new(),
        epochs_run: 0,
    };
    for epoch in 0..epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9E3779B97F4A7C15));
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        for &i in &order {
            let (repr, ids, mask) = &train_prepared[i];
            let mut g = Graph::new();
            if model.cfg.dropout > 0.0 {
                let dropout_seed = seed
                    ^ (epoch as u64).wrapping_mul(0xA076_1D64_78BD_642F)
                    ^ (i as u64).wrapping_mul(0xE703_7ED1_A0B4_28DB);
                g.set_dropout(model.cfg.dropout, ChaCha8Rng::seed_from_u64(dropout_seed));
            }
            let (loss, _) = model.loss_graph_in(&model.store, &mut g, repr, ids, mask)?;
            loss_sum += g.value_scalar(loss);
            g.backward(loss);
            model.store.zero_grads();
            g.accumulate_into(&mut model.store);
            crate::neural::adam_step(&mut model.store, &mut opt)?;
        }
        report.epoch_loss.push(loss_sum / train.len() as f64);
        let f1 = if holdout_prepared.is_empty() {
            mean_mask_f1(model, &train_prepared)?
        } else {
            mean_mask_f1(model, &holdout_prepared)?
        };
        report.holdout_f1.push(f1);
        report.epochs_run = epoch + 1;
        if f1 >= 0.985 && epoch + 1 >= 3 {
            break;
        }
    }
    model.store.clear_grads();
    Ok(report)
}

/// Full gloss-to-pose production: assemble the interpolated sequence, score
/// every frame, threshold at `threshold` (a tie selects), force the final
/// frame on, and keep the selected frames.
pub fn produce_continuous<S: AsRef<str>>(
    model: &FsNetModel,
    glosses: &[S],
    store: &DictionaryStore,
    n_li: usize,
    threshold: f64,
) -> Result<PoseSequence, FsNetError> {
    let stack = stack_dictionary(glosses, store)?;
    let iseq = build_interpolated_sequence(&stack, n_li)?;
    let ids = model.gloss_vocab.ids_for(glosses)?;
    let repr = build_representation(&iseq, &ids, &model.gloss_vocab)?;
    let memory = model.encode_gloss(&ids)?;
    let probs = model.forward(&repr, &memory)?;
    let mut bits: Vec<bool> = probs.iter().map(|p| *p >= threshold).collect();
    let last = bits.len() - 1;
    bits[last] = true; // selecting the final dictionary frame ends the sequence
    apply_selection(&iseq, &SelectionMask::new(bits)).map_err(FsNetError::from)
}

// ---- model persistence ------------------------------------------------

fn meta_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta");
    std::path::PathBuf::from(p)
}

/// Write the tensor checkpoint plus a `.meta` sidecar carrying the
/// configuration and gloss vocabulary.
pub fn save_fsnet(model: &FsNetModel, path: impl AsRef<Path>) -> Result<(), FsNetError> {
    let path = path.as_ref();
    save_checkpoint(&model.store, path)?;
    let mut meta = String::from("FSNETMETA1\n");
    let _ = writeln!(meta, "layers={}", model.cfg.layers);
    let _ = writeln!(meta, "heads={}", model.cfg.heads);
    let _ = writeln!(meta, "hidden={}", model.cfg.hidden);
    let _ = writeln!(meta, "ff_mult={}", model.cfg.ff_mult);
    let _ = writeln!(meta, "dropout={}", model.cfg.dropout);
    let _ = writeln!(meta, "posenc={}", u8::from(model.positional_encoding));
    let _ = writeln!(meta, "n_li={}", model.n_li);
    let _ = writeln!(meta, "joints={}", model.joint_count);
    let _ = writeln!(meta, "dims={}", model.dims);
    let _ = writeln!(meta, "glosses={}", model.gloss_vocab.glosses().join(" "));
    let mp = meta_path(path);
    std::fs::write(&mp, meta).map_err(|e| FsNetError::Io {
        path: mp.display().to_string(),
        source: e,
    })
}

pub(crate) fn parse_meta_lines<'a>(
    text: &'a str,
    magic: &str,
) -> Result<BTreeMap<&'a str, &'a str>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(magic) {
        return Err(format!("missing `{magic}` header"));
    }
    let mut map = BTreeMap::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("bad meta line `{line}`"))?;
        map.insert(k, v);
    }
    Ok(map)
}

pub(crate) fn meta_get<T: std::str::FromStr>(
    map: &BTreeMap<&str, &str>,
    key: &str,
) -> Result<T, String> {
    map.get(key)
        .ok_or_else(|| format!("missing meta key `{key}`"))?
        .parse()
        .map_err(|_| format!("bad value for meta key `{key}`"))
}

/// Rebuild a model from a checkpoint and its `.meta` sidecar.
pub fn load_fsnet(path: impl AsRef<Path>) -> Result<FsNetModel, FsNetError> {
    let path = path.as_ref();
    let mp = meta_path(path);
    let text = std::fs::read_to_string(&mp).map_err(|e| FsNetError::Io {
        path: mp.display().to_string(),
        source: e,
    })?;
    let map = parse_meta_lines(&text, "FSNETMETA1").map_err(FsNetError::ModelFormat)?;
    let cfg = TransformerConfig {
        layers: meta_get(&map, "layers").map_err(FsNetError::ModelFormat)?,
        heads: meta_get(&map, "heads").map_err(FsNetError::ModelFormat)?,
        hidden: meta_get(&map, "hidden").map_err(FsNetError::ModelFormat)?,
        ff_mult: meta_get(&map, "ff_mult").map_err(FsNetError::ModelFormat)?,
        dropout: meta_get(&map, "dropout").map_err(FsNetError::ModelFormat)?,
    };
    let glosses: Vec<String> = map
        .get("glosses")
        .ok_or_else(|| FsNetError::ModelFormat("missing meta key `glosses`".into()))?
        .split_whitespace()
        .map(|s| s.to_string())
        .collect();
    let mut model = FsNetModel::new(
        GlossVocab::new(glosses)?,
        meta_get(&map, "joints").map_err(FsNetError::ModelFormat)?,
        meta_get(&map, "dims").map_err(FsNetError::ModelFormat)?,
        cfg,
        meta_get(&map, "n_li").map_err(FsNetError::ModelFormat)?,
        0,
    )?;
    model.positional_encoding =
        meta_get::<u8>(&map, "posenc").map_err(FsNetError::ModelFormat)? != 0;
    let loaded = load_checkpoint(path)?;
    load_into(&mut model.store, &loaded)?;
    Ok(model)
}
