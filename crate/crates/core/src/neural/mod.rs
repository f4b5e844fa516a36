//! Minimal differentiable-computation substrate.
//!
//! Everything runs in double precision on a per-forward [`Graph`]: each op
//! appends a node eagerly (creation order is a topological order), and
//! [`Graph::backward`] walks the nodes in reverse accumulating gradients.
//! Parameters live in a [`ParamStore`] with deterministic insertion order;
//! [`adam_step`] consumes accumulated gradients. Analytic gradients are
//! verified against central finite differences by [`grad_check`].

mod checkpoint;
mod gradcheck;
mod graph;
mod layers;
mod optim;
mod transformer;

pub use checkpoint::{load_checkpoint, load_into, save_checkpoint, CHECKPOINT_MAGIC};
pub use gradcheck::{grad_check, grad_check_params};
pub use graph::{
    binary_cross_entropy, cross_entropy, linear, softmax_cols, softmax_rows, Graph, NodeId,
    PROB_EPSILON,
};
pub use layers::{
    add_positional, sinusoidal_encoding, AttnMask, EmbeddingTable, FeedForward, LayerNorm, Linear,
    MultiHeadAttention,
};
pub use optim::{adam_step, OptimizerState};
pub use transformer::{TransformerDecoder, TransformerEncoder};

use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: String, detail: String },
    #[error("parameter `{0}` already exists")]
    DuplicateParam(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("missing gradient for parameter `{0}`")]
    MissingGrad(String),
    #[error("target {index} out of range for vocabulary {vocab}")]
    TargetOutOfRange { index: usize, vocab: usize },
    #[error("no supervised positions")]
    NoSupervisedPositions,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("checkpoint format error: {0}")]
    CheckpointFormat(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Dense value with shape, optionally carrying an accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self, NeuralError> {
        let numel: usize = shape.iter().product();
        if values.len() != numel {
            return Err(NeuralError::ShapeMismatch {
                op: "tensor".into(),
                detail: format!("shape {shape:?} wants {numel} values, got {}", values.len()),
            });
        }
        Ok(Self {
            shape,
            values,
            grad: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Self {
            shape,
            values: vec![0.0; numel],
            grad: None,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: vec![1],
            values: vec![v],
            grad: None,
        }
    }

    pub fn numel(&self) -> usize {
        self.values.len()
    }

    /// (rows, cols) view: rank-1 tensors are one row, scalars are 1x1.
    pub fn matrix_dims(&self) -> (usize, usize) {
        match self.shape.len() {
            0 => (1, 1),
            1 => (1, self.shape[0]),
            _ => (
                self.shape[..self.shape.len() - 1].iter().product(),
                self.shape[self.shape.len() - 1],
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone)]
struct Param {
    name: String,
    tensor: Tensor,
}

/// Named parameters in deterministic insertion order.
#[derive(Debug, Clone)]
pub struct ParamStore {
    params: Vec<Param>,
    index: BTreeMap<String, usize>,
    pub rng_seed: u64,
}

impl ParamStore {
    pub fn new(rng_seed: u64) -> Self {
        Self {
            params: Vec::new(),
            index: BTreeMap::new(),
            rng_seed,
        }
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<ParamId, NeuralError> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(NeuralError::DuplicateParam(name));
        }
        let id = ParamId(self.params.len());
        self.index.insert(name.clone(), id.0);
        self.params.push(Param { name, tensor });
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].tensor
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|i| &self.params[*i].tensor)
    }

    pub fn set_values(&mut self, name: &str, values: &[f64]) -> Result<(), NeuralError> {
        let idx = *self
            .index
            .get(name)
            .ok_or_else(|| NeuralError::UnknownParam(name.to_string()))?;
        let t = &mut self.params[idx].tensor;
        if values.len() != t.values.len() {
            return Err(NeuralError::ShapeMismatch {
                op: "set_values".into(),
                detail: format!("{name}: {} values, expected {}", values.len(), t.values.len()),
            });
        }
        t.values.copy_from_slice(values);
        Ok(())
    }

    pub fn values_mut(&mut self, id: ParamId) -> &mut Vec<f64> {
        &mut self.params[id.0].tensor.values
    }

    pub fn accumulate_grad(&mut self, id: ParamId, grad: &[f64]) {
        let t = &mut self.params[id.0].tensor;
        debug_assert_eq!(grad.len(), t.values.len());
        match &mut t.grad {
            Some(g) => {
                for (gi, d) in g.iter_mut().zip(grad) {
                    *gi += d;
                }
            }
            None => t.grad = Some(grad.to_vec()),
        }
    }

    /// Reset every gradient to zeros (present but empty accumulation).
    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            let n = p.tensor.values.len();
            match &mut p.tensor.grad {
                Some(g) => g.iter_mut().for_each(|v| *v = 0.0),
                None => p.tensor.grad = Some(vec![0.0; n]),
            }
        }
    }

    pub fn clear_grads(&mut self) {
        for p in &mut self.params {
            p.tensor.grad = None;
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Iterate `(name, tensor)` in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|p| (p.name.as_str(), &p.tensor))
    }

    pub fn total_values(&self) -> usize {
        self.params.iter().map(|p| p.tensor.numel()).sum()
    }
}

/// Transformer hyper-parameters; `hidden` must divide evenly into `heads`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformerConfig {
    pub layers: usize,
    pub heads: usize,
    pub hidden: usize,
    pub ff_mult: usize,
    pub dropout: f64,
}

impl TransformerConfig {
    pub fn new(layers: usize, heads: usize, hidden: usize) -> Result<Self, NeuralError> {
        let cfg = Self {
            layers,
            heads,
            hidden,
            ff_mult: 4,
            dropout: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.heads == 0 || self.hidden == 0 {
            return Err(NeuralError::InvalidConfig("heads and hidden must be > 0".into()));
        }
        if self.hidden % self.heads != 0 {
            return Err(NeuralError::InvalidConfig(format!(
                "hidden {} not divisible by heads {}",
                self.hidden, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(NeuralError::InvalidConfig(format!(
                "dropout {} outside [0,1)",
                self.dropout
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_store_insertion_order_and_names() {
        let mut store = ParamStore::new(1);
        store.add("b", Tensor::zeros(vec![2])).unwrap();
        store.add("a", Tensor::zeros(vec![3])).unwrap();
        let names: Vec<&str> = store.iter().map(|(n, _)| n).collect();
        assert_eq!(names, vec!["b", "a"]);
        assert!(store.add("a", Tensor::zeros(vec![1])).is_err());
    }

    #[test]
    fn tensor_shape_validation() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
    }

    #[test]
    fn config_divisibility() {
        assert!(TransformerConfig::new(2, 4, 64).is_ok());
        assert!(TransformerConfig::new(2, 3, 64).is_err());
    }
}
