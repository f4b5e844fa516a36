//! Dynamic time warping alignment and the 1D selection-mask machinery.
//!
//! `dtw` finds the minimal-cost monotonic path through a pairwise cost
//! matrix with steps {(1,0), (0,1), (1,1)}. `collapse_path` flattens the 2D
//! path to a per-input-frame keep/skip mask (the training target for frame
//! selection), and `apply_selection` realizes a mask as an output sequence —
//! equivalent to multiplying the input by a one-hot selection matrix.

use crate::pose::{InterpolatedSequence, PoseFrame, PoseSequence};
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid cost matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid mask: {0}")]
    InvalidMask(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Pose(#[from] crate::pose::PoseError),
}

/// Dense Q x T matrix of non-negative frame costs, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    q: usize,
    t: usize,
    values: Vec<f64>,
}

impl CostMatrix {
    pub fn new(q: usize, t: usize, values: Vec<f64>) -> Result<Self, AlignError> {
        if q == 0 || t == 0 {
            return Err(AlignError::InvalidMatrix("dimensions must be >= 1".into()));
        }
        if values.len() != q * t {
            return Err(AlignError::InvalidMatrix(format!(
                "expected {} values, got {}",
                q * t,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(AlignError::InvalidMatrix(
                "costs must be finite and non-negative".into(),
            ));
        }
        Ok(Self { q, t, values })
    }

    pub fn rows(&self) -> usize {
        self.q
    }

    pub fn cols(&self) -> usize {
        self.t
    }

    pub fn at(&self, q: usize, t: usize) -> f64 {
        self.values[q * self.t + t]
    }

    pub fn transposed(&self) -> CostMatrix {
        let mut values = vec![0.0; self.values.len()];
        for q in 0..self.q {
            for t in 0..self.t {
                values[t * self.q + q] = self.at(q, t);
            }
        }
        CostMatrix {
            q: self.t,
            t: self.q,
            values,
        }
    }
}

/// Monotonic alignment path from (0,0) to (Q-1,T-1).
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentPath2D {
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

/// Per-frame keep/skip decisions over the Q input frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionMask {
    bits: Vec<bool>,
}

impl SelectionMask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn all_ones(len: usize) -> Self {
        Self { bits: vec![true; len] }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn selected_count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    /// One line of space-separated 0/1 digits.
    pub fn to_line(&self) -> String {
        self.bits
            .iter()
            .map(|b| if *b { "1" } else { "0" })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn parse_line(line: &str) -> Result<Self, AlignError> {
        let bits = line
            .split_whitespace()
            .map(|tok| match tok {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(AlignError::InvalidMask(format!("bad digit `{other}`"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if bits.is_empty() {
            return Err(AlignError::InvalidMask("empty mask line".into()));
        }
        Ok(Self { bits })
    }
}

pub fn save_mask(mask: &SelectionMask, path: impl AsRef<Path>) -> Result<(), AlignError> {
    let path = path.as_ref();
    fs::write(path, format!("{}\n", mask.to_line())).map_err(|e| AlignError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<SelectionMask, AlignError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| AlignError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    SelectionMask::parse_line(&text)
}

/// Euclidean norm of the coordinate difference divided by the joint count.
pub fn frame_distance(a: &PoseFrame, b: &PoseFrame, joint_count: usize) -> Result<f64, AlignError> {
    if a.coords.len() != b.coords.len() {
        return Err(AlignError::ShapeMismatch(format!(
            "frames have {} vs {} coordinates",
            a.coords.len(),
            b.coords.len()
        )));
    }
    if joint_count == 0 || a.coords.len() % joint_count != 0 {
        return Err(AlignError::ShapeMismatch(format!(
            "{} coordinates do not split into {joint_count} joints",
            a.coords.len()
        )));
    }
    let norm = a
        .coords
        .iter()
        .zip(&b.coords)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    Ok(norm / joint_count as f64)
}

/// Pairwise frame costs between two sequences (rows = `a`, cols = `b`).
pub fn cost_matrix(a: &PoseSequence, b: &PoseSequence) -> Result<CostMatrix, AlignError> {
    if a.is_empty() || b.is_empty() {
        return Err(AlignError::InvalidMatrix(
            "cost matrix needs non-empty sequences".into(),
        ));
    }
    if a.spec.joint_count != b.spec.joint_count || a.spec.dims != b.spec.dims {
        return Err(AlignError::ShapeMismatch("sequences use different skeletons".into()));
    }
    let j = a.spec.joint_count;
    let mut values = Vec::with_capacity(a.len() * b.len());
    for fa in &a.frames {
        for fb in &b.frames {
            values.push(frame_distance(fa, fb, j)?);
        }
    }
    CostMatrix::new(a.len(), b.len(), values)
}

/// Minimal-cost monotonic path. Ties in backtracking prefer the diagonal
/// step, then the q-advance, making the result deterministic.
pub fn dtw(costs: &CostMatrix) -> AlignmentPath2D {
    let q = costs.rows();
    let t = costs.cols();
    let mut acc = vec![f64::INFINITY; q * t];
    acc[0] = costs.at(0, 0);
    for i in 0..q {
        for j in 0..t {
            if i == 0 && j == 0 {
                continue;
            }
            let mut best = f64::INFINITY;
            if i > 0 && j > 0 {
                best = best.min(acc[(i - 1) * t + (j - 1)]);
            }
            if i > 0 {
                best = best.min(acc[(i - 1) * t + j]);
            }
            if j > 0 {
                best = best.min(acc[i * t + (j - 1)]);
            }
            acc[i * t + j] = costs.at(i, j) + best;
        }
    }

    let mut pairs = vec![(q - 1, t - 1)];
    let (mut i, mut j) = (q - 1, t - 1);
    while i > 0 || j > 0 {
        let mut best = f64::INFINITY;
        if i > 0 && j > 0 {
            best = best.min(acc[(i - 1) * t + (j - 1)]);
        }
        if i > 0 {
            best = best.min(acc[(i - 1) * t + j]);
        }
        if j > 0 {
            best = best.min(acc[i * t + (j - 1)]);
        }
        if i > 0 && j > 0 && acc[(i - 1) * t + (j - 1)] == best {
            i -= 1;
            j -= 1;
        } else if i > 0 && acc[(i - 1) * t + j] == best {
            i -= 1;
        } else {
            j -= 1;
        }
        pairs.push((i, j));
    }
    pairs.reverse();

    // Total cost folded along the path in order, matching the DP accumulation.
    let total_cost = pairs.iter().fold(0.0, |sum, &(a, b)| sum + costs.at(a, b));
    AlignmentPath2D { pairs, total_cost }
}

/// Collapse a 2D path to a 1D mask: for each output step t, keep the path
/// frame q with minimal cost (ties to the smallest q). A frame aligned to
/// several outputs stays marked once.
pub fn collapse_path(path: &AlignmentPath2D, costs: &CostMatrix) -> SelectionMask {
    let mut bits = vec![false; costs.rows()];
    let mut idx = 0;
    while idx < path.pairs.len() {
        let t = path.pairs[idx].1;
        let mut best_q = path.pairs[idx].0;
        let mut best_cost = costs.at(best_q, t);
        let mut end = idx + 1;
        while end < path.pairs.len() && path.pairs[end].1 == t {
            let q = path.pairs[end].0;
            let c = costs.at(q, t);
            if c < best_cost {
                best_cost = c;
                best_q = q;
            }
            end += 1;
        }
        bits[best_q] = true;
        idx = end;
    }
    SelectionMask::new(bits)
}

/// Keep exactly the masked-in frames of the interpolated sequence, in order.
pub fn apply_selection(
    iseq: &InterpolatedSequence,
    mask: &SelectionMask,
) -> Result<PoseSequence, AlignError> {
    select_frames(&iseq.seq, mask)
}

/// [`apply_selection`] on a bare sequence.
pub fn select_frames(seq: &PoseSequence, mask: &SelectionMask) -> Result<PoseSequence, AlignError> {
    if mask.len() != seq.len() {
        return Err(AlignError::ShapeMismatch(format!(
            "mask length {} != sequence length {}",
            mask.len(),
            seq.len()
        )));
    }
    let frames = seq
        .frames
        .iter()
        .zip(mask.bits())
        .filter(|(_, keep)| **keep)
        .map(|(f, _)| f.clone())
        .collect();
    Ok(PoseSequence {
        spec: seq.spec.clone(),
        fps: seq.fps,
        frames,
    })
}

/// Binary classification metrics over per-frame keep/skip decisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub frame_accuracy: f64,
}

pub fn alignment_metrics(
    pred: &SelectionMask,
    truth: &SelectionMask,
) -> Result<AlignmentMetrics, AlignError> {
    if pred.len() != truth.len() {
        return Err(AlignError::ShapeMismatch(format!(
            "mask lengths {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    let mut tn = 0usize;
    for (p, t) in pred.bits().iter().zip(truth.bits()) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let frame_accuracy = ratio(tp + tn, pred.len());
    Ok(AlignmentMetrics {
        precision,
        recall,
        f1,
        frame_accuracy,
    })
}
