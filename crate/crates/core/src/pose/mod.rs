//! Skeleton pose data model, preprocessing and dictionary-sign assembly.
//!
//! A [`PoseSequence`] is an ordered list of frames, each holding `J * dims`
//! coordinates in normalized units (root-centered, unit shoulder width).
//! Dictionary signs live in a [`DictionaryStore`]; a gloss sequence is
//! expanded into an [`InterpolatedSequence`] by stacking the stored signs and
//! bridging neighbours with a fixed number of linearly interpolated frames.

mod io;

pub use io::{
    load_dictionary_manifest, load_pose_sequence, save_pose_sequence, write_dictionary_manifest,
};

use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PoseError {
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("unknown gloss `{0}`")]
    UnknownGloss(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Skeleton layout: joint count, coordinate dimensionality and limb edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonSpec {
    pub joint_count: usize,
    pub dims: usize,
    pub limbs: Vec<(usize, usize)>,
}

impl SkeletonSpec {
    pub fn new(
        joint_count: usize,
        dims: usize,
        limbs: Vec<(usize, usize)>,
    ) -> Result<Self, PoseError> {
        if joint_count == 0 {
            return Err(PoseError::InvalidSkeleton("joint count must be > 0".into()));
        }
        if dims != 2 && dims != 3 {
            return Err(PoseError::InvalidSkeleton(format!(
                "dims must be 2 or 3, got {dims}"
            )));
        }
        for &(a, b) in &limbs {
            if a >= joint_count || b >= joint_count {
                return Err(PoseError::InvalidSkeleton(format!(
                    "limb ({a},{b}) out of range for {joint_count} joints"
                )));
            }
            if a == b {
                return Err(PoseError::InvalidSkeleton(format!("self-loop limb ({a},{a})")));
            }
        }
        Ok(Self {
            joint_count,
            dims,
            limbs,
        })
    }

    pub fn coord_count(&self) -> usize {
        self.joint_count * self.dims
    }
}

/// One frame of skeleton pose: `J * dims` coordinates, joint-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseFrame {
    pub coords: Vec<f64>,
}

impl PoseFrame {
    pub fn new(coords: Vec<f64>) -> Result<Self, PoseError> {
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(PoseError::InvalidSequence("non-finite coordinate".into()));
        }
        Ok(Self { coords })
    }

    /// Coordinates of joint `j` given the dimensionality.
    pub fn joint(&self, j: usize, dims: usize) -> &[f64] {
        &self.coords[j * dims..(j + 1) * dims]
    }
}

/// An ordered pose sequence sharing one skeleton spec and frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    pub spec: SkeletonSpec,
    pub fps: f64,
    pub frames: Vec<PoseFrame>,
}

impl PoseSequence {
    pub fn new(spec: SkeletonSpec, fps: f64, frames: Vec<PoseFrame>) -> Result<Self, PoseError> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(PoseError::InvalidSequence(format!("fps must be positive, got {fps}")));
        }
        let want = spec.coord_count();
        for (i, f) in frames.iter().enumerate() {
            if f.coords.len() != want {
                return Err(PoseError::InvalidSequence(format!(
                    "frame {i} has {} coordinates, expected {want}",
                    f.coords.len()
                )));
            }
            if f.coords.iter().any(|v| !v.is_finite()) {
                return Err(PoseError::InvalidSequence(format!("frame {i} has a non-finite value")));
            }
        }
        Ok(Self { spec, fps, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Dictionary of isolated signs keyed by gloss id, all sharing one skeleton.
#[derive(Debug, Clone)]
pub struct DictionaryStore {
    spec: SkeletonSpec,
    entries: BTreeMap<String, PoseSequence>,
}

impl DictionaryStore {
    pub fn new(spec: SkeletonSpec) -> Self {
        Self {
            spec,
            entries: BTreeMap::new(),
        }
    }

    pub fn spec(&self) -> &SkeletonSpec {
        &self.spec
    }

    pub fn insert(&mut self, gloss: impl Into<String>, seq: PoseSequence) -> Result<(), PoseError> {
        let gloss = gloss.into();
        if seq.is_empty() {
            return Err(PoseError::InvalidSequence(format!("dictionary entry `{gloss}` is empty")));
        }
        if seq.spec.joint_count != self.spec.joint_count || seq.spec.dims != self.spec.dims {
            return Err(PoseError::InvalidSkeleton(format!(
                "entry `{gloss}` has skeleton {}x{}, store expects {}x{}",
                seq.spec.joint_count, seq.spec.dims, self.spec.joint_count, self.spec.dims
            )));
        }
        self.entries.insert(gloss, seq);
        Ok(())
    }

    pub fn get(&self, gloss: &str) -> Option<&PoseSequence> {
        self.entries.get(gloss)
    }

    /// Gloss ids in sorted order.
    pub fn glosses(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Where a frame of an interpolated sequence came from.
///
/// `position` is 1-based: frame `p` of a `sign_len`-frame sign, or frame `j`
/// of the `n_li` interpolation frames in block `block_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameProvenance {
    Sign {
        gloss_index: usize,
        position: usize,
        sign_len: usize,
    },
    Interp {
        block_index: usize,
        position: usize,
    },
}

/// A stacked-and-interpolated dictionary sequence with per-frame provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatedSequence {
    pub seq: PoseSequence,
    pub provenance: Vec<FrameProvenance>,
    pub n_li: usize,
}

impl InterpolatedSequence {
    pub fn len_q(&self) -> usize {
        self.seq.frames.len()
    }

    /// Check the structural invariants; used by tests and callers that build
    /// provenance by hand.
    pub fn validate(&self) -> Result<(), PoseError> {
        if self.provenance.len() != self.seq.frames.len() {
            return Err(PoseError::InvalidSequence(format!(
                "provenance length {} != frame count {}",
                self.provenance.len(),
                self.seq.frames.len()
            )));
        }
        // Expected layout: Sign(0) [Interp(0) Sign(1) Interp(1) Sign(2) ...]
        // with exactly n_li frames per interp block (absent when n_li == 0).
        let mut i = 0;
        let mut w = 0usize;
        loop {
            let sign_len = match self.provenance.get(i) {
                Some(FrameProvenance::Sign {
                    gloss_index,
                    position: 1,
                    sign_len,
                }) if *gloss_index == w => *sign_len,
                _ => {
                    return Err(PoseError::InvalidSequence(format!(
                        "expected start of sign {w} at frame {i}"
                    )))
                }
            };
            for p in 1..=sign_len {
                match self.provenance.get(i) {
                    Some(FrameProvenance::Sign {
                        gloss_index,
                        position,
                        sign_len: l,
                    }) if *gloss_index == w && *position == p && *l == sign_len => i += 1,
                    _ => {
                        return Err(PoseError::InvalidSequence(format!(
                            "sign {w} positions not contiguous at frame {i}"
                        )))
                    }
                }
            }
            if i == self.provenance.len() {
                return Ok(());
            }
            for j in 1..=self.n_li {
                match self.provenance.get(i) {
                    Some(FrameProvenance::Interp {
                        block_index,
                        position,
                    }) if *block_index == w && *position == j => i += 1,
                    _ => {
                        return Err(PoseError::InvalidSequence(format!(
                            "interpolation block {w} truncated at frame {i}"
                        )))
                    }
                }
            }
            w += 1;
        }
    }
}

/// Root-center every frame and scale so the first-frame distance between the
/// `scale_pair` joints is 1.
pub fn normalize_sequence(
    seq: &PoseSequence,
    root_joint: usize,
    scale_pair: (usize, usize),
) -> Result<PoseSequence, PoseError> {
    let j = seq.spec.joint_count;
    let dims = seq.spec.dims;
    if root_joint >= j || scale_pair.0 >= j || scale_pair.1 >= j {
        return Err(PoseError::InvalidSkeleton(format!(
            "normalization joints out of range for {j} joints"
        )));
    }
    if scale_pair.0 == scale_pair.1 {
        return Err(PoseError::InvalidSkeleton("scale pair must be two distinct joints".into()));
    }
    let first = seq
        .frames
        .first()
        .ok_or_else(|| PoseError::InvalidSequence("cannot normalize an empty sequence".into()))?;
    let a = first.joint(scale_pair.0, dims);
    let b = first.joint(scale_pair.1, dims);
    let dist = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    if dist <= 0.0 {
        return Err(PoseError::Degenerate(format!(
            "scale pair ({}, {}) coincides in the first frame",
            scale_pair.0, scale_pair.1
        )));
    }
    let frames = seq
        .frames
        .iter()
        .map(|f| {
            let root = f.joint(root_joint, dims).to_vec();
            let coords = f
                .coords
                .chunks(dims)
                .flat_map(|joint| joint.iter().zip(&root).map(|(c, r)| (c - r) / dist))
                .collect();
            PoseFrame { coords }
        })
        .collect();
    PoseSequence::new(seq.spec.clone(), seq.fps, frames)
}

/// Result of [`trim_onset_offset`]: the trimmed slice and whether the input
/// had no motion above the threshold (in which case it is returned unchanged).
#[derive(Debug, Clone, PartialEq)]
pub struct Trimmed {
    pub seq: PoseSequence,
    pub is_static: bool,
}

/// Mean per-joint displacement between consecutive frames.
pub fn motion_energy(seq: &PoseSequence) -> Vec<f64> {
    let dims = seq.spec.dims;
    let j = seq.spec.joint_count;
    seq.frames
        .windows(2)
        .map(|w| {
            (0..j)
                .map(|joint| {
                    w[0].joint(joint, dims)
                        .iter()
                        .zip(w[1].joint(joint, dims))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .sum::<f64>()
                / j as f64
        })
        .collect()
}

/// Cut static lead-in/lead-out, keeping one boundary frame on each side of
/// the span whose inter-frame motion energy exceeds `energy_threshold`.
pub fn trim_onset_offset(seq: &PoseSequence, energy_threshold: f64) -> Result<Trimmed, PoseError> {
    if seq.frames.len() < 2 {
        return Err(PoseError::InvalidSequence(
            "trimming needs at least 2 frames".into(),
        ));
    }
    let energy = motion_energy(seq);
    let active: Vec<usize> = energy
        .iter()
        .enumerate()
        .filter(|(_, e)| **e > energy_threshold)
        .map(|(i, _)| i)
        .collect();
    match (active.first(), active.last()) {
        (Some(&first), Some(&last)) => {
            // energy[i] covers motion between frames i and i+1, so the kept
            // span [first, last+1] includes the still frame on each side.
            let frames = seq.frames[first..=last + 1].to_vec();
            Ok(Trimmed {
                seq: PoseSequence::new(seq.spec.clone(), seq.fps, frames)?,
                is_static: false,
            })
        }
        _ => Ok(Trimmed {
            seq: seq.clone(),
            is_static: true,
        }),
    }
}

/// `n` frames strictly between `a` and `b`: frame `i` (1-based) is
/// `a + (i / (n + 1)) * (b - a)`.
pub fn linear_interpolate(a: &PoseFrame, b: &PoseFrame, n: usize) -> Result<Vec<PoseFrame>, PoseError> {
    if a.coords.len() != b.coords.len() {
        return Err(PoseError::InvalidSequence(format!(
            "interpolation endpoints have {} vs {} coordinates",
            a.coords.len(),
            b.coords.len()
        )));
    }
    Ok((1..=n)
        .map(|i| {
            let t = i as f64 / (n + 1) as f64;
            let coords = a
                .coords
                .iter()
                .zip(&b.coords)
                .map(|(x, y)| x + t * (y - x))
                .collect();
            PoseFrame { coords }
        })
        .collect())
}

/// Look up each gloss in order; repeats share content.
pub fn stack_dictionary<S: AsRef<str>>(
    glosses: &[S],
    store: &DictionaryStore,
) -> Result<Vec<PoseSequence>, PoseError> {
    glosses
        .iter()
        .map(|g| {
            store
                .get(g.as_ref())
                .cloned()
                .ok_or_else(|| PoseError::UnknownGloss(g.as_ref().to_string()))
        })
        .collect()
}

/// Concatenate a stack of signs, bridging neighbours with `n_li` interpolated
/// frames, and record per-frame provenance.
pub fn build_interpolated_sequence(
    stack: &[PoseSequence],
    n_li: usize,
) -> Result<InterpolatedSequence, PoseError> {
    let first = stack
        .first()
        .ok_or_else(|| PoseError::InvalidSequence("cannot interpolate an empty stack".into()))?;
    let mut frames = Vec::new();
    let mut provenance = Vec::new();
    for (w, sign) in stack.iter().enumerate() {
        if sign.spec.joint_count != first.spec.joint_count || sign.spec.dims != first.spec.dims {
            return Err(PoseError::InvalidSkeleton(format!(
                "stack entry {w} has a different skeleton"
            )));
        }
        if sign.is_empty() {
            return Err(PoseError::InvalidSequence(format!("stack entry {w} is empty")));
        }
        if w > 0 {
            let prev_last = frames.last().cloned().expect("previous sign emitted frames");
            let bridge = linear_interpolate(&prev_last, &sign.frames[0], n_li)?;
            for (j, f) in bridge.into_iter().enumerate() {
                frames.push(f);
                provenance.push(FrameProvenance::Interp {
                    block_index: w - 1,
                    position: j + 1,
                });
            }
        }
        let sign_len = sign.frames.len();
        for (p, f) in sign.frames.iter().enumerate() {
            frames.push(f.clone());
            provenance.push(FrameProvenance::Sign {
                gloss_index: w,
                position: p + 1,
                sign_len,
            });
        }
    }
    Ok(InterpolatedSequence {
        seq: PoseSequence::new(first.spec.clone(), first.fps, frames)?,
        provenance,
        n_li,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(j: usize, dims: usize) -> SkeletonSpec {
        SkeletonSpec::new(j, dims, vec![]).unwrap()
    }

    fn seq_from(coords: &[&[f64]], j: usize, dims: usize) -> PoseSequence {
        let frames = coords
            .iter()
            .map(|c| PoseFrame { coords: c.to_vec() })
            .collect();
        PoseSequence::new(spec(j, dims), 25.0, frames).unwrap()
    }

    #[test]
    fn skeleton_spec_rejects_bad_limbs() {
        assert!(SkeletonSpec::new(2, 2, vec![(0, 2)]).is_err());
        assert!(SkeletonSpec::new(2, 2, vec![(1, 1)]).is_err());
        assert!(SkeletonSpec::new(0, 2, vec![]).is_err());
        assert!(SkeletonSpec::new(2, 4, vec![]).is_err());
    }

    #[test]
    fn normalize_centers_root_and_unit_scale() {
        let seq = seq_from(&[&[1.0, 1.0, 3.0, 1.0], &[2.0, 2.0, 6.0, 2.0]], 2, 2);
        let norm = normalize_sequence(&seq, 0, (0, 1)).unwrap();
        assert_eq!(norm.frames[0].coords, vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(norm.frames[1].coords, vec![0.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn normalize_is_idempotent() {
        let seq = seq_from(&[&[0.3, -0.2, 1.4, 0.9], &[0.1, 0.0, 1.0, 1.2]], 2, 2);
        let once = normalize_sequence(&seq, 0, (0, 1)).unwrap();
        let twice = normalize_sequence(&once, 0, (0, 1)).unwrap();
        for (a, b) in once.frames.iter().zip(&twice.frames) {
            for (x, y) in a.coords.iter().zip(&b.coords) {
                assert!((x - y).abs() < 1e-12, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn normalize_translation_invariance() {
        let base = seq_from(&[&[0.3, -0.2, 1.4, 0.9], &[0.1, 0.0, 1.0, 1.2]], 2, 2);
        let shifted_frames: Vec<PoseFrame> = base
            .frames
            .iter()
            .map(|f| PoseFrame {
                coords: f.coords.iter().map(|c| c + 5.0).collect(),
            })
            .collect();
        let shifted = PoseSequence::new(base.spec.clone(), base.fps, shifted_frames).unwrap();
        let a = normalize_sequence(&base, 0, (0, 1)).unwrap();
        let b = normalize_sequence(&shifted, 0, (0, 1)).unwrap();
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            for (x, y) in fa.coords.iter().zip(&fb.coords) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalize_zero_scale_is_degenerate() {
        let seq = seq_from(&[&[1.0, 1.0, 1.0, 1.0]], 2, 2);
        assert!(matches!(
            normalize_sequence(&seq, 0, (0, 1)),
            Err(PoseError::Degenerate(_))
        ));
    }

    #[test]
    fn trim_keeps_moving_span_plus_boundary_frames() {
        // 10 static frames, 20 moving, 10 static.
        let a = [0.0, 0.0, 1.0, 0.0];
        let b = [0.0, 1.0, 1.0, 1.0];
        let mut frames: Vec<Vec<f64>> = Vec::new();
        for _ in 0..10 {
            frames.push(a.to_vec());
        }
        for i in 0..20 {
            let t = (i + 1) as f64 / 21.0;
            frames.push(a.iter().zip(&b).map(|(x, y)| x + t * (y - x)).collect());
        }
        for _ in 0..10 {
            frames.push(b.to_vec());
        }
        let refs: Vec<&[f64]> = frames.iter().map(|f| f.as_slice()).collect();
        let seq = seq_from(&refs, 2, 2);
        let trimmed = trim_onset_offset(&seq, 0.01).unwrap();
        assert!(!trimmed.is_static);
        assert_eq!(trimmed.seq.len(), 22);
        assert_eq!(trimmed.seq.frames[0], seq.frames[9]);
        assert_eq!(trimmed.seq.frames[21], seq.frames[30]);
    }

    #[test]
    fn trim_zero_threshold_keeps_moving_sequence() {
        let seq = seq_from(&[&[0.0, 0.0], &[0.0, 1.0], &[0.0, 2.0]], 1, 2);
        let trimmed = trim_onset_offset(&seq, 0.0).unwrap();
        assert!(!trimmed.is_static);
        assert_eq!(trimmed.seq, seq);
    }

    #[test]
    fn trim_static_sequence_flagged() {
        let seq = seq_from(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]], 1, 2);
        let trimmed = trim_onset_offset(&seq, 0.02).unwrap();
        assert!(trimmed.is_static);
        assert_eq!(trimmed.seq, seq);
    }

    #[test]
    fn trim_is_idempotent() {
        let mut frames: Vec<Vec<f64>> = vec![vec![0.0, 0.0]; 4];
        for i in 0..6 {
            frames.push(vec![i as f64 * 0.5, 0.0]);
        }
        frames.extend(vec![vec![2.5, 0.0]; 3]);
        let refs: Vec<&[f64]> = frames.iter().map(|f| f.as_slice()).collect();
        let seq = seq_from(&refs, 1, 2);
        let once = trim_onset_offset(&seq, 0.02).unwrap();
        let twice = trim_onset_offset(&once.seq, 0.02).unwrap();
        assert_eq!(once.seq, twice.seq);
    }

    #[test]
    fn interpolate_midpoint() {
        let a = PoseFrame { coords: vec![0.0, 0.0] };
        let b = PoseFrame { coords: vec![1.0, 1.0] };
        let out = linear_interpolate(&a, &b, 1).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].coords, vec![0.5, 0.5]);
    }

    #[test]
    fn interpolate_equal_spacing_n5() {
        let a = PoseFrame { coords: vec![0.0] };
        let b = PoseFrame { coords: vec![6.0] };
        let out = linear_interpolate(&a, &b, 5).unwrap();
        let got: Vec<f64> = out.iter().map(|f| f.coords[0]).collect();
        assert_eq!(got, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn interpolate_zero_is_empty() {
        let a = PoseFrame { coords: vec![1.0] };
        let b = PoseFrame { coords: vec![2.0] };
        assert!(linear_interpolate(&a, &b, 0).unwrap().is_empty());
    }

    #[test]
    fn interpolate_shape_mismatch() {
        let a = PoseFrame { coords: vec![1.0] };
        let b = PoseFrame { coords: vec![2.0, 3.0] };
        assert!(linear_interpolate(&a, &b, 1).is_err());
    }

    fn tiny_store() -> DictionaryStore {
        let mut store = DictionaryStore::new(spec(1, 2));
        store
            .insert("g1", seq_from(&[&[0.0, 0.0], &[1.0, 0.0]], 1, 2))
            .unwrap();
        store
            .insert("g2", seq_from(&[&[5.0, 5.0], &[6.0, 5.0]], 1, 2))
            .unwrap();
        store
    }

    #[test]
    fn stack_preserves_order_and_repeats() {
        let store = tiny_store();
        let stack = stack_dictionary(&["g1", "g2", "g1"], &store).unwrap();
        assert_eq!(stack.len(), 3);
        assert_eq!(stack[0], stack[2]);
        assert_eq!(stack[1], *store.get("g2").unwrap());
    }

    #[test]
    fn stack_empty_list() {
        let store = tiny_store();
        let stack = stack_dictionary::<&str>(&[], &store).unwrap();
        assert!(stack.is_empty());
    }

    #[test]
    fn stack_unknown_gloss_names_it() {
        let store = tiny_store();
        match stack_dictionary(&["nope"], &store) {
            Err(PoseError::UnknownGloss(g)) => assert_eq!(g, "nope"),
            other => panic!("expected UnknownGloss, got {other:?}"),
        }
    }

    #[test]
    fn build_single_sign_has_no_interp() {
        let store = tiny_store();
        let stack = stack_dictionary(&["g1"], &store).unwrap();
        let iseq = build_interpolated_sequence(&stack, 5).unwrap();
        assert_eq!(iseq.len_q(), 2);
        assert!(iseq
            .provenance
            .iter()
            .all(|p| matches!(p, FrameProvenance::Sign { .. })));
        iseq.validate().unwrap();
    }

    #[test]
    fn build_two_signs_counts_and_provenance() {
        let s1 = seq_from(&[&[0.0, 0.0], &[1.0, 0.0], &[2.0, 0.0]], 1, 2);
        let s2 = seq_from(&[&[8.0, 0.0], &[9.0, 0.0], &[10.0, 0.0]], 1, 2);
        let iseq = build_interpolated_sequence(&[s1, s2], 5).unwrap();
        assert_eq!(iseq.len_q(), 11);
        let kinds: Vec<bool> = iseq
            .provenance
            .iter()
            .map(|p| matches!(p, FrameProvenance::Sign { .. }))
            .collect();
        assert_eq!(
            kinds,
            [true, true, true, false, false, false, false, false, true, true, true]
        );
        // bridge runs from last frame of sign 0 to first frame of sign 1
        assert_eq!(iseq.seq.frames[3].coords, vec![3.0, 0.0]);
        assert_eq!(iseq.seq.frames[7].coords, vec![7.0, 0.0]);
        iseq.validate().unwrap();
    }

    #[test]
    fn build_n_li_zero_is_concatenation() {
        let s1 = seq_from(&[&[0.0, 0.0]], 1, 2);
        let s2 = seq_from(&[&[1.0, 1.0]], 1, 2);
        let iseq = build_interpolated_sequence(&[s1.clone(), s2.clone()], 0).unwrap();
        assert_eq!(iseq.len_q(), 2);
        assert_eq!(iseq.seq.frames[0], s1.frames[0]);
        assert_eq!(iseq.seq.frames[1], s2.frames[0]);
        iseq.validate().unwrap();
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn interpolated_frame_count_closed_form(
            lens in proptest::collection::vec(1usize..6, 1..6),
            n_li in 0usize..8,
        ) {
            let signs: Vec<PoseSequence> = lens
                .iter()
                .enumerate()
                .map(|(i, &l)| {
                    let frames = (0..l)
                        .map(|p| PoseFrame { coords: vec![i as f64, p as f64] })
                        .collect();
                    PoseSequence::new(spec(1, 2), 25.0, frames).unwrap()
                })
                .collect();
            let iseq = build_interpolated_sequence(&signs, n_li).unwrap();
            let expected: usize = lens.iter().sum::<usize>() + (lens.len() - 1) * n_li;
            prop_assert_eq!(iseq.len_q(), expected);
            iseq.validate().unwrap();
        }

        #[test]
        fn interpolation_stays_on_segment(
            a in proptest::collection::vec(-10.0f64..10.0, 4),
            b in proptest::collection::vec(-10.0f64..10.0, 4),
            n in 0usize..10,
        ) {
            let fa = PoseFrame { coords: a.clone() };
            let fb = PoseFrame { coords: b.clone() };
            for frame in linear_interpolate(&fa, &fb, n).unwrap() {
                for (i, v) in frame.coords.iter().enumerate() {
                    let lo = a[i].min(b[i]);
                    let hi = a[i].max(b[i]);
                    prop_assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
                }
            }
        }

        #[test]
        fn normalize_scale_invariance(
            coords in proptest::collection::vec(-5.0f64..5.0, 4),
        ) {
            let mut c = coords.clone();
            // keep the scale pair apart
            c[0] = 0.0; c[1] = 0.0; c[2] = 1.0;
            let seq = PoseSequence::new(
                spec(2, 2),
                25.0,
                vec![
                    PoseFrame { coords: c.clone() },
                    PoseFrame { coords: c.iter().map(|v| v + 0.25).collect() },
                ],
            )
            .unwrap();
            let doubled = PoseSequence::new(
                spec(2, 2),
                25.0,
                seq.frames
                    .iter()
                    .map(|f| PoseFrame { coords: f.coords.iter().map(|v| v * 2.0).collect() })
                    .collect(),
            )
            .unwrap();
            let a = normalize_sequence(&seq, 0, (0, 1)).unwrap();
            let b = normalize_sequence(&doubled, 0, (0, 1)).unwrap();
            for (fa, fb) in a.frames.iter().zip(&b.frames) {
                for (x, y) in fa.coords.iter().zip(&fb.coords) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn trim_output_is_contiguous_slice(
            energies in proptest::collection::vec(0.0f64..0.1, 3..30),
        ) {
            // build a 1-joint 1-step-per-energy sequence
            let mut x = 0.0;
            let mut frames = vec![PoseFrame { coords: vec![0.0, 0.0] }];
            for e in &energies {
                x += e;
                frames.push(PoseFrame { coords: vec![x, 0.0] });
            }
            let seq = PoseSequence::new(spec(1, 2), 25.0, frames).unwrap();
            let trimmed = trim_onset_offset(&seq, 0.02).unwrap();
            let n = trimmed.seq.len();
            let found = (0..=seq.len().saturating_sub(n)).any(|start| {
                seq.frames[start..start + n] == trimmed.seq.frames[..]
            });
            prop_assert!(found, "trimmed output is not a contiguous slice");
            if !trimmed.is_static {
                let twice = trim_onset_offset(&trimmed.seq, 0.02).unwrap();
                prop_assert_eq!(twice.seq, trimmed.seq);
            }
        }
    }
}
