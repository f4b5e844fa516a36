//! Pose file I/O.
//!
//! `POSE1` text format: line 1 is `POSE1 <J> <dims> <fps>`, every following
//! line is one frame of `J * dims` whitespace-separated decimal reals.
//! Numerals are written with Rust's shortest round-trip formatting, so
//! save/load is exact and repeated saves are byte-identical.

use super::{PoseError, PoseFrame, PoseSequence, SkeletonSpec};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

fn io_err(path: &Path, source: std::io::Error) -> PoseError {
    PoseError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> PoseError {
    PoseError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

pub fn load_pose_sequence(path: impl AsRef<Path>) -> Result<PoseSequence, PoseError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file, expected POSE1 header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "POSE1" {
        return Err(parse_err(path, 1, format!("malformed header `{header}`")));
    }
    let joints: usize = fields[1]
        .parse()
        .map_err(|_| parse_err(path, 1, format!("bad joint count `{}`", fields[1])))?;
    let dims: usize = fields[2]
        .parse()
        .map_err(|_| parse_err(path, 1, format!("bad dims `{}`", fields[2])))?;
    let fps: f64 = fields[3]
        .parse()
        .map_err(|_| parse_err(path, 1, format!("bad fps `{}`", fields[3])))?;
    let spec = SkeletonSpec::new(joints, dims, vec![])
        .map_err(|e| parse_err(path, 1, e.to_string()))?;
    let want = spec.coord_count();

    let mut frames = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let values: Vec<&str> = line.split_whitespace().collect();
        if values.len() != want {
            return Err(parse_err(
                path,
                lineno,
                format!("expected {want} values, found {}", values.len()),
            ));
        }
        let mut coords = Vec::with_capacity(want);
        for v in values {
            let x: f64 = v
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad value `{v}`")))?;
            if !x.is_finite() {
                return Err(parse_err(path, lineno, format!("non-finite value `{v}`")));
            }
            coords.push(x);
        }
        frames.push(PoseFrame { coords });
    }
    PoseSequence::new(spec, fps, frames).map_err(|e| parse_err(path, 1, e.to_string()))
}

pub fn save_pose_sequence(seq: &PoseSequence, path: impl AsRef<Path>) -> Result<(), PoseError> {
    let path = path.as_ref();
    fs::write(path, pose_sequence_to_string(seq)).map_err(|e| io_err(path, e))
}

pub fn pose_sequence_to_string(seq: &PoseSequence) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "POSE1 {} {} {}",
        seq.spec.joint_count, seq.spec.dims, seq.fps
    );
    for frame in &seq.frames {
        let mut first = true;
        for v in &frame.coords {
            if !first {
                out.push(' ');
            }
            let _ = write!(out, "{v}");
            first = false;
        }
        out.push('\n');
    }
    out
}

/// Read a `gloss_id,pose_path` manifest; paths are relative to the manifest.
/// When `trim_threshold` is set, each entry is onset/offset trimmed.
pub fn load_dictionary_manifest(
    path: impl AsRef<Path>,
    trim_threshold: Option<f64>,
) -> Result<super::DictionaryStore, PoseError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut store: Option<super::DictionaryStore> = None;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (gloss, rel) = line
            .split_once(',')
            .ok_or_else(|| parse_err(path, lineno, "expected `gloss_id,pose_path`"))?;
        let mut seq = load_pose_sequence(base.join(rel.trim()))?;
        if let Some(threshold) = trim_threshold {
            if seq.len() >= 2 {
                seq = super::trim_onset_offset(&seq, threshold)?.seq;
            }
        }
        let store = store.get_or_insert_with(|| super::DictionaryStore::new(seq.spec.clone()));
        store.insert(gloss.trim(), seq)?;
    }
    store.ok_or_else(|| parse_err(path, 1, "empty dictionary manifest"))
}

/// Write dictionary entries as `<gloss>.pose` files plus a manifest, all under `dir`.
pub fn write_dictionary_manifest(
    store: &super::DictionaryStore,
    dir: impl AsRef<Path>,
) -> Result<std::path::PathBuf, PoseError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut manifest = String::new();
    for gloss in store.glosses() {
        let file = format!("{gloss}.pose");
        save_pose_sequence(store.get(gloss).expect("listed gloss"), dir.join(&file))?;
        let _ = writeln!(manifest, "{gloss},{file}");
    }
    let manifest_path = dir.join("manifest.csv");
    fs::write(&manifest_path, manifest).map_err(|e| io_err(&manifest_path, e))?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::super::{DictionaryStore, PoseFrame, PoseSequence, SkeletonSpec};
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_well_formed_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pose");
        fs::write(&path, "POSE1 2 2 25\n0 0 1 1\n").unwrap();
        let seq = load_pose_sequence(&path).unwrap();
        assert_eq!(seq.spec.joint_count, 2);
        assert_eq!(seq.spec.dims, 2);
        assert_eq!(seq.fps, 25.0);
        assert_eq!(seq.len(), 1);
        assert_eq!(seq.frames[0].coords, vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn arity_violation_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pose");
        fs::write(&path, "POSE1 2 2 25\n0 0 1 1\n0 0 1\n").unwrap();
        match load_pose_sequence(&path) {
            Err(super::super::PoseError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pose");
        fs::write(&path, "POSE2 2 2 25\n").unwrap();
        assert!(load_pose_sequence(&path).is_err());
    }

    #[test]
    fn non_finite_value_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pose");
        fs::write(&path, "POSE1 1 2 25\nNaN 0\n").unwrap();
        match load_pose_sequence(&path) {
            Err(super::super::PoseError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_sequence_saves_header_only() {
        let spec = SkeletonSpec::new(3, 2, vec![]).unwrap();
        let seq = PoseSequence::new(spec, 30.0, vec![]).unwrap();
        assert_eq!(pose_sequence_to_string(&seq), "POSE1 3 2 30\n");
    }

    #[test]
    fn repeated_saves_are_byte_identical() {
        let spec = SkeletonSpec::new(1, 2, vec![]).unwrap();
        let seq = PoseSequence::new(
            spec,
            25.0,
            vec![PoseFrame {
                coords: vec![0.1, -0.30000000000000004],
            }],
        )
        .unwrap();
        assert_eq!(pose_sequence_to_string(&seq), pose_sequence_to_string(&seq));
    }

    #[test]
    fn dictionary_manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SkeletonSpec::new(1, 2, vec![]).unwrap();
        let mut store = DictionaryStore::new(spec.clone());
        for (name, x) in [("alpha", 0.5), ("beta", -1.25)] {
            let seq = PoseSequence::new(
                spec.clone(),
                25.0,
                vec![
                    PoseFrame { coords: vec![x, 0.0] },
                    PoseFrame { coords: vec![x, 1.0] },
                ],
            )
            .unwrap();
            store.insert(name, seq).unwrap();
        }
        let manifest = write_dictionary_manifest(&store, dir.path().join("dict")).unwrap();
        let loaded = load_dictionary_manifest(&manifest, None).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded.get("alpha"), store.get("alpha"));
        assert_eq!(loaded.get("beta"), store.get("beta"));
    }

    proptest! {
        #[test]
        fn save_load_round_trip_is_identity(
            frames in proptest::collection::vec(
                proptest::collection::vec(-1e3f64..1e3, 6),
                0..50,
            ),
            fps in 1.0f64..120.0,
        ) {
            let spec = SkeletonSpec::new(3, 2, vec![]).unwrap();
            let seq = PoseSequence::new(
                spec,
                fps,
                frames.into_iter().map(|coords| PoseFrame { coords }).collect(),
            )
            .unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("roundtrip.pose");
            save_pose_sequence(&seq, &path).unwrap();
            let loaded = load_pose_sequence(&path).unwrap();
            prop_assert_eq!(loaded, seq);
        }
    }
}
