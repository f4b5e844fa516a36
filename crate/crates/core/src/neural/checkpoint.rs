//! Versioned binary checkpoint format.
//!
//! Layout: the magic `SGNCKPT1`, then per parameter (in store order):
//! name length (u64 LE), name bytes, rank (u64 LE), each dim (u64 LE),
//! then the values as IEEE-754 little-endian f64. Round-trips bit-exactly.

use super::{NeuralError, ParamStore, Tensor};
use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SGNCKPT1";

pub fn save_checkpoint(store: &ParamStore, path: impl AsRef<Path>) -> Result<(), NeuralError> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(16 + store.total_values() * 8);
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    for (name, tensor) in store.iter() {
        bytes.extend_from_slice(&(name.len() as u64).to_le_bytes());
        bytes.extend_from_slice(name.as_bytes());
        bytes.extend_from_slice(&(tensor.shape.len() as u64).to_le_bytes());
        for d in &tensor.shape {
            bytes.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        for v in &tensor.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| NeuralError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ParamStore, NeuralError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| NeuralError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut cur = Cursor::new(bytes.as_slice());

    let mut magic = [0u8; 8];
    cur.read_exact(&mut magic)
        .map_err(|_| NeuralError::CheckpointFormat("file shorter than magic".into()))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(NeuralError::CheckpointFormat(format!(
            "magic mismatch: expected {CHECKPOINT_MAGIC:?}, found {magic:?}"
        )));
    }

    let mut store = ParamStore::new(0);
    loop {
        let mut len_buf = [0u8; 8];
        match cur.read_exact(&mut len_buf) {
            Ok(()) => {}
            Err(_) => {
                // clean end of file between parameters
                if cur.position() as usize == bytes.len() {
                    break;
                }
                return Err(NeuralError::CheckpointFormat("truncated parameter header".into()));
            }
        }
        let name_len = u64::from_le_bytes(len_buf) as usize;
        let mut name_bytes = vec![0u8; name_len];
        cur.read_exact(&mut name_bytes)
            .map_err(|_| NeuralError::CheckpointFormat("truncated parameter name".into()))?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| NeuralError::CheckpointFormat("parameter name is not utf-8".into()))?;

        let mut rank_buf = [0u8; 8];
        cur.read_exact(&mut rank_buf)
            .map_err(|_| NeuralError::CheckpointFormat(format!("truncated rank for `{name}`")))?;
        let rank = u64::from_le_bytes(rank_buf) as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let mut dim_buf = [0u8; 8];
            cur.read_exact(&mut dim_buf).map_err(|_| {
                NeuralError::CheckpointFormat(format!("truncated dims for `{name}`"))
            })?;
            shape.push(u64::from_le_bytes(dim_buf) as usize);
        }
        let numel: usize = shape.iter().product();
        let mut values = Vec::with_capacity(numel);
        for _ in 0..numel {
            let mut v_buf = [0u8; 8];
            cur.read_exact(&mut v_buf).map_err(|_| {
                NeuralError::CheckpointFormat(format!("truncated values for `{name}`"))
            })?;
            values.push(f64::from_le_bytes(v_buf));
        }
        store.add(name, Tensor { shape, values, grad: None })?;
    }
    Ok(store)
}

/// Copy values from `loaded` into `target`, requiring the exact same
/// parameter names and shapes (errors name the offending parameter).
pub fn load_into(target: &mut ParamStore, loaded: &ParamStore) -> Result<(), NeuralError> {
    if loaded.len() != target.len() {
        return Err(NeuralError::CheckpointFormat(format!(
            "checkpoint has {} parameters, model expects {}",
            loaded.len(),
            target.len()
        )));
    }
    let names: Vec<String> = target.iter().map(|(n, _)| n.to_string()).collect();
    for name in &names {
        let expected = target.get(name).expect("listed name");
        let got = loaded
            .get(name)
            .ok_or_else(|| NeuralError::UnknownParam(name.clone()))?;
        if got.shape != expected.shape {
            return Err(NeuralError::ShapeMismatch {
                op: "load_checkpoint".into(),
                detail: format!(
                    "parameter `{name}`: checkpoint shape {:?}, model shape {:?}",
                    got.shape, expected.shape
                ),
            });
        }
    }
    for name in &names {
        let values = loaded.get(name).expect("validated").values.clone();
        target.set_values(name, &values)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_store() -> ParamStore {
        let mut store = ParamStore::new(3);
        store
            .add("w", Tensor::new(vec![2, 2], vec![0.1, -0.2, 1.5e-300, -0.0]).unwrap())
            .unwrap();
        store
            .add("b", Tensor::new(vec![2], vec![f64::MIN_POSITIVE, 1e308]).unwrap())
            .unwrap();
        store
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let store = sample_store();
        save_checkpoint(&store, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.len(), store.len());
        for (name, t) in store.iter() {
            let lt = loaded.get(name).unwrap();
            assert_eq!(lt.shape, t.shape);
            let bits_a: Vec<u64> = t.values.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = lt.values.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn corrupted_magic_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&sample_store(), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] ^= 0xFF;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(NeuralError::CheckpointFormat(_))
        ));
    }

    #[test]
    fn truncated_file_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&sample_store(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(NeuralError::CheckpointFormat(_))
        ));
    }

    #[test]
    fn shape_mismatch_on_load_into_names_parameter() {
        let mut target = ParamStore::new(0);
        target.add("w", Tensor::zeros(vec![2, 3])).unwrap();
        let mut other = ParamStore::new(0);
        other.add("w", Tensor::zeros(vec![3, 2])).unwrap();
        match load_into(&mut target, &other) {
            Err(NeuralError::ShapeMismatch { detail, .. }) => {
                assert!(detail.contains("`w`"), "detail: {detail}");
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }
}
