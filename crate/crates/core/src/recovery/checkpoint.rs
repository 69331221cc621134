//! Compressed pipeline-state checkpoints with a bounded retention window.
//!
//! Each checkpoint is a pair of files: `<id>.state.gz` (gzip of the JSON state)
//! and `<id>.meta` (JSON metadata carrying the MD5 of the compressed blob).

use std::fs::{self, File};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::RecoveryError;
use crate::workspace::md5_hex;

pub const CHECKPOINT_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub checkpoint_id: String,
    pub sequence: u64,
    pub phase: String,
    /// Percent complete, 0–100.
    pub progress: f64,
    pub digest: String,
    pub timestamp: DateTime<Utc>,
}

/// A checkpoint as stored: metadata plus the compressed state blob.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub blob: Vec<u8>,
}

impl Checkpoint {
    pub fn verify(&self) -> Result<(), RecoveryError> {
        let actual = md5_hex(&self.blob);
        if actual == self.meta.digest {
            Ok(())
        } else {
            Err(RecoveryError::DigestMismatch {
                checkpoint: self.meta.checkpoint_id.clone(),
                expected: self.meta.digest.clone(),
                actual,
            })
        }
    }

    pub fn decode<S: DeserializeOwned>(&self) -> Result<S, RecoveryError> {
        self.verify()?;
        decompress_state(&self.blob)
    }
}

pub fn compress_state<S: Serialize>(state: &S) -> Result<Vec<u8>, RecoveryError> {
    let json = serde_json::to_vec(state).map_err(|e| RecoveryError::Encode(e.to_string()))?;
    let mut enc = GzEncoder::new(Vec::new(), Compression::default());
    enc.write_all(&json)?;
    Ok(enc.finish()?)
}

pub fn decompress_state<S: DeserializeOwned>(blob: &[u8]) -> Result<S, RecoveryError> {
    let mut json = Vec::new();
    GzDecoder::new(blob)
        .read_to_end(&mut json)
        .map_err(|e| RecoveryError::Decode(e.to_string()))?;
    serde_json::from_slice(&json).map_err(|e| RecoveryError::Decode(e.to_string()))
}

/// Single-writer checkpoint directory.
#[derive(Debug)]
pub struct CheckpointStore {
    dir: PathBuf,
    window: usize,
    next_sequence: u64,
}

impl CheckpointStore {
    pub fn open(dir: &Path) -> Result<Self, RecoveryError> {
        Self::with_window(dir, CHECKPOINT_WINDOW)
    }

    pub fn with_window(dir: &Path, window: usize) -> Result<Self, RecoveryError> {
        fs::create_dir_all(dir).map_err(map_io)?;
        let mut store = Self {
            dir: dir.to_path_buf(),
            window: window.max(1),
            next_sequence: 1,
        };
        store.next_sequence = store.list()?.last().map_or(1, |m| m.sequence + 1);
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn blob_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.state.gz"))
    }

    fn meta_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.meta"))
    }

    /// Serializes, compresses and writes `state`, then prunes the window.
    pub fn save<S: Serialize>(
        &mut self,
        phase: &str,
        progress: f64,
        state: &S,
    ) -> Result<CheckpointMeta, RecoveryError> {
        let blob = compress_state(state)?;
        let id = format!("ckpt-{:06}", self.next_sequence);
        let meta = CheckpointMeta {
            checkpoint_id: id.clone(),
            sequence: self.next_sequence,
            phase: phase.to_string(),
            progress: progress.clamp(0.0, 100.0),
            digest: md5_hex(&blob),
            timestamp: Utc::now(),
        };
        write_atomic(&self.blob_path(&id), &blob)?;
        let meta_bytes =
            serde_json::to_vec_pretty(&meta).map_err(|e| RecoveryError::Encode(e.to_string()))?;
        write_atomic(&self.meta_path(&id), &meta_bytes)?;
        self.next_sequence += 1;
        self.prune()?;
        Ok(meta)
    }

    /// Metadata of every stored checkpoint, oldest first. Unreadable sidecars are skipped.
    pub fn list(&self) -> Result<Vec<CheckpointMeta>, RecoveryError> {
        let mut metas = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("meta") {
                continue;
            }
            if let Ok(bytes) = fs::read(&path) {
                if let Ok(meta) = serde_json::from_slice::<CheckpointMeta>(&bytes) {
                    metas.push(meta);
                }
            }
        }
        metas.sort_by_key(|m| m.sequence);
        Ok(metas)
    }

    pub fn get(&self, id: &str) -> Result<Checkpoint, RecoveryError> {
        let meta_bytes = fs::read(self.meta_path(id))
            .map_err(|_| RecoveryError::MissingCheckpoint(id.to_string()))?;
        let meta: CheckpointMeta = serde_json::from_slice(&meta_bytes)
            .map_err(|e| RecoveryError::Decode(e.to_string()))?;
        let blob = fs::read(self.blob_path(id))
            .map_err(|_| RecoveryError::MissingCheckpoint(id.to_string()))?;
        Ok(Checkpoint { meta, blob })
    }

    pub fn restore<S: DeserializeOwned>(&self, id: &str) -> Result<S, RecoveryError> {
        self.get(id)?.decode()
    }

    /// Newest checkpoint whose digest verifies, that decodes, and whose state passes `validate`.
    pub fn latest_valid<S, V>(&self, mut validate: V) -> Result<(CheckpointMeta, S), RecoveryError>
    where
        S: DeserializeOwned,
        V: FnMut(&S) -> Result<(), String>,
    {
        for meta in self.list()?.into_iter().rev() {
            let Ok(cp) = self.get(&meta.checkpoint_id) else {
                continue;
            };
            let Ok(state) = cp.decode::<S>() else {
                continue;
            };
            if validate(&state).is_ok() {
                return Ok((meta, state));
            }
        }
        Err(RecoveryError::NoValidCheckpoint)
    }

    fn prune(&self) -> Result<(), RecoveryError> {
        let metas = self.list()?;
        if metas.len() <= self.window {
            return Ok(());
        }
        for meta in &metas[..metas.len() - self.window] {
            let _ = fs::remove_file(self.meta_path(&meta.checkpoint_id));
            let _ = fs::remove_file(self.blob_path(&meta.checkpoint_id));
        }
        Ok(())
    }
}

fn map_io(e: io::Error) -> RecoveryError {
    if e.kind() == io::ErrorKind::StorageFull || e.raw_os_error() == Some(28) {
        RecoveryError::ResourceExhaustion(e.to_string())
    } else {
        RecoveryError::Io(e)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RecoveryError> {
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp).map_err(map_io)?;
    f.write_all(bytes).map_err(map_io)?;
    f.sync_all().map_err(map_io)?;
    fs::rename(&tmp, path).map_err(map_io)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    struct State {
        stage: u32,
        values: Vec<f64>,
        label: String,
    }

    fn state(stage: u32) -> State {
        State {
            stage,
            values: vec![0.1 * f64::from(stage), std::f64::consts::PI, -1e-300],
            label: format!("stage-{stage}"),
        }
    }

    #[test]
    fn round_trip_preserves_state() {
        let dir = TempDir::new().unwrap();
        let mut store = CheckpointStore::open(dir.path()).unwrap();
        let meta = store.save("aero", 42.0, &state(3)).unwrap();
        let back: State = store.restore(&meta.checkpoint_id).unwrap();
        assert_eq!(back, state(3));
        assert_eq!(meta.phase, "aero");
    }

    #[test]
    fn window_keeps_ten_newest() {
        let dir = TempDir::new().unwrap();
        let mut store = CheckpointStore::open(dir.path()).unwrap();
        for i in 1..=11 {
            store.save("p", f64::from(i), &state(i)).unwrap();
        }
        let metas = store.list().unwrap();
        assert_eq!(metas.len(), 10);
        assert_eq!(metas[0].sequence, 2);
        assert!(!dir.path().join("ckpt-000001.state.gz").exists());
        let files = fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(files, 20);
    }

    #[test]
    fn corrupted_blob_fails_digest() {
        let dir = TempDir::new().unwrap();
        let mut store = CheckpointStore::open(dir.path()).unwrap();
        let meta = store.save("p", 0.0, &state(1)).unwrap();
        let path = dir.path().join(format!("{}.state.gz", meta.checkpoint_id));
        let mut bytes = fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        fs::write(&path, bytes).unwrap();
        let err = store.restore::<State>(&meta.checkpoint_id).unwrap_err();
        assert!(matches!(err, RecoveryError::DigestMismatch { .. }));
    }

    #[test]
    fn latest_valid_skips_corrupt_and_invalid() {
        let dir = TempDir::new().unwrap();
        let mut store = CheckpointStore::open(dir.path()).unwrap();
        store.save("p", 0.0, &state(1)).unwrap();
        store.save("p", 0.0, &state(2)).unwrap();
        let third = store.save("p", 0.0, &state(3)).unwrap();
        fs::write(
            dir.path().join(format!("{}.state.gz", third.checkpoint_id)),
            b"junk",
        )
        .unwrap();
        let (meta, s): (_, State) = store
            .latest_valid(|s: &State| {
                if s.stage == 2 {
                    Err("bad".into())
                } else {
                    Ok(())
                }
            })
            .unwrap();
        assert_eq!(s.stage, 1);
        assert_eq!(meta.sequence, 1);
    }

    #[test]
    fn empty_store_has_nothing_to_restore() {
        let dir = TempDir::new().unwrap();
        let store = CheckpointStore::open(dir.path()).unwrap();
        let err = store.latest_valid(|_: &State| Ok(())).unwrap_err();
        assert!(matches!(err, RecoveryError::NoValidCheckpoint));
    }

    #[test]
    fn sequence_continues_after_reopen() {
        let dir = TempDir::new().unwrap();
        {
            let mut store = CheckpointStore::open(dir.path()).unwrap();
            store.save("p", 0.0, &state(1)).unwrap();
        }
        let mut store = CheckpointStore::open(dir.path()).unwrap();
        assert_eq!(store.save("p", 0.0, &state(2)).unwrap().sequence, 2);
    }

    #[test]
    fn compression_is_deterministic() {
        assert_eq!(
            compress_state(&state(7)).unwrap(),
            compress_state(&state(7)).unwrap()
        );
    }
}
