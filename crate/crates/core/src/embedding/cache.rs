//! Binary embedding cache.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "RRV1" | dim: u32 | count: u64 | count x (id: u64 | dim x f32)
//! ```
//!
//! Records are written in ascending id order so identical caches are
//! byte-identical.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::{Arc, RwLock};

use super::{EmbedError, EmbeddingVector};

pub const CACHE_MAGIC: &[u8; 4] = b"RRV1";

/// Write-once-per-key vector cache, safe for concurrent readers.
#[derive(Debug)]
pub struct EmbeddingCache {
    dim: usize,
    entries: RwLock<HashMap<u64, Arc<EmbeddingVector>>>,
}

impl EmbeddingCache {
    pub fn new(dim: usize) -> Self {
        EmbeddingCache { dim, entries: RwLock::new(HashMap::new()) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, id: u64) -> Option<Arc<EmbeddingVector>> {
        self.entries.read().expect("cache poisoned").get(&id).cloned()
    }

    pub fn contains(&self, id: u64) -> bool {
        self.entries.read().expect("cache poisoned").contains_key(&id)
    }

    /// Insert unless the key already exists; the first value wins.
    /// Returns the stored value.
    pub fn insert(&self, id: u64, vector: EmbeddingVector) -> Result<Arc<EmbeddingVector>, EmbedError> {
        if vector.dim() != self.dim {
            return Err(EmbedError::DimensionMismatch(vector.dim(), self.dim));
        }
        let mut entries = self.entries.write().expect("cache poisoned");
        Ok(entries.entry(id).or_insert_with(|| Arc::new(vector)).clone())
    }

    pub fn encode(&self) -> Vec<u8> {
        let entries = self.entries.read().expect("cache poisoned");
        let mut ids: Vec<&u64> = entries.keys().collect();
        ids.sort_unstable();
        let mut out = Vec::with_capacity(16 + ids.len() * (8 + 4 * self.dim));
        out.extend_from_slice(CACHE_MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(ids.len() as u64).to_le_bytes());
        for id in ids {
            out.extend_from_slice(&id.to_le_bytes());
            for v in entries[id].values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(mut bytes: &[u8]) -> Result<Self, EmbedError> {
        let mut header = [0u8; 16];
        bytes
            .read_exact(&mut header)
            .map_err(|_| EmbedError::Cache("truncated header".into()))?;
        if &header[..4] != CACHE_MAGIC {
            return Err(EmbedError::Cache("bad magic".into()));
        }
        let dim = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes")) as usize;
        let count = u64::from_le_bytes(header[8..16].try_into().expect("8 bytes"));
        let record_len = 8 + 4 * dim;
        if (bytes.len() as u64) != count.saturating_mul(record_len as u64) {
            return Err(EmbedError::Cache(format!(
                "expected {count} records of {record_len} bytes, found {} bytes",
                bytes.len()
            )));
        }
        let cache = EmbeddingCache::new(dim);
        {
            let mut entries = cache.entries.write().expect("cache poisoned");
            for record in bytes.chunks_exact(record_len) {
                let id = u64::from_le_bytes(record[..8].try_into().expect("8 bytes"));
                let values = record[8..]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect();
                if entries.insert(id, Arc::new(EmbeddingVector::from_raw(values))).is_some() {
                    return Err(EmbedError::Cache(format!("duplicate id {id:016x}")));
                }
            }
        }
        Ok(cache)
    }

    pub fn write_to(&self, path: &Path) -> Result<(), EmbedError> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(&self.encode())?;
        file.sync_all()?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self, EmbedError> {
        Self::decode(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let cache = EmbeddingCache::new(2);
        cache.insert(0x0102, EmbeddingVector::from_raw(vec![1.0, 0.0])).unwrap();
        let bytes = cache.encode();
        assert_eq!(&bytes[..4], b"RRV1");
        assert_eq!(&bytes[4..8], &[2, 0, 0, 0]);
        assert_eq!(&bytes[8..16], &[1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&bytes[16..24], &[0x02, 0x01, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&bytes[24..28], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 16 + 8 + 8);
    }

    #[test]
    fn first_insert_wins() {
        let cache = EmbeddingCache::new(2);
        cache.insert(1, EmbeddingVector::from_raw(vec![1.0, 0.0])).unwrap();
        let kept = cache.insert(1, EmbeddingVector::from_raw(vec![0.0, 1.0])).unwrap();
        assert_eq!(kept.values(), &[1.0, 0.0]);
        assert!(cache.insert(2, EmbeddingVector::from_raw(vec![1.0])).is_err());
    }

    #[test]
    fn decode_rejects_garbage() {
        assert!(EmbeddingCache::decode(b"RRV").is_err());
        assert!(EmbeddingCache::decode(b"XXXX\x02\0\0\0\0\0\0\0\0\0\0\0").is_err());
        let mut bytes = EmbeddingCache::new(2).encode();
        bytes[8] = 1;
        assert!(EmbeddingCache::decode(&bytes).is_err());
    }

    #[test]
    fn round_trip() {
        let cache = EmbeddingCache::new(3);
        cache.insert(9, EmbeddingVector::from_raw(vec![0.6, 0.8, 0.0])).unwrap();
        cache.insert(3, EmbeddingVector::from_raw(vec![0.0, 0.0, 1.0])).unwrap();
        let bytes = cache.encode();
        let back = EmbeddingCache::decode(&bytes).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.get(9).unwrap().values(), &[0.6, 0.8, 0.0]);
        assert_eq!(back.encode(), bytes);
    }
}
