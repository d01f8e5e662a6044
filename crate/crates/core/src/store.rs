//! Content-addressed bitstream storage with persistent identifiers.
//!
//! Layout under a store root:
//!
//! ```text
//! blobs/<first 2 hex>/<sha256 digest>   raw bitstreams, content-addressed
//! assets.jsonl                          one canonical-JSON asset record per line
//! .lock                                 flock target for the single-writer lock
//! ```
//!
//! Blobs are immutable after write; assets bind a stable [`Pid`] to a
//! [`BlobId`] and only their enrichment stage may advance. Duplicate bytes
//! deduplicate at the blob layer while each submission still mints its own
//! PID.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::canon;
use crate::error::{Error, Result};
use crate::format::FormatId;

/// Content address: lowercase hex SHA-256 of the bitstream.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlobId(String);

impl BlobId {
    pub fn of(bytes: &[u8]) -> Self {
        BlobId(hex::encode(Sha256::digest(bytes)))
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s.len() == 64 && s.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()) {
            Ok(BlobId(s.to_string()))
        } else {
            Err(Error::Invalid(format!(
                "blob id must be 64 lowercase hex characters, got {s:?}"
            )))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for BlobId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Persistent identifier: `ikmf:` + 32 lowercase hex characters.
///
/// Minted once from 128 bits of randomness, never derived from content, so
/// identity survives migration and derivation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pid(String);

impl Pid {
    pub fn mint() -> Self {
        let raw: [u8; 16] = rand::random();
        Pid(format!("ikmf:{}", hex::encode(raw)))
    }

    pub fn parse(s: &str) -> Result<Self> {
        let hexpart = s.strip_prefix("ikmf:").ok_or_else(|| {
            Error::Invalid(format!("pid must start with 'ikmf:', got {s:?}"))
        })?;
        if hexpart.len() == 32
            && hexpart
                .chars()
                .all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase())
        {
            Ok(Pid(s.to_string()))
        } else {
            Err(Error::Invalid(format!(
                "pid must be 'ikmf:' + 32 lowercase hex characters, got {s:?}"
            )))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for Pid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Enrichment stage of an asset. Advances monotonically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    Data,
    Content,
    Knowledge,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stage::Data => f.write_str("data"),
            Stage::Content => f.write_str("content"),
            Stage::Knowledge => f.write_str("knowledge"),
        }
    }
}

/// A PID-bearing record binding a content-addressed bitstream to its
/// enrichment stage and format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DigitalAsset {
    pub pid: Pid,
    pub blob: BlobId,
    /// Media type, or `None` while the format is unknown.
    pub format: Option<FormatId>,
    pub stage: Stage,
    pub ingested_at: String,
    pub source_hint: String,
    /// Ingest sequence number; orders exact-match results.
    pub seq: u64,
}

/// Outcome of one fixity verification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixityRecord {
    pub pid: Pid,
    pub expected: BlobId,
    pub observed: BlobId,
    pub verified_at: String,
    pub ok: bool,
}

// ---------------------------------------------------------------------------
// Store lock
// ---------------------------------------------------------------------------

/// Advisory lock on a store root. Exclusive for writers, shared for readers.
///
/// Backed by `flock(2)`, so the lock is released automatically when the
/// process exits, even on crash.
#[derive(Debug)]
pub struct StoreLock {
    file: fs::File,
}

impl StoreLock {
    pub fn exclusive(root: &Path) -> Result<Self> {
        Self::acquire(root, libc::LOCK_EX)
    }

    pub fn shared(root: &Path) -> Result<Self> {
        Self::acquire(root, libc::LOCK_SH)
    }

    fn acquire(root: &Path, op: libc::c_int) -> Result<Self> {
        fs::create_dir_all(root)?;
        let file = fs::OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(root.join(".lock"))?;
        let rc = unsafe { libc::flock(std::os::fd::AsRawFd::as_raw_fd(&file), op | libc::LOCK_NB) };
        if rc != 0 {
            return Err(Error::Locked(root.display().to_string()));
        }
        Ok(StoreLock { file })
    }
}

impl Drop for StoreLock {
    fn drop(&mut self) {
        unsafe {
            libc::flock(std::os::fd::AsRawFd::as_raw_fd(&self.file), libc::LOCK_UN);
        }
    }
}

// ---------------------------------------------------------------------------
// Blob store
// ---------------------------------------------------------------------------

/// Flat-file content-addressed blob store: `blobs/<first 2 hex>/<digest>`.
#[derive(Debug, Clone)]
pub struct BlobStore {
    root: PathBuf,
}

impl BlobStore {
    pub fn new(root: &Path) -> Self {
        BlobStore {
            root: root.to_path_buf(),
        }
    }

    pub fn blob_path(&self, id: &BlobId) -> PathBuf {
        self.root
            .join("blobs")
            .join(&id.as_str()[..2])
            .join(id.as_str())
    }

    /// Store bytes, returning their content address. Idempotent.
    pub fn put_blob(&self, bytes: &[u8]) -> Result<BlobId> {
        let id = BlobId::of(bytes);
        let path = self.blob_path(&id);
        if !path.exists() {
            fs::create_dir_all(path.parent().expect("blob path has parent"))?;
            let tmp = path.with_extension("tmp");
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
            fs::rename(&tmp, &path)?;
        }
        Ok(id)
    }

    /// Retrieve bytes, verifying they still hash to their address.
    pub fn get_blob(&self, id: &BlobId) -> Result<Vec<u8>> {
        let bytes = self.read_raw(id)?;
        let observed = BlobId::of(&bytes);
        if &observed != id {
            return Err(Error::Integrity(format!(
                "blob {id} hashes to {observed} on read"
            )));
        }
        Ok(bytes)
    }

    /// Read the backing file without verification (fixity checks compare
    /// the digest themselves).
    pub fn read_raw(&self, id: &BlobId) -> Result<Vec<u8>> {
        let path = self.blob_path(id);
        if !path.exists() {
            return Err(Error::NotFound(format!("blob {id}")));
        }
        Ok(fs::read(path)?)
    }

    pub fn contains(&self, id: &BlobId) -> bool {
        self.blob_path(id).exists()
    }

    /// Copy a blob into the replica tree (`replica/<first 2 hex>/<digest>`).
    pub fn replicate(&self, id: &BlobId) -> Result<PathBuf> {
        let bytes = self.get_blob(id)?;
        let path = self
            .root
            .join("replica")
            .join(&id.as_str()[..2])
            .join(id.as_str());
        fs::create_dir_all(path.parent().expect("replica path has parent"))?;
        fs::write(&path, bytes)?;
        Ok(path)
    }
}

// ---------------------------------------------------------------------------
// Asset registry
// ---------------------------------------------------------------------------

/// In-memory registry of all assets, persisted as `assets.jsonl`.
///
/// Holds the exact-match index (blob digest → pids in ingest order).
#[derive(Debug)]
pub struct AssetRegistry {
    path: PathBuf,
    assets: BTreeMap<Pid, DigitalAsset>,
    by_blob: BTreeMap<BlobId, Vec<Pid>>,
    next_seq: u64,
}

impl AssetRegistry {
    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join("assets.jsonl");
        let mut reg = AssetRegistry {
            path,
            assets: BTreeMap::new(),
            by_blob: BTreeMap::new(),
            next_seq: 0,
        };
        if reg.path.exists() {
            for (lineno, line) in fs::read_to_string(&reg.path)?.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let asset: DigitalAsset = serde_json::from_str(line).map_err(|e| {
                    Error::Parse(format!("assets.jsonl line {}: {e}", lineno + 1))
                })?;
                reg.next_seq = reg.next_seq.max(asset.seq + 1);
                reg.index(&asset);
                reg.assets.insert(asset.pid.clone(), asset);
            }
            reg.sort_blob_index();
        }
        Ok(reg)
    }

    fn index(&mut self, asset: &DigitalAsset) {
        self.by_blob
            .entry(asset.blob.clone())
            .or_default()
            .push(asset.pid.clone());
    }

    fn sort_blob_index(&mut self) {
        let assets = &self.assets;
        for pids in self.by_blob.values_mut() {
            pids.sort_by_key(|p| assets[p].seq);
        }
    }

    /// Register a new asset. Mints the PID, stamps the ingest sequence.
    pub fn register(
        &mut self,
        blob: BlobId,
        format: Option<FormatId>,
        source_hint: &str,
    ) -> Result<DigitalAsset> {
        let mut pid = Pid::mint();
        while self.assets.contains_key(&pid) {
            pid = Pid::mint();
        }
        let asset = DigitalAsset {
            pid: pid.clone(),
            blob,
            format,
            stage: Stage::Data,
            ingested_at: canon::now_rfc3339(),
            source_hint: source_hint.to_string(),
            seq: self.next_seq,
        };
        self.next_seq += 1;
        self.index(&asset);
        self.assets.insert(pid, asset.clone());
        self.persist()?;
        Ok(asset)
    }

    pub fn get(&self, pid: &Pid) -> Result<&DigitalAsset> {
        self.assets
            .get(pid)
            .ok_or_else(|| Error::NotFound(format!("asset {pid}")))
    }

    pub fn contains(&self, pid: &Pid) -> bool {
        self.assets.contains_key(pid)
    }

    /// All assets in ingest order.
    pub fn all(&self) -> Vec<&DigitalAsset> {
        let mut v: Vec<&DigitalAsset> = self.assets.values().collect();
        v.sort_by_key(|a| a.seq);
        v
    }

    /// All and only pids whose asset blob equals `id`, in ingest order.
    pub fn exact_match(&self, id: &BlobId) -> Vec<Pid> {
        self.by_blob.get(id).cloned().unwrap_or_default()
    }

    /// Advance the enrichment stage. Regressions are rejected; setting the
    /// current stage again is a no-op.
    pub fn advance_stage(&mut self, pid: &Pid, stage: Stage) -> Result<()> {
        let asset = self
            .assets
            .get_mut(pid)
            .ok_or_else(|| Error::NotFound(format!("asset {pid}")))?;
        if stage < asset.stage {
            return Err(Error::Invalid(format!(
                "stage of {pid} may only advance ({} -> {stage} rejected)",
                asset.stage
            )));
        }
        if stage != asset.stage {
            asset.stage = stage;
            self.persist()?;
        }
        Ok(())
    }

    /// Set the format of an asset (e.g. after identification).
    pub fn set_format(&mut self, pid: &Pid, format: FormatId) -> Result<()> {
        let asset = self
            .assets
            .get_mut(pid)
            .ok_or_else(|| Error::NotFound(format!("asset {pid}")))?;
        asset.format = Some(format);
        self.persist()
    }

    fn persist(&self) -> Result<()> {
        let mut out = String::new();
        for asset in self.all() {
            out.push_str(&canon::to_canonical_json_line(asset)?);
        }
        if let Some(parent) = self.path.parent() {
            fs::create_dir_all(parent)?;
        }
        let tmp = self.path.with_extension("jsonl.tmp");
        fs::write(&tmp, out)?;
        fs::rename(&tmp, &self.path)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn temp_store() -> (tempfile::TempDir, BlobStore) {
        let dir = tempfile::tempdir().unwrap();
        let store = BlobStore::new(dir.path());
        (dir, store)
    }

    #[test]
    fn empty_input_digest_matches_reference() {
        // Independently computed with an external SHA-256 tool.
        assert_eq!(
            BlobId::of(b"").as_str(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn put_is_idempotent() {
        let (_d, store) = temp_store();
        let a = store.put_blob(b"12345").unwrap();
        let path = store.blob_path(&a);
        let mtime = path.metadata().unwrap().modified().unwrap();
        let b = store.put_blob(b"12345").unwrap();
        assert_eq!(a, b);
        // Second call did not rewrite the file.
        assert_eq!(path.metadata().unwrap().modified().unwrap(), mtime);
    }

    #[test]
    fn distinct_bytes_distinct_ids() {
        let (_d, store) = temp_store();
        let a = store.put_blob(b"12345").unwrap();
        let b = store.put_blob(b"12346").unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn get_unknown_is_not_found() {
        let (_d, store) = temp_store();
        let id = BlobId::of(b"never stored");
        assert!(matches!(store.get_blob(&id), Err(Error::NotFound(_))));
    }

    #[test]
    fn corrupted_blob_detected_on_read() {
        let (_d, store) = temp_store();
        let id = store.put_blob(b"precious bytes").unwrap();
        let path = store.blob_path(&id);
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] ^= 0xff;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(store.get_blob(&id), Err(Error::Integrity(_))));
    }

    #[test]
    fn registry_roundtrip_and_exact_match_order() {
        let dir = tempfile::tempdir().unwrap();
        let store = BlobStore::new(dir.path());
        let blob = store.put_blob(b"same bytes").unwrap();
        let mut reg = AssetRegistry::load(dir.path()).unwrap();
        let a1 = reg.register(blob.clone(), None, "first").unwrap();
        let a2 = reg.register(blob.clone(), None, "second").unwrap();
        assert_ne!(a1.pid, a2.pid);
        assert_eq!(reg.exact_match(&blob), vec![a1.pid.clone(), a2.pid.clone()]);

        // Reload from disk preserves order.
        drop(reg);
        let reg = AssetRegistry::load(dir.path()).unwrap();
        assert_eq!(reg.exact_match(&blob), vec![a1.pid, a2.pid]);
        assert!(reg.exact_match(&BlobId::of(b"other")).is_empty());
    }

    #[test]
    fn stage_is_monotone() {
        let dir = tempfile::tempdir().unwrap();
        let store = BlobStore::new(dir.path());
        let blob = store.put_blob(b"x").unwrap();
        let mut reg = AssetRegistry::load(dir.path()).unwrap();
        let asset = reg.register(blob, None, "t").unwrap();
        reg.advance_stage(&asset.pid, Stage::Knowledge).unwrap();
        assert!(reg.advance_stage(&asset.pid, Stage::Content).is_err());
    }

    #[test]
    fn lock_is_exclusive_per_root() {
        let dir = tempfile::tempdir().unwrap();
        let _a = StoreLock::exclusive(dir.path()).unwrap();
        assert!(matches!(
            StoreLock::exclusive(dir.path()),
            Err(Error::Locked(_))
        ));
    }

    proptest! {
        #[test]
        fn blob_round_trip(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
            let (_d, store) = temp_store();
            let id = store.put_blob(&bytes).unwrap();
            prop_assert_eq!(store.get_blob(&id).unwrap(), bytes);
        }

        #[test]
        fn exact_match_agrees_with_scan(
            docs in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..16), 1..8),
            probe in proptest::collection::vec(any::<u8>(), 0..16),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let store = BlobStore::new(dir.path());
            let mut reg = AssetRegistry::load(dir.path()).unwrap();
            for d in &docs {
                let blob = store.put_blob(d).unwrap();
                reg.register(blob, None, "prop").unwrap();
            }
            let id = BlobId::of(&probe);
            // Brute-force oracle: scan every asset in ingest order.
            let expected: Vec<Pid> = reg
                .all()
                .iter()
                .filter(|a| a.blob == id)
                .map(|a| a.pid.clone())
                .collect();
            prop_assert_eq!(reg.exact_match(&id), expected);
        }
    }
}
