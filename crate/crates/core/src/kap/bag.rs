//! Deterministic BagIt-style archival packages.
//!
//! Layout (bit-exact):
//!
//! ```text
//! bagit.txt               "BagIt-Version: 1.0\nTag-File-Character-Encoding: UTF-8\n"
//! bag-info.txt            sorted "Key: value" lines
//! manifest-sha256.txt     "<digest>  data/<path>\n" (two spaces), sorted by path
//! data/payload/<digest>   payload files named by digest
//! data/metadata/*.json    descriptor, trace, premis
//! ```
//!
//! The bag serializes as a single uncompressed ustar tar with entries in
//! sorted path order, mtime 0, fixed ownership and mode, so equal engine
//! state yields byte-identical bags.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kap::events::PreservationEvent;
use crate::prov::Trace;
use crate::store::BlobId;

pub const BAGIT_DECLARATION: &str = "BagIt-Version: 1.0\nTag-File-Character-Encoding: UTF-8\n";

/// `@context` constant for the RO-Crate-style descriptor. Emitted, not
/// interpreted: full JSON-LD processing is out of scope.
pub const RO_CRATE_CONTEXT: &str = "https://w3id.org/ro/crate/1.1/context";

/// A file under `data/` (path relative to `data/`).
#[derive(Debug, Clone)]
pub struct BagFile {
    pub path: String,
    pub bytes: Vec<u8>,
}

/// Assemble the bag tar from the `data/` files.
pub fn build_bag(pid: &str, bagging_date: &str, data_files: &[BagFile]) -> Vec<u8> {
    let mut files: BTreeMap<String, Vec<u8>> = BTreeMap::new();

    let mut payload_octets: u64 = 0;
    for f in data_files {
        payload_octets += f.bytes.len() as u64;
        files.insert(format!("data/{}", f.path), f.bytes.clone());
    }

    files.insert("bagit.txt".into(), BAGIT_DECLARATION.as_bytes().to_vec());

    let bag_info = format!(
        "Bagging-Date: {bagging_date}\nExternal-Identifier: {pid}\nPayload-Oxum: {payload_octets}.{}\n",
        data_files.len()
    );
    files.insert("bag-info.txt".into(), bag_info.into_bytes());

    let mut manifest = String::new();
    let mut paths: Vec<&BagFile> = data_files.iter().collect();
    paths.sort_by(|a, b| a.path.cmp(&b.path));
    for f in paths {
        manifest.push_str(&format!("{}  data/{}\n", BlobId::of(&f.bytes), f.path));
    }
    files.insert("manifest-sha256.txt".into(), manifest.into_bytes());

    write_tar(&files)
}

// ---------------------------------------------------------------------------
// Minimal deterministic ustar writer/reader
// ---------------------------------------------------------------------------

const BLOCK: usize = 512;

/// Write a ustar archive: sorted paths, mtime 0, mode 0644, uid/gid 0.
fn write_tar(files: &BTreeMap<String, Vec<u8>>) -> Vec<u8> {
    let mut out = Vec::new();
    for (path, bytes) in files {
        out.extend_from_slice(&tar_header(path, bytes.len() as u64));
        out.extend_from_slice(bytes);
        let pad = (BLOCK - bytes.len() % BLOCK) % BLOCK;
        out.extend(std::iter::repeat(0u8).take(pad));
    }
    out.extend(std::iter::repeat(0u8).take(2 * BLOCK));
    out
}

fn tar_header(name: &str, size: u64) -> [u8; BLOCK] {
    let mut h = [0u8; BLOCK];
    let put = |h: &mut [u8; BLOCK], offset: usize, bytes: &[u8]| {
        h[offset..offset + bytes.len()].copy_from_slice(bytes);
    };
    assert!(name.len() < 100, "bag entry name too long: {name}");
    put(&mut h, 0, name.as_bytes());
    put(&mut h, 100, b"0000644\0");
    put(&mut h, 108, b"0000000\0");
    put(&mut h, 116, b"0000000\0");
    put(&mut h, 124, format!("{size:011o}\0").as_bytes());
    put(&mut h, 136, b"00000000000\0");
    put(&mut h, 148, b"        "); // checksum placeholder
    h[156] = b'0';
    put(&mut h, 257, b"ustar\0");
    put(&mut h, 263, b"00");
    put(&mut h, 329, b"0000000\0");
    put(&mut h, 337, b"0000000\0");
    let checksum: u32 = h.iter().map(|b| *b as u32).sum();
    put(&mut h, 148, format!("{checksum:06o}\0 ").as_bytes());
    h
}

/// Parse a ustar archive back into path -> bytes.
pub fn parse_bag(bytes: &[u8]) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut files = BTreeMap::new();
    let mut pos = 0;
    while pos + BLOCK <= bytes.len() {
        let header = &bytes[pos..pos + BLOCK];
        if header.iter().all(|b| *b == 0) {
            return Ok(files);
        }
        let name = read_str(&header[0..100])?;
        let size = read_octal(&header[124..136])? as usize;
        let data_start = pos + BLOCK;
        if data_start + size > bytes.len() {
            return Err(Error::Parse(format!("tar entry {name} is truncated")));
        }
        files.insert(name, bytes[data_start..data_start + size].to_vec());
        let padded = size.div_ceil(BLOCK) * BLOCK;
        pos = data_start + padded;
    }
    Err(Error::Parse("tar archive is missing its end-of-archive blocks".into()))
}

fn read_str(field: &[u8]) -> Result<String> {
    let end = field.iter().position(|b| *b == 0).unwrap_or(field.len());
    String::from_utf8(field[..end].to_vec())
        .map_err(|_| Error::Parse("tar entry name is not UTF-8".into()))
}

fn read_octal(field: &[u8]) -> Result<u64> {
    let s = read_str(field)?;
    let trimmed = s.trim_matches([' ', '\0']).trim();
    if trimmed.is_empty() {
        return Ok(0);
    }
    u64::from_str_radix(trimmed, 8).map_err(|_| Error::Parse(format!("bad octal field {s:?}")))
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AipCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<AipCheck>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Validate a serialized bag: declaration, manifest digests (both
/// directions), bag-info consistency, descriptor schema, trace edge
/// constraints, and the premis event list. Failures are report entries,
/// never errors.
pub fn validate_aip(bytes: &[u8]) -> ValidationReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, pass: bool, detail: String| {
        checks.push(AipCheck {
            name: name.to_string(),
            pass,
            detail,
        });
    };

    let files = match parse_bag(bytes) {
        Ok(f) => f,
        Err(e) => {
            push("bag-structure", false, e.to_string());
            return ValidationReport { checks };
        }
    };
    push("bag-structure", true, format!("{} entries", files.len()));

    match files.get("bagit.txt") {
        Some(content) if content == BAGIT_DECLARATION.as_bytes() => {
            push("bag-declaration", true, "bagit.txt matches the declaration".into());
        }
        Some(_) => push("bag-declaration", false, "bagit.txt content differs".into()),
        None => push("bag-declaration", false, "bagit.txt is missing".into()),
    }

    // Manifest: every listed file present with matching digest.
    let mut listed: BTreeMap<String, String> = BTreeMap::new();
    match files.get("manifest-sha256.txt") {
        Some(manifest) => {
            let text = String::from_utf8_lossy(manifest);
            let mut all_ok = true;
            let mut detail = String::from("all digests match");
            for line in text.lines() {
                let Some((digest, path)) = line.split_once("  ") else {
                    all_ok = false;
                    detail = format!("malformed manifest line {line:?}");
                    continue;
                };
                listed.insert(path.to_string(), digest.to_string());
                match files.get(path) {
                    Some(content) => {
                        let actual = BlobId::of(content);
                        if actual.as_str() != digest {
                            all_ok = false;
                            detail = format!("digest mismatch for {path}");
                        }
                    }
                    None => {
                        all_ok = false;
                        detail = format!("{path} listed in manifest but missing");
                    }
                }
            }
            push("manifest-digests", all_ok, detail);
        }
        None => push("manifest-digests", false, "manifest-sha256.txt is missing".into()),
    }

    // Coverage: every data/ file is listed.
    let unlisted: Vec<&String> = files
        .keys()
        .filter(|p| p.starts_with("data/") && !listed.contains_key(*p))
        .collect();
    push(
        "manifest-coverage",
        unlisted.is_empty(),
        if unlisted.is_empty() {
            "every data/ file is listed".into()
        } else {
            format!("unlisted files: {unlisted:?}")
        },
    );

    // Payload-Oxum agreement.
    let oxum_ok = files.get("bag-info.txt").and_then(|info| {
        let text = String::from_utf8_lossy(info);
        let recorded = text
            .lines()
            .find_map(|l| l.strip_prefix("Payload-Oxum: "))?
            .to_string();
        let octets: u64 = files
            .iter()
            .filter(|(p, _)| p.starts_with("data/"))
            .map(|(_, b)| b.len() as u64)
            .sum();
        let count = files.keys().filter(|p| p.starts_with("data/")).count();
        Some(recorded == format!("{octets}.{count}"))
    });
    match oxum_ok {
        Some(true) => push("payload-oxum", true, "octet and stream counts agree".into()),
        Some(false) => push("payload-oxum", false, "Payload-Oxum disagrees with data/".into()),
        None => push("payload-oxum", false, "bag-info.txt lacks Payload-Oxum".into()),
    }

    match files.get("data/metadata/descriptor.json") {
        Some(content) => {
            let parsed: std::result::Result<serde_json::Value, _> = serde_json::from_slice(content);
            let detail = match parsed {
                Ok(v) => {
                    let context_ok = v.get("@context").and_then(|c| c.as_str()) == Some(RO_CRATE_CONTEXT);
                    let id_ok = v.get("@id").and_then(|c| c.as_str()).is_some();
                    let digest_ok = v
                        .pointer("/technical/digest")
                        .and_then(|d| d.as_str())
                        .is_some_and(|d| BlobId::parse(d).is_ok());
                    if context_ok && id_ok && digest_ok {
                        Ok(())
                    } else {
                        Err("descriptor lacks @context, @id, or technical.digest".to_string())
                    }
                }
                Err(e) => Err(format!("descriptor.json: {e}")),
            };
            match detail {
                Ok(()) => push("descriptor-schema", true, "descriptor is well-formed".into()),
                Err(d) => push("descriptor-schema", false, d),
            }
        }
        None => push("descriptor-schema", false, "descriptor.json is missing".into()),
    }

    match files.get("data/metadata/trace.json") {
        Some(content) => match serde_json::from_slice::<Trace>(content) {
            Ok(trace) => match trace.validate() {
                Ok(()) => push("trace-constraints", true, "edge constraints hold".into()),
                Err(e) => push("trace-constraints", false, e.to_string()),
            },
            Err(e) => push("trace-constraints", false, format!("trace.json: {e}")),
        },
        None => push("trace-constraints", false, "trace.json is missing".into()),
    }

    match files.get("data/metadata/premis.json") {
        Some(content) => match serde_json::from_slice::<Vec<PreservationEvent>>(content) {
            Ok(events) => push("premis-schema", true, format!("{} events", events.len())),
            Err(e) => push("premis-schema", false, format!("premis.json: {e}")),
        },
        None => push("premis-schema", false, "premis.json is missing".into()),
    }

    ValidationReport { checks }
}
