//! Self-describing parameter container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "LSCKPT\0\0"
//! version  u32
//! hlen     u64      length of the JSON header
//! header   hlen     {"model", "vocab_hash", "config", "entries": [{"name", "shape"}]}
//! values   f64 LE   every entry's data, in header order
//! digest   32 bytes SHA-256 of everything above
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::io;

pub const MAGIC: &[u8; 8] = b"LSCKPT\0\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    model: String,
    vocab_hash: String,
    config: serde_json::Value,
    entries: Vec<Entry>,
}

#[derive(Debug)]
pub struct Checkpoint {
    pub model: String,
    pub vocab_hash: String,
    pub config: serde_json::Value,
    pub params: ParamStore,
}

pub fn encode_checkpoint(
    model: &str,
    params: &ParamStore,
    config: &serde_json::Value,
    vocab_hash: &str,
) -> Vec<u8> {
    let header = Header {
        model: model.to_string(),
        vocab_hash: vocab_hash.to_string(),
        config: config.clone(),
        entries: params
            .iter()
            .map(|p| Entry {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
            })
            .collect(),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(64 + header.len() + params.num_scalars() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for p in params.iter() {
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let bad = |msg: &str| Error::Checkpoint(msg.to_string());
    if bytes.len() < MAGIC.len() + 4 + 8 + 32 {
        return Err(bad("checkpoint truncated"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint file (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "checkpoint format version {version} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    if Sha256::digest(body).as_slice() != digest {
        return Err(bad("checkpoint digest mismatch (truncated or corrupted file)"));
    }
    let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let header_end = 20usize
        .checked_add(hlen)
        .filter(|&e| e <= body.len())
        .ok_or_else(|| bad("checkpoint header overruns file"))?;
    let header: Header = serde_json::from_slice(&body[20..header_end])
        .map_err(|e| Error::Checkpoint(format!("checkpoint header: {e}")))?;
    let mut values = body[header_end..].chunks_exact(8);
    if !values.remainder().is_empty() {
        return Err(bad("checkpoint payload is not a whole number of values"));
    }
    let mut params = ParamStore::new();
    for entry in header.entries {
        let n: usize = entry.shape.iter().product();
        let data: Vec<f64> = values
            .by_ref()
            .take(n)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if data.len() != n {
            return Err(Error::Checkpoint(format!("payload ends inside {}", entry.name)));
        }
        let t = Tensor::new(entry.shape, data)?;
        if !t.is_finite() {
            return Err(Error::NonFinite(format!("checkpoint entry {}", entry.name)));
        }
        params.add(entry.name, t)?;
    }
    if values.next().is_some() {
        return Err(bad("checkpoint has trailing values"));
    }
    Ok(Checkpoint {
        model: header.model,
        vocab_hash: header.vocab_hash,
        config: header.config,
        params,
    })
}

pub fn save_checkpoint(
    path: &Path,
    model: &str,
    params: &ParamStore,
    config: &serde_json::Value,
    vocab_hash: &str,
) -> Result<()> {
    params.check_finite()?;
    io::atomic_write(path, &encode_checkpoint(model, params, config, vocab_hash))
}

/// Loads and validates a checkpoint. `model` must match the stored model name;
/// `vocab_hash`, when given, must match the stored vocabulary hash.
pub fn load_checkpoint(path: &Path, model: &str, vocab_hash: Option<&str>) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    let ckpt = decode_checkpoint(&bytes)?;
    if ckpt.model != model {
        return Err(Error::Checkpoint(format!(
            "{} holds a {:?} model, expected {model:?}",
            path.display(),
            ckpt.model
        )));
    }
    if let Some(expected) = vocab_hash {
        if ckpt.vocab_hash != expected {
            return Err(Error::VocabMismatch {
                expected: ckpt.vocab_hash,
                found: expected.to_string(),
            });
        }
    }
    Ok(ckpt)
}
