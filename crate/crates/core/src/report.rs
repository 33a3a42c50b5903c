//! Provenance shared by every output artifact.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// SHA-256 of the canonical (compact, key-ordered) JSON encoding of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    // Round-trip through `Value` so map keys come out sorted.
    let canonical = serde_json::to_vec(&serde_json::to_value(value)?)?;
    Ok(hex::encode(Sha256::digest(&canonical)))
}
