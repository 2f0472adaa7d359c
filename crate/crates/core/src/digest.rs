use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Short content hash of a value's canonical JSON form.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let json = serde_json::to_vec(value)?;
    let digest = Sha256::digest(&json);
    Ok(hex::encode(&digest[..8]))
}
