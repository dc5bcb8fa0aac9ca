//! Keyed message tags (HMAC-SHA256).

use sha2::{Digest as _, Sha256};

use crate::digest::Digest;

const BLOCK: usize = 64;

/// A shared 32-byte message-authentication key.
#[derive(Clone, PartialEq, Eq)]
pub struct MacKey([u8; 32]);

impl MacKey {
    pub fn new(bytes: [u8; 32]) -> MacKey {
        MacKey(bytes)
    }

    pub fn from_hex(text: &str) -> Option<MacKey> {
        let bytes = hex::decode(text.trim()).ok()?;
        Some(MacKey(bytes.try_into().ok()?))
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl std::fmt::Debug for MacKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("MacKey(..)")
    }
}

/// HMAC over an arbitrary-length key.
pub fn hmac_sha256(key: &[u8], message: &[u8]) -> Digest {
    let mut block = [0u8; BLOCK];
    if key.len() > BLOCK {
        block[..32].copy_from_slice(&Sha256::digest(key));
    } else {
        block[..key.len()].copy_from_slice(key);
    }
    let ipad: Vec<u8> = block.iter().map(|b| b ^ 0x36).collect();
    let opad: Vec<u8> = block.iter().map(|b| b ^ 0x5c).collect();

    let inner = Sha256::new()
        .chain_update(&ipad)
        .chain_update(message)
        .finalize();
    let outer = Sha256::new()
        .chain_update(&opad)
        .chain_update(inner)
        .finalize();
    Digest(outer.into())
}

pub fn tag_message(key: &MacKey, message: &[u8]) -> Digest {
    hmac_sha256(&key.0, message)
}

/// Recomputes the tag and compares all 32 bytes.
pub fn verify_message(key: &MacKey, message: &[u8], tag: &Digest) -> bool {
    let expected = tag_message(key, message);
    expected
        .0
        .iter()
        .zip(tag.0.iter())
        .fold(0u8, |acc, (a, b)| acc | (a ^ b))
        == 0
}
