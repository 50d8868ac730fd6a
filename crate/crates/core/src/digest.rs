//! Hex SHA-256 helpers.

use alloc::string::String;
use core::fmt::Write;

use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    to_hex(&hash)
}

/// Incremental hasher that frames every field with its length so that
/// `("ab", "c")` and `("a", "bc")` never collide.
#[derive(Default, Clone)]
pub struct FieldHasher {
    inner: Sha256,
}

impl FieldHasher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(&mut self, bytes: &[u8]) -> &mut Self {
        self.inner.update((bytes.len() as u64).to_le_bytes());
        self.inner.update(bytes);
        self
    }

    pub fn finish_hex(self) -> String {
        to_hex(&self.inner.finalize())
    }
}

fn to_hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(out, "{b:02x}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_matches_known_vector() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn framing_separates_fields() {
        let mut a = FieldHasher::new();
        a.field(b"ab").field(b"c");
        let mut b = FieldHasher::new();
        b.field(b"a").field(b"bc");
        assert_ne!(a.finish_hex(), b.finish_hex());
    }
}
