//! Canonical JSON encoding and the SHA-256 state digest built on it.
//!
//! Canonical form: object keys sorted bytewise, UTF-8, no insignificant
//! whitespace, integers in base 10. Floats never appear in system state.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Serializes `value` canonically. Going through `serde_json::Value` sorts
/// every object's keys because its map is ordered.
pub fn to_canonical_vec<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let tree = serde_json::to_value(value).expect("system state is always representable as JSON");
    serde_json::to_vec(&tree).expect("JSON value serialization cannot fail")
}

pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> String {
    String::from_utf8(to_canonical_vec(value)).expect("serde_json emits UTF-8")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hex SHA-256 over the canonical bytes of `state`.
pub fn state_digest<T: Serialize + ?Sized>(state: &T) -> String {
    sha256_hex(&to_canonical_vec(state))
}

/// Serde adapter storing `Bytes` as standard base64.
pub mod base64_bytes {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use bytes::Bytes;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &Bytes, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Bytes, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD
            .decode(text)
            .map(Bytes::from)
            .map_err(serde::de::Error::custom)
    }
}
