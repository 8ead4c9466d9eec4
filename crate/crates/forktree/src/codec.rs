//! Canonical JSON plumbing shared by the on-disk formats, the repository
//! record encoding, and the wire protocol: lexicographically sorted keys, no
//! insignificant whitespace, lowercase hex for byte strings.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::hashcore::{Block, BlockHeader, Digest};

/// Serializes through `serde_json::Value`: its object map is a `BTreeMap`,
/// so keys come out sorted regardless of struct field order, and
/// `to_string` emits no whitespace.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("canonical types serialize infallibly");
    serde_json::to_string(&value).expect("json values render infallibly")
}

/// Strict parse: the input must be valid JSON for `T` AND byte-identical to
/// the canonical re-encoding of the parsed value. Rejects insignificant
/// whitespace, unsorted keys, uppercase hex, and trailing bytes.
pub fn from_canonical_json<T: Serialize + DeserializeOwned>(
    bytes: &[u8],
) -> Result<T, CanonicalJsonError> {
    let value: T = serde_json::from_slice(bytes)?;
    if to_canonical_json(&value).as_bytes() != bytes {
        return Err(CanonicalJsonError::NotCanonical);
    }
    Ok(value)
}

#[derive(Debug, thiserror::Error)]
pub enum CanonicalJsonError {
    #[error("json parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("input is not in canonical form")]
    NotCanonical,
}

/// Serde helpers for `Vec<u8>` fields carried as lowercase hex strings.
pub mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(deserializer)?;
        hex::decode(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde helpers for [`Digest`] fields carried as 64 lowercase hex chars.
pub mod hex_digest {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::hashcore::Digest;

    pub fn serialize<S: Serializer>(digest: &Digest, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&digest.to_hex())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Digest, D::Error> {
        let s = String::deserialize(deserializer)?;
        // Case strictness is enforced by the canonical re-encoding check;
        // here only shape errors are fatal.
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// The block object shared by chain files and the wire protocol's BLOCK
/// response: {"hash", "index", "nonce", "payload_hex", "previous_hash"} in
/// canonical key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockDoc {
    pub index: u64,
    #[serde(with = "hex_digest")]
    pub previous_hash: Digest,
    #[serde(with = "hex_bytes")]
    pub payload_hex: Vec<u8>,
    pub nonce: u64,
    #[serde(with = "hex_digest")]
    pub hash: Digest,
}

impl From<&Block> for BlockDoc {
    fn from(block: &Block) -> Self {
        BlockDoc {
            index: block.header.index,
            previous_hash: block.header.previous_hash,
            payload_hex: block.header.payload.clone(),
            nonce: block.header.nonce,
            hash: block.hash,
        }
    }
}

impl From<BlockDoc> for Block {
    fn from(doc: BlockDoc) -> Self {
        Block {
            header: BlockHeader {
                index: doc.index,
                previous_hash: doc.previous_hash,
                payload: doc.payload_hex,
                nonce: doc.nonce,
            },
            hash: doc.hash,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashcore::{mine, Difficulty};

    #[test]
    fn keys_come_out_sorted_and_compact() {
        #[derive(Serialize)]
        struct Scrambled {
            zebra: u32,
            apple: u32,
        }
        let json = to_canonical_json(&Scrambled { zebra: 1, apple: 2 });
        assert_eq!(json, r#"{"apple":2,"zebra":1}"#);
    }

    #[test]
    fn block_doc_round_trips_and_is_canonical() {
        let block = mine(3, Digest::ZERO, b"tx", Difficulty::NONE).unwrap();
        let doc = BlockDoc::from(&block);
        let json = to_canonical_json(&doc);
        assert!(json.starts_with(r#"{"hash":""#));
        assert!(json.contains(r#""payload_hex":"7478""#));
        let parsed: BlockDoc = from_canonical_json(json.as_bytes()).unwrap();
        assert_eq!(Block::from(parsed), block);
    }

    #[test]
    fn non_canonical_inputs_are_rejected() {
        let block = mine(0, Digest::ZERO, b"x", Difficulty::NONE).unwrap();
        let json = to_canonical_json(&BlockDoc::from(&block));

        let spaced = json.replace(':', ": ");
        assert!(from_canonical_json::<BlockDoc>(spaced.as_bytes()).is_err());

        let mut trailing = json.clone().into_bytes();
        trailing.push(b'\n');
        assert!(from_canonical_json::<BlockDoc>(&trailing).is_err());

        let extra_field = json.replacen('{', r#"{"bogus":1,"#, 1);
        assert!(from_canonical_json::<BlockDoc>(extra_field.as_bytes()).is_err());
    }

    #[test]
    fn uppercase_hex_is_rejected_by_canonical_check() {
        let block = mine(0, Digest::ZERO, b"\xab", Difficulty::NONE).unwrap();
        let json = to_canonical_json(&BlockDoc::from(&block));
        assert!(json.contains(r#""payload_hex":"ab""#));
        let upper = json.replace(r#""payload_hex":"ab""#, r#""payload_hex":"AB""#);
        assert_ne!(json, upper);
        assert!(from_canonical_json::<BlockDoc>(upper.as_bytes()).is_err());
    }
}
