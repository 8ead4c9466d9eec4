//! Canonical block serialization, SHA-256 hashing, difficulty targets, and
//! sequential nonce-search mining.

use std::fmt;

use sha2::{Digest as _, Sha256};
use thiserror::Error;

/// Width of a SHA-256 digest in bytes.
pub const DIGEST_LEN: usize = 32;

/// Mining is bounded to targets that a desk machine can hit in milliseconds.
pub const MAX_MINING_BITS: u8 = 32;

/// A SHA-256 digest. Rendered as 64 lowercase hex characters wherever it is
/// serialized or printed.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest([u8; DIGEST_LEN]);

impl Digest {
    /// The all-zero digest, used as the previous-hash of every genesis block.
    pub const ZERO: Digest = Digest([0u8; DIGEST_LEN]);

    pub fn from_bytes(bytes: [u8; DIGEST_LEN]) -> Self {
        Digest(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Parses exactly 64 lowercase hex characters.
    pub fn from_hex(s: &str) -> Result<Self, DigestParseError> {
        if s.len() != 2 * DIGEST_LEN {
            return Err(DigestParseError::Length(s.len()));
        }
        if s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(DigestParseError::NotLowercase);
        }
        let mut out = [0u8; DIGEST_LEN];
        hex::decode_to_slice(s, &mut out).map_err(|_| DigestParseError::NotHex)?;
        Ok(Digest(out))
    }

    /// Number of leading zero bits, counted from the most significant bit.
    pub fn leading_zero_bits(&self) -> u32 {
        let mut bits = 0;
        for byte in self.0 {
            if byte == 0 {
                bits += 8;
            } else {
                bits += byte.leading_zeros();
                break;
            }
        }
        bits
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DigestParseError {
    #[error("digest hex must be {} characters, got {0}", 2 * DIGEST_LEN)]
    Length(usize),
    #[error("digest hex must be lowercase")]
    NotLowercase,
    #[error("digest hex contains a non-hex character")]
    NotHex,
}

/// Proof-of-work target expressed as the number of leading zero bits a block
/// hash must carry. Equivalent to requiring the hash, read as a big-endian
/// integer, to be below `2^(256 - bits)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Difficulty(u8);

impl Difficulty {
    /// Zero difficulty: every hash is accepted.
    pub const NONE: Difficulty = Difficulty(0);

    pub fn new(leading_zero_bits: u8) -> Self {
        Difficulty(leading_zero_bits)
    }

    pub fn bits(self) -> u8 {
        self.0
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The mined fields of one block: everything that is hashed.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BlockHeader {
    /// Block height within its chain; 0 for genesis.
    pub index: u64,
    /// Hash of the preceding block; all-zero for genesis.
    pub previous_hash: Digest,
    /// Transaction data carried by this block.
    pub payload: Vec<u8>,
    /// Counter found by mining; re-hashing the header reproduces the stored
    /// hash exactly.
    pub nonce: u64,
}

/// A header together with its cached hash. The hash always equals
/// `hash_block(&header)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Block {
    pub header: BlockHeader,
    pub hash: Digest,
}

impl Block {
    pub fn payload(&self) -> &[u8] {
        &self.header.payload
    }

    /// True iff the cached hash matches a fresh hash of the header.
    pub fn verify_hash(&self) -> bool {
        hash_block(&self.header) == self.hash
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MineError {
    #[error("difficulty of {0} bits exceeds the mining bound of {MAX_MINING_BITS} bits")]
    DifficultyTooHigh(u8),
    #[error("exhausted the 64-bit nonce space without meeting the target")]
    NonceSpaceExhausted,
}

/// Deterministic, injective encoding of a header:
/// index (8 bytes BE) ‖ previous_hash (32 bytes) ‖ payload length (8 bytes BE)
/// ‖ payload ‖ nonce (8 bytes BE).
pub fn canonical_serialize(header: &BlockHeader) -> Vec<u8> {
    let mut buf = Vec::with_capacity(56 + header.payload.len());
    buf.extend_from_slice(&header.index.to_be_bytes());
    buf.extend_from_slice(header.previous_hash.as_bytes());
    buf.extend_from_slice(&(header.payload.len() as u64).to_be_bytes());
    buf.extend_from_slice(&header.payload);
    buf.extend_from_slice(&header.nonce.to_be_bytes());
    buf
}

/// SHA-256 of the canonical serialization.
pub fn hash_block(header: &BlockHeader) -> Digest {
    let digest = Sha256::digest(canonical_serialize(header));
    Digest(digest.into())
}

/// True iff the first `difficulty.bits()` bits of the digest are zero.
pub fn meets_target(digest: &Digest, difficulty: Difficulty) -> bool {
    digest.leading_zero_bits() >= u32::from(difficulty.bits())
}

/// Searches nonces 0, 1, 2, … and returns the block with the smallest nonce
/// whose hash meets the target. Pure function of its inputs.
pub fn mine(
    index: u64,
    previous_hash: Digest,
    payload: &[u8],
    difficulty: Difficulty,
) -> Result<Block, MineError> {
    if difficulty.bits() > MAX_MINING_BITS {
        return Err(MineError::DifficultyTooHigh(difficulty.bits()));
    }
    let mut header = BlockHeader {
        index,
        previous_hash,
        payload: payload.to_vec(),
        nonce: 0,
    };
    // The serialized header only changes in its trailing nonce bytes, so the
    // buffer is built once and patched per attempt.
    let mut buf = canonical_serialize(&header);
    let nonce_at = buf.len() - 8;
    loop {
        let digest = Digest(Sha256::digest(&buf).into());
        if meets_target(&digest, difficulty) {
            return Ok(Block {
                header,
                hash: digest,
            });
        }
        header.nonce = header
            .nonce
            .checked_add(1)
            .ok_or(MineError::NonceSpaceExhausted)?;
        buf[nonce_at..].copy_from_slice(&header.nonce.to_be_bytes());
    }
}
