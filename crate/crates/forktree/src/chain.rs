//! A single blockchain instance: genesis creation, mined append, full-chain
//! validation, and local payload search.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hashcore::{hash_block, meets_target, mine, Block, Difficulty, Digest, MineError};

/// Unique identifier of one network, fixed at genesis.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct NetworkId(pub u64);

impl fmt::Display for NetworkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for NetworkId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(NetworkId)
    }
}

impl From<u64> for NetworkId {
    fn from(id: u64) -> Self {
        NetworkId(id)
    }
}

/// One blockchain: identity metadata plus its hash-linked block list.
///
/// Values are immutable after construction; [`ChainInstance::append_payload`]
/// returns a new value, so replacing a chain is the caller's coordination
/// point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainInstance {
    network_id: NetworkId,
    parent_network_id: Option<NetworkId>,
    fork_block_no: u64,
    port: u16,
    difficulty: Difficulty,
    blocks: Vec<Block>,
}

/// Why a chain failed validation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaultReason {
    BadGenesis,
    WrongIndex,
    StaleHash,
    BrokenLink,
    BelowDifficulty,
}

impl fmt::Display for FaultReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FaultReason::BadGenesis => "bad-genesis",
            FaultReason::WrongIndex => "wrong-index",
            FaultReason::StaleHash => "stale-hash",
            FaultReason::BrokenLink => "broken-link",
            FaultReason::BelowDifficulty => "below-difficulty",
        };
        f.write_str(s)
    }
}

/// The lowest block index at which a validation check fails, with the reason.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
#[error("block {index}: {reason}")]
pub struct ChainFault {
    pub index: u64,
    pub reason: FaultReason,
}

/// Result of validating a chain. Invalidity is a value, not an error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainValidity {
    Valid,
    Invalid(ChainFault),
}

impl ChainValidity {
    pub fn is_valid(&self) -> bool {
        matches!(self, ChainValidity::Valid)
    }

    pub fn fault(&self) -> Option<ChainFault> {
        match self {
            ChainValidity::Valid => None,
            ChainValidity::Invalid(fault) => Some(*fault),
        }
    }
}

impl ChainInstance {
    /// Creates a root chain of exactly one mined genesis block.
    pub fn create(
        network_id: NetworkId,
        port: u16,
        difficulty: Difficulty,
        genesis_payload: &[u8],
    ) -> Result<Self, MineError> {
        let genesis = mine(0, Digest::ZERO, genesis_payload, difficulty)?;
        Ok(ChainInstance {
            network_id,
            parent_network_id: None,
            fork_block_no: 0,
            port,
            difficulty,
            blocks: vec![genesis],
        })
    }

    /// Reassembles a chain from previously validated parts. No checks are
    /// performed here; pair with [`ChainInstance::validate`].
    pub fn from_parts(
        network_id: NetworkId,
        parent_network_id: Option<NetworkId>,
        fork_block_no: u64,
        port: u16,
        difficulty: Difficulty,
        blocks: Vec<Block>,
    ) -> Self {
        ChainInstance {
            network_id,
            parent_network_id,
            fork_block_no,
            port,
            difficulty,
            blocks,
        }
    }

    pub fn network_id(&self) -> NetworkId {
        self.network_id
    }

    pub fn parent_network_id(&self) -> Option<NetworkId> {
        self.parent_network_id
    }

    /// Number of blocks shared with the parent at fork time; 0 for a root.
    pub fn fork_block_no(&self) -> u64 {
        self.fork_block_no
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    pub fn difficulty(&self) -> Difficulty {
        self.difficulty
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn height(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("chains are never empty")
    }

    /// Mines one block carrying `payload` on top of the current tip and
    /// returns the extended chain. Every pre-existing block is unchanged.
    pub fn append_payload(&self, payload: &[u8]) -> Result<Self, MineError> {
        let tip_hash = self.tip().hash;
        let block = mine(self.height(), tip_hash, payload, self.difficulty)?;
        let mut next = self.clone();
        next.blocks.push(block);
        Ok(next)
    }

    /// Checks every structural invariant and reports the lowest index at
    /// which one fails.
    ///
    /// The difficulty check applies only to blocks at index >=
    /// `fork_block_no`: the inherited prefix of a forked chain keeps the
    /// hashes it was mined with under ancestor difficulties.
    pub fn validate(&self) -> ChainValidity {
        for (i, block) in self.blocks.iter().enumerate() {
            let index = i as u64;
            let fault = |reason| ChainValidity::Invalid(ChainFault { index, reason });
            if hash_block(&block.header) != block.hash {
                return fault(FaultReason::StaleHash);
            }
            if i == 0 {
                if block.header.index != 0 || block.header.previous_hash != Digest::ZERO {
                    return fault(FaultReason::BadGenesis);
                }
            } else {
                if block.header.index != index {
                    return fault(FaultReason::WrongIndex);
                }
                if block.header.previous_hash != self.blocks[i - 1].hash {
                    return fault(FaultReason::BrokenLink);
                }
            }
            if index >= self.fork_block_no && !meets_target(&block.hash, self.difficulty) {
                return fault(FaultReason::BelowDifficulty);
            }
        }
        ChainValidity::Valid
    }

    /// Lowest-index block whose payload equals `target` byte for byte.
    pub fn find_payload(&self, target: &[u8]) -> Option<(u64, &Block)> {
        self.blocks
            .iter()
            .enumerate()
            .find(|(_, block)| block.payload() == target)
            .map(|(i, block)| (i as u64, block))
    }
}
