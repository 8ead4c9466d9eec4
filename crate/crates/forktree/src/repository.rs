//! The repository blockchain: a chain whose block payloads are fork-event
//! records, plus the registry query operations computed as deterministic
//! views over it.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainFault, ChainInstance, NetworkId};
use crate::codec::{from_canonical_json, to_canonical_json, CanonicalJsonError};
use crate::hashcore::{Difficulty, MineError};
use crate::traverse::AdjacencyList;

/// Position of a record in the repository; assigned sequentially from 0.
pub type ForkId = u64;

/// Returned by [`RepositoryChain::find_fork_id`] when a network has no
/// record: the maximum representable fork id, never assigned to a real one.
pub const NOT_FOUND: ForkId = ForkId::MAX;

/// One fork event. The root chain self-registers with `parent_network_id`
/// absent so the fork tree has an in-repository anchor.
///
/// Encoded as canonical JSON with keys `fork_block_no`, `fork_id`,
/// `network_id`, `parent_network_id` (null for the root), `port_number`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForkRecord {
    pub fork_id: ForkId,
    pub network_id: NetworkId,
    pub port_number: u16,
    pub parent_network_id: Option<NetworkId>,
    pub fork_block_no: u64,
}

impl ForkRecord {
    /// Canonical JSON bytes, exactly as stored in a repository block payload.
    pub fn encode(&self) -> Vec<u8> {
        to_canonical_json(self).into_bytes()
    }

    /// Strict inverse of [`ForkRecord::encode`]: the input must be the
    /// canonical encoding, byte for byte.
    pub fn decode(bytes: &[u8]) -> Result<Self, CanonicalJsonError> {
        from_canonical_json(bytes)
    }
}

/// Metadata the repository chain pins inside its own genesis payload. Ties
/// the chain's identity fields to a hash-covered byte string so a chain file
/// cannot restate them undetected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RepoGenesis {
    difficulty: u8,
    network_id: NetworkId,
    port: u16,
}

impl RepoGenesis {
    fn for_chain(chain: &ChainInstance) -> Self {
        RepoGenesis {
            difficulty: chain.difficulty().bits(),
            network_id: chain.network_id(),
            port: chain.port(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RepositoryError {
    #[error("network {0} is already registered")]
    DuplicateNetwork(NetworkId),
    #[error("parent network {0} is not registered")]
    UnknownParent(NetworkId),
    #[error("a root record already exists (network {0})")]
    RootAlreadyRegistered(NetworkId),
    #[error("fork id {0} does not exist")]
    ForkNotFound(ForkId),
    #[error(transparent)]
    Mining(#[from] MineError),
    #[error("repository block {block_index}: record does not decode: {source}")]
    RecordDecode {
        block_index: u64,
        source: CanonicalJsonError,
    },
    #[error("record at position {position} carries fork id {found}")]
    ForkIdMismatch { position: u64, found: ForkId },
    #[error("records contain two roots ({first} and {second})")]
    MultipleRoots { first: NetworkId, second: NetworkId },
    #[error("records contain no root")]
    NoRoot,
    #[error("record {fork_id}: parent {parent} is not registered by an earlier record")]
    ParentNotEarlier { fork_id: ForkId, parent: NetworkId },
    #[error("repository chain invalid at {0}")]
    InvalidChain(ChainFault),
    #[error("repository chain metadata must carry no parent and fork block 0")]
    BadMetadata,
    #[error("repository genesis payload does not match the chain's metadata")]
    GenesisBinding,
}

/// A chain whose payloads after genesis each encode exactly one
/// [`ForkRecord`], plus an in-memory index kept equal to what decoding the
/// chain from scratch yields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepositoryChain {
    chain: ChainInstance,
    records: Vec<ForkRecord>,
    by_network: HashMap<NetworkId, ForkId>,
}

impl RepositoryChain {
    /// Creates an empty repository. The genesis payload is the canonical
    /// encoding of the repository's own identity metadata.
    pub fn create(
        network_id: NetworkId,
        port: u16,
        difficulty: Difficulty,
    ) -> Result<Self, MineError> {
        let genesis = to_canonical_json(&RepoGenesis {
            difficulty: difficulty.bits(),
            network_id,
            port,
        });
        let chain = ChainInstance::create(network_id, port, difficulty, genesis.as_bytes())?;
        Ok(RepositoryChain {
            chain,
            records: Vec::new(),
            by_network: HashMap::new(),
        })
    }

    /// Rebuilds a repository from a bare chain, re-deriving and re-checking
    /// everything: chain validity, the genesis identity binding, record
    /// decoding, and the record invariants.
    pub fn from_chain(chain: ChainInstance) -> Result<Self, RepositoryError> {
        if let Some(fault) = chain.validate().fault() {
            return Err(RepositoryError::InvalidChain(fault));
        }
        if chain.parent_network_id().is_some() || chain.fork_block_no() != 0 {
            return Err(RepositoryError::BadMetadata);
        }
        let expected_genesis = to_canonical_json(&RepoGenesis::for_chain(&chain));
        if chain.blocks()[0].payload() != expected_genesis.as_bytes() {
            return Err(RepositoryError::GenesisBinding);
        }
        let records = decode_records(&chain)?;
        let by_network = check_records(&records)?;
        Ok(RepositoryChain {
            chain,
            records,
            by_network,
        })
    }

    pub fn chain(&self) -> &ChainInstance {
        &self.chain
    }

    pub fn network_id(&self) -> NetworkId {
        self.chain.network_id()
    }

    pub fn port(&self) -> u16 {
        self.chain.port()
    }

    pub fn difficulty(&self) -> Difficulty {
        self.chain.difficulty()
    }

    pub fn record_count(&self) -> u64 {
        self.records.len() as u64
    }

    /// Appends one mined block encoding the record and returns the new fork
    /// id. Requires exclusive access; queries may run concurrently between
    /// writes.
    pub fn add_fork_detail(
        &mut self,
        network_id: NetworkId,
        port_number: u16,
        parent_network_id: Option<NetworkId>,
        fork_block_no: u64,
    ) -> Result<ForkId, RepositoryError> {
        if self.by_network.contains_key(&network_id) {
            return Err(RepositoryError::DuplicateNetwork(network_id));
        }
        match parent_network_id {
            Some(parent) => {
                if !self.by_network.contains_key(&parent) {
                    return Err(RepositoryError::UnknownParent(parent));
                }
            }
            None => {
                if let Some(root) = self.records.iter().find(|r| r.parent_network_id.is_none()) {
                    return Err(RepositoryError::RootAlreadyRegistered(root.network_id));
                }
            }
        }
        let fork_id = self.records.len() as ForkId;
        let record = ForkRecord {
            fork_id,
            network_id,
            port_number,
            parent_network_id,
            fork_block_no,
        };
        self.chain = self.chain.append_payload(&record.encode())?;
        self.by_network.insert(network_id, fork_id);
        self.records.push(record);
        Ok(fork_id)
    }

    /// The fork id registered for `network_id`, or [`NOT_FOUND`].
    pub fn find_fork_id(&self, network_id: NetworkId) -> ForkId {
        self.by_network.get(&network_id).copied().unwrap_or(NOT_FOUND)
    }

    pub fn get_fork_data(&self, fork_id: ForkId) -> Result<&ForkRecord, RepositoryError> {
        usize::try_from(fork_id)
            .ok()
            .and_then(|i| self.records.get(i))
            .ok_or(RepositoryError::ForkNotFound(fork_id))
    }

    /// Fork ids of all records whose parent is this record's network, in
    /// insertion order.
    pub fn get_children(&self, fork_id: ForkId) -> Result<Vec<ForkId>, RepositoryError> {
        let me = self.get_fork_data(fork_id)?.network_id;
        Ok(self
            .records
            .iter()
            .filter(|r| r.parent_network_id == Some(me))
            .map(|r| r.fork_id)
            .collect())
    }

    /// All records in fork-id order.
    pub fn get_all_fork_details(&self) -> &[ForkRecord] {
        &self.records
    }
}

/// Decodes the repository chain's payloads from scratch, independently of
/// any in-memory index.
pub fn decode_records(chain: &ChainInstance) -> Result<Vec<ForkRecord>, RepositoryError> {
    chain
        .blocks()
        .iter()
        .skip(1)
        .map(|block| {
            ForkRecord::decode(block.payload()).map_err(|source| RepositoryError::RecordDecode {
                block_index: block.header.index,
                source,
            })
        })
        .collect()
}

/// Enforces the record invariants: fork ids equal positions, network ids are
/// unique, and every parent is either absent (the single root) or registered
/// by an earlier record. Returns the network → fork id index.
fn check_records(records: &[ForkRecord]) -> Result<HashMap<NetworkId, ForkId>, RepositoryError> {
    let mut by_network = HashMap::new();
    let mut root: Option<NetworkId> = None;
    for (position, record) in records.iter().enumerate() {
        let position = position as u64;
        if record.fork_id != position {
            return Err(RepositoryError::ForkIdMismatch {
                position,
                found: record.fork_id,
            });
        }
        match record.parent_network_id {
            None => match root {
                None => root = Some(record.network_id),
                Some(first) => {
                    return Err(RepositoryError::MultipleRoots {
                        first,
                        second: record.network_id,
                    })
                }
            },
            Some(parent) => {
                if !by_network.contains_key(&parent) {
                    return Err(RepositoryError::ParentNotEarlier {
                        fork_id: record.fork_id,
                        parent,
                    });
                }
            }
        }
        if by_network.insert(record.network_id, record.fork_id).is_some() {
            return Err(RepositoryError::DuplicateNetwork(record.network_id));
        }
    }
    Ok(by_network)
}

/// Builds the fork tree from records: a map from each network to its
/// ordered list of forked networks, rooted at the unique record with no
/// parent.
pub fn build_adjacency(records: &[ForkRecord]) -> Result<AdjacencyList, RepositoryError> {
    check_records(records)?;
    let root = records
        .iter()
        .find(|r| r.parent_network_id.is_none())
        .map(|r| r.network_id)
        .ok_or(RepositoryError::NoRoot)?;
    let mut children: Vec<(NetworkId, Vec<NetworkId>)> = Vec::new();
    for record in records {
        children.push((record.network_id, Vec::new()));
        if let Some(parent) = record.parent_network_id {
            children
                .iter_mut()
                .find(|(id, _)| *id == parent)
                .expect("parents precede children")
                .1
                .push(record.network_id);
        }
    }
    Ok(AdjacencyList::from_verified(root, children))
}
