//! Hard forks: cloning a parent chain's prefix into a new, independent chain
//! with its own network identity and rules.

use thiserror::Error;

use crate::chain::{ChainInstance, NetworkId};
use crate::hashcore::Difficulty;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ForkError {
    #[error("fork point {fork_block_no} is out of range 1..={height}")]
    ForkPointOutOfRange { fork_block_no: u64, height: u64 },
    #[error("child network id {0} equals the parent's")]
    SameNetworkId(NetworkId),
}

/// Clones `parent.blocks[..fork_block_no]` into a new chain.
///
/// The copied prefix keeps the parent's hashes even when `new_difficulty`
/// differs; the new difficulty governs only blocks appended after the fork.
/// Recording the event in the repository is a separate, explicit step.
pub fn hard_fork(
    parent: &ChainInstance,
    fork_block_no: u64,
    new_network_id: NetworkId,
    new_port: u16,
    new_difficulty: Difficulty,
) -> Result<ChainInstance, ForkError> {
    if fork_block_no == 0 || fork_block_no > parent.height() {
        return Err(ForkError::ForkPointOutOfRange {
            fork_block_no,
            height: parent.height(),
        });
    }
    if new_network_id == parent.network_id() {
        return Err(ForkError::SameNetworkId(new_network_id));
    }
    let prefix = parent.blocks()[..fork_block_no as usize].to_vec();
    Ok(ChainInstance::from_parts(
        new_network_id,
        Some(parent.network_id()),
        fork_block_no,
        new_port,
        new_difficulty,
        prefix,
    ))
}
