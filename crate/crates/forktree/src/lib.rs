//! A miniature proof-of-work multi-chain ecosystem. Hard forks are recorded
//! as fork-event records in a dedicated repository blockchain, forming a
//! fork tree that a single process can traverse (DFS or BFS) to locate data
//! in any chain of the ecosystem.
//!
//! - [`hashcore`]: block serialization, SHA-256 hashing, difficulty targets,
//!   nonce mining
//! - [`chain`]: one blockchain instance with append, validation, and search
//! - [`fork`]: the hard-fork operation
//! - [`repository`]: the repository blockchain and its registry operations
//! - [`traverse`]: fork-tree traversal and ecosystem-wide search
//! - [`netharness`]: the network registry and the local socket protocol
//! - [`persist`]: canonical on-disk formats
//! - [`fixtures`]: ready-made ecosystems for tests and experiments

pub mod chain;
pub mod codec;
pub mod fixtures;
pub mod fork;
pub mod hashcore;
pub mod netharness;
pub mod persist;
pub mod repository;
pub mod traverse;

pub use chain::{ChainFault, ChainInstance, ChainValidity, FaultReason, NetworkId};
pub use fork::hard_fork;
pub use hashcore::{Block, BlockHeader, Difficulty, Digest};
pub use netharness::Ecosystem;
pub use repository::{ForkId, ForkRecord, RepositoryChain, NOT_FOUND};
pub use traverse::{AdjacencyList, SearchResult, Strategy};
