//! Durable, canonical on-disk representation of chains, the repository, and
//! ecosystem manifests.
//!
//! Files are canonical JSON (sorted keys, no insignificant whitespace,
//! lowercase hex), written atomically and never trusted on the way back in:
//! loading re-parses strictly, re-verifies every hash and link, and
//! cross-checks chain metadata against the repository's records.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainFault, ChainInstance, FaultReason, NetworkId};
use crate::codec::{from_canonical_json, to_canonical_json, BlockDoc, CanonicalJsonError};
use crate::hashcore::Difficulty;
use crate::netharness::{Ecosystem, HarnessError};
use crate::repository::{RepositoryChain, RepositoryError};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPOSITORY_FILE: &str = "repository.json";

/// File name for one member network's chain.
pub fn network_file_name(network_id: NetworkId) -> String {
    format!("network-{network_id}.json")
}

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: io::Error,
    },
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("parse error: {0}")]
    Parse(serde_json::Error),
    #[error("file is not in canonical form")]
    NotCanonical,
    #[error("hash mismatch at block {index}")]
    HashMismatch { index: u64 },
    #[error("chain invalid at {fault}")]
    InvalidChain { fault: ChainFault },
    #[error("bad chain metadata: {0}")]
    Metadata(String),
    #[error("ecosystem inconsistency: {0}")]
    Consistency(String),
    #[error(transparent)]
    Repository(#[from] RepositoryError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

impl From<CanonicalJsonError> for PersistError {
    fn from(err: CanonicalJsonError) -> Self {
        match err {
            CanonicalJsonError::Parse(e) => PersistError::Parse(e),
            CanonicalJsonError::NotCanonical => PersistError::NotCanonical,
        }
    }
}

fn io_err(path: &Path, source: io::Error) -> PersistError {
    if source.kind() == io::ErrorKind::NotFound {
        PersistError::MissingFile(path.to_path_buf())
    } else {
        PersistError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// The chain file document: identity metadata plus the full block list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainFileDoc {
    network_id: NetworkId,
    parent_network_id: Option<NetworkId>,
    fork_block_no: u64,
    port: u16,
    difficulty: u8,
    blocks: Vec<BlockDoc>,
}

impl ChainFileDoc {
    fn from_chain(chain: &ChainInstance) -> Self {
        ChainFileDoc {
            network_id: chain.network_id(),
            parent_network_id: chain.parent_network_id(),
            fork_block_no: chain.fork_block_no(),
            port: chain.port(),
            difficulty: chain.difficulty().bits(),
            blocks: chain.blocks().iter().map(BlockDoc::from).collect(),
        }
    }

    fn into_chain(self) -> ChainInstance {
        ChainInstance::from_parts(
            self.network_id,
            self.parent_network_id,
            self.fork_block_no,
            self.port,
            Difficulty::new(self.difficulty),
            self.blocks.into_iter().map(Into::into).collect(),
        )
    }
}

/// The ecosystem manifest document: one repository path plus one entry per
/// member network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EcosystemManifest {
    pub networks: Vec<ManifestEntry>,
    pub repository: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub network_id: NetworkId,
    pub path: String,
    pub port: u16,
}

/// Canonical bytes of one chain file.
pub fn chain_to_canonical_json(chain: &ChainInstance) -> Vec<u8> {
    to_canonical_json(&ChainFileDoc::from_chain(chain)).into_bytes()
}

/// Strict inverse of [`chain_to_canonical_json`]: parses, insists on
/// canonical form, checks metadata coherence, and re-verifies every hash,
/// link, and difficulty bound. A file cannot smuggle an invalid chain
/// through.
pub fn parse_chain_json(bytes: &[u8]) -> Result<ChainInstance, PersistError> {
    let doc: ChainFileDoc = from_canonical_json(bytes)?;
    let chain = doc.into_chain();
    if chain.blocks().is_empty() {
        return Err(PersistError::Metadata("chain has no blocks".into()));
    }
    match chain.parent_network_id() {
        None if chain.fork_block_no() != 0 => {
            return Err(PersistError::Metadata(
                "root chain must carry fork_block_no 0".into(),
            ));
        }
        Some(_) if chain.fork_block_no() == 0 || chain.fork_block_no() > chain.height() => {
            return Err(PersistError::Metadata(format!(
                "fork_block_no {} is out of range 1..={}",
                chain.fork_block_no(),
                chain.height()
            )));
        }
        _ => {}
    }
    if let Some(fault) = chain.validate().fault() {
        return Err(match fault.reason {
            FaultReason::StaleHash => PersistError::HashMismatch { index: fault.index },
            _ => PersistError::InvalidChain { fault },
        });
    }
    Ok(chain)
}

/// Canonical bytes of the manifest.
pub fn manifest_to_canonical_json(manifest: &EcosystemManifest) -> Vec<u8> {
    to_canonical_json(manifest).into_bytes()
}

/// Strict manifest parse; paths must be plain file names.
pub fn parse_manifest_json(bytes: &[u8]) -> Result<EcosystemManifest, PersistError> {
    let manifest: EcosystemManifest = from_canonical_json(bytes)?;
    for path in manifest
        .networks
        .iter()
        .map(|e| e.path.as_str())
        .chain([manifest.repository.as_str()])
    {
        if path.is_empty() || path.contains(['/', '\\']) {
            return Err(PersistError::Consistency(format!(
                "manifest path {path:?} is not a plain file name"
            )));
        }
    }
    Ok(manifest)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PersistError> {
    let mut tmp = path.to_path_buf();
    tmp.set_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

pub fn save_chain(chain: &ChainInstance, path: impl AsRef<Path>) -> Result<(), PersistError> {
    write_atomic(path.as_ref(), &chain_to_canonical_json(chain))
}

pub fn load_chain(path: impl AsRef<Path>) -> Result<ChainInstance, PersistError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    parse_chain_json(&bytes)
}

/// Writes the repository, one file per member network, and the manifest.
/// Every member must be registered in process.
pub fn save_ecosystem(eco: &Ecosystem, dir: impl AsRef<Path>) -> Result<(), PersistError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let repo = eco.repository();
    let records = repo.get_all_fork_details();
    let member_ids = eco.member_ids();
    if member_ids.len() != records.len() {
        return Err(PersistError::Consistency(format!(
            "{} registered networks but {} repository records",
            member_ids.len(),
            records.len()
        )));
    }

    let mut entries = Vec::with_capacity(records.len());
    for record in records {
        let chain = eco.local_chain(record.network_id).ok_or_else(|| {
            PersistError::Consistency(format!(
                "network {} is not registered in process",
                record.network_id
            ))
        })?;
        let file_name = network_file_name(record.network_id);
        save_chain(chain, dir.join(&file_name))?;
        entries.push(ManifestEntry {
            network_id: record.network_id,
            path: file_name,
            port: record.port_number,
        });
    }
    save_chain(repo.chain(), dir.join(REPOSITORY_FILE))?;
    let manifest = EcosystemManifest {
        networks: entries,
        repository: REPOSITORY_FILE.to_string(),
    };
    write_atomic(
        &dir.join(MANIFEST_FILE),
        &manifest_to_canonical_json(&manifest),
    )
}

/// Loads and fully re-verifies an ecosystem directory: every chain file, the
/// repository's own invariants, and the agreement between each chain file's
/// metadata and its fork record.
pub fn load_ecosystem(dir: impl AsRef<Path>) -> Result<Ecosystem, PersistError> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let bytes = fs::read(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
    let manifest = parse_manifest_json(&bytes)?;

    let repo_chain = load_chain(dir.join(&manifest.repository))?;
    let repo = RepositoryChain::from_chain(repo_chain)?;
    let records = repo.get_all_fork_details().to_vec();

    if records.len() != manifest.networks.len() {
        return Err(PersistError::Consistency(format!(
            "{} repository records but {} manifest entries",
            records.len(),
            manifest.networks.len()
        )));
    }

    let mut eco = Ecosystem::new(repo);
    for (record, entry) in records.iter().zip(&manifest.networks) {
        if record.network_id != entry.network_id {
            return Err(PersistError::Consistency(format!(
                "manifest entry {} does not match record {}",
                entry.network_id, record.network_id
            )));
        }
        if record.port_number != entry.port {
            return Err(PersistError::Consistency(format!(
                "network {}: manifest port {} does not match recorded port {}",
                entry.network_id, entry.port, record.port_number
            )));
        }
        let chain = load_chain(dir.join(&entry.path))?;
        if chain.network_id() != record.network_id {
            return Err(PersistError::Consistency(format!(
                "file {} carries network {} but records {}",
                entry.path,
                chain.network_id(),
                record.network_id
            )));
        }
        if chain.parent_network_id() != record.parent_network_id
            || chain.fork_block_no() != record.fork_block_no
            || chain.port() != record.port_number
        {
            return Err(PersistError::Consistency(format!(
                "network {}: chain file metadata disagrees with its fork record",
                record.network_id
            )));
        }
        eco.register_network(chain)?;
    }
    Ok(eco)
}
