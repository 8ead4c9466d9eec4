//! The simulated ecosystem: a registry of networks keyed by network ID,
//! resolvable either in process or through the local socket protocol,
//! transparently to traversal code.

use std::collections::HashMap;
use std::io;

use thiserror::Error;

use crate::chain::{ChainInstance, NetworkId};
use crate::hashcore::Digest;
use crate::repository::RepositoryChain;

pub mod server;
pub mod wire;

pub use server::{query, NetworkServer, QueryError};
pub use wire::{ErrCode, Request, Response, WireParseError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("network {0} is already registered")]
    DuplicateNetworkId(NetworkId),
    #[error("port {0} is already registered")]
    DuplicatePort(u16),
    #[error("unknown network {0}")]
    UnknownNetwork(NetworkId),
    #[error("network {network_id} is unreachable: {source}")]
    Unreachable {
        network_id: NetworkId,
        source: io::Error,
    },
    #[error("network {network_id}: protocol violation: {detail}")]
    Protocol {
        network_id: NetworkId,
        detail: String,
    },
    #[error("network {network_id} has no block {index}")]
    UnknownBlock { network_id: NetworkId, index: u64 },
    #[error("network {network_id} replied {code}: {message}")]
    Remote {
        network_id: NetworkId,
        code: ErrCode,
        message: String,
    },
}

#[derive(Debug, Clone)]
enum Backend {
    Local(ChainInstance),
    Remote { port: u16 },
}

impl Backend {
    fn port(&self) -> u16 {
        match self {
            Backend::Local(chain) => chain.port(),
            Backend::Remote { port } => *port,
        }
    }
}

/// A payload hit inside one network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FindHit {
    pub index: u64,
    pub payload: Vec<u8>,
    pub hash: Digest,
}

/// Read access to one network, hiding whether it is in process or behind a
/// socket.
#[derive(Debug, Clone, Copy)]
pub struct NetworkHandle<'a> {
    network_id: NetworkId,
    backend: &'a Backend,
}

impl NetworkHandle<'_> {
    pub fn network_id(&self) -> NetworkId {
        self.network_id
    }

    fn round_trip(&self, request: &Request, port: u16) -> Result<Response, HarnessError> {
        match server::query(port, request) {
            Ok(response) => Ok(response),
            Err(QueryError::Connect(source)) | Err(QueryError::Io(source)) => {
                Err(HarnessError::Unreachable {
                    network_id: self.network_id,
                    source,
                })
            }
            Err(QueryError::Closed) => Err(HarnessError::Unreachable {
                network_id: self.network_id,
                source: io::Error::new(io::ErrorKind::UnexpectedEof, "connection closed"),
            }),
            Err(QueryError::Malformed(detail)) => Err(HarnessError::Protocol {
                network_id: self.network_id,
                detail,
            }),
        }
    }

    fn protocol_violation(&self, got: &Response) -> HarnessError {
        match got {
            Response::Err { code, message } => HarnessError::Remote {
                network_id: self.network_id,
                code: *code,
                message: message.clone(),
            },
            other => HarnessError::Protocol {
                network_id: self.network_id,
                detail: format!("unexpected response {other:?}"),
            },
        }
    }

    pub fn height(&self) -> Result<u64, HarnessError> {
        match self.backend {
            Backend::Local(chain) => Ok(chain.height()),
            Backend::Remote { port } => match self.round_trip(&Request::Height, *port)? {
                Response::Height { height } => Ok(height),
                other => Err(self.protocol_violation(&other)),
            },
        }
    }

    pub fn get_block(&self, index: u64) -> Result<crate::hashcore::Block, HarnessError> {
        match self.backend {
            Backend::Local(chain) => usize::try_from(index)
                .ok()
                .and_then(|i| chain.blocks().get(i))
                .cloned()
                .ok_or(HarnessError::UnknownBlock {
                    network_id: self.network_id,
                    index,
                }),
            Backend::Remote { port } => {
                match self.round_trip(&Request::GetBlock { index }, *port)? {
                    Response::Block { block } => Ok(block),
                    Response::Err {
                        code: ErrCode::UnknownBlock,
                        ..
                    } => Err(HarnessError::UnknownBlock {
                        network_id: self.network_id,
                        index,
                    }),
                    other => Err(self.protocol_violation(&other)),
                }
            }
        }
    }

    /// First (lowest-index) block whose payload equals `target`.
    pub fn find(&self, target: &[u8]) -> Result<Option<FindHit>, HarnessError> {
        match self.backend {
            Backend::Local(chain) => Ok(chain.find_payload(target).map(|(index, block)| {
                FindHit {
                    index,
                    payload: block.payload().to_vec(),
                    hash: block.hash,
                }
            })),
            Backend::Remote { port } => {
                let request = Request::Find {
                    target: target.to_vec(),
                };
                match self.round_trip(&request, *port)? {
                    Response::Found {
                        index,
                        payload,
                        hash,
                    } => Ok(Some(FindHit {
                        index,
                        payload,
                        hash,
                    })),
                    Response::Absent => Ok(None),
                    other => Err(self.protocol_violation(&other)),
                }
            }
        }
    }
}

/// The full deployment: member networks plus the repository chain that
/// indexes them. Network ids are unique; ports are unique across members and
/// the repository.
#[derive(Debug, Clone)]
pub struct Ecosystem {
    networks: HashMap<NetworkId, Backend>,
    repository: RepositoryChain,
}

impl Ecosystem {
    pub fn new(repository: RepositoryChain) -> Self {
        Ecosystem {
            networks: HashMap::new(),
            repository,
        }
    }

    pub fn repository(&self) -> &RepositoryChain {
        &self.repository
    }

    pub fn repository_mut(&mut self) -> &mut RepositoryChain {
        &mut self.repository
    }

    fn check_new(&self, network_id: NetworkId, port: u16) -> Result<(), HarnessError> {
        if network_id == self.repository.network_id() || self.networks.contains_key(&network_id) {
            return Err(HarnessError::DuplicateNetworkId(network_id));
        }
        if port == self.repository.port() || self.networks.values().any(|b| b.port() == port) {
            return Err(HarnessError::DuplicatePort(port));
        }
        Ok(())
    }

    /// Registers an in-process member network on the port recorded in its
    /// own metadata.
    pub fn register_network(&mut self, chain: ChainInstance) -> Result<(), HarnessError> {
        self.check_new(chain.network_id(), chain.port())?;
        self.networks
            .insert(chain.network_id(), Backend::Local(chain));
        Ok(())
    }

    /// Registers a member network answering the wire protocol on `port`.
    pub fn register_remote(&mut self, network_id: NetworkId, port: u16) -> Result<(), HarnessError> {
        self.check_new(network_id, port)?;
        self.networks.insert(network_id, Backend::Remote { port });
        Ok(())
    }

    /// Swaps in a grown copy of an already registered in-process chain.
    pub fn replace_network(&mut self, chain: ChainInstance) -> Result<(), HarnessError> {
        let id = chain.network_id();
        match self.networks.get(&id) {
            Some(Backend::Local(existing)) if existing.port() == chain.port() => {
                self.networks.insert(id, Backend::Local(chain));
                Ok(())
            }
            Some(_) => Err(HarnessError::DuplicatePort(chain.port())),
            None => Err(HarnessError::UnknownNetwork(id)),
        }
    }

    pub fn resolve(&self, network_id: NetworkId) -> Result<NetworkHandle<'_>, HarnessError> {
        self.networks
            .get(&network_id)
            .map(|backend| NetworkHandle {
                network_id,
                backend,
            })
            .ok_or(HarnessError::UnknownNetwork(network_id))
    }

    /// Members plus the repository, mirroring a deployment where the
    /// repository is one of the running networks.
    pub fn network_count(&self) -> usize {
        self.networks.len() + 1
    }

    /// Member ids in ascending order.
    pub fn member_ids(&self) -> Vec<NetworkId> {
        let mut ids: Vec<NetworkId> = self.networks.keys().copied().collect();
        ids.sort();
        ids
    }

    /// The member's chain when it is registered in process.
    pub fn local_chain(&self, network_id: NetworkId) -> Option<&ChainInstance> {
        match self.networks.get(&network_id) {
            Some(Backend::Local(chain)) => Some(chain),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashcore::Difficulty;

    fn id(n: u64) -> NetworkId {
        NetworkId(n)
    }

    fn member(n: u64, port: u16) -> ChainInstance {
        ChainInstance::create(id(n), port, Difficulty::NONE, format!("g{n}").as_bytes()).unwrap()
    }

    fn empty_eco() -> Ecosystem {
        Ecosystem::new(RepositoryChain::create(id(0), 30300, Difficulty::NONE).unwrap())
    }

    #[test]
    fn seven_network_deployment_counts_the_repository() {
        let mut eco = empty_eco();
        for n in 1..=6 {
            eco.register_network(member(n, 8544 + n as u16)).unwrap();
        }
        assert_eq!(eco.network_count(), 7);
    }

    #[test]
    fn duplicate_network_id_is_rejected() {
        let mut eco = empty_eco();
        eco.register_network(member(1, 8545)).unwrap();
        let err = eco.register_network(member(1, 9999)).unwrap_err();
        assert!(matches!(err, HarnessError::DuplicateNetworkId(n) if n == id(1)));
        // The repository's own id is taken too.
        let err = eco.register_network(member(0, 9998)).unwrap_err();
        assert!(matches!(err, HarnessError::DuplicateNetworkId(n) if n == id(0)));
    }

    #[test]
    fn duplicate_port_is_rejected() {
        let mut eco = empty_eco();
        eco.register_network(member(1, 8545)).unwrap();
        let err = eco.register_network(member(2, 8545)).unwrap_err();
        assert!(matches!(err, HarnessError::DuplicatePort(8545)));
        let err = eco.register_remote(id(3), 30300).unwrap_err();
        assert!(matches!(err, HarnessError::DuplicatePort(30300)));
    }

    #[test]
    fn resolve_returns_the_registered_chain() {
        let mut eco = empty_eco();
        let chain = member(1, 8545);
        let tip = chain.tip().hash;
        eco.register_network(chain).unwrap();
        let handle = eco.resolve(id(1)).unwrap();
        assert_eq!(handle.height().unwrap(), 1);
        assert_eq!(handle.get_block(0).unwrap().hash, tip);
        assert!(matches!(
            eco.resolve(id(42)).unwrap_err(),
            HarnessError::UnknownNetwork(n) if n == id(42)
        ));
    }

    #[test]
    fn socket_backed_network_answers_like_the_in_process_one() {
        let chain = member(1, 8545).append_payload(b"tx-1").unwrap();
        let server = NetworkServer::spawn(chain.clone(), 0).unwrap();

        let mut local = empty_eco();
        local.register_network(chain).unwrap();
        let mut remote = empty_eco();
        remote.register_remote(id(1), server.port()).unwrap();

        let l = local.resolve(id(1)).unwrap();
        let r = remote.resolve(id(1)).unwrap();
        assert_eq!(l.height().unwrap(), r.height().unwrap());
        assert_eq!(l.get_block(1).unwrap(), r.get_block(1).unwrap());
        assert_eq!(l.find(b"tx-1").unwrap(), r.find(b"tx-1").unwrap());
        assert_eq!(l.find(b"nope").unwrap(), r.find(b"nope").unwrap());

        match (l.get_block(9), r.get_block(9)) {
            (
                Err(HarnessError::UnknownBlock { index: 9, .. }),
                Err(HarnessError::UnknownBlock { index: 9, .. }),
            ) => {}
            other => panic!("expected matching unknown-block errors, got {other:?}"),
        }
        server.shutdown();
    }

    #[test]
    fn unreachable_remote_network_names_itself() {
        let server = NetworkServer::spawn(member(1, 8545), 0).unwrap();
        let port = server.port();
        server.shutdown();
        let mut eco = empty_eco();
        eco.register_remote(id(1), port).unwrap();
        let err = eco.resolve(id(1)).unwrap().height().unwrap_err();
        assert!(matches!(err, HarnessError::Unreachable { network_id, .. } if network_id == id(1)));
    }

    #[test]
    fn replace_network_requires_same_identity() {
        let mut eco = empty_eco();
        let chain = member(1, 8545);
        eco.register_network(chain.clone()).unwrap();
        let grown = chain.append_payload(b"tx").unwrap();
        eco.replace_network(grown).unwrap();
        assert_eq!(eco.resolve(id(1)).unwrap().height().unwrap(), 2);
        assert!(matches!(
            eco.replace_network(member(9, 9000)).unwrap_err(),
            HarnessError::UnknownNetwork(n) if n == id(9)
        ));
    }
}
