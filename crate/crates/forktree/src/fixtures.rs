//! Ready-made ecosystems for tests, examples, and fuzz corpus generation:
//! the nine-network reference tree and randomized fork ecosystems.

use rand::Rng;

use crate::chain::{ChainInstance, NetworkId};
use crate::fork::hard_fork;
use crate::hashcore::Difficulty;
use crate::netharness::{Ecosystem, NetworkServer};
use crate::repository::{build_adjacency, RepositoryChain};
use crate::traverse::AdjacencyList;

/// The reference nine-network tree: root A forked into B and G, B into C and
/// F, then C→D→E and G→H→I. Network ids run 1..=9 for A..=I; the repository
/// is network 0.
///
/// Every network gets a `plant-<id>` payload appended after all forking, so
/// each network owns exactly one payload that appears nowhere else.
pub struct Fig4 {
    pub ecosystem: Ecosystem,
    pub adjacency: AdjacencyList,
}

impl Fig4 {
    /// A..=I as network ids, in registration (and DFS preorder) order.
    pub fn member_ids() -> [NetworkId; 9] {
        [1u64, 2, 3, 4, 5, 6, 7, 8, 9].map(NetworkId)
    }

    /// The depth-first preorder over the tree.
    pub fn dfs_order() -> [NetworkId; 9] {
        Self::member_ids()
    }

    /// The level-order traversal over the tree.
    pub fn bfs_order() -> [NetworkId; 9] {
        [1u64, 2, 7, 3, 6, 8, 4, 9, 5].map(NetworkId)
    }
}

/// Builds the [`Fig4`] ecosystem. Member ports are `base_port..base_port+8`
/// and the repository sits on `base_port + 9`; pick distinct bases for tests
/// that bind real sockets.
pub fn fig4(difficulty: Difficulty, base_port: u16) -> Fig4 {
    let id = NetworkId;
    let port = |offset: u16| base_port + offset;

    let mut a = ChainInstance::create(id(1), port(0), difficulty, b"root").unwrap();
    for payload in [&b"tx-A1"[..], b"tx-A2", b"tx-A3"] {
        a = a.append_payload(payload).unwrap();
    }
    let b = hard_fork(&a, 2, id(2), port(1), difficulty)
        .unwrap()
        .append_payload(b"tx-B1")
        .unwrap();
    let c = hard_fork(&b, 2, id(3), port(2), difficulty)
        .unwrap()
        .append_payload(b"tx-C1")
        .unwrap();
    let d = hard_fork(&c, 2, id(4), port(3), difficulty)
        .unwrap()
        .append_payload(b"tx-D1")
        .unwrap();
    let e = hard_fork(&d, 2, id(5), port(4), difficulty)
        .unwrap()
        .append_payload(b"tx-E1")
        .unwrap();
    let f = hard_fork(&b, 3, id(6), port(5), difficulty)
        .unwrap()
        .append_payload(b"tx-F1")
        .unwrap();
    let g = hard_fork(&a, 3, id(7), port(6), difficulty)
        .unwrap()
        .append_payload(b"tx-G1")
        .unwrap();
    let h = hard_fork(&g, 2, id(8), port(7), difficulty)
        .unwrap()
        .append_payload(b"tx-H1")
        .unwrap();
    let i = hard_fork(&h, 2, id(9), port(8), difficulty)
        .unwrap()
        .append_payload(b"tx-I1")
        .unwrap();

    let mut repo = RepositoryChain::create(id(0), port(9), difficulty).unwrap();
    let chains = [&a, &b, &c, &d, &e, &f, &g, &h, &i];
    for chain in chains {
        repo.add_fork_detail(
            chain.network_id(),
            chain.port(),
            chain.parent_network_id(),
            chain.fork_block_no(),
        )
        .unwrap();
    }
    let adjacency = build_adjacency(repo.get_all_fork_details()).unwrap();

    let mut ecosystem = Ecosystem::new(repo);
    for chain in chains {
        let planted = chain
            .append_payload(format!("plant-{}", chain.network_id()).as_bytes())
            .unwrap();
        ecosystem.register_network(planted).unwrap();
    }
    Fig4 {
        ecosystem,
        adjacency,
    }
}

/// A randomized ecosystem plus the pool of payloads that occur in it.
pub struct RandomEcosystem {
    pub ecosystem: Ecosystem,
    pub adjacency: AdjacencyList,
    /// Every payload used somewhere in the ecosystem, duplicates included.
    pub payload_pool: Vec<Vec<u8>>,
}

/// Generates a random fork ecosystem: up to `max_networks` networks of up to
/// `max_blocks` blocks each, forked at random points, with payloads drawn
/// from a small alphabet so duplicates are planted both by reuse and by
/// prefix inheritance. Mining runs at zero difficulty.
pub fn random_ecosystem(
    rng: &mut impl Rng,
    max_networks: usize,
    max_blocks: u64,
) -> RandomEcosystem {
    let difficulty = Difficulty::NONE;
    let network_count = rng.gen_range(1..=max_networks.max(1));
    let mut pool = Vec::new();
    let mut pick_payload = |rng: &mut dyn rand::RngCore| {
        let payload = format!("tx-{}", rng.gen_range(0..12u8)).into_bytes();
        pool.push(payload.clone());
        payload
    };

    let mut repo = RepositoryChain::create(NetworkId(0), 20000, difficulty).unwrap();
    let root_payload = pick_payload(rng);
    let root = ChainInstance::create(NetworkId(1), 20001, difficulty, &root_payload).unwrap();
    repo.add_fork_detail(NetworkId(1), 20001, None, 0).unwrap();
    let mut chains = vec![root];

    for n in 2..=network_count as u64 {
        // Let existing networks grow a little before each fork.
        for chain in chains.iter_mut() {
            while chain.height() < max_blocks && rng.gen_bool(0.4) {
                let payload = pick_payload(rng);
                *chain = chain.append_payload(&payload).unwrap();
            }
        }
        let parent = &chains[rng.gen_range(0..chains.len())];
        let at = rng.gen_range(1..=parent.height());
        let child = hard_fork(parent, at, NetworkId(n), 20000 + n as u16, difficulty).unwrap();
        repo.add_fork_detail(
            child.network_id(),
            child.port(),
            child.parent_network_id(),
            child.fork_block_no(),
        )
        .unwrap();
        chains.push(child);
    }
    for chain in chains.iter_mut() {
        while chain.height() < max_blocks && rng.gen_bool(0.5) {
            let payload = pick_payload(rng);
            *chain = chain.append_payload(&payload).unwrap();
        }
    }

    // Prefix payloads occur in the pool too, via the parent that mined them.
    let adjacency = build_adjacency(repo.get_all_fork_details()).unwrap();
    let mut ecosystem = Ecosystem::new(repo);
    for chain in chains {
        ecosystem.register_network(chain).unwrap();
    }
    RandomEcosystem {
        ecosystem,
        adjacency,
        payload_pool: pool,
    }
}

/// Spawns one socket server per member network on ephemeral ports and
/// returns a remote twin of the ecosystem. The servers shut down on drop;
/// keep them alive for as long as the twin is queried.
pub fn serve_ecosystem(eco: &Ecosystem) -> (Ecosystem, Vec<NetworkServer>) {
    let mut remote = Ecosystem::new(eco.repository().clone());
    let mut servers = Vec::new();
    for id in eco.member_ids() {
        let chain = eco
            .local_chain(id)
            .expect("serve_ecosystem needs in-process members")
            .clone();
        let server = NetworkServer::spawn(chain, 0).expect("bind ephemeral port");
        remote
            .register_remote(id, server.port())
            .expect("ephemeral ports are unique");
        servers.push(server);
    }
    (remote, servers)
}
