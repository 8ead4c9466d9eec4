//! Ecosystem-wide search: depth-first and breadth-first traversal of the
//! fork tree, querying each network for a target payload.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::chain::NetworkId;
use crate::hashcore::Digest;
use crate::netharness::{Ecosystem, HarnessError};

/// The fork tree: each network mapped to its ordered list of direct forks.
/// Construction guarantees a tree rooted at `root` (single parent per node,
/// acyclic, all nodes reachable).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyList {
    root: NetworkId,
    nodes: Vec<(NetworkId, Vec<NetworkId>)>,
    index: HashMap<NetworkId, usize>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeShapeError {
    #[error("node {0} appears more than once")]
    DuplicateNode(NetworkId),
    #[error("child {0} has no node entry")]
    UnknownChild(NetworkId),
    #[error("node {0} has more than one parent")]
    MultipleParents(NetworkId),
    #[error("root {0} is listed as a child")]
    RootIsChild(NetworkId),
    #[error("root {0} is missing from the node set")]
    MissingRoot(NetworkId),
    #[error("node {0} is not reachable from the root")]
    Unreachable(NetworkId),
}

impl AdjacencyList {
    /// Validates the tree shape: every child resolves to a node, each
    /// non-root node has exactly one parent, the root has none, and every
    /// node is reachable from the root.
    pub fn new(
        root: NetworkId,
        nodes: Vec<(NetworkId, Vec<NetworkId>)>,
    ) -> Result<Self, TreeShapeError> {
        let mut index = HashMap::new();
        for (i, (id, _)) in nodes.iter().enumerate() {
            if index.insert(*id, i).is_some() {
                return Err(TreeShapeError::DuplicateNode(*id));
            }
        }
        if !index.contains_key(&root) {
            return Err(TreeShapeError::MissingRoot(root));
        }
        let mut seen_as_child = HashSet::new();
        for (_, children) in &nodes {
            for child in children {
                if !index.contains_key(child) {
                    return Err(TreeShapeError::UnknownChild(*child));
                }
                if *child == root {
                    return Err(TreeShapeError::RootIsChild(root));
                }
                if !seen_as_child.insert(*child) {
                    return Err(TreeShapeError::MultipleParents(*child));
                }
            }
        }
        let list = AdjacencyList { root, nodes, index };
        let mut reached = HashSet::new();
        let mut stack = vec![root];
        while let Some(node) = stack.pop() {
            if reached.insert(node) {
                stack.extend(list.children(node));
            }
        }
        if let Some((id, _)) = list.nodes.iter().find(|(id, _)| !reached.contains(id)) {
            return Err(TreeShapeError::Unreachable(*id));
        }
        Ok(list)
    }

    /// Assembles a list whose shape was already established by the caller
    /// (repository record checks imply tree-ness).
    pub(crate) fn from_verified(root: NetworkId, nodes: Vec<(NetworkId, Vec<NetworkId>)>) -> Self {
        let index = nodes
            .iter()
            .enumerate()
            .map(|(i, (id, _))| (*id, i))
            .collect();
        AdjacencyList { root, nodes, index }
    }

    pub fn root(&self) -> NetworkId {
        self.root
    }

    pub fn contains(&self, id: NetworkId) -> bool {
        self.index.contains_key(&id)
    }

    /// Direct forks of `id` in registration order; empty for unknown ids.
    pub fn children(&self, id: NetworkId) -> &[NetworkId] {
        self.index
            .get(&id)
            .map(|&i| self.nodes[i].1.as_slice())
            .unwrap_or(&[])
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// All networks in registration order.
    pub fn network_ids(&self) -> impl Iterator<Item = NetworkId> + '_ {
        self.nodes.iter().map(|(id, _)| *id)
    }
}

/// Traversal strategy over the fork tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Preorder: a network is checked before its forks, children in
    /// adjacency order, each branch fully explored before the next.
    Dfs,
    /// Level order with the same sibling order.
    Bfs,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Dfs => "dfs",
            Strategy::Bfs => "bfs",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dfs" => Ok(Strategy::Dfs),
            "bfs" => Ok(Strategy::Bfs),
            other => Err(format!("unknown strategy {other:?}, expected dfs or bfs")),
        }
    }
}

#[derive(Debug, Error)]
pub enum TraverseError {
    #[error("start network {0} is not in the fork tree")]
    UnknownStart(NetworkId),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

/// Outcome of an ecosystem search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchResult {
    Found(FoundBlock),
    /// The target is nowhere; `visited` covers every network reachable from
    /// the start node, in visit order.
    NotFound { visited: Vec<NetworkId> },
}

/// The first block matching the target, and where it was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoundBlock {
    pub network_id: NetworkId,
    pub block_index: u64,
    pub payload: Vec<u8>,
    pub hash: Digest,
}

/// The complete visit order from `start` under `strategy`. Pure function of
/// its inputs; no network is contacted.
pub fn traversal_order(
    adj: &AdjacencyList,
    start: NetworkId,
    strategy: Strategy,
) -> Result<Vec<NetworkId>, TraverseError> {
    if !adj.contains(start) {
        return Err(TraverseError::UnknownStart(start));
    }
    let mut order = Vec::with_capacity(adj.node_count());
    match strategy {
        Strategy::Dfs => {
            let mut stack = vec![start];
            while let Some(node) = stack.pop() {
                order.push(node);
                for child in adj.children(node).iter().rev() {
                    stack.push(*child);
                }
            }
        }
        Strategy::Bfs => {
            let mut queue = VecDeque::from([start]);
            while let Some(node) = queue.pop_front() {
                order.push(node);
                queue.extend(adj.children(node));
            }
        }
    }
    Ok(order)
}

/// Visits networks in traversal order, checking each for `target`, and
/// returns the first match. An unreachable network aborts the search with an
/// error naming it; partial progress is never reported as `NotFound`.
pub fn search(
    eco: &Ecosystem,
    adj: &AdjacencyList,
    start: NetworkId,
    target: &[u8],
    strategy: Strategy,
) -> Result<SearchResult, TraverseError> {
    let order = traversal_order(adj, start, strategy)?;
    let mut visited = Vec::with_capacity(order.len());
    for network_id in order {
        let handle = eco.resolve(network_id)?;
        visited.push(network_id);
        if let Some(hit) = handle.find(target)? {
            return Ok(SearchResult::Found(FoundBlock {
                network_id,
                block_index: hit.index,
                payload: hit.payload,
                hash: hit.hash,
            }));
        }
    }
    Ok(SearchResult::NotFound { visited })
}

/// Testing oracle for [`search`]: walks the tree recursively from the root
/// and reports every match in (traversal-order, block-index) order, reading
/// blocks one by one instead of using the per-network find operation.
pub fn exhaustive_scan(
    eco: &Ecosystem,
    adj: &AdjacencyList,
    target: &[u8],
) -> Result<Vec<(NetworkId, u64)>, TraverseError> {
    fn walk(
        eco: &Ecosystem,
        adj: &AdjacencyList,
        node: NetworkId,
        target: &[u8],
        out: &mut Vec<(NetworkId, u64)>,
    ) -> Result<(), TraverseError> {
        let handle = eco.resolve(node)?;
        let height = handle.height()?;
        for index in 0..height {
            let block = handle.get_block(index)?;
            if block.payload() == target {
                out.push((node, index));
            }
        }
        for child in adj.children(node) {
            walk(eco, adj, *child, target, out)?;
        }
        Ok(())
    }

    let mut out = Vec::new();
    walk(eco, adj, adj.root(), target, &mut out)?;
    Ok(out)
}
