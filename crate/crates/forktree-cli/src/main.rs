//! `forktree` — drive a multi-chain ecosystem from the shell: create a root
//! network, mine payloads, hard-fork new networks, search the whole fork
//! tree, and render it.
//!
//! Machine-readable results go to stdout; diagnostics go to stderr. Exit
//! codes: 0 success (search: found), 1 not found / invalid, 2 error.

use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use forktree::chain::{ChainInstance, NetworkId};
use forktree::fork::hard_fork;
use forktree::hashcore::Difficulty;
use forktree::netharness::{Ecosystem, NetworkServer};
use forktree::persist::{self, PersistError};
use forktree::repository::{build_adjacency, RepositoryChain, NOT_FOUND};
use forktree::traverse::{search, AdjacencyList, SearchResult, Strategy};

#[derive(Parser)]
#[command(
    name = "forktree",
    about = "A proof-of-work multi-chain ecosystem with a repository blockchain of fork events",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create an ecosystem directory with a root network and the repository.
    Init {
        /// Directory to create; must not exist yet.
        #[arg(long)]
        dir: PathBuf,
        /// Network id of the root chain.
        #[arg(long)]
        network_id: u64,
        /// Service port of the root chain.
        #[arg(long)]
        port: u16,
        /// Mining difficulty (leading zero bits) of the root chain.
        #[arg(long)]
        difficulty: u8,
        /// Payload of the root genesis block.
        #[arg(long)]
        genesis: String,
        /// Network id of the repository chain.
        #[arg(long, default_value_t = 0)]
        repo_network_id: u64,
        /// Service port of the repository chain.
        #[arg(long, default_value_t = 30300)]
        repo_port: u16,
        /// Mining difficulty of the repository chain.
        #[arg(long, default_value_t = 8)]
        repo_difficulty: u8,
    },
    /// Mine one payload-carrying block onto a network.
    Mine {
        #[arg(long)]
        dir: PathBuf,
        /// Network id to grow.
        #[arg(long)]
        network: u64,
        #[arg(long)]
        payload: String,
    },
    /// Hard-fork a network and record the event in the repository.
    Fork {
        #[arg(long)]
        dir: PathBuf,
        /// Network id to fork from.
        #[arg(long)]
        parent: u64,
        /// Number of blocks the child keeps (1..=parent height).
        #[arg(long)]
        at: u64,
        /// Network id of the new chain.
        #[arg(long)]
        network_id: u64,
        /// Service port of the new chain.
        #[arg(long)]
        port: u16,
        /// Difficulty of the new chain; defaults to the parent's.
        #[arg(long)]
        difficulty: Option<u8>,
    },
    /// Search every network in the fork tree for a payload.
    Search {
        #[arg(long)]
        dir: PathBuf,
        /// Payload to look for (exact match).
        #[arg(long)]
        value: String,
        /// dfs (preorder) or bfs (level order).
        #[arg(long, default_value = "dfs")]
        strategy: Strategy,
        /// Route every query through the local socket protocol.
        #[arg(long)]
        net: bool,
        /// Also scan the repository chain, after the fork tree.
        #[arg(long)]
        include_repo: bool,
    },
    /// Render the fork tree.
    Tree {
        #[arg(long)]
        dir: PathBuf,
        /// ascii (indented preorder) or dot (Graphviz digraph).
        #[arg(long, default_value = "ascii")]
        format: TreeFormat,
    },
    /// Query the repository's fork records.
    Repo {
        #[arg(long)]
        dir: PathBuf,
        /// Print the record with this fork id.
        #[arg(long, conflicts_with_all = ["network", "children"])]
        fork_id: Option<u64>,
        /// Print the fork id registered for this network id.
        #[arg(long, conflicts_with = "children")]
        network: Option<u64>,
        /// Print the child fork ids of this fork id.
        #[arg(long)]
        children: Option<u64>,
    },
    /// Re-verify every chain file and the repository.
    Verify {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Serve one network's chain over the socket protocol until killed.
    Serve {
        #[arg(long)]
        dir: PathBuf,
        /// Network id to serve (the repository's id is allowed).
        #[arg(long)]
        network: u64,
        /// Port override; defaults to the network's recorded port.
        #[arg(long)]
        port: Option<u16>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum TreeFormat {
    Ascii,
    Dot,
}

impl FromStr for TreeFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ascii" => Ok(TreeFormat::Ascii),
            "dot" => Ok(TreeFormat::Dot),
            other => Err(format!("unknown format {other:?}, expected ascii or dot")),
        }
    }
}

/// Sentinel for a reader that hung up (`head`, a closed pipe): unwinds back
/// to `main` so locks and servers clean up, then exits quietly.
#[derive(Debug)]
struct StdoutClosed;

impl std::fmt::Display for StdoutClosed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("stdout closed")
    }
}

impl std::error::Error for StdoutClosed {}

/// Writes one result line to stdout.
fn emit(text: impl AsRef<str>) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{}", text.as_ref()).and_then(|_| out.flush()) {
        Ok(()) => Ok(()),
        Err(err) if err.kind() == std::io::ErrorKind::BrokenPipe => {
            Err(anyhow::Error::new(StdoutClosed))
        }
        Err(err) => Err(err).context("writing to stdout"),
    }
}

/// One CLI invocation at a time per directory. The lock file is removed on
/// drop; a leftover one from a killed process must be removed by hand.
struct DirLock {
    path: PathBuf,
}

impl DirLock {
    fn acquire(dir: &Path) -> Result<DirLock> {
        let path = dir.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut file) => {
                let _ = writeln!(file, "{}", std::process::id());
                Ok(DirLock { path })
            }
            Err(err) if err.kind() == std::io::ErrorKind::AlreadyExists => {
                bail!(
                    "{} is locked by another invocation (remove {} if stale)",
                    dir.display(),
                    path.display()
                )
            }
            Err(err) => Err(err).with_context(|| format!("locking {}", dir.display())),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) if err.is::<StdoutClosed>() => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Init {
            dir,
            network_id,
            port,
            difficulty,
            genesis,
            repo_network_id,
            repo_port,
            repo_difficulty,
        } => cmd_init(
            &dir,
            NetworkId(network_id),
            port,
            Difficulty::new(difficulty),
            genesis.as_bytes(),
            NetworkId(repo_network_id),
            repo_port,
            Difficulty::new(repo_difficulty),
        ),
        Command::Mine { dir, network, payload } => {
            cmd_mine(&dir, NetworkId(network), payload.as_bytes())
        }
        Command::Fork {
            dir,
            parent,
            at,
            network_id,
            port,
            difficulty,
        } => cmd_fork(
            &dir,
            NetworkId(parent),
            at,
            NetworkId(network_id),
            port,
            difficulty.map(Difficulty::new),
        ),
        Command::Search {
            dir,
            value,
            strategy,
            net,
            include_repo,
        } => cmd_search(&dir, value.as_bytes(), strategy, net, include_repo),
        Command::Tree { dir, format } => cmd_tree(&dir, format),
        Command::Repo {
            dir,
            fork_id,
            network,
            children,
        } => cmd_repo(&dir, fork_id, network, children),
        Command::Verify { dir } => cmd_verify(&dir),
        Command::Serve { dir, network, port } => cmd_serve(&dir, NetworkId(network), port),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_init(
    dir: &Path,
    network_id: NetworkId,
    port: u16,
    difficulty: Difficulty,
    genesis: &[u8],
    repo_network_id: NetworkId,
    repo_port: u16,
    repo_difficulty: Difficulty,
) -> Result<ExitCode> {
    if dir.exists() {
        bail!("{} already exists", dir.display());
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let _lock = DirLock::acquire(dir)?;

    let mut repo = RepositoryChain::create(repo_network_id, repo_port, repo_difficulty)
        .context("mining the repository genesis")?;
    let root = ChainInstance::create(network_id, port, difficulty, genesis)
        .context("mining the root genesis")?;
    let fork_id = repo.add_fork_detail(root.network_id(), root.port(), None, 0)?;
    let mut eco = Ecosystem::new(repo);
    eco.register_network(root)?;
    persist::save_ecosystem(&eco, dir)?;
    emit(format!(
        "initialized dir={} root_network={network_id} repository_network={repo_network_id} fork_id={fork_id}",
        dir.display()
    ))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_mine(dir: &Path, network: NetworkId, payload: &[u8]) -> Result<ExitCode> {
    let _lock = DirLock::acquire(dir)?;
    let mut eco = persist::load_ecosystem(dir)?;
    if network == eco.repository().network_id() {
        bail!("network {network} is the repository; it only grows through `fork`");
    }
    let chain = eco
        .local_chain(network)
        .ok_or_else(|| anyhow!("unknown network {network}"))?;
    let grown = chain.append_payload(payload)?;
    let height = grown.height();
    let hash = grown.tip().hash;
    eco.replace_network(grown)?;
    persist::save_ecosystem(&eco, dir)?;
    emit(format!("height={height} hash={hash}"))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_fork(
    dir: &Path,
    parent: NetworkId,
    at: u64,
    network_id: NetworkId,
    port: u16,
    difficulty: Option<Difficulty>,
) -> Result<ExitCode> {
    let _lock = DirLock::acquire(dir)?;
    let mut eco = persist::load_ecosystem(dir)?;
    let parent_chain = eco
        .local_chain(parent)
        .ok_or_else(|| anyhow!("unknown parent network {parent}"))?
        .clone();
    let difficulty = difficulty.unwrap_or_else(|| parent_chain.difficulty());
    let child = hard_fork(&parent_chain, at, network_id, port, difficulty)?;
    let fork_id = eco.repository_mut().add_fork_detail(
        child.network_id(),
        child.port(),
        child.parent_network_id(),
        child.fork_block_no(),
    )?;
    eco.register_network(child)?;
    // Nothing was written until here; chain cloning and repository
    // registration land together or not at all.
    persist::save_ecosystem(&eco, dir)?;
    emit(format!("fork_id={fork_id}"))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_search(
    dir: &Path,
    target: &[u8],
    strategy: Strategy,
    net: bool,
    include_repo: bool,
) -> Result<ExitCode> {
    let _lock = DirLock::acquire(dir)?;
    let eco = persist::load_ecosystem(dir)?;
    let adj = build_adjacency(eco.repository().get_all_fork_details())?;

    let mut servers = Vec::new();
    let query_eco = if net {
        let mut remote = Ecosystem::new(eco.repository().clone());
        for record in eco.repository().get_all_fork_details() {
            let chain = eco
                .local_chain(record.network_id)
                .expect("loaded ecosystems register every record in process")
                .clone();
            let server = NetworkServer::spawn(chain, record.port_number).with_context(|| {
                format!(
                    "serving network {} on recorded port {}",
                    record.network_id, record.port_number
                )
            })?;
            remote.register_remote(record.network_id, record.port_number)?;
            servers.push(server);
        }
        remote
    } else {
        eco.clone()
    };

    let result = search(&query_eco, &adj, adj.root(), target, strategy)?;
    let outcome = match result {
        SearchResult::Found(found) => Some((found.network_id, found.block_index, found.hash)),
        SearchResult::NotFound { visited } => {
            let mut visited = visited;
            let mut repo_hit = None;
            if include_repo {
                let repo = eco.repository();
                visited.push(repo.network_id());
                repo_hit = if net {
                    let server = NetworkServer::spawn(repo.chain().clone(), repo.port())
                        .with_context(|| {
                            format!("serving the repository on recorded port {}", repo.port())
                        })?;
                    let hit = remote_find(server.port(), target)?;
                    servers.push(server);
                    hit.map(|(index, hash)| (repo.network_id(), index, hash))
                } else {
                    repo.chain()
                        .find_payload(target)
                        .map(|(index, block)| (repo.network_id(), index, block.hash))
                };
            }
            match repo_hit {
                Some(hit) => Some(hit),
                None => {
                    let list: Vec<String> = visited.iter().map(ToString::to_string).collect();
                    emit(format!("NOT FOUND after visiting: {}", list.join(",")))?;
                    return Ok(ExitCode::from(1));
                }
            }
        }
    };
    let (network_id, block_index, hash) = outcome.expect("found outcomes carry a block");
    emit(format!("FOUND network={network_id} block={block_index} hash={hash}"))?;
    Ok(ExitCode::SUCCESS)
}

fn remote_find(port: u16, target: &[u8]) -> Result<Option<(u64, forktree::Digest)>> {
    use forktree::netharness::{query, Request, Response};
    match query(
        port,
        &Request::Find {
            target: target.to_vec(),
        },
    )? {
        Response::Found { index, hash, .. } => Ok(Some((index, hash))),
        Response::Absent => Ok(None),
        other => bail!("unexpected repository reply {other:?}"),
    }
}

fn cmd_tree(dir: &Path, format: TreeFormat) -> Result<ExitCode> {
    let _lock = DirLock::acquire(dir)?;
    let eco = persist::load_ecosystem(dir)?;
    let records = eco.repository().get_all_fork_details();
    let adj = build_adjacency(records)?;
    match format {
        TreeFormat::Ascii => {
            let mut out = String::new();
            render_ascii(&eco, &adj, adj.root(), 0, &mut out);
            emit(out.trim_end_matches('\n'))?;
        }
        TreeFormat::Dot => {
            let mut out = String::from("digraph fork_tree {\n");
            for record in records {
                let _ = writeln!(
                    out,
                    "  n{} [label=\"net {} (fork@{})\"];",
                    record.network_id, record.network_id, record.fork_block_no
                );
            }
            for record in records {
                if let Some(parent) = record.parent_network_id {
                    let _ = writeln!(out, "  n{} -> n{};", parent, record.network_id);
                }
            }
            out.push('}');
            emit(out)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn render_ascii(eco: &Ecosystem, adj: &AdjacencyList, node: NetworkId, depth: usize, out: &mut String) {
    let chain = eco
        .local_chain(node)
        .expect("loaded ecosystems register every network in process");
    let _ = writeln!(
        out,
        "{}net {} (fork@{}, height {})",
        "  ".repeat(depth),
        node,
        chain.fork_block_no(),
        chain.height()
    );
    for child in adj.children(node) {
        render_ascii(eco, adj, *child, depth + 1, out);
    }
}

fn cmd_repo(
    dir: &Path,
    fork_id: Option<u64>,
    network: Option<u64>,
    children: Option<u64>,
) -> Result<ExitCode> {
    let _lock = DirLock::acquire(dir)?;
    let eco = persist::load_ecosystem(dir)?;
    let repo = eco.repository();
    match (fork_id, network, children) {
        (Some(k), None, None) => {
            let record = repo.get_fork_data(k)?;
            emit(String::from_utf8(record.encode()).expect("records are utf-8"))?;
        }
        (None, Some(n), None) => {
            let k = repo.find_fork_id(NetworkId(n));
            emit(k.to_string())?;
            if k == NOT_FOUND {
                return Ok(ExitCode::from(1));
            }
        }
        (None, None, Some(k)) => {
            let kids: Vec<String> = repo
                .get_children(k)?
                .iter()
                .map(ToString::to_string)
                .collect();
            emit(format!("[{}]", kids.join(",")))?;
        }
        (None, None, None) => {
            for record in repo.get_all_fork_details() {
                emit(String::from_utf8(record.encode()).expect("records are utf-8"))?;
            }
        }
        _ => bail!("--fork-id, --network, and --children are mutually exclusive"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(dir: &Path) -> Result<ExitCode> {
    let _lock = DirLock::acquire(dir)?;
    let manifest_bytes = fs::read(dir.join(persist::MANIFEST_FILE))
        .with_context(|| format!("reading manifest in {}", dir.display()))?;
    let manifest = persist::parse_manifest_json(&manifest_bytes)?;
    let mut all_valid = true;

    match persist::load_chain(dir.join(&manifest.repository))
        .map_err(anyhow::Error::from)
        .and_then(|chain| Ok(RepositoryChain::from_chain(chain)?))
    {
        Ok(repo) => emit(format!("VALID repository network={}", repo.network_id()))?,
        Err(err) => {
            all_valid = false;
            emit(format!("INVALID repository {}", describe_anyhow(&err)))?;
        }
    }
    for entry in &manifest.networks {
        match persist::load_chain(dir.join(&entry.path)) {
            Ok(_) => emit(format!("VALID network={}", entry.network_id))?,
            Err(err) => {
                all_valid = false;
                emit(format!("INVALID network={} {}", entry.network_id, describe(&err)))?;
            }
        }
    }
    // Cross-file agreement (records vs manifest vs chain metadata).
    if let Err(err) = persist::load_ecosystem(dir) {
        all_valid = false;
        emit(format!("INVALID consistency reason={err}"))?;
    }
    Ok(if all_valid {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn describe(err: &PersistError) -> String {
    match err {
        PersistError::HashMismatch { index } => format!("block={index} reason=hash-mismatch"),
        PersistError::InvalidChain { fault } => {
            format!("block={} reason={}", fault.index, fault.reason)
        }
        other => format!("reason={other}"),
    }
}

fn describe_anyhow(err: &anyhow::Error) -> String {
    match err.downcast_ref::<PersistError>() {
        Some(persist_err) => describe(persist_err),
        None => format!("reason={err}"),
    }
}

fn cmd_serve(dir: &Path, network: NetworkId, port: Option<u16>) -> Result<ExitCode> {
    let _lock = DirLock::acquire(dir)?;
    let eco = persist::load_ecosystem(dir)?;
    let chain = if network == eco.repository().network_id() {
        eco.repository().chain().clone()
    } else {
        eco.local_chain(network)
            .ok_or_else(|| anyhow!("unknown network {network}"))?
            .clone()
    };
    let port = port.unwrap_or_else(|| chain.port());
    let server = NetworkServer::spawn(chain, port)
        .with_context(|| format!("binding 127.0.0.1:{port}"))?;
    emit(format!("port={}", server.port()))?;
    eprintln!(
        "serving network {network} on 127.0.0.1:{} until killed",
        server.port()
    );
    loop {
        std::thread::sleep(std::time::Duration::from_secs(3600));
    }
}
