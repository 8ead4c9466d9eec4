//! The server side of the wire protocol: any request line, well-formed or
//! not, must produce exactly one response without panicking or mutating the
//! served chain.

#![no_main]

use std::sync::LazyLock;

use libfuzzer_sys::fuzz_target;

use forktree::chain::{ChainInstance, NetworkId};
use forktree::hashcore::Difficulty;
use forktree::netharness::wire;

static CHAIN: LazyLock<ChainInstance> = LazyLock::new(|| {
    let chain = ChainInstance::create(NetworkId(1), 8545, Difficulty::NONE, b"genesis").unwrap();
    chain
        .append_payload(b"tx-B1")
        .unwrap()
        .append_payload(b"")
        .unwrap()
});

fuzz_target!(|data: &[u8]| {
    let line = String::from_utf8_lossy(data);
    let response = wire::respond(&CHAIN, &line);
    // Every response must encode to a line the client side can parse back.
    let encoded = response.encode();
    assert_eq!(wire::Response::parse_line(&encoded).unwrap(), response);
});
