//! The client side of the wire protocol: response lines from an untrusted
//! peer must parse or fail cleanly, never panic.

#![no_main]

use libfuzzer_sys::fuzz_target;

use forktree::netharness::wire;

fuzz_target!(|data: &[u8]| {
    if let Ok(line) = std::str::from_utf8(data) {
        if let Ok(response) = wire::Response::parse_line(line) {
            let reencoded = response.encode();
            assert_eq!(wire::Response::parse_line(&reencoded).unwrap(), response);
        }
    }
});
