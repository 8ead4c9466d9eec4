//! Chain files come from disk and are never trusted: parsing arbitrary bytes
//! must never panic, and whatever parses must re-validate cleanly.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(chain) = forktree::persist::parse_chain_json(data) {
        // Anything that loads must already be fully verified.
        assert!(chain.validate().is_valid());
        // And a loaded chain re-saves to exactly the accepted bytes.
        assert_eq!(forktree::persist::chain_to_canonical_json(&chain), data);
    }
});
