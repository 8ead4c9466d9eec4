//! Fork records are decoded out of repository block payloads.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(record) = forktree::ForkRecord::decode(data) {
        assert_eq!(record.encode(), data);
    }
});
