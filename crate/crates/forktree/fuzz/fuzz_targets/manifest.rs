#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(manifest) = forktree::persist::parse_manifest_json(data) {
        assert_eq!(forktree::persist::manifest_to_canonical_json(&manifest), data);
    }
});
