#![no_main]

use dualring_core::profile::{parse_profiles, write_profile};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(docs) = parse_profiles(text) else { return };
    // whatever parses must survive a write and re-read
    let again: String = docs.iter().map(write_profile).collect();
    let reparsed = parse_profiles(&again).expect("written profiles parse");
    assert_eq!(reparsed.len(), docs.len());
});
