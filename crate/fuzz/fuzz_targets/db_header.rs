#![no_main]

use dualring_core::pir::DatabaseHeader;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(h) = DatabaseHeader::parse(data) {
        assert_eq!(DatabaseHeader::parse(&h.to_bytes()).unwrap(), h);
    }
});
