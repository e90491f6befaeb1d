#![no_main]

use dualring_net::payload::ErrorPayload;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = ErrorPayload::decode(data);
});
