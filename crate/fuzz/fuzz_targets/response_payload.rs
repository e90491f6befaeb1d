#![no_main]

use dualring_net::payload::ResponsePayload;
use libfuzzer_sys::fuzz_target;

const WORD_BITS: [u32; 4] = [8, 10, 16, 20];

fuzz_target!(|data: &[u8]| {
    let Some((&sel, rest)) = data.split_first() else { return };
    let bits = WORD_BITS[sel as usize % WORD_BITS.len()];
    if let Ok(p) = ResponsePayload::decode(rest, bits) {
        assert_eq!(p.encode(bits), rest);
    }
});
