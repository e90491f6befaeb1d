#![no_main]

use dualring_net::frame::read_frame;
use dualring_net::Frame;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((frame, used)) = Frame::parse(data) {
        assert_eq!(frame.to_bytes(), &data[..used]);
    }
    let mut input = data;
    while let Ok(Some(_)) = read_frame(&mut input) {}
});
