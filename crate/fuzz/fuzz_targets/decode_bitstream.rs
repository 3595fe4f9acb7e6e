#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // container parse plus the full decode path behind it
    if let Ok(stream) = hgs_codec::bitstream::HgsBitstream::from_bytes(data) {
        assert_eq!(stream.to_bytes().unwrap(), data);
        let _ = hgs_codec::pipeline::decode_stream(&stream, false);
    }
});
