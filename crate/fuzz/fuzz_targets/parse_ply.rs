#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cloud) = hgs_codec::ply::parse_ply(data) {
        // anything that parses must survive a write/parse round trip
        let bytes = hgs_codec::ply::write_ply(&cloud).unwrap();
        let back = hgs_codec::ply::parse_ply(&bytes).unwrap();
        assert_eq!(back, cloud);
    }
});
