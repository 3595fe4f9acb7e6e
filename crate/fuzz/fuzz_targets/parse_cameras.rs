#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cams) = hgs_codec::ply::parse_cameras(data) {
        let bytes = hgs_codec::ply::write_cameras(&cams);
        let back = hgs_codec::ply::parse_cameras(&bytes).unwrap();
        assert_eq!(back, cams);
    }
});
