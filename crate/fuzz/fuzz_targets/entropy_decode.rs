#![no_main]

use hgs_codec::codec::{entropy_decode, entropy_encode, SymbolKind};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    for kind in [SymbolKind::Occupancy, SymbolKind::Coeff] {
        if let Ok(symbols) = entropy_decode(data, kind) {
            let bytes = entropy_encode(&symbols, kind).unwrap();
            assert_eq!(entropy_decode(&bytes, kind).unwrap(), symbols);
        }
    }
});
