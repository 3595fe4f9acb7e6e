#![no_main]

use hgs_codec::codec::{octree_decode, octree_encode, OctreeStream};
use libfuzzer_sys::fuzz_target;

// input: [u8 bit_depth][u64 point_count][occupancy bytes]
fuzz_target!(|data: &[u8]| {
    if data.len() < 9 {
        return;
    }
    let stream = OctreeStream {
        bit_depth: data[0],
        point_count: u64::from_le_bytes(data[1..9].try_into().unwrap()) as usize,
        occupancy: data[9..].to_vec(),
    };
    if let Ok(voxels) = octree_decode(&stream) {
        let back = octree_encode(&voxels, stream.bit_depth).unwrap();
        assert_eq!(back.occupancy, stream.occupancy);
        assert_eq!(octree_decode(&back).unwrap(), voxels);
    }
});
