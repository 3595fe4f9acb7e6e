//! Morton (z-order) keys over the octree's octant convention: within each
//! level the octant index is `(x_bit << 2) | (y_bit << 1) | z_bit`, so x is
//! the most significant interleaved axis. Breadth-first octree leaf order
//! equals ascending key order.

/// Spreads the low 21 bits of `w` so consecutive bits land 3 apart.
fn spread(w: u64) -> u64 {
    let mut w = w & 0x1f_ffff;
    w = (w | w << 32) & 0x001f_0000_0000_ffff;
    w = (w | w << 16) & 0x001f_0000_ff00_00ff;
    w = (w | w << 8) & 0x100f_00f0_0f00_f00f;
    w = (w | w << 4) & 0x10c3_0c30_c30c_30c3;
    w = (w | w << 2) & 0x1249_2492_4924_9249;
    w
}

fn compact(w: u64) -> u32 {
    let mut w = w & 0x1249_2492_4924_9249;
    w = (w ^ (w >> 2)) & 0x10c3_0c30_c30c_30c3;
    w = (w ^ (w >> 4)) & 0x100f_00f0_0f00_f00f;
    w = (w ^ (w >> 8)) & 0x001f_0000_ff00_00ff;
    w = (w ^ (w >> 16)) & 0x001f_0000_0000_ffff;
    w = (w ^ (w >> 32)) & 0x1f_ffff;
    w as u32
}

/// Interleaves unsigned voxel coordinates into a Morton key, x highest.
pub fn encode(x: u32, y: u32, z: u32) -> u64 {
    (spread(x as u64) << 2) | (spread(y as u64) << 1) | spread(z as u64)
}

/// Inverse of [`encode`].
pub fn decode(key: u64) -> [u32; 3] {
    [compact(key >> 2), compact(key >> 1), compact(key)]
}
