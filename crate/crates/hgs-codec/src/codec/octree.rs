//! Lossless breadth-first octree occupancy coding of unique voxels.
//!
//! Input coordinates are unsigned, inside the `[0, 2^N - 1]` cube (the
//! encode pipeline shifts signed lattice positions by `2^(N-1) - 1` and
//! records the offset in the container header). Each occupied node emits
//! one occupancy byte whose bit `i` is set iff child octant `i` is
//! occupied, with octant index `(x_bit << 2) | (y_bit << 1) | z_bit`.
//! Decoded voxels come out in ascending Morton order.

use super::morton;
use crate::error::{Error, Result};

/// Breadth-first occupancy bytes plus enough metadata to decode them.
#[derive(Debug, Clone, PartialEq)]
pub struct OctreeStream {
    pub bit_depth: u8,
    pub occupancy: Vec<u8>,
    pub point_count: usize,
}

fn check_bit_depth(bit_depth: u8) -> Result<()> {
    if !(2..=18).contains(&bit_depth) {
        return Err(Error::Config(format!(
            "octree bit depth {bit_depth} outside [2, 18]"
        )));
    }
    Ok(())
}

/// Encodes unique voxels into breadth-first occupancy bytes.
pub fn octree_encode(positions: &[[u32; 3]], bit_depth: u8) -> Result<OctreeStream> {
    check_bit_depth(bit_depth)?;
    let side = 1u32 << bit_depth;
    let mut keys = Vec::with_capacity(positions.len());
    for (i, p) in positions.iter().enumerate() {
        if p.iter().any(|&c| c >= side) {
            return Err(Error::Range {
                value: *p.iter().max().unwrap() as f64,
                min: 0.0,
                max: (side - 1) as f64,
                index: i,
            });
        }
        keys.push(morton::encode(p[0], p[1], p[2]));
    }
    keys.sort_unstable();
    for w in keys.windows(2) {
        if w[0] == w[1] {
            let c = morton::decode(w[0]);
            return Err(Error::Duplicate {
                pos: [c[0] as i64, c[1] as i64, c[2] as i64],
            });
        }
    }

    let n = bit_depth as u32;
    let mut occupancy = Vec::new();
    // nodes at the current level as (start, end) ranges into the sorted keys
    let mut nodes: Vec<(usize, usize)> = if keys.is_empty() {
        Vec::new()
    } else {
        vec![(0, keys.len())]
    };
    for level in 0..n {
        let child_shift = 3 * (n - level - 1);
        let mut next = Vec::with_capacity(nodes.len() * 2);
        for &(start, end) in &nodes {
            let mut byte = 0u8;
            let mut i = start;
            while i < end {
                let octant = (keys[i] >> child_shift) & 7;
                byte |= 1 << octant;
                let mut j = i + 1;
                while j < end && (keys[j] >> child_shift) & 7 == octant {
                    j += 1;
                }
                next.push((i, j));
                i = j;
            }
            occupancy.push(byte);
        }
        nodes = next;
    }

    Ok(OctreeStream {
        bit_depth,
        occupancy,
        point_count: positions.len(),
    })
}

/// Recovers the voxel set, in ascending Morton order.
pub fn octree_decode(stream: &OctreeStream) -> Result<Vec<[u32; 3]>> {
    check_bit_depth(stream.bit_depth)?;
    if stream.point_count == 0 {
        if stream.occupancy.is_empty() {
            return Ok(Vec::new());
        }
        return Err(Error::CorruptStream(
            "occupancy bytes for empty tree".into(),
        ));
    }

    let n = stream.bit_depth as u32;
    let mut cursor = 0usize;
    let mut prefixes: Vec<u64> = vec![0];
    for _level in 0..n {
        let mut next = Vec::with_capacity(prefixes.len() * 2);
        for &prefix in &prefixes {
            let byte = *stream
                .occupancy
                .get(cursor)
                .ok_or_else(|| Error::CorruptStream("occupancy stream truncated".into()))?;
            cursor += 1;
            if byte == 0 {
                return Err(Error::CorruptStream("empty occupancy byte".into()));
            }
            for octant in 0..8u64 {
                if byte >> octant & 1 == 1 {
                    next.push(prefix << 3 | octant);
                }
            }
        }
        // every node holds at least one point, so growth past the declared
        // count means the stream is lying
        if next.len() > stream.point_count {
            return Err(Error::CorruptStream(format!(
                "tree claims {} occupied nodes for {} points",
                next.len(),
                stream.point_count
            )));
        }
        prefixes = next;
    }

    if cursor != stream.occupancy.len() {
        return Err(Error::CorruptStream(format!(
            "{} trailing occupancy bytes",
            stream.occupancy.len() - cursor
        )));
    }
    if prefixes.len() != stream.point_count {
        return Err(Error::CorruptStream(format!(
            "decoded {} voxels, header says {}",
            prefixes.len(),
            stream.point_count
        )));
    }
    Ok(prefixes.into_iter().map(morton::decode).collect())
}
