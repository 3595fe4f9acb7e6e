//! Regenerates the fuzz corpus seeds under `fuzz/corpus/`.
//!
//! Usage: `cargo run -p hgs-codec --example gen_fuzz_corpus [out_dir]`
//! (default out_dir: `fuzz/corpus` relative to the workspace root).

use hgs_codec::codec::{entropy_encode, octree_encode, SymbolKind};
use hgs_codec::pipeline::{encode_cloud, EncodeConfig};
use hgs_codec::ply::{
    write_cameras, write_ply, CameraEntry, CameraList, GaussianCloud, SH_CHANNELS,
};
use rand::{Rng, SeedableRng};
use std::path::Path;

fn synthetic_cloud(n: usize, seed: u64) -> GaussianCloud {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut cloud = GaussianCloud::zeros(n);
    for i in 0..n {
        cloud.positions[i] = [
            rng.gen_range(-10.0f32..10.0) as f64,
            rng.gen_range(-10.0f32..10.0) as f64,
            rng.gen_range(-10.0f32..10.0) as f64,
        ];
        cloud.color_dc[i] = std::array::from_fn(|_| rng.gen_range(-2.0f32..2.0) as f64);
        for j in 0..SH_CHANNELS {
            cloud.color_sh[i * SH_CHANNELS + j] = rng.gen_range(-0.5f32..0.5) as f64;
        }
        cloud.opacity[i] = rng.gen_range(-6.0f32..6.0) as f64;
        cloud.scale[i] = std::array::from_fn(|_| rng.gen_range(-5.0f32..-1.0) as f64);
        cloud.rotation[i] = std::array::from_fn(|_| rng.gen_range(-1.0f32..1.0) as f64);
    }
    cloud
}

fn put(dir: &Path, target: &str, name: &str, bytes: &[u8]) {
    let d = dir.join(target);
    std::fs::create_dir_all(&d).unwrap();
    std::fs::write(d.join(name), bytes).unwrap();
    println!("wrote {}/{name} ({} bytes)", d.display(), bytes.len());
}

fn main() {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "fuzz/corpus".into());
    let out = Path::new(&out);

    let cloud = synthetic_cloud(64, 7);
    let ply = write_ply(&cloud).unwrap();
    put(out, "parse_ply", "seed_small.ply", &ply);
    let one = write_ply(&GaussianCloud::zeros(1)).unwrap();
    put(out, "parse_ply", "seed_one_vertex.ply", &one);

    let cams = CameraList {
        entries: vec![
            CameraEntry {
                id: 0,
                center: [1.5, -2.0, 0.25],
                rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            },
            CameraEntry {
                id: 3,
                center: [0.0, 4.0, -1.0],
                rotation: [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
            },
        ],
    };
    put(
        out,
        "parse_cameras",
        "seed_two_cameras.txt",
        &write_cameras(&cams),
    );

    let config = EncodeConfig {
        bd: 10,
        latent_epochs: 2,
        ..EncodeConfig::default()
    };
    let (stream, _) = encode_cloud(&cloud, &config).unwrap();
    put(
        out,
        "decode_bitstream",
        "seed_small.hgs",
        &stream.to_bytes().unwrap(),
    );
    let bypass = EncodeConfig {
        bypass: true,
        ..config
    };
    let (stream, _) = encode_cloud(&cloud, &bypass).unwrap();
    put(
        out,
        "decode_bitstream",
        "seed_bypass.hgs",
        &stream.to_bytes().unwrap(),
    );

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let coeffs: Vec<i64> = (0..500)
        .map(|_| {
            if rng.gen_bool(0.6) {
                0
            } else {
                rng.gen_range(-5000..5000)
            }
        })
        .collect();
    put(
        out,
        "entropy_decode",
        "seed_coeffs.bin",
        &entropy_encode(&coeffs, SymbolKind::Coeff).unwrap(),
    );
    let occupancy: Vec<i64> = (0..300).map(|_| rng.gen_range(1..=255)).collect();
    put(
        out,
        "entropy_decode",
        "seed_occupancy.bin",
        &entropy_encode(&occupancy, SymbolKind::Occupancy).unwrap(),
    );

    // octree_decode seeds: [u8 bit_depth][u64 point_count][occupancy bytes]
    let mut voxels = std::collections::BTreeSet::new();
    while voxels.len() < 40 {
        voxels.insert([
            rng.gen_range(0u32..64),
            rng.gen_range(0u32..64),
            rng.gen_range(0u32..64),
        ]);
    }
    let voxels: Vec<[u32; 3]> = voxels.into_iter().collect();
    let tree = octree_encode(&voxels, 6).unwrap();
    let mut seed = vec![tree.bit_depth];
    seed.extend_from_slice(&(tree.point_count as u64).to_le_bytes());
    seed.extend_from_slice(&tree.occupancy);
    put(out, "octree_decode", "seed_tree.bin", &seed);
}
