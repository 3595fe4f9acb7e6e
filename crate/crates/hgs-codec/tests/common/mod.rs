use hgs_codec::ply::{GaussianCloud, SH_CHANNELS};
use rand::{Rng, SeedableRng};

/// Synthetic cloud with f32-representable values, a realistic scene-like
/// spread of positions, and non-trivial attribute correlations.
pub fn synthetic_cloud(n: usize, seed: u64) -> GaussianCloud {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut cloud = GaussianCloud::zeros(n);
    for i in 0..n {
        cloud.positions[i] = [
            rng.gen_range(-25.0f32..10.0) as f64,
            rng.gen_range(-4.0f32..4.0) as f64,
            rng.gen_range(0.0f32..18.0) as f64,
        ];
        let base = rng.gen_range(-1.5f32..1.5);
        cloud.color_dc[i] = std::array::from_fn(|a| (base + 0.3 * a as f32) as f64);
        for j in 0..SH_CHANNELS {
            cloud.color_sh[i * SH_CHANNELS + j] = (base * 0.1 + rng.gen_range(-0.2f32..0.2)) as f64;
        }
        cloud.opacity[i] = rng.gen_range(-6.0f32..6.0) as f64;
        cloud.scale[i] = std::array::from_fn(|_| rng.gen_range(-6.0f32..-2.0) as f64);
        let q: [f32; 4] = std::array::from_fn(|_| rng.gen_range(-1.0f32..1.0));
        cloud.rotation[i] = std::array::from_fn(|a| q[a] as f64);
    }
    cloud
}
