//! Region-adaptive hierarchical (Haar) transform over the voxel hierarchy.
//!
//! Bottom-up pairwise merges along z, then y, then x within each octree
//! level; Morton order fixes sibling pairing. Each merge applies the
//! orthonormal rotation
//!
//! ```text
//! DC = (sqrt(w1) a1 + sqrt(w2) a2) / sqrt(w1 + w2)
//! AC = (-sqrt(w2) a1 + sqrt(w1) a2) / sqrt(w1 + w2)
//! ```
//!
//! with leaf weight 1 and merged weight `w1 + w2`; unpaired nodes pass
//! through. The coefficient vector is the root DC followed by the ACs in
//! merge order (bottom round first, left to right within a round).

use super::morton;
use crate::error::{Error, Result};

/// Transformed attribute channel: `n` coefficients and the region weight
/// behind each one (total weight for the DC, merged pair weight per AC).
#[derive(Debug, Clone, PartialEq)]
pub struct RahtCoefficients {
    pub coeffs: Vec<f64>,
    pub weights: Vec<u64>,
}

/// Checks positions are in range, strictly Morton-sorted, and unique;
/// returns their Morton keys.
fn sorted_keys(positions: &[[u32; 3]], bit_depth: u8) -> Result<Vec<u64>> {
    if !(2..=18).contains(&bit_depth) {
        return Err(Error::Config(format!(
            "bit depth {bit_depth} outside [2, 18]"
        )));
    }
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
    for (i, w) in keys.windows(2).enumerate() {
        if w[0] == w[1] {
            let c = positions[i];
            return Err(Error::Duplicate {
                pos: [c[0] as i64, c[1] as i64, c[2] as i64],
            });
        }
        if w[0] > w[1] {
            return Err(Error::Shape(format!(
                "positions not Morton-sorted at index {i}"
            )));
        }
    }
    Ok(keys)
}

/// Forward transform of one attribute channel aligned to Morton-sorted
/// voxel positions.
pub fn raht_forward(
    attrs: &[f64],
    positions: &[[u32; 3]],
    bit_depth: u8,
) -> Result<RahtCoefficients> {
    if attrs.len() != positions.len() {
        return Err(Error::Shape(format!(
            "{} attributes for {} positions",
            attrs.len(),
            positions.len()
        )));
    }
    if attrs.is_empty() {
        return Ok(RahtCoefficients {
            coeffs: Vec::new(),
            weights: Vec::new(),
        });
    }
    let keys = sorted_keys(positions, bit_depth)?;

    let mut nodes: Vec<(u64, u64, f64)> = keys
        .iter()
        .zip(attrs)
        .map(|(&k, &v)| (k, 1u64, v))
        .collect();
    let mut acs = Vec::with_capacity(attrs.len() - 1);
    let mut ac_weights = Vec::with_capacity(attrs.len() - 1);

    for _round in 0..3 * bit_depth as usize {
        let mut out = Vec::with_capacity(nodes.len());
        let mut i = 0;
        while i < nodes.len() {
            let (k1, w1, a1) = nodes[i];
            if i + 1 < nodes.len() && k1 >> 1 == nodes[i + 1].0 >> 1 {
                let (_, w2, a2) = nodes[i + 1];
                let sw1 = (w1 as f64).sqrt();
                let sw2 = (w2 as f64).sqrt();
                let s = ((w1 + w2) as f64).sqrt();
                acs.push((-sw2 * a1 + sw1 * a2) / s);
                ac_weights.push(w1 + w2);
                out.push((k1 >> 1, w1 + w2, (sw1 * a1 + sw2 * a2) / s));
                i += 2;
            } else {
                out.push((k1 >> 1, w1, a1));
                i += 1;
            }
        }
        nodes = out;
    }
    debug_assert_eq!(nodes.len(), 1);

    let mut coeffs = Vec::with_capacity(attrs.len());
    let mut weights = Vec::with_capacity(attrs.len());
    coeffs.push(nodes[0].2);
    weights.push(nodes[0].1);
    coeffs.extend_from_slice(&acs);
    weights.extend_from_slice(&ac_weights);
    Ok(RahtCoefficients { coeffs, weights })
}

/// Per-round merge events: output-node index plus the two child weights.
struct MergePlan {
    rounds: Vec<Vec<(u32, u64, u64)>>,
}

fn build_plan(keys: &[u64], rounds: usize) -> MergePlan {
    let mut nodes: Vec<(u64, u64)> = keys.iter().map(|&k| (k, 1u64)).collect();
    let mut plan = MergePlan {
        rounds: Vec::with_capacity(rounds),
    };
    for _ in 0..rounds {
        let mut merges = Vec::new();
        let mut out: Vec<(u64, u64)> = Vec::with_capacity(nodes.len());
        let mut i = 0;
        while i < nodes.len() {
            let (k1, w1) = nodes[i];
            if i + 1 < nodes.len() && k1 >> 1 == nodes[i + 1].0 >> 1 {
                let w2 = nodes[i + 1].1;
                merges.push((out.len() as u32, w1, w2));
                out.push((k1 >> 1, w1 + w2));
                i += 2;
            } else {
                out.push((k1 >> 1, w1));
                i += 1;
            }
        }
        nodes = out;
        plan.rounds.push(merges);
    }
    plan
}

/// Inverse transform; the geometry supplies the merge structure.
pub fn raht_inverse(coeffs: &[f64], positions: &[[u32; 3]], bit_depth: u8) -> Result<Vec<f64>> {
    if coeffs.len() != positions.len() {
        return Err(Error::Shape(format!(
            "{} coefficients for {} positions",
            coeffs.len(),
            positions.len()
        )));
    }
    if coeffs.is_empty() {
        return Ok(Vec::new());
    }
    let keys = sorted_keys(positions, bit_depth)?;
    let rounds = 3 * bit_depth as usize;
    let plan = build_plan(&keys, rounds);

    // AC slice offsets per round, in forward (bottom-up) order
    let mut offsets = Vec::with_capacity(rounds + 1);
    let mut acc = 1usize; // coeffs[0] is the root DC
    for r in 0..rounds {
        offsets.push(acc);
        acc += plan.rounds[r].len();
    }
    debug_assert_eq!(acc, coeffs.len());

    let mut vals = vec![coeffs[0]];
    for r in (0..rounds).rev() {
        let merges = &plan.rounds[r];
        if merges.is_empty() {
            continue;
        }
        let slice = &coeffs[offsets[r]..offsets[r] + merges.len()];
        let mut expanded = Vec::with_capacity(vals.len() + merges.len());
        let mut mi = 0;
        for (idx, &dc) in vals.iter().enumerate() {
            if mi < merges.len() && merges[mi].0 as usize == idx {
                let (_, w1, w2) = merges[mi];
                let ac = slice[mi];
                let sw1 = (w1 as f64).sqrt();
                let sw2 = (w2 as f64).sqrt();
                let s = ((w1 + w2) as f64).sqrt();
                expanded.push((sw1 * dc - sw2 * ac) / s);
                expanded.push((sw2 * dc + sw1 * ac) / s);
                mi += 1;
            } else {
                expanded.push(dc);
            }
        }
        vals = expanded;
    }
    debug_assert_eq!(vals.len(), coeffs.len());
    Ok(vals)
}

/// Uniform coefficient quantization: `round(c / qs)`.
pub fn quantize_coeffs(coeffs: &[f64], qs: f64) -> Result<Vec<i64>> {
    if !qs.is_finite() || qs <= 0.0 {
        return Err(Error::Config(format!("quantization step {qs} must be > 0")));
    }
    Ok(coeffs.iter().map(|&c| (c / qs).round() as i64).collect())
}

/// Inverse of [`quantize_coeffs`].
pub fn dequantize_coeffs(codes: &[i64], qs: f64) -> Vec<f64> {
    codes.iter().map(|&q| q as f64 * qs).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Random unique voxels in Morton order plus a random signal.
    fn random_case(n: usize, bit_depth: u8, seed: u64) -> (Vec<[u32; 3]>, Vec<f64>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let side = 1u32 << bit_depth;
        let mut set = std::collections::BTreeSet::new();
        while set.len() < n {
            set.insert(morton::encode(
                rng.gen_range(0..side),
                rng.gen_range(0..side),
                rng.gen_range(0..side),
            ));
        }
        let positions: Vec<[u32; 3]> = set.iter().map(|&k| morton::decode(k)).collect();
        let attrs: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
        (positions, attrs)
    }

    #[test]
    fn constant_siblings_put_energy_in_dc() {
        let positions = vec![[0, 0, 0], [0, 0, 1]];
        let c = 2.5;
        let out = raht_forward(&[c, c], &positions, 2).unwrap();
        assert!((out.coeffs[0] - 2.0f64.sqrt() * c).abs() < 1e-12);
        assert!(out.coeffs[1].abs() < 1e-12);
        assert_eq!(out.weights, vec![2, 2]);
    }

    #[test]
    fn sibling_pair_matches_hand_rotation() {
        let positions = vec![[0, 0, 0], [0, 0, 1]];
        let out = raht_forward(&[1.0, 3.0], &positions, 2).unwrap();
        assert!((out.coeffs[0] - 2.0 * 2.0f64.sqrt()).abs() < 1e-12);
        assert!((out.coeffs[1] - 2.0f64.sqrt()).abs() < 1e-12);
        let energy: f64 = out.coeffs.iter().map(|c| c * c).sum();
        assert!((energy - 10.0).abs() < 1e-12);
        let back = raht_inverse(&out.coeffs, &positions, 2).unwrap();
        assert!((back[0] - 1.0).abs() < 1e-12);
        assert!((back[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_voxel_passes_through() {
        let out = raht_forward(&[7.5], &[[3, 2, 1]], 4).unwrap();
        assert_eq!(out.coeffs, vec![7.5]);
        assert_eq!(out.weights, vec![1]);
        assert_eq!(raht_inverse(&[7.5], &[[3, 2, 1]], 4).unwrap(), vec![7.5]);
    }

    #[test]
    fn zero_signal_stays_zero() {
        let (positions, _) = random_case(100, 6, 1);
        let zeros = vec![0.0; 100];
        let out = raht_forward(&zeros, &positions, 6).unwrap();
        assert!(out.coeffs.iter().all(|&c| c == 0.0));
        assert_eq!(raht_inverse(&out.coeffs, &positions, 6).unwrap(), zeros);
    }

    #[test]
    fn energy_is_preserved_and_round_trip_is_tight() {
        for (n, bd, seed) in [(4096usize, 8u8, 2u64), (1000, 16, 3), (333, 5, 4)] {
            let (positions, attrs) = random_case(n, bd, seed);
            let out = raht_forward(&attrs, &positions, bd).unwrap();
            assert_eq!(out.coeffs.len(), n);
            let e_in: f64 = attrs.iter().map(|a| a * a).sum();
            let e_out: f64 = out.coeffs.iter().map(|c| c * c).sum();
            assert!(
                (e_in - e_out).abs() <= 1e-9 * e_in,
                "energy {e_in} vs {e_out}"
            );
            let back = raht_inverse(&out.coeffs, &positions, bd).unwrap();
            let amax = attrs.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            for (x, y) in attrs.iter().zip(&back) {
                assert!((x - y).abs() <= 1e-9 * amax);
            }
        }
    }

    #[test]
    fn quantized_round_trip_obeys_l2_bound() {
        let (positions, attrs) = random_case(2048, 8, 9);
        let qs = 0.5;
        let out = raht_forward(&attrs, &positions, 8).unwrap();
        let codes = quantize_coeffs(&out.coeffs, qs).unwrap();
        let back = raht_inverse(&dequantize_coeffs(&codes, qs), &positions, 8).unwrap();
        let l2: f64 = attrs
            .iter()
            .zip(&back)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let bound = qs / 2.0 * (attrs.len() as f64).sqrt();
        assert!(l2 <= bound, "L2 error {l2} above bound {bound}");
    }

    #[test]
    fn qs_one_on_integers_is_identity() {
        let codes = quantize_coeffs(&[3.0, -7.0, 0.0], 1.0).unwrap();
        assert_eq!(codes, vec![3, -7, 0]);
        assert_eq!(dequantize_coeffs(&codes, 1.0), vec![3.0, -7.0, 0.0]);
    }

    #[test]
    fn shape_and_order_errors() {
        let positions = vec![[0, 0, 0], [0, 0, 1]];
        assert!(matches!(
            raht_forward(&[1.0], &positions, 2),
            Err(Error::Shape(_))
        ));
        let unsorted = vec![[0, 0, 1], [0, 0, 0]];
        assert!(matches!(
            raht_forward(&[1.0, 2.0], &unsorted, 2),
            Err(Error::Shape(_))
        ));
        let dup = vec![[0, 0, 1], [0, 0, 1]];
        assert!(matches!(
            raht_forward(&[1.0, 2.0], &dup, 2),
            Err(Error::Duplicate { .. })
        ));
        assert!(quantize_coeffs(&[1.0], 0.0).is_err());
    }
}
