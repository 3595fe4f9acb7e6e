//! Position-channel sparsification.
//!
//! Covers the geometric half of the sparse representation: statistical
//! outlier removal, translation/scaling of the cloud onto the integer
//! lattice spanned by the position bit depth, basis/coding-vector
//! decomposition of integer coordinates, voxel uniqueness, least-importance
//! pruning, and the progressive pruning schedule used by rate control.

use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::ply::{CameraList, GaussianCloud, SH_CHANNELS};
use rayon::prelude::*;

/// Fraction of primitives removed per default pruning event.
pub const DEFAULT_PRUNE_FRACTION: f64 = 0.001;

/// Translation + isotropic scaling that maps scene coordinates onto the
/// `[-(2^(N-1)-1), 2^(N-1)-1]` lattice cube.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NormalizationTransform {
    /// Bounding-box center subtracted before scaling.
    pub center: [f64; 3],
    /// Scaling ratio `k = (2^(N-1) - 1) / pc_max`.
    pub scale: f64,
    pub bit_depth: u8,
}

impl NormalizationTransform {
    /// Largest representable absolute coordinate, `2^(N-1) - 1`.
    pub fn half_extent(bit_depth: u8) -> f64 {
        ((1u64 << (bit_depth - 1)) - 1) as f64
    }

    /// Scene units -> lattice units.
    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        [
            self.scale * (p[0] - self.center[0]),
            self.scale * (p[1] - self.center[1]),
            self.scale * (p[2] - self.center[2]),
        ]
    }

    /// Lattice units -> scene units.
    pub fn invert(&self, p: [f64; 3]) -> [f64; 3] {
        [
            p[0] / self.scale + self.center[0],
            p[1] / self.scale + self.center[1],
            p[2] / self.scale + self.center[2],
        ]
    }
}

/// Integerized primitive set: lattice positions plus untouched float
/// attribute channels. The codec's canonical intermediate.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactCloud {
    pub bit_depth: u8,
    pub positions: Vec<[i32; 3]>,
    pub color_dc: Vec<[f64; 3]>,
    pub color_sh: Vec<f64>,
    pub opacity: Vec<f64>,
    pub scale: Vec<[f64; 3]>,
    pub rotation: Vec<[f64; 4]>,
}

impl CompactCloud {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn sh_row(&self, i: usize) -> &[f64] {
        &self.color_sh[i * SH_CHANNELS..(i + 1) * SH_CHANNELS]
    }

    pub fn select(&self, indices: &[usize]) -> CompactCloud {
        let mut out = CompactCloud {
            bit_depth: self.bit_depth,
            positions: Vec::with_capacity(indices.len()),
            color_dc: Vec::with_capacity(indices.len()),
            color_sh: Vec::with_capacity(indices.len() * SH_CHANNELS),
            opacity: Vec::with_capacity(indices.len()),
            scale: Vec::with_capacity(indices.len()),
            rotation: Vec::with_capacity(indices.len()),
        };
        for &i in indices {
            out.positions.push(self.positions[i]);
            out.color_dc.push(self.color_dc[i]);
            out.color_sh.extend_from_slice(self.sh_row(i));
            out.opacity.push(self.opacity[i]);
            out.scale.push(self.scale[i]);
            out.rotation.push(self.rotation[i]);
        }
        out
    }
}

/// Ternary digit decomposition of integer coordinates against the fixed
/// basis `e = [2^(N-2), ..., 4, 2, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CodingMatrix {
    pub bit_depth: u8,
    /// `n * 3 * (N-1)` digits in `{-1, 0, 1}`, row-major by primitive then axis.
    pub digits: Vec<i8>,
    pub n: usize,
}

impl CodingMatrix {
    pub fn digits_per_axis(&self) -> usize {
        self.bit_depth as usize - 1
    }

    /// The fixed basis vector `[2^(N-2), ..., 4, 2, 1]`.
    pub fn basis(bit_depth: u8) -> Vec<i64> {
        (0..bit_depth - 1).rev().map(|j| 1i64 << j).collect()
    }
}

/// Removes statistical outliers: points whose mean distance to their
/// `nb_neighbors` nearest neighbors exceeds `mean + std_ratio * std` over
/// the whole cloud. Returns the surviving cloud and the removed indices.
pub fn remove_outliers(
    cloud: &GaussianCloud,
    nb_neighbors: usize,
    std_ratio: f64,
) -> Result<(GaussianCloud, Vec<usize>)> {
    let n = cloud.len();
    if n <= nb_neighbors {
        return Err(Error::InsufficientPoints {
            needed: nb_neighbors,
            got: n,
        });
    }
    let tree = KdTree::build(&cloud.positions);
    let mean_dists: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let d2 = tree.knn_dist2(cloud.positions[i], nb_neighbors, i as u32);
            d2.iter().map(|d| d.sqrt()).sum::<f64>() / nb_neighbors as f64
        })
        .collect();

    let mean = mean_dists.iter().sum::<f64>() / n as f64;
    // sample standard deviation, matching the usual statistical-outlier filter
    let var = mean_dists.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let threshold = mean + std_ratio * var.sqrt();

    let mut kept = Vec::with_capacity(n);
    let mut removed = Vec::new();
    for (i, &d) in mean_dists.iter().enumerate() {
        if d > threshold {
            removed.push(i);
        } else {
            kept.push(i);
        }
    }
    Ok((cloud.select(&kept), removed))
}

/// Centers the cloud on its bounding box and scales it so the largest
/// absolute coordinate lands exactly on `2^(N-1) - 1`. The log-scale channel
/// is shifted by `ln k`, which scales every Gaussian covariance by `k^2`;
/// rotation, opacity and color are untouched.
pub fn normalize(
    cloud: &GaussianCloud,
    bit_depth: u8,
) -> Result<(GaussianCloud, NormalizationTransform)> {
    if !(2..=31).contains(&bit_depth) {
        return Err(Error::Config(format!(
            "position bit depth {bit_depth} outside [2, 31]"
        )));
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &cloud.positions {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let center = [
        (lo[0] + hi[0]) / 2.0,
        (lo[1] + hi[1]) / 2.0,
        (lo[2] + hi[2]) / 2.0,
    ];
    let mut pc_max = 0.0f64;
    for p in &cloud.positions {
        for a in 0..3 {
            pc_max = pc_max.max((p[a] - center[a]).abs());
        }
    }
    if pc_max == 0.0 {
        return Err(Error::DegenerateCloud);
    }
    let k = NormalizationTransform::half_extent(bit_depth) / pc_max;
    let transform = NormalizationTransform {
        center,
        scale: k,
        bit_depth,
    };

    let mut out = cloud.clone();
    for p in &mut out.positions {
        *p = transform.apply(*p);
    }
    let ln_k = k.ln();
    for s in &mut out.scale {
        for v in s.iter_mut() {
            *v += ln_k;
        }
    }
    Ok((out, transform))
}

/// Moves camera centers into the scaled frame: `center' = k * (center - C)`.
/// Rotations are unchanged.
pub fn adjust_cameras(cams: &CameraList, t: &NormalizationTransform) -> CameraList {
    CameraList {
        entries: cams
            .entries
            .iter()
            .map(|e| crate::ply::CameraEntry {
                id: e.id,
                center: t.apply(e.center),
                rotation: e.rotation,
            })
            .collect(),
    }
}

/// Rounds normalized positions to the integer lattice, half away from zero.
pub fn round_positions(cloud: &GaussianCloud, bit_depth: u8) -> Result<CompactCloud> {
    let limit = NormalizationTransform::half_extent(bit_depth) as i64;
    let mut positions = Vec::with_capacity(cloud.len());
    for (i, p) in cloud.positions.iter().enumerate() {
        let mut q = [0i32; 3];
        for a in 0..3 {
            let r = p[a].round();
            if r.abs() as i64 > limit {
                return Err(Error::Range {
                    value: p[a],
                    min: -(limit as f64),
                    max: limit as f64,
                    index: i,
                });
            }
            q[a] = r as i32;
        }
        positions.push(q);
    }
    Ok(CompactCloud {
        bit_depth,
        positions,
        color_dc: cloud.color_dc.clone(),
        color_sh: cloud.color_sh.clone(),
        opacity: cloud.opacity.clone(),
        scale: cloud.scale.clone(),
        rotation: cloud.rotation.clone(),
    })
}

/// Decomposes integer coordinates into sign-times-binary ternary digits so
/// that `<basis, digits> == coordinate` exactly.
pub fn decompose_positions(positions: &[[i32; 3]], bit_depth: u8) -> Result<CodingMatrix> {
    if !(2..=31).contains(&bit_depth) {
        return Err(Error::Config(format!(
            "bit depth {bit_depth} outside [2, 31]"
        )));
    }
    let width = bit_depth as usize - 1;
    let limit = NormalizationTransform::half_extent(bit_depth) as i64;
    let mut digits = Vec::with_capacity(positions.len() * 3 * width);
    for (i, p) in positions.iter().enumerate() {
        for &v in p {
            let v = v as i64;
            if v.abs() > limit {
                return Err(Error::Range {
                    value: v as f64,
                    min: -(limit as f64),
                    max: limit as f64,
                    index: i,
                });
            }
            let sign = if v < 0 { -1i8 } else { 1i8 };
            let mag = v.unsigned_abs();
            for j in (0..width).rev() {
                digits.push(if mag >> j & 1 == 1 { sign } else { 0 });
            }
        }
    }
    Ok(CodingMatrix {
        bit_depth,
        digits,
        n: positions.len(),
    })
}

/// Inner products of every digit row with the fixed basis.
pub fn recompose_positions(m: &CodingMatrix) -> Vec<[i32; 3]> {
    let width = m.digits_per_axis();
    let basis = CodingMatrix::basis(m.bit_depth);
    let mut out = Vec::with_capacity(m.n);
    for i in 0..m.n {
        let mut p = [0i32; 3];
        for (a, slot) in p.iter_mut().enumerate() {
            let row = &m.digits[(i * 3 + a) * width..(i * 3 + a + 1) * width];
            let v: i64 = row.iter().zip(&basis).map(|(&t, &e)| t as i64 * e).sum();
            *slot = v as i32;
        }
        out.push(p);
    }
    out
}

/// Keeps exactly one primitive per occupied voxel: the one with the largest
/// activated volume (equivalently the largest sum of log-scales), ties
/// broken toward the lowest original index. Returns the deduplicated cloud
/// and the kept original indices in their original order.
pub fn deduplicate(cloud: &CompactCloud) -> (CompactCloud, Vec<usize>) {
    let mut best: std::collections::HashMap<[i32; 3], (usize, f64)> =
        std::collections::HashMap::with_capacity(cloud.len());
    for (i, &p) in cloud.positions.iter().enumerate() {
        let volume = cloud.scale[i].iter().sum::<f64>();
        match best.entry(p) {
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert((i, volume));
            }
            std::collections::hash_map::Entry::Occupied(mut e) => {
                if volume > e.get().1 {
                    e.insert((i, volume));
                }
            }
        }
    }
    let mut kept: Vec<usize> = best.values().map(|&(i, _)| i).collect();
    kept.sort_unstable();
    (cloud.select(&kept), kept)
}

/// Default importance proxy: activated opacity times activated volume.
pub fn default_importance(cloud: &CompactCloud) -> Vec<f64> {
    cloud
        .opacity
        .iter()
        .zip(&cloud.scale)
        .map(|(&o, s)| sigmoid(o) * (s[0] + s[1] + s[2]).exp())
        .collect()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-event prune count under the default 0.1% rule.
pub fn default_prune_count(n: usize) -> usize {
    (DEFAULT_PRUNE_FRACTION * n as f64).ceil() as usize
}

/// Removes the `count` primitives with the smallest importance, ties broken
/// by removing the lowest index first. Returns the surviving cloud and the
/// removed indices in ascending order.
pub fn prune<F>(
    cloud: &CompactCloud,
    count: usize,
    importance: F,
) -> Result<(CompactCloud, Vec<usize>)>
where
    F: Fn(&CompactCloud) -> Vec<f64>,
{
    let n = cloud.len();
    if count >= n && count > 0 {
        return Err(Error::PruneAll { count, n });
    }
    if count == 0 {
        return Ok((cloud.clone(), Vec::new()));
    }
    let scores = importance(cloud);
    if scores.len() != n {
        return Err(Error::Shape(format!(
            "importance returned {} scores for {} primitives",
            scores.len(),
            n
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut removed: Vec<usize> = order[..count].to_vec();
    removed.sort_unstable();
    let mut kept: Vec<usize> = order[count..].to_vec();
    kept.sort_unstable();
    Ok((cloud.select(&kept), removed))
}

/// Progressive pruning plan: `F_p = floor((T - T_p) / I_p)` events at epochs
/// `T_p + j * I_p`, each removing `N' = ceil((n_top - n_target) / F_p)`
/// primitives.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PruneSchedule {
    pub total_epochs: u64,
    pub densify_end: u64,
    pub top_quality: u64,
    pub prune_start: u64,
    pub unique_end: u64,
    pub interval: u64,
    pub per_event_count: u64,
    /// Epochs at which pruning events fire; empty when nothing needs pruning.
    pub events: Vec<u64>,
}

/// Plans the progressive prune from `n_top` down to at most `n_target`.
pub fn plan_schedule(
    total_epochs: u64,
    densify_end: u64,
    prune_start: u64,
    unique_end: u64,
    interval: u64,
    n_top: u64,
    n_target: u64,
) -> Result<PruneSchedule> {
    if !(densify_end < prune_start && prune_start < unique_end && unique_end <= total_epochs) {
        return Err(Error::Schedule(format!(
            "epoch marks must satisfy T_d < T_p < T_u <= T, got {densify_end} < {prune_start} < {unique_end} <= {total_epochs}"
        )));
    }
    if interval == 0 {
        return Err(Error::Schedule("pruning interval must be positive".into()));
    }
    if n_target > n_top {
        return Err(Error::Schedule(format!(
            "target {n_target} exceeds starting count {n_top}"
        )));
    }
    if prune_start - densify_end < 2 {
        return Err(Error::Schedule(
            "no room for a top-quality point between T_d and T_p".into(),
        ));
    }
    let top_quality = (densify_end + prune_start) / 2;

    let f_p = (total_epochs - prune_start) / interval;
    let to_remove = n_top - n_target;
    if to_remove > 0 && f_p < 1 {
        return Err(Error::Schedule(format!(
            "no pruning events fit: (T - T_p) / I_p = {f_p}"
        )));
    }
    let per_event_count = if to_remove == 0 {
        0
    } else {
        to_remove.div_ceil(f_p)
    };
    let events = if per_event_count == 0 {
        Vec::new()
    } else {
        (1..=f_p).map(|j| prune_start + j * interval).collect()
    };
    Ok(PruneSchedule {
        total_epochs,
        densify_end,
        top_quality,
        prune_start,
        unique_end,
        interval,
        per_event_count,
        events,
    })
}
