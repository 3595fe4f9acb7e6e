//! End-to-end encode and decode.
//!
//! Encode: optional outlier removal, normalization onto the lattice,
//! rounding, a decompose/recompose self-check, voxel uniqueness, optional
//! rate-planned pruning or bit-depth reduction, Morton ordering, latent
//! fits for color and rotation, per-channel quantization, then octree +
//! RAHT + entropy coding into the container. Decode inverts the coding
//! stages; positions stay on the integer lattice unless denormalization is
//! requested, because the scaled scene renders directly once cameras are
//! adjusted by the recorded transform.

use crate::bitstream::{AllocationReport, Header, HgsBitstream};
use crate::codec::{
    dequantize_coeffs, entropy_decode, entropy_encode, morton, octree_encode, quantize_coeffs,
    raht_forward, raht_inverse, SymbolKind,
};
use crate::error::{Error, Result};
use crate::geometry::{
    decompose_positions, deduplicate, default_importance, normalize, prune, recompose_positions,
    remove_outliers, round_positions, CompactCloud, NormalizationTransform, PruneSchedule,
};
use crate::latent::{decode_latent, fit_latent_decoder, Activation, LatentFitConfig};
use crate::ply::{GaussianCloud, SH_CHANNELS};
use crate::quant::{
    rq_fit_and_quantize, uq_quantize, ChannelParams, QuantizerKind, RqParams, UqParams,
    DEFAULT_EPSILON,
};
use crate::ratecontrol::{plan_method1, plan_method2, RateModel, ScheduleInputs};
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Rate-control strategy when a target size is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum RateMethod {
    /// Method 1: prune primitives down to the budgeted count.
    PrimitiveCount,
    /// Method 2: reduce attribute bit depths uniformly.
    FeatureBitDepth,
}

/// Encoder configuration; defaults follow the reference operating point
/// (BD 16, k_c = 3, k_r = 2, robust quantizer at lambda = 0.01, L = 1.3).
#[derive(Debug, Clone, serde::Serialize)]
pub struct EncodeConfig {
    /// Position bit depth; also the default for every attribute channel.
    pub bd: u8,
    pub bd_color: Option<u8>,
    pub bd_opacity: Option<u8>,
    pub bd_scale: Option<u8>,
    pub bd_rotation: Option<u8>,
    pub k_c: u8,
    pub k_r: u8,
    pub quantizer: QuantizerKind,
    pub lambda: f64,
    pub outlier_removal: bool,
    pub nb_neighbors: usize,
    pub std_ratio: f64,
    pub target_size: Option<u64>,
    pub rate_method: RateMethod,
    pub lossless_ratio: f64,
    pub seed: u64,
    /// Code attribute channels directly instead of through RAHT.
    pub bypass: bool,
    /// Refinement epochs for the latent fits. The PCA warm start already
    /// sits at the linear optimum, so encode speed wins over depth here;
    /// raise for quality-sensitive offline runs.
    pub latent_epochs: usize,
    pub latent_hidden: usize,
    pub latent_step: f64,
    pub schedule: ScheduleInputs,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        EncodeConfig {
            bd: 16,
            bd_color: None,
            bd_opacity: None,
            bd_scale: None,
            bd_rotation: None,
            k_c: 3,
            k_r: 2,
            quantizer: QuantizerKind::Robust,
            lambda: 1e-2,
            outlier_removal: false,
            nb_neighbors: 50,
            std_ratio: 2.0,
            target_size: None,
            rate_method: RateMethod::PrimitiveCount,
            lossless_ratio: 1.3,
            seed: 0,
            bypass: false,
            latent_epochs: 3,
            latent_hidden: 50,
            latent_step: 1e-2,
            schedule: ScheduleInputs::default(),
        }
    }
}

impl EncodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=18).contains(&self.bd) {
            return Err(Error::Config(format!("bd {} outside [2, 18]", self.bd)));
        }
        for (name, bd) in [
            ("bd-color", self.bd_color),
            ("bd-opacity", self.bd_opacity),
            ("bd-scale", self.bd_scale),
            ("bd-rotation", self.bd_rotation),
        ] {
            if let Some(bd) = bd {
                if !(1..=32).contains(&bd) {
                    return Err(Error::Config(format!("{name} {bd} outside [1, 32]")));
                }
            }
        }
        if !(1..=48).contains(&self.k_c) {
            return Err(Error::Config(format!("kc {} outside [1, 48]", self.k_c)));
        }
        if !(1..=4).contains(&self.k_r) {
            return Err(Error::Config(format!("kr {} outside [1, 4]", self.k_r)));
        }
        if self.lambda < 0.0 {
            return Err(Error::Config("lambda must be >= 0".into()));
        }
        if !self.lossless_ratio.is_finite() || self.lossless_ratio <= 0.0 {
            return Err(Error::Config("lossless ratio must be > 0".into()));
        }
        if self.nb_neighbors == 0 {
            return Err(Error::Config("nb-neighbors must be >= 1".into()));
        }
        Ok(())
    }

    fn rate_model(&self) -> RateModel {
        RateModel {
            bd_p: self.bd,
            bd_c: self.bd_color.unwrap_or(self.bd),
            bd_o: self.bd_opacity.unwrap_or(self.bd),
            bd_s: self.bd_scale.unwrap_or(self.bd),
            bd_r: self.bd_rotation.unwrap_or(self.bd),
            k_c: self.k_c,
            k_r: self.k_r,
            lossless_ratio: self.lossless_ratio,
        }
    }

    fn latent_config(&self) -> LatentFitConfig {
        LatentFitConfig {
            hidden: self.latent_hidden,
            activation: Activation::Relu,
            epochs: self.latent_epochs,
            step_size: self.latent_step,
            seed: self.seed,
        }
    }
}

/// What the encoder did, stage by stage.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EncodeSummary {
    pub n_input: u64,
    pub outliers_removed: u64,
    pub duplicates_removed: u64,
    pub pruned: u64,
    pub n_coded: u64,
    pub p_bit: u64,
    /// Explicit compact-cloud size, `n * P_bit / 8` bytes.
    pub pre_codec_bytes: f64,
    /// Predicted coded size under the assumed lossless ratio.
    pub estimated_bytes: f64,
    pub actual_bytes: u64,
    pub target_bytes: Option<u64>,
    pub bd_reduction: u8,
    pub schedule: Option<PruneSchedule>,
    pub transform: NormalizationTransform,
    /// Per-component coded and pre-codec sizes.
    pub components: AllocationReport,
}

fn quantize_channel(
    values: &[f64],
    bit_depth: u8,
    kind: QuantizerKind,
    lambda: f64,
) -> Result<(Vec<i64>, ChannelParams)> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Data {
            context: "non-finite channel value".into(),
            index: 0,
        });
    }
    if hi == lo {
        // constant channel: code zeros with params that reproduce it exactly
        let params = match kind {
            QuantizerKind::Uniform => ChannelParams::Uq(UqParams {
                f_min: lo,
                f_max: lo + 1.0,
                bit_depth,
            }),
            QuantizerKind::Robust => ChannelParams::Rq(RqParams {
                a: 0.0,
                b: lo,
                bit_depth,
                epsilon: DEFAULT_EPSILON,
            }),
        };
        return Ok((vec![0; values.len()], params));
    }
    match kind {
        QuantizerKind::Uniform => {
            let (codes, p) = uq_quantize(values, bit_depth, lo, hi)?;
            Ok((codes, ChannelParams::Uq(p)))
        }
        QuantizerKind::Robust => {
            let (codes, p) = rq_fit_and_quantize(values, bit_depth, lambda, DEFAULT_EPSILON)?;
            Ok((codes, ChannelParams::Rq(p)))
        }
    }
}

fn code_channel(codes: &[i64], voxels: &[[u32; 3]], bd_p: u8, bypass: bool) -> Result<Vec<u8>> {
    if bypass {
        entropy_encode(codes, SymbolKind::Coeff)
    } else {
        let values: Vec<f64> = codes.iter().map(|&c| c as f64).collect();
        let transformed = raht_forward(&values, voxels, bd_p)?;
        let quantized = quantize_coeffs(&transformed.coeffs, 1.0)?;
        entropy_encode(&quantized, SymbolKind::Coeff)
    }
}

fn decode_channel(
    payload: &[u8],
    voxels: &[[u32; 3]],
    bd_p: u8,
    bypass: bool,
    n: usize,
) -> Result<Vec<i64>> {
    let symbols = entropy_decode(payload, SymbolKind::Coeff)?;
    if symbols.len() != n {
        return Err(Error::CorruptStream(format!(
            "channel has {} symbols, expected {n}",
            symbols.len()
        )));
    }
    if bypass {
        Ok(symbols)
    } else {
        let coeffs = dequantize_coeffs(&symbols, 1.0);
        let values = raht_inverse(&coeffs, voxels, bd_p)?;
        Ok(values.iter().map(|&v| v.round() as i64).collect())
    }
}

/// Encodes a parsed cloud into a container plus a stage-by-stage summary.
pub fn encode_cloud(
    cloud: &GaussianCloud,
    config: &EncodeConfig,
) -> Result<(HgsBitstream, EncodeSummary)> {
    config.validate()?;
    cloud.validate()?;
    let n_input = cloud.len() as u64;

    let (cloud, outliers_removed) = if config.outlier_removal {
        let (kept, removed) = remove_outliers(cloud, config.nb_neighbors, config.std_ratio)
            .map_err(|e| e.at_stage("outlier removal"))?;
        (kept, removed.len() as u64)
    } else {
        (cloud.clone(), 0)
    };

    let (normalized, transform) =
        normalize(&cloud, config.bd).map_err(|e| e.at_stage("normalization"))?;
    let compact =
        round_positions(&normalized, config.bd).map_err(|e| e.at_stage("integerization"))?;

    // integer decomposition must reproduce the rounded lattice exactly
    let coding = decompose_positions(&compact.positions, config.bd)
        .map_err(|e| e.at_stage("position decomposition"))?;
    if recompose_positions(&coding) != compact.positions {
        return Err(Error::Consistency(
            "coding-vector decomposition does not reproduce positions".into(),
        ));
    }

    let (mut compact, kept) = deduplicate(&compact);
    let duplicates_removed = cloud.len() as u64 - kept.len() as u64;

    let mut model = config.rate_model();
    let mut schedule = None;
    let mut pruned = 0u64;
    let mut bd_reduction = 0u8;
    if let Some(budget) = config.target_size {
        match config.rate_method {
            RateMethod::PrimitiveCount => {
                let n_top = compact.len() as u64;
                let (n_target, sched) = plan_method1(budget, &model, n_top, &config.schedule)
                    .map_err(|e| e.at_stage("rate control"))?;
                if n_target < n_top {
                    let count = (n_top - n_target) as usize;
                    let (smaller, removed) = prune(&compact, count, default_importance)
                        .map_err(|e| e.at_stage("pruning"))?;
                    compact = smaller;
                    pruned = removed.len() as u64;
                }
                schedule = Some(sched);
            }
            RateMethod::FeatureBitDepth => {
                let plan = plan_method2(budget, &model, compact.len() as u64)
                    .map_err(|e| e.at_stage("rate control"))?;
                bd_reduction = plan.delta;
                model = plan.reduced;
            }
        }
    }

    let n = compact.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "{n} primitives left to code; need at least 2"
        )));
    }
    if n <= config.k_c.max(config.k_r) as usize {
        return Err(Error::InsufficientData(format!(
            "{n} primitives cannot carry {}-wide latents",
            config.k_c.max(config.k_r)
        )));
    }

    // Morton order over shifted coordinates aligns attributes with the
    // geometry substream
    let offset = (1i64 << (config.bd - 1)) - 1;
    let shifted = |p: [i32; 3]| -> [u32; 3] {
        [
            (p[0] as i64 + offset) as u32,
            (p[1] as i64 + offset) as u32,
            (p[2] as i64 + offset) as u32,
        ]
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| {
        let v = shifted(compact.positions[i]);
        morton::encode(v[0], v[1], v[2])
    });
    let compact = compact.select(&order);
    let voxels: Vec<[u32; 3]> = compact.positions.iter().map(|&p| shifted(p)).collect();

    // latent fits: color DC and SH share one model, rotation has its own
    let color_matrix = DMatrix::from_fn(n, 48, |r, c| {
        if c < 3 {
            compact.color_dc[r][c]
        } else {
            compact.color_sh[r * SH_CHANNELS + (c - 3)]
        }
    });
    let rot_matrix = DMatrix::from_fn(n, 4, |r, c| compact.rotation[r][c]);
    let latent_cfg = config.latent_config();
    let (color_fit, rot_fit) = rayon::join(
        || fit_latent_decoder(&color_matrix, config.k_c as usize, &latent_cfg),
        || fit_latent_decoder(&rot_matrix, config.k_r as usize, &latent_cfg),
    );
    let (z_color, color_model) = color_fit.map_err(|e| e.at_stage("color latent fit"))?;
    let (z_rot, rotation_model) = rot_fit.map_err(|e| e.at_stage("rotation latent fit"))?;

    // channel values in substream order
    let mut channel_values: Vec<Vec<f64>> = Vec::new();
    for j in 0..config.k_c as usize {
        channel_values.push(z_color.column(j).iter().cloned().collect());
    }
    channel_values.push(compact.opacity.clone());
    for a in 0..3 {
        channel_values.push(compact.scale.iter().map(|s| s[a]).collect());
    }
    for j in 0..config.k_r as usize {
        channel_values.push(z_rot.column(j).iter().cloned().collect());
    }

    let header = Header {
        n: n as u64,
        bypass: config.bypass,
        bd_p: model.bd_p,
        bd_c: model.bd_c,
        bd_o: model.bd_o,
        bd_s: model.bd_s,
        bd_r: model.bd_r,
        k_c: config.k_c,
        k_r: config.k_r,
        quantizer: config.quantizer,
        transform,
    };

    let quantized: Vec<(Vec<i64>, ChannelParams)> = channel_values
        .par_iter()
        .enumerate()
        .map(|(i, values)| {
            quantize_channel(
                values,
                header.channel_bit_depth(i),
                config.quantizer,
                config.lambda,
            )
        })
        .collect::<Result<_>>()
        .map_err(|e| e.at_stage("channel quantization"))?;

    let channels: Vec<Vec<u8>> = quantized
        .par_iter()
        .map(|(codes, _)| code_channel(codes, &voxels, config.bd, config.bypass))
        .collect::<Result<_>>()
        .map_err(|e| e.at_stage("attribute coding"))?;
    let channel_params: Vec<ChannelParams> = quantized.iter().map(|&(_, p)| p).collect();

    let tree = octree_encode(&voxels, config.bd).map_err(|e| e.at_stage("geometry coding"))?;
    let occupancy_symbols: Vec<i64> = tree.occupancy.iter().map(|&b| b as i64).collect();
    let geometry = entropy_encode(&occupancy_symbols, SymbolKind::Occupancy)
        .map_err(|e| e.at_stage("geometry coding"))?;

    let stream = HgsBitstream {
        header,
        channel_params,
        color_model,
        rotation_model,
        geometry,
        channels,
    };
    let actual_bytes = stream
        .to_bytes()
        .map_err(|e| e.at_stage("serialization"))?
        .len() as u64;
    let components = stream.inspect();

    let summary = EncodeSummary {
        n_input,
        outliers_removed,
        duplicates_removed,
        pruned,
        n_coded: n as u64,
        p_bit: model.bits_per_primitive(),
        pre_codec_bytes: n as f64 * model.bits_per_primitive() as f64 / 8.0,
        estimated_bytes: model.estimate_size(n as u64),
        actual_bytes,
        target_bytes: config.target_size,
        bd_reduction,
        schedule,
        transform,
        components,
    };
    Ok((stream, summary))
}

/// Decoded cloud still on the integer lattice, plus the recorded transform.
#[derive(Debug, Clone)]
pub struct DecodeResult {
    pub cloud: GaussianCloud,
    pub transform: NormalizationTransform,
}

/// Decodes a container back to a cloud. With `denormalize` the inverse
/// transform maps positions back to scene units and removes the `ln k`
/// shift from the log-scales; otherwise positions stay on the lattice.
pub fn decode_stream(stream: &HgsBitstream, denormalize: bool) -> Result<DecodeResult> {
    let h = &stream.header;
    let n = h.n as usize;
    let positions = stream.decode_positions()?;
    let offset = h.position_offset();
    let voxels: Vec<[u32; 3]> = positions
        .iter()
        .map(|p| {
            [
                (p[0] as i64 + offset) as u32,
                (p[1] as i64 + offset) as u32,
                (p[2] as i64 + offset) as u32,
            ]
        })
        .collect();

    let channel_codes: Vec<Vec<i64>> = stream
        .channels
        .par_iter()
        .map(|payload| decode_channel(payload, &voxels, h.bd_p, h.bypass, n))
        .collect::<Result<_>>()?;

    let mut channels: Vec<Vec<f64>> = Vec::with_capacity(channel_codes.len());
    for (i, codes) in channel_codes.iter().enumerate() {
        let values = match &stream.channel_params[i] {
            ChannelParams::Uq(p) => {
                // RAHT rounding can nudge codes one step outside the lattice
                let max = (1i64 << p.bit_depth) - 1;
                let clamped: Vec<i64> = codes.iter().map(|&c| c.clamp(0, max)).collect();
                crate::quant::uq_dequantize(&clamped, p)?
            }
            ChannelParams::Rq(p) => crate::quant::rq_dequantize(codes, p),
        };
        channels.push(values);
    }

    let k_c = h.k_c as usize;
    let k_r = h.k_r as usize;
    let z_color = DMatrix::from_fn(n, k_c, |r, c| channels[c][r]);
    let z_rot = DMatrix::from_fn(n, k_r, |r, c| channels[k_c + 4 + c][r]);
    let color = decode_latent(&z_color, &stream.color_model)?;
    let rotation = decode_latent(&z_rot, &stream.rotation_model)?;

    let mut cloud = GaussianCloud::zeros(n);
    let ln_k = h.transform.scale.ln();
    for i in 0..n {
        let p = positions[i];
        let pos = [p[0] as f64, p[1] as f64, p[2] as f64];
        cloud.positions[i] = if denormalize {
            h.transform.invert(pos)
        } else {
            pos
        };
        cloud.color_dc[i] = [color[(i, 0)], color[(i, 1)], color[(i, 2)]];
        for j in 0..SH_CHANNELS {
            cloud.color_sh[i * SH_CHANNELS + j] = color[(i, j + 3)];
        }
        cloud.opacity[i] = channels[k_c][i];
        for a in 0..3 {
            let s = channels[k_c + 1 + a][i];
            cloud.scale[i][a] = if denormalize { s - ln_k } else { s };
        }
        for a in 0..4 {
            cloud.rotation[i][a] = rotation[(i, a)];
        }
    }
    Ok(DecodeResult {
        cloud,
        transform: h.transform,
    })
}

/// Convenience wrapper: parse container bytes and decode.
pub fn decode_bytes(bytes: &[u8], denormalize: bool) -> Result<DecodeResult> {
    let stream = HgsBitstream::from_bytes(bytes)?;
    decode_stream(&stream, denormalize)
}

/// PCA energy spectra of the color (48-d), scale (3-d), and rotation (4-d)
/// attribute groups; each spectrum sums to 1.
pub fn attribute_spectra(cloud: &GaussianCloud) -> Result<Vec<(&'static str, Vec<f64>)>> {
    cloud.validate()?;
    let n = cloud.len();
    let color = DMatrix::from_fn(n, 48, |r, c| {
        if c < 3 {
            cloud.color_dc[r][c]
        } else {
            cloud.color_sh[r * SH_CHANNELS + (c - 3)]
        }
    });
    let scale = DMatrix::from_fn(n, 3, |r, c| cloud.scale[r][c]);
    let rotation = DMatrix::from_fn(n, 4, |r, c| cloud.rotation[r][c]);
    Ok(vec![
        ("color", crate::latent::energy_spectrum(&color)?),
        ("scale", crate::latent::energy_spectrum(&scale)?),
        ("rotation", crate::latent::energy_spectrum(&rotation)?),
    ])
}

/// The compact cloud the encoder would code for `cloud` under `config`,
/// in coding order. Exposed for round-trip verification.
pub fn reference_compact(cloud: &GaussianCloud, config: &EncodeConfig) -> Result<CompactCloud> {
    config.validate()?;
    let cloud = if config.outlier_removal {
        remove_outliers(cloud, config.nb_neighbors, config.std_ratio)?.0
    } else {
        cloud.clone()
    };
    let (normalized, _) = normalize(&cloud, config.bd)?;
    let compact = round_positions(&normalized, config.bd)?;
    let (mut compact, _) = deduplicate(&compact);
    if let (Some(budget), RateMethod::PrimitiveCount) = (config.target_size, config.rate_method) {
        let n_top = compact.len() as u64;
        let (n_target, _) = plan_method1(budget, &config.rate_model(), n_top, &config.schedule)?;
        if n_target < n_top {
            compact = prune(&compact, (n_top - n_target) as usize, default_importance)?.0;
        }
    }
    let offset = (1i64 << (config.bd - 1)) - 1;
    let mut order: Vec<usize> = (0..compact.len()).collect();
    order.sort_by_key(|&i| {
        let p = compact.positions[i];
        morton::encode(
            (p[0] as i64 + offset) as u32,
            (p[1] as i64 + offset) as u32,
            (p[2] as i64 + offset) as u32,
        )
    });
    Ok(compact.select(&order))
}
