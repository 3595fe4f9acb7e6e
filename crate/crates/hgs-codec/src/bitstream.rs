//! The `.hgs` container: header, quantizer metadata, decoder weights,
//! geometry substream, and per-channel attribute substreams, in that order.
//! Every multi-byte integer is little-endian and floats are IEEE-754, so
//! identical inputs produce identical bytes on any platform. FORMAT.md in
//! the repository root documents the byte layout.

use crate::codec::{entropy_decode, octree_decode, OctreeStream, SymbolKind};
use crate::error::{Error, Result};
use crate::geometry::NormalizationTransform;
use crate::latent::{Activation, LatentModel};
use crate::quant::{ChannelParams, QuantizerKind, RqParams, UqParams, DEFAULT_EPSILON};
use crate::ratecontrol::{pre_codec_sizes, ComponentSizes, RateModel, MIB};

pub const MAGIC: &[u8; 4] = b"HGS1";
pub const VERSION: u8 = 1;

const FLAG_BYPASS: u8 = 0x01;
/// Offset of the total-length field inside the fixed header.
const LEN_OFFSET: usize = 54;
const FIXED_HEADER_LEN: usize = 62;

/// Decoder model dimensions are bounded to keep hostile headers from
/// requesting absurd weight allocations.
const MAX_HIDDEN: usize = 4096;

/// Fixed header of a `.hgs` stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub n: u64,
    /// Attribute channels coded directly instead of through RAHT.
    pub bypass: bool,
    pub bd_p: u8,
    pub bd_c: u8,
    pub bd_o: u8,
    pub bd_s: u8,
    pub bd_r: u8,
    pub k_c: u8,
    pub k_r: u8,
    pub quantizer: QuantizerKind,
    pub transform: NormalizationTransform,
}

impl Header {
    /// Number of attribute substreams: color latents, opacity, scale x3,
    /// rotation latents.
    pub fn channel_count(&self) -> usize {
        self.k_c as usize + 1 + 3 + self.k_r as usize
    }

    /// Offset added to signed lattice positions before octree coding.
    pub fn position_offset(&self) -> i64 {
        (1i64 << (self.bd_p - 1)) - 1
    }

    pub fn rate_model(&self, lossless_ratio: f64) -> RateModel {
        RateModel {
            bd_p: self.bd_p,
            bd_c: self.bd_c,
            bd_o: self.bd_o,
            bd_s: self.bd_s,
            bd_r: self.bd_r,
            k_c: self.k_c,
            k_r: self.k_r,
            lossless_ratio,
        }
    }

    /// Bit depth of channel `i` in substream order.
    pub fn channel_bit_depth(&self, i: usize) -> u8 {
        let k_c = self.k_c as usize;
        if i < k_c {
            self.bd_c
        } else if i == k_c {
            self.bd_o
        } else if i < k_c + 4 {
            self.bd_s
        } else {
            self.bd_r
        }
    }
}

/// A parsed (or to-be-serialized) container.
#[derive(Debug, Clone, PartialEq)]
pub struct HgsBitstream {
    pub header: Header,
    /// Per-channel de-quantization params, substream order.
    pub channel_params: Vec<ChannelParams>,
    pub color_model: LatentModel,
    pub rotation_model: LatentModel,
    /// Entropy payload of the octree occupancy bytes.
    pub geometry: Vec<u8>,
    /// Entropy payloads of the attribute channels, substream order.
    pub channels: Vec<Vec<u8>>,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_model(out: &mut Vec<u8>, m: &LatentModel) {
    out.push(match m.activation {
        Activation::Identity => 0,
        Activation::Relu => 1,
    });
    out.extend_from_slice(&(m.k as u16).to_le_bytes());
    out.extend_from_slice(&(m.hidden as u16).to_le_bytes());
    out.extend_from_slice(&(m.d_out as u16).to_le_bytes());
    for block in [&m.w1, &m.b1, &m.w2, &m.b2] {
        for &v in block.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < len {
            return Err(Error::CorruptStream(format!(
                "need {len} bytes at offset {}, have {}",
                self.pos,
                self.data.len() - self.pos
            )));
        }
        let s = &self.data[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn read_model(r: &mut Reader) -> Result<LatentModel> {
    let activation = match r.u8()? {
        0 => Activation::Identity,
        1 => Activation::Relu,
        other => {
            return Err(Error::CorruptStream(format!(
                "unknown activation code {other}"
            )))
        }
    };
    let k = r.u16()? as usize;
    let hidden = r.u16()? as usize;
    let d_out = r.u16()? as usize;
    if k == 0 || d_out == 0 || hidden == 0 || hidden > MAX_HIDDEN || k > 255 || d_out > 255 {
        return Err(Error::CorruptStream(format!(
            "implausible decoder dimensions {k}x{hidden}x{d_out}"
        )));
    }
    let mut read_block = |len: usize| -> Result<Vec<f32>> {
        let mut v = Vec::with_capacity(len);
        for _ in 0..len {
            let x = r.f32()?;
            if !x.is_finite() {
                return Err(Error::CorruptStream("non-finite decoder weight".into()));
            }
            v.push(x);
        }
        Ok(v)
    };
    Ok(LatentModel {
        k,
        hidden,
        d_out,
        activation,
        w1: read_block(k * hidden)?,
        b1: read_block(hidden)?,
        w2: read_block(hidden * d_out)?,
        b2: read_block(d_out)?,
    })
}

impl HgsBitstream {
    /// Validates cross-field consistency before serialization.
    pub fn check_consistency(&self) -> Result<()> {
        let h = &self.header;
        if h.n == 0 {
            return Err(Error::Consistency("primitive count is zero".into()));
        }
        if h.k_c == 0 || h.k_c > 48 {
            return Err(Error::Consistency(format!("k_c {} outside [1, 48]", h.k_c)));
        }
        if h.k_r == 0 || h.k_r > 4 {
            return Err(Error::Consistency(format!("k_r {} outside [1, 4]", h.k_r)));
        }
        if !(2..=18).contains(&h.bd_p) {
            return Err(Error::Consistency(format!(
                "position bit depth {} outside [2, 18]",
                h.bd_p
            )));
        }
        for (name, bd) in [
            ("color", h.bd_c),
            ("opacity", h.bd_o),
            ("scale", h.bd_s),
            ("rotation", h.bd_r),
        ] {
            if bd == 0 || bd > 32 {
                return Err(Error::Consistency(format!(
                    "{name} bit depth {bd} outside [1, 32]"
                )));
            }
        }
        if h.transform.bit_depth != h.bd_p {
            return Err(Error::Consistency(
                "transform bit depth disagrees with header".into(),
            ));
        }
        if !h.transform.scale.is_finite()
            || h.transform.scale <= 0.0
            || !h.transform.center.iter().all(|c| c.is_finite())
        {
            return Err(Error::Consistency("invalid normalization transform".into()));
        }
        if self.channels.len() != h.channel_count() {
            return Err(Error::Consistency(format!(
                "{} channel substreams, header requires {}",
                self.channels.len(),
                h.channel_count()
            )));
        }
        if self.channel_params.len() != h.channel_count() {
            return Err(Error::Consistency(format!(
                "{} channel params, header requires {}",
                self.channel_params.len(),
                h.channel_count()
            )));
        }
        for p in &self.channel_params {
            if p.kind() != h.quantizer {
                return Err(Error::Consistency(
                    "channel params disagree with header quantizer kind".into(),
                ));
            }
        }
        if self.color_model.k != h.k_c as usize || self.color_model.d_out != 48 {
            return Err(Error::Consistency(format!(
                "color decoder is {}->{}, header requires {}->48",
                self.color_model.k, self.color_model.d_out, h.k_c
            )));
        }
        if self.rotation_model.k != h.k_r as usize || self.rotation_model.d_out != 4 {
            return Err(Error::Consistency(format!(
                "rotation decoder is {}->{}, header requires {}->4",
                self.rotation_model.k, self.rotation_model.d_out, h.k_r
            )));
        }
        Ok(())
    }

    /// Serializes the container; deterministic bytes for identical fields.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.check_consistency()?;
        let h = &self.header;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(if h.bypass { FLAG_BYPASS } else { 0 });
        out.extend_from_slice(&h.n.to_le_bytes());
        out.push(h.bd_p);
        out.push(h.bd_c);
        out.push(h.bd_o);
        out.push(h.bd_s);
        out.push(h.bd_r);
        out.push(h.k_c);
        out.push(h.k_r);
        out.push(match h.quantizer {
            QuantizerKind::Uniform => 0,
            QuantizerKind::Robust => 1,
        });
        for c in h.transform.center {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.extend_from_slice(&h.transform.scale.to_le_bytes());
        debug_assert_eq!(out.len(), LEN_OFFSET);
        out.extend_from_slice(&0u64.to_le_bytes()); // patched below
        debug_assert_eq!(out.len(), FIXED_HEADER_LEN);

        for p in &self.channel_params {
            let (a, b) = p.raw();
            out.extend_from_slice(&a.to_le_bytes());
            out.extend_from_slice(&b.to_le_bytes());
        }
        put_model(&mut out, &self.color_model);
        put_model(&mut out, &self.rotation_model);

        put_u32(&mut out, self.geometry.len() as u32);
        out.extend_from_slice(&self.geometry);
        for ch in &self.channels {
            put_u32(&mut out, ch.len() as u32);
            out.extend_from_slice(ch);
        }

        let total = out.len() as u64;
        out[LEN_OFFSET..LEN_OFFSET + 8].copy_from_slice(&total.to_le_bytes());
        Ok(out)
    }

    /// Parses and validates a container; every field is recovered exactly.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader {
            data: bytes,
            pos: 0,
        };
        if r.take(4)? != MAGIC {
            return Err(Error::CorruptStream("bad magic".into()));
        }
        let version = r.u8()?;
        if version != VERSION {
            return Err(Error::CorruptStream(format!(
                "unsupported version {version}"
            )));
        }
        let flags = r.u8()?;
        if flags & !FLAG_BYPASS != 0 {
            return Err(Error::CorruptStream(format!("unknown flags {flags:#x}")));
        }
        let n = r.u64()?;
        let bd_p = r.u8()?;
        let bd_c = r.u8()?;
        let bd_o = r.u8()?;
        let bd_s = r.u8()?;
        let bd_r = r.u8()?;
        let k_c = r.u8()?;
        let k_r = r.u8()?;
        let quantizer = match r.u8()? {
            0 => QuantizerKind::Uniform,
            1 => QuantizerKind::Robust,
            other => {
                return Err(Error::CorruptStream(format!(
                    "unknown quantizer code {other}"
                )))
            }
        };
        let center = [r.f64()?, r.f64()?, r.f64()?];
        let scale = r.f64()?;
        let declared_len = r.u64()?;
        if declared_len != bytes.len() as u64 {
            return Err(Error::CorruptStream(format!(
                "stream is {} bytes, header declares {declared_len}",
                bytes.len()
            )));
        }

        let header = Header {
            n,
            bypass: flags & FLAG_BYPASS != 0,
            bd_p,
            bd_c,
            bd_o,
            bd_s,
            bd_r,
            k_c,
            k_r,
            quantizer,
            transform: NormalizationTransform {
                center,
                scale,
                bit_depth: bd_p,
            },
        };

        let mut channel_params = Vec::with_capacity(header.channel_count());
        for i in 0..header.channel_count() {
            let a = r.f64()?;
            let b = r.f64()?;
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::CorruptStream("non-finite channel params".into()));
            }
            let bit_depth = header.channel_bit_depth(i);
            channel_params.push(match quantizer {
                QuantizerKind::Uniform => ChannelParams::Uq(UqParams {
                    f_min: a,
                    f_max: b,
                    bit_depth,
                }),
                QuantizerKind::Robust => ChannelParams::Rq(RqParams {
                    a,
                    b,
                    bit_depth,
                    epsilon: DEFAULT_EPSILON,
                }),
            });
        }
        let color_model = read_model(&mut r)?;
        let rotation_model = read_model(&mut r)?;

        let geom_len = r.u32()? as usize;
        let geometry = r.take(geom_len)?.to_vec();
        let mut channels = Vec::with_capacity(header.channel_count());
        for _ in 0..header.channel_count() {
            let len = r.u32()? as usize;
            channels.push(r.take(len)?.to_vec());
        }
        if r.pos != bytes.len() {
            return Err(Error::CorruptStream(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }

        let stream = HgsBitstream {
            header,
            channel_params,
            color_model,
            rotation_model,
            geometry,
            channels,
        };
        stream.check_consistency().map_err(|e| match e {
            Error::Consistency(msg) => Error::CorruptStream(msg),
            other => other,
        })?;
        Ok(stream)
    }

    /// Decodes the geometry substream back to signed lattice positions, in
    /// Morton order of their shifted coordinates.
    pub fn decode_positions(&self) -> Result<Vec<[i32; 3]>> {
        let symbols = entropy_decode(&self.geometry, SymbolKind::Occupancy)?;
        let occupancy: Vec<u8> = symbols.iter().map(|&s| s as u8).collect();
        let voxels = octree_decode(&OctreeStream {
            bit_depth: self.header.bd_p,
            occupancy,
            point_count: self.header.n as usize,
        })?;
        let offset = self.header.position_offset();
        Ok(voxels
            .into_iter()
            .map(|v| {
                [
                    (v[0] as i64 - offset) as i32,
                    (v[1] as i64 - offset) as i32,
                    (v[2] as i64 - offset) as i32,
                ]
            })
            .collect())
    }

    /// Rate-allocation accounting over the stream.
    pub fn inspect(&self) -> AllocationReport {
        let h = &self.header;
        let model = h.rate_model(1.0);
        let k_c = h.k_c as usize;
        let sum_range = |lo: usize, hi: usize| -> f64 {
            self.channels[lo..hi].iter().map(|c| c.len() as f64).sum()
        };
        let coded = ComponentSizes {
            position: self.geometry.len() as f64,
            color: sum_range(0, k_c),
            opacity: self.channels[k_c].len() as f64,
            scale: sum_range(k_c + 1, k_c + 4),
            rotation: sum_range(k_c + 4, k_c + 4 + h.k_r as usize),
        };
        let metadata_bytes = (self.channel_params.len() * 16) as u64;
        let color_weights_bytes = (self.color_model.weight_count() * 4 + 7) as u64;
        let rotation_weights_bytes = (self.rotation_model.weight_count() * 4 + 7) as u64;
        let total_bytes = self.to_bytes().map(|b| b.len() as u64).unwrap_or(0);
        AllocationReport {
            n: h.n,
            p_bit: model.bits_per_primitive(),
            pre_codec: pre_codec_sizes(&model, h.n),
            coded,
            metadata_bytes,
            color_weights_bytes,
            rotation_weights_bytes,
            total_bytes,
        }
    }
}

/// Bytes per component, before and after the entropy stage.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AllocationReport {
    pub n: u64,
    pub p_bit: u64,
    /// `n * channels * BD / 8` per component.
    pub pre_codec: ComponentSizes,
    /// Actual substream payload bytes per component.
    pub coded: ComponentSizes,
    pub metadata_bytes: u64,
    pub color_weights_bytes: u64,
    pub rotation_weights_bytes: u64,
    pub total_bytes: u64,
}

impl AllocationReport {
    /// Human-readable table, sizes in MiB as in the usual rate-allocation
    /// reporting (values in parentheses are pre-codec).
    pub fn to_text(&self) -> String {
        let row = |name: &str, coded: f64, pre: f64| {
            format!(
                "  {name:<10} {:>10.2} MiB ({:.2} MiB pre-codec)\n",
                coded / MIB,
                pre / MIB
            )
        };
        let mut s = String::new();
        s.push_str(&format!("primitives  {}\n", self.n));
        s.push_str(&format!("bits/primitive {}\n", self.p_bit));
        s.push_str(&format!(
            "total size  {:.2} MiB ({} B)\n",
            self.total_bytes as f64 / MIB,
            self.total_bytes
        ));
        s.push_str(&row(
            "position",
            self.coded.position,
            self.pre_codec.position,
        ));
        s.push_str(&row("color", self.coded.color, self.pre_codec.color));
        s.push_str(&row("opacity", self.coded.opacity, self.pre_codec.opacity));
        s.push_str(&row("scale", self.coded.scale, self.pre_codec.scale));
        s.push_str(&row(
            "rotation",
            self.coded.rotation,
            self.pre_codec.rotation,
        ));
        s.push_str(&format!("  metadata   {:>10} B\n", self.metadata_bytes));
        s.push_str(&format!(
            "  color decoder weights    {} B\n",
            self.color_weights_bytes
        ));
        s.push_str(&format!(
            "  rotation decoder weights {} B\n",
            self.rotation_weights_bytes
        ));
        s
    }

    /// Machine-readable `key=value` lines.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("n={}\n", self.n));
        s.push_str(&format!("p_bit={}\n", self.p_bit));
        s.push_str(&format!("total_bytes={}\n", self.total_bytes));
        for (name, pre, coded) in [
            ("position", self.pre_codec.position, self.coded.position),
            ("color", self.pre_codec.color, self.coded.color),
            ("opacity", self.pre_codec.opacity, self.coded.opacity),
            ("scale", self.pre_codec.scale, self.coded.scale),
            ("rotation", self.pre_codec.rotation, self.coded.rotation),
        ] {
            s.push_str(&format!("pre_codec.{name}={pre}\n"));
            s.push_str(&format!("coded.{name}={coded}\n"));
        }
        s.push_str(&format!("metadata_bytes={}\n", self.metadata_bytes));
        s.push_str(&format!(
            "color_weights_bytes={}\n",
            self.color_weights_bytes
        ));
        s.push_str(&format!(
            "rotation_weights_bytes={}\n",
            self.rotation_weights_bytes
        ));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{entropy_encode, octree_encode};
    use rand::{Rng, SeedableRng};

    fn tiny_model(k: usize, d_out: usize, seed: u64) -> LatentModel {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let hidden = 5;
        LatentModel {
            k,
            hidden,
            d_out,
            activation: Activation::Relu,
            w1: (0..k * hidden)
                .map(|_| rng.gen_range(-1.0f32..1.0))
                .collect(),
            b1: (0..hidden).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
            w2: (0..hidden * d_out)
                .map(|_| rng.gen_range(-1.0f32..1.0))
                .collect(),
            b2: (0..d_out).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
        }
    }

    fn sample_stream(n: usize, seed: u64) -> HgsBitstream {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let bd_p = 8u8;
        let offset = (1i64 << (bd_p - 1)) - 1;
        let mut set = std::collections::BTreeSet::new();
        while set.len() < n {
            set.insert([
                rng.gen_range(0u32..1 << bd_p),
                rng.gen_range(0u32..1 << bd_p),
                rng.gen_range(0u32..1 << bd_p),
            ]);
        }
        let voxels: Vec<[u32; 3]> = set.into_iter().collect();
        let tree = octree_encode(&voxels, bd_p).unwrap();
        let geometry = entropy_encode(
            &tree.occupancy.iter().map(|&b| b as i64).collect::<Vec<_>>(),
            SymbolKind::Occupancy,
        )
        .unwrap();

        let header = Header {
            n: n as u64,
            bypass: true,
            bd_p,
            bd_c: 16,
            bd_o: 16,
            bd_s: 16,
            bd_r: 16,
            k_c: 2,
            k_r: 2,
            quantizer: QuantizerKind::Uniform,
            transform: NormalizationTransform {
                center: [0.25, -1.5, 3.0],
                scale: 12.625,
                bit_depth: bd_p,
            },
        };
        let channels: Vec<Vec<u8>> = (0..header.channel_count())
            .map(|_| {
                let symbols: Vec<i64> = (0..n).map(|_| rng.gen_range(0..1 << 16)).collect();
                entropy_encode(&symbols, SymbolKind::Coeff).unwrap()
            })
            .collect();
        let channel_params = (0..header.channel_count())
            .map(|i| {
                ChannelParams::Uq(UqParams {
                    f_min: -(i as f64),
                    f_max: i as f64 + 1.0,
                    bit_depth: header.channel_bit_depth(i),
                })
            })
            .collect();
        let _ = offset;
        HgsBitstream {
            header,
            channel_params,
            color_model: tiny_model(2, 48, seed + 1),
            rotation_model: tiny_model(2, 4, seed + 2),
            geometry,
            channels,
        }
    }

    #[test]
    fn minimal_stream_round_trips() {
        let stream = sample_stream(1, 4);
        let bytes = stream.to_bytes().unwrap();
        let back = HgsBitstream::from_bytes(&bytes).unwrap();
        assert_eq!(back, stream);
    }

    #[test]
    fn large_stream_round_trips_field_exact() {
        let stream = sample_stream(10_000, 9);
        let bytes = stream.to_bytes().unwrap();
        let back = HgsBitstream::from_bytes(&bytes).unwrap();
        assert_eq!(back, stream);
        // byte-determinism of reserialization
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn truncation_is_corrupt() {
        let bytes = sample_stream(50, 1).to_bytes().unwrap();
        assert!(matches!(
            HgsBitstream::from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::CorruptStream(_))
        ));
        assert!(matches!(
            HgsBitstream::from_bytes(&bytes[..10]),
            Err(Error::CorruptStream(_))
        ));
        let mut extended = bytes.clone();
        extended.push(0);
        assert!(HgsBitstream::from_bytes(&extended).is_err());
    }

    #[test]
    fn bad_magic_and_version_are_rejected() {
        let mut bytes = sample_stream(5, 2).to_bytes().unwrap();
        bytes[0] = b'X';
        assert!(HgsBitstream::from_bytes(&bytes).is_err());
        let mut bytes = sample_stream(5, 2).to_bytes().unwrap();
        bytes[4] = 99;
        assert!(HgsBitstream::from_bytes(&bytes).is_err());
    }

    #[test]
    fn consistency_errors_name_the_problem() {
        let mut stream = sample_stream(5, 3);
        stream.channels.pop();
        match stream.to_bytes() {
            Err(Error::Consistency(msg)) => assert!(msg.contains("substreams")),
            other => panic!("expected ConsistencyError, got {other:?}"),
        }

        let mut stream = sample_stream(5, 3);
        stream.color_model = tiny_model(3, 48, 0);
        assert!(matches!(stream.to_bytes(), Err(Error::Consistency(_))));
    }

    #[test]
    fn positions_decode_in_morton_order() {
        let stream = sample_stream(500, 7);
        let pos = stream.decode_positions().unwrap();
        assert_eq!(pos.len(), 500);
        let offset = stream.header.position_offset();
        let keys: Vec<u64> = pos
            .iter()
            .map(|p| {
                crate::codec::morton::encode(
                    (p[0] as i64 + offset) as u32,
                    (p[1] as i64 + offset) as u32,
                    (p[2] as i64 + offset) as u32,
                )
            })
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn inspect_reports_reference_accounting() {
        let stream = sample_stream(100, 11);
        let report = stream.inspect();
        assert_eq!(report.p_bit, 3 * (8 + 16) + 2 * 16 + 16 + 2 * 16);
        assert_eq!(report.pre_codec.opacity, 100.0 * 16.0 / 8.0);
        assert!(report.total_bytes > 0);
        assert!(report.to_text().contains("primitives  100"));
        assert!(report.to_kv().contains("n=100"));
    }
}
