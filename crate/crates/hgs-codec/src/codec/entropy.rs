//! Symbol layer on top of the binary range coder.
//!
//! Substream payload layout: `[u32 symbol count][u8 mode][data]`. Mode 0 is
//! range-coded; modes 1/2/4/8 store raw little-endian integers of that
//! width. The encoder always tries the range coder and falls back to the
//! raw mode when modeling would expand the block, so a substream never
//! grows by more than the 5-byte header plus the coder flush.
//!
//! Occupancy symbols are bytes coded MSB-first with one adaptive context
//! per bit position. Coefficient symbols use a zero flag, a sign bit, a
//! unary exponent over per-position adaptive contexts, and raw mantissa
//! bits below the leading one.

use super::rangecoder::{BitModel, RangeDecoder, RangeEncoder};
use crate::error::{Error, Result};

/// Hard ceiling on symbols decoded from one substream, against
/// decompression bombs in hostile headers.
pub const MAX_SYMBOLS: usize = 1 << 27;

/// Alphabet selector for [`entropy_encode`] / [`entropy_decode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    /// Octree occupancy bytes, `0..=255`.
    Occupancy,
    /// Signed transform coefficients or quantized channel codes.
    Coeff,
}

struct CoeffModels {
    zero: BitModel,
    sign: BitModel,
    unary: [BitModel; 64],
}

impl CoeffModels {
    fn new() -> Self {
        CoeffModels {
            zero: BitModel::default(),
            sign: BitModel::default(),
            unary: [BitModel::default(); 64],
        }
    }
}

fn encode_occupancy(symbols: &[i64]) -> Result<Vec<u8>> {
    let mut enc = RangeEncoder::new();
    let mut contexts = [BitModel::default(); 8];
    for (i, &s) in symbols.iter().enumerate() {
        if !(0..=255).contains(&s) {
            return Err(Error::Range {
                value: s as f64,
                min: 0.0,
                max: 255.0,
                index: i,
            });
        }
        for (j, ctx) in contexts.iter_mut().enumerate() {
            let bit = (s >> (7 - j)) & 1 == 1;
            enc.encode_bit(ctx, bit);
        }
    }
    Ok(enc.finish())
}

fn decode_occupancy(dec: &mut RangeDecoder, count: usize) -> Result<Vec<i64>> {
    let mut contexts = [BitModel::default(); 8];
    let mut out = Vec::new();
    for _ in 0..count {
        let mut s = 0i64;
        for (j, ctx) in contexts.iter_mut().enumerate() {
            if dec.decode_bit(ctx)? {
                s |= 1 << (7 - j);
            }
        }
        out.push(s);
    }
    Ok(out)
}

fn encode_coeffs(symbols: &[i64]) -> Vec<u8> {
    let mut enc = RangeEncoder::new();
    let mut m = CoeffModels::new();
    for &s in symbols {
        enc.encode_bit(&mut m.zero, s == 0);
        if s == 0 {
            continue;
        }
        enc.encode_bit(&mut m.sign, s < 0);
        let mag = s.unsigned_abs();
        let exp = 63 - mag.leading_zeros() as usize;
        for pos in 0..exp {
            enc.encode_bit(&mut m.unary[pos], true);
        }
        enc.encode_bit(&mut m.unary[exp], false);
        for j in (0..exp).rev() {
            enc.encode_raw_bit(mag >> j & 1 == 1);
        }
    }
    enc.finish()
}

fn decode_coeffs(dec: &mut RangeDecoder, count: usize) -> Result<Vec<i64>> {
    let mut m = CoeffModels::new();
    let mut out = Vec::new();
    for _ in 0..count {
        if dec.decode_bit(&mut m.zero)? {
            out.push(0);
            continue;
        }
        let negative = dec.decode_bit(&mut m.sign)?;
        let mut exp = 0usize;
        while dec.decode_bit(&mut m.unary[exp])? {
            exp += 1;
            if exp >= 64 {
                return Err(Error::CorruptStream("coefficient exponent overflow".into()));
            }
        }
        let mut mag = 1u64 << exp;
        for j in (0..exp).rev() {
            if dec.decode_raw_bit()? {
                mag |= 1 << j;
            }
        }
        let value = if negative {
            if mag > i64::MIN.unsigned_abs() {
                return Err(Error::CorruptStream(
                    "coefficient magnitude overflow".into(),
                ));
            }
            (mag as i64).wrapping_neg()
        } else {
            if mag > i64::MAX as u64 {
                return Err(Error::CorruptStream(
                    "coefficient magnitude overflow".into(),
                ));
            }
            mag as i64
        };
        out.push(value);
    }
    Ok(out)
}

/// Smallest raw width in {1, 2, 4, 8} that covers every symbol.
fn raw_width(symbols: &[i64], kind: SymbolKind) -> usize {
    if kind == SymbolKind::Occupancy {
        return 1;
    }
    let (lo, hi) = symbols
        .iter()
        .fold((0i64, 0i64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    if lo >= i8::MIN as i64 && hi <= i8::MAX as i64 {
        1
    } else if lo >= i16::MIN as i64 && hi <= i16::MAX as i64 {
        2
    } else if lo >= i32::MIN as i64 && hi <= i32::MAX as i64 {
        4
    } else {
        8
    }
}

fn encode_raw(symbols: &[i64], kind: SymbolKind, width: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(symbols.len() * width);
    for &s in symbols {
        match (kind, width) {
            (SymbolKind::Occupancy, _) => out.push(s as u8),
            (_, 1) => out.push((s as i8) as u8),
            (_, 2) => out.extend_from_slice(&(s as i16).to_le_bytes()),
            (_, 4) => out.extend_from_slice(&(s as i32).to_le_bytes()),
            _ => out.extend_from_slice(&s.to_le_bytes()),
        }
    }
    out
}

fn decode_raw(data: &[u8], kind: SymbolKind, width: usize, count: usize) -> Result<Vec<i64>> {
    let need = count
        .checked_mul(width)
        .ok_or_else(|| Error::CorruptStream("raw block size overflow".into()))?;
    if data.len() != need {
        return Err(Error::CorruptStream(format!(
            "raw block is {} bytes, expected {need}",
            data.len()
        )));
    }
    let mut out = Vec::with_capacity(count);
    for chunk in data.chunks_exact(width) {
        let v = match (kind, width) {
            (SymbolKind::Occupancy, _) => chunk[0] as i64,
            (_, 1) => chunk[0] as i8 as i64,
            (_, 2) => i16::from_le_bytes(chunk.try_into().unwrap()) as i64,
            (_, 4) => i32::from_le_bytes(chunk.try_into().unwrap()) as i64,
            _ => i64::from_le_bytes(chunk.try_into().unwrap()),
        };
        out.push(v);
    }
    Ok(out)
}

/// Losslessly encodes a symbol vector into a self-contained substream.
pub fn entropy_encode(symbols: &[i64], kind: SymbolKind) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(&(symbols.len() as u32).to_le_bytes());
    if symbols.is_empty() {
        out.push(0);
        return Ok(out);
    }
    let coded = match kind {
        SymbolKind::Occupancy => encode_occupancy(symbols)?,
        SymbolKind::Coeff => encode_coeffs(symbols),
    };
    let width = raw_width(symbols, kind);
    if coded.len() < symbols.len() * width {
        out.push(0);
        out.extend_from_slice(&coded);
    } else {
        out.push(width as u8);
        out.extend_from_slice(&encode_raw(symbols, kind, width));
    }
    Ok(out)
}

/// Inverse of [`entropy_encode`].
pub fn entropy_decode(bytes: &[u8], kind: SymbolKind) -> Result<Vec<i64>> {
    if bytes.len() < 5 {
        return Err(Error::CorruptStream("substream shorter than header".into()));
    }
    let count = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
    if count > MAX_SYMBOLS {
        return Err(Error::CorruptStream(format!(
            "symbol count {count} exceeds limit {MAX_SYMBOLS}"
        )));
    }
    let mode = bytes[4];
    let body = &bytes[5..];
    match mode {
        0 => {
            if count == 0 {
                if !body.is_empty() {
                    return Err(Error::CorruptStream(
                        "trailing bytes after empty block".into(),
                    ));
                }
                return Ok(Vec::new());
            }
            let mut dec = RangeDecoder::new(body)?;
            match kind {
                SymbolKind::Occupancy => decode_occupancy(&mut dec, count),
                SymbolKind::Coeff => decode_coeffs(&mut dec, count),
            }
        }
        1 | 2 | 4 | 8 => decode_raw(body, kind, mode as usize, count),
        other => Err(Error::CorruptStream(format!("unknown block mode {other}"))),
    }
}
