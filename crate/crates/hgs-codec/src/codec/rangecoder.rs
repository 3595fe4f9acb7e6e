//! Adaptive binary range coder.
//!
//! 32-bit range with byte-wise renormalization and carry propagation
//! through a cache byte. Probabilities are 12-bit counters updated with a
//! shift-4 rule, so every operation is integer arithmetic and the streams
//! are identical on any platform.

use crate::error::{Error, Result};

const PROB_BITS: u32 = 12;
const PROB_ONE: u16 = 1 << PROB_BITS;
const PROB_INIT: u16 = PROB_ONE / 2;
const ADAPT_SHIFT: u32 = 4;
const TOP: u32 = 1 << 24;

/// Adaptive probability of the next bit being zero.
#[derive(Debug, Clone, Copy)]
pub struct BitModel(u16);

impl Default for BitModel {
    fn default() -> Self {
        BitModel(PROB_INIT)
    }
}

impl BitModel {
    fn update(&mut self, bit: bool) {
        if bit {
            self.0 -= self.0 >> ADAPT_SHIFT;
        } else {
            self.0 += (PROB_ONE - self.0) >> ADAPT_SHIFT;
        }
    }
}

pub struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    cache_size: u64,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        RangeEncoder {
            low: 0,
            range: u32::MAX,
            cache: 0,
            cache_size: 1,
            out: Vec::new(),
        }
    }

    pub fn encode_bit(&mut self, model: &mut BitModel, bit: bool) {
        let bound = (self.range >> PROB_BITS) * model.0 as u32;
        if bit {
            self.low += bound as u64;
            self.range -= bound;
        } else {
            self.range = bound;
        }
        model.update(bit);
        while self.range < TOP {
            self.shift_low();
            self.range <<= 8;
        }
    }

    /// Encodes a bit at fixed probability 1/2 without adaptation.
    pub fn encode_raw_bit(&mut self, bit: bool) {
        let bound = self.range >> 1;
        if bit {
            self.low += bound as u64;
            self.range -= bound;
        } else {
            self.range = bound;
        }
        while self.range < TOP {
            self.shift_low();
            self.range <<= 8;
        }
    }

    fn shift_low(&mut self) {
        if self.low < 0xFF00_0000 || self.low > 0xFFFF_FFFF {
            let carry = (self.low >> 32) as u8;
            while self.cache_size > 0 {
                self.out.push(self.cache.wrapping_add(carry));
                self.cache = 0xFF;
                self.cache_size -= 1;
            }
            self.cache = (self.low >> 24) as u8;
        }
        self.cache_size += 1;
        self.low = (self.low << 8) & 0xFFFF_FFFF;
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

pub struct RangeDecoder<'a> {
    data: &'a [u8],
    pos: usize,
    code: u32,
    range: u32,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(data: &'a [u8]) -> Result<Self> {
        let mut dec = RangeDecoder {
            data,
            pos: 0,
            code: 0,
            range: u32::MAX,
        };
        // the first byte is always the zero cache; skip and prime 4 bytes
        if dec.next_byte()? != 0 {
            return Err(Error::CorruptStream("bad range coder prefix".into()));
        }
        for _ in 0..4 {
            dec.code = (dec.code << 8) | dec.next_byte()? as u32;
        }
        Ok(dec)
    }

    fn next_byte(&mut self) -> Result<u8> {
        let b = *self
            .data
            .get(self.pos)
            .ok_or_else(|| Error::CorruptStream("range coder input exhausted".into()))?;
        self.pos += 1;
        Ok(b)
    }

    pub fn decode_bit(&mut self, model: &mut BitModel) -> Result<bool> {
        let bound = (self.range >> PROB_BITS) * model.0 as u32;
        let bit = self.code >= bound;
        if bit {
            self.code -= bound;
            self.range -= bound;
        } else {
            self.range = bound;
        }
        model.update(bit);
        while self.range < TOP {
            self.code = (self.code << 8) | self.next_byte()? as u32;
            self.range <<= 8;
        }
        Ok(bit)
    }

    pub fn decode_raw_bit(&mut self) -> Result<bool> {
        let bound = self.range >> 1;
        let bit = self.code >= bound;
        if bit {
            self.code -= bound;
            self.range -= bound;
        } else {
            self.range = bound;
        }
        while self.range < TOP {
            self.code = (self.code << 8) | self.next_byte()? as u32;
            self.range <<= 8;
        }
        Ok(bit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn round_trip_random_bits() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let bits: Vec<bool> = (0..50_000).map(|_| rng.gen_bool(0.5)).collect();
        let mut enc = RangeEncoder::new();
        let mut model = BitModel::default();
        for &b in &bits {
            enc.encode_bit(&mut model, b);
        }
        let bytes = enc.finish();
        let mut dec = RangeDecoder::new(&bytes).unwrap();
        let mut model = BitModel::default();
        for &b in &bits {
            assert_eq!(dec.decode_bit(&mut model).unwrap(), b);
        }
    }

    #[test]
    fn skewed_bits_compress_hard() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let bits: Vec<bool> = (0..80_000).map(|_| rng.gen_bool(0.01)).collect();
        let mut enc = RangeEncoder::new();
        let mut model = BitModel::default();
        for &b in &bits {
            enc.encode_bit(&mut model, b);
        }
        let bytes = enc.finish();
        // 80k bits at ~0.08 bit each; generous ceiling
        assert!(bytes.len() < 2_000, "compressed to {} bytes", bytes.len());
        let mut dec = RangeDecoder::new(&bytes).unwrap();
        let mut model = BitModel::default();
        for &b in &bits {
            assert_eq!(dec.decode_bit(&mut model).unwrap(), b);
        }
    }

    #[test]
    fn raw_bits_round_trip_with_mixed_contexts() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let bits: Vec<(bool, bool)> = (0..10_000)
            .map(|_| (rng.gen_bool(0.5), rng.gen_bool(0.2)))
            .collect();
        let mut enc = RangeEncoder::new();
        let mut model = BitModel::default();
        for &(raw, ctx) in &bits {
            enc.encode_raw_bit(raw);
            enc.encode_bit(&mut model, ctx);
        }
        let bytes = enc.finish();
        let mut dec = RangeDecoder::new(&bytes).unwrap();
        let mut model = BitModel::default();
        for &(raw, ctx) in &bits {
            assert_eq!(dec.decode_raw_bit().unwrap(), raw);
            assert_eq!(dec.decode_bit(&mut model).unwrap(), ctx);
        }
    }

    #[test]
    fn truncated_stream_is_detected() {
        let mut enc = RangeEncoder::new();
        let mut model = BitModel::default();
        for i in 0..1000 {
            enc.encode_bit(&mut model, i % 3 == 0);
        }
        let bytes = enc.finish();
        assert!(RangeDecoder::new(&bytes[..4]).is_err());

        let mut dec = RangeDecoder::new(&bytes[..8]).unwrap();
        let mut model = BitModel::default();
        let mut err = false;
        for _ in 0..1000 {
            if dec.decode_bit(&mut model).is_err() {
                err = true;
                break;
            }
        }
        assert!(err, "decoding a truncated stream must fail");
    }
}
