//! 32-bit range coder with byte-wise renormalization and carry propagation.
//!
//! `low` keeps one extra bit above 32 to catch carries. The byte that could
//! still receive a carry is held back in `cache`, followed by `pending` bytes
//! of `0xFF`; all of them are released once a carry can no longer reach them.
//! The leading byte of the classic construction is always zero and is never
//! written.

use crate::error::{Error, Result};

pub const TOP: u32 = 1 << 24;

/// Largest frequency total either side accepts; keeps `range / total >= 2^8`.
pub const MAX_TOTAL: u32 = 1 << 16;

pub struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    pending: u64,
    started: bool,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        Self {
            low: 0,
            range: u32::MAX,
            cache: 0,
            pending: 0,
            started: false,
            out: Vec::new(),
        }
    }

    /// Codes the interval `[start, start + size)` out of `total`.
    #[inline]
    pub fn encode(&mut self, start: u32, size: u32, total: u32) {
        debug_assert!(size > 0 && start + size <= total && total <= MAX_TOTAL);
        let r = self.range / total;
        self.low += r as u64 * start as u64;
        self.range = r * size;
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    fn shift_low(&mut self) {
        let carry = (self.low >> 32) as u8;
        if self.low < 0xFF00_0000 || carry != 0 {
            if self.started {
                self.out.push(self.cache.wrapping_add(carry));
            }
            for _ in 0..self.pending {
                self.out.push(0xFFu8.wrapping_add(carry));
            }
            self.pending = 0;
            self.cache = (self.low >> 24) as u8;
            self.started = true;
        } else {
            self.pending += 1;
        }
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    /// Writes out the four bytes of `low` the decoder primes itself with.
    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

pub struct RangeDecoder<'a> {
    buf: &'a [u8],
    pos: usize,
    range: u32,
    code: u32,
    r: u32,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(buf: &'a [u8]) -> Result<Self> {
        let mut dec = Self {
            buf,
            pos: 0,
            range: u32::MAX,
            code: 0,
            r: 0,
        };
        for _ in 0..4 {
            dec.code = (dec.code << 8) | dec.next_byte()? as u32;
        }
        Ok(dec)
    }

    #[inline]
    fn next_byte(&mut self) -> Result<u8> {
        let b = *self
            .buf
            .get(self.pos)
            .ok_or(Error::Truncated("range-coded payload"))?;
        self.pos += 1;
        Ok(b)
    }

    /// Cumulative frequency the next symbol falls on. Must be followed by
    /// [`consume`](Self::consume) with the same `total`.
    #[inline]
    pub fn target(&mut self, total: u32) -> Result<u32> {
        self.r = self.range / total;
        let v = self.code / self.r;
        if v >= total {
            return Err(Error::invalid("corrupt range-coded payload"));
        }
        Ok(v)
    }

    #[inline]
    pub fn consume(&mut self, start: u32, size: u32) -> Result<()> {
        self.code -= self.r * start;
        self.range = self.r * size;
        while self.range < TOP {
            self.range <<= 8;
            self.code = (self.code << 8) | self.next_byte()? as u32;
        }
        Ok(())
    }

    /// Bytes consumed so far.
    pub fn position(&self) -> usize {
        self.pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn carries_propagate_through_pending_ff_bytes() {
        // Top-of-range symbols push `low` toward 2^32 and force long runs of
        // 0xFF followed by a carry.
        let total = 1 << 16;
        let symbols: Vec<(u32, u32)> = (0..5000)
            .map(|i| match i % 7 {
                0 => (0, 1),
                1..=4 => (total - 1, 1),
                _ => (total / 2, total / 2),
            })
            .collect();
        let mut enc = RangeEncoder::new();
        for &(start, size) in &symbols {
            enc.encode(start, size, total);
        }
        let bytes = enc.finish();
        let mut dec = RangeDecoder::new(&bytes).unwrap();
        for &(start, size) in &symbols {
            let v = dec.target(total).unwrap();
            assert!(v >= start && v < start + size);
            dec.consume(start, size).unwrap();
        }
        assert_eq!(dec.position(), bytes.len());
    }

    #[test]
    fn truncation_is_an_error() {
        let mut enc = RangeEncoder::new();
        for _ in 0..100 {
            enc.encode(3, 1, 1 << 16);
        }
        let bytes = enc.finish();
        let cut = &bytes[..bytes.len() - 1];
        let mut dec = RangeDecoder::new(cut).unwrap();
        let mut failed = false;
        for _ in 0..100 {
            if dec.target(1 << 16).and_then(|_| dec.consume(3, 1)).is_err() {
                failed = true;
                break;
            }
        }
        assert!(failed);
        assert!(RangeDecoder::new(&bytes[..3]).is_err());
    }
}
