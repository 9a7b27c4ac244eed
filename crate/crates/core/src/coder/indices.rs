//! Side-information coder for the prior index map.
//!
//! Layout: `[mode: u8][n_cdf: u16 LE][body]`. Mode 1 is adaptive order-0
//! range coding; mode 0 packs each index in `ceil(log2 n_cdf)` bits, MSB
//! first. The encoder keeps whichever is smaller, so the output never
//! exceeds the raw packing by more than the 3-byte header.

use super::range::{RangeDecoder, RangeEncoder, MAX_TOTAL};
use crate::bytes::ByteReader;
use crate::competition::PriorIndexMap;
use crate::error::{Error, Result};

const MODE_RAW: u8 = 0;
const MODE_ADAPTIVE: u8 = 1;

const INCREMENT: u32 = 32;
/// Linear cumulative-frequency search stays cheap up to this alphabet.
const MAX_ADAPTIVE_ALPHABET: usize = 1024;

struct AdaptiveModel {
    freq: Vec<u32>,
    total: u32,
}

impl AdaptiveModel {
    fn new(n: usize) -> Self {
        Self {
            freq: vec![1; n],
            total: n as u32,
        }
    }

    fn interval(&self, symbol: usize) -> (u32, u32) {
        let start = self.freq[..symbol].iter().sum();
        (start, self.freq[symbol])
    }

    fn find(&self, target: u32) -> (usize, u32, u32) {
        let mut start = 0;
        for (s, &f) in self.freq.iter().enumerate() {
            if target < start + f {
                return (s, start, f);
            }
            start += f;
        }
        unreachable!("target below total")
    }

    fn update(&mut self, symbol: usize) {
        self.freq[symbol] += INCREMENT;
        self.total += INCREMENT;
        if self.total > MAX_TOTAL {
            self.total = 0;
            for f in &mut self.freq {
                *f = (*f + 1) / 2;
                self.total += *f;
            }
        }
    }
}

fn bits_per_index(n_cdf: usize) -> u32 {
    usize::BITS - (n_cdf - 1).leading_zeros()
}

fn encode_raw(idx: &[u16], bits: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity((idx.len() * bits as usize).div_ceil(8));
    let (mut acc, mut filled) = (0u32, 0u32);
    for &i in idx {
        acc = (acc << bits) | i as u32;
        filled += bits;
        while filled >= 8 {
            filled -= 8;
            out.push((acc >> filled) as u8);
        }
        acc &= (1 << filled) - 1;
    }
    if filled > 0 {
        out.push((acc << (8 - filled)) as u8);
    }
    out
}

fn encode_adaptive(idx: &[u16], n_cdf: usize) -> Vec<u8> {
    let mut model = AdaptiveModel::new(n_cdf);
    let mut enc = RangeEncoder::new();
    for &i in idx {
        let (start, size) = model.interval(i as usize);
        enc.encode(start, size, model.total);
        model.update(i as usize);
    }
    enc.finish()
}

/// Compresses `map`, whose entries must all be below `n_cdf`.
pub fn encode_indices(map: &PriorIndexMap, n_cdf: usize) -> Result<Vec<u8>> {
    if n_cdf == 0 || n_cdf > u16::MAX as usize {
        return Err(Error::usage(format!("n_cdf {n_cdf} out of range")));
    }
    if map.as_slice().iter().any(|&i| i as usize >= n_cdf) {
        return Err(Error::usage("prior index exceeds n_cdf"));
    }
    let idx = map.as_slice();
    let raw = encode_raw(idx, bits_per_index(n_cdf));
    let (mode, body) = if n_cdf > 1 && n_cdf <= MAX_ADAPTIVE_ALPHABET && !idx.is_empty() {
        let adaptive = encode_adaptive(idx, n_cdf);
        if adaptive.len() < raw.len() {
            (MODE_ADAPTIVE, adaptive)
        } else {
            (MODE_RAW, raw)
        }
    } else {
        (MODE_RAW, raw)
    };
    let mut out = Vec::with_capacity(body.len() + 3);
    out.push(mode);
    out.extend_from_slice(&(n_cdf as u16).to_le_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

pub fn decode_indices(bytes: &[u8], h_l: usize, w_l: usize, n_cdf: usize) -> Result<PriorIndexMap> {
    let mut r = ByteReader::new(bytes);
    let mode = r.u8("index mode")?;
    let stored = r.u16("index n_cdf")? as usize;
    if stored != n_cdf {
        return Err(Error::invalid(format!(
            "index map was coded for {stored} priors, expected {n_cdf}"
        )));
    }
    let body = &bytes[r.position()..];
    let count = h_l * w_l;
    let idx = match mode {
        MODE_RAW => decode_raw(body, count, bits_per_index(n_cdf))?,
        MODE_ADAPTIVE if n_cdf > 1 && n_cdf <= MAX_ADAPTIVE_ALPHABET => {
            decode_adaptive(body, count, n_cdf)?
        }
        _ => return Err(Error::invalid(format!("unknown index coding mode {mode}"))),
    };
    PriorIndexMap::new(h_l, w_l, idx, n_cdf).map_err(|e| Error::invalid(e.to_string()))
}

fn decode_raw(body: &[u8], count: usize, bits: u32) -> Result<Vec<u16>> {
    let needed = (count * bits as usize).div_ceil(8);
    if body.len() < needed {
        return Err(Error::Truncated("index map"));
    }
    let mut out = Vec::with_capacity(count);
    let (mut acc, mut filled, mut bytes) = (0u32, 0u32, body.iter());
    for _ in 0..count {
        while filled < bits {
            acc = (acc << 8) | *bytes.next().expect("length checked") as u32;
            filled += 8;
        }
        filled -= bits;
        out.push((acc >> filled) as u16);
        acc &= (1 << filled) - 1;
    }
    Ok(out)
}

fn decode_adaptive(body: &[u8], count: usize, n_cdf: usize) -> Result<Vec<u16>> {
    let mut model = AdaptiveModel::new(n_cdf);
    let mut dec = RangeDecoder::new(body)?;
    let mut out = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let target = dec.target(model.total)?;
        let (s, start, size) = model.find(target);
        dec.consume(start, size)?;
        model.update(s);
        out.push(s as u16);
    }
    Ok(out)
}
