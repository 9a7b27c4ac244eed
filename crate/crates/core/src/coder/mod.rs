//! Entropy stage: static-table range coding of latents plus the prior index
//! side information.
//!
//! Symbols are coded location by location in raster order, all channels of
//! a location back to back. Symbol `(c, k, l)` uses row `c` of the prior the
//! index map assigns to `(k, l)`.

pub mod indices;
pub mod range;

pub use indices::{decode_indices, encode_indices};

use crate::bytes::{put_section, ByteReader};
use crate::competition::PriorIndexMap;
use crate::error::{Error, Result};
use crate::latent::{LatentShape, QuantizedLatent};
use crate::probability_model::{CdfTableSet, SymbolAlphabet, CDF_ONE, CDF_PRECISION};
use range::{RangeDecoder, RangeEncoder};

/// Memory lookups performed by the coding path, counted as they happen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LookupCounter {
    /// Bitcost table reads during prior selection.
    pub index_lookups: u64,
    /// Whole-prior CDF block fetches, one per coded location.
    pub cdf_gathers: u64,
}

/// Fails on the first symbol (raster, channel-innermost) outside `alphabet`.
pub fn check_alphabet(latent: &QuantizedLatent, alphabet: SymbolAlphabet) -> Result<()> {
    let c_l = latent.c_l().max(1);
    let w_l = latent.w_l().max(1);
    match latent.symbols().iter().position(|&s| !alphabet.contains(s)) {
        None => Ok(()),
        Some(i) => Err(Error::SymbolOutOfAlphabet {
            symbol: latent.symbols()[i],
            c: i % c_l,
            k: i / c_l / w_l,
            l: i / c_l % w_l,
            y_min: alphabet.y_min(),
            y_max: alphabet.y_max(),
        }),
    }
}

fn check_shapes(shape: LatentShape, idx: &PriorIndexMap, tables: &CdfTableSet) -> Result<()> {
    if idx.h_l() != shape.h_l || idx.w_l() != shape.w_l {
        return Err(Error::usage(format!(
            "index map is {}x{}, latent grid is {}x{}",
            idx.h_l(),
            idx.w_l(),
            shape.h_l,
            shape.w_l
        )));
    }
    if shape.c_l != tables.c_l() && !shape.is_empty() {
        return Err(Error::usage(format!(
            "latent has {} channels, tables have {}",
            shape.c_l,
            tables.c_l()
        )));
    }
    if let Some(&bad) = idx.as_slice().iter().find(|&&i| i as usize >= tables.n_cdf()) {
        return Err(Error::usage(format!(
            "prior index {bad} >= n_cdf {}",
            tables.n_cdf()
        )));
    }
    Ok(())
}

/// Per-symbol bitcosts of every table row, laid out `[prior][channel][symbol]`.
pub struct CostTable {
    n_cdf: usize,
    c_l: usize,
    alphabet: SymbolAlphabet,
    costs: Vec<f32>,
}

impl CostTable {
    pub fn new(tables: &CdfTableSet) -> Self {
        let costs = tables
            .entries()
            .chunks_exact(tables.row_len())
            .flat_map(|row| {
                row.windows(2)
                    .map(|w| (CDF_PRECISION as f64 - ((w[1] - w[0]) as f64).log2()) as f32)
            })
            .collect();
        Self {
            n_cdf: tables.n_cdf(),
            c_l: tables.c_l(),
            alphabet: tables.alphabet(),
            costs,
        }
    }

    pub fn n_cdf(&self) -> usize {
        self.n_cdf
    }
}

/// Encoder-side competition over frozen tables: every location takes the
/// prior with the lowest summed table bitcost, ties going to the lower index.
pub fn select_priors(
    latent: &QuantizedLatent,
    costs: &CostTable,
    counter: &mut LookupCounter,
) -> Result<PriorIndexMap> {
    if latent.c_l() != costs.c_l && !latent.shape().is_empty() {
        return Err(Error::usage("latent channels do not match the tables"));
    }
    check_alphabet(latent, costs.alphabet)?;
    let l_len = costs.alphabet.len();
    let prior_stride = costs.c_l * l_len;
    let mut idx = Vec::with_capacity(latent.shape().locations());
    let mut lookups = 0u64;
    for location in latent.locations() {
        let local: Vec<usize> = location
            .iter()
            .enumerate()
            .map(|(c, &s)| c * l_len + costs.alphabet.index(s))
            .collect();
        let mut best = (f32::INFINITY, 0u16);
        for p in 0..costs.n_cdf {
            let block = &costs.costs[p * prior_stride..(p + 1) * prior_stride];
            let mut total = 0f32;
            for &o in &local {
                total += block[o];
                lookups += 1;
            }
            if total < best.0 {
                best = (total, p as u16);
            }
        }
        idx.push(best.1);
    }
    counter.index_lookups += lookups;
    let shape = latent.shape();
    PriorIndexMap::new(shape.h_l, shape.w_l, idx, costs.n_cdf)
}

/// Fetches the CDF block of each location's prior, raster order.
pub fn gather_cdfs<'t>(
    idx: &PriorIndexMap,
    tables: &'t CdfTableSet,
    counter: &mut LookupCounter,
) -> Vec<&'t [u32]> {
    let blocks: Vec<&[u32]> = idx
        .as_slice()
        .iter()
        .map(|&p| tables.prior_block(p as usize))
        .collect();
    counter.cdf_gathers += blocks.len() as u64;
    blocks
}

/// Range codes `latent` with pre-gathered prior blocks.
pub fn encode_gathered(
    latent: &QuantizedLatent,
    blocks: &[&[u32]],
    tables: &CdfTableSet,
) -> Result<Vec<u8>> {
    if latent.shape().is_empty() {
        return Ok(Vec::new());
    }
    if blocks.len() != latent.shape().locations() {
        return Err(Error::usage("one CDF block per location is required"));
    }
    check_alphabet(latent, tables.alphabet())?;
    let alphabet = tables.alphabet();
    let row_len = tables.row_len();
    let mut enc = RangeEncoder::new();
    for (location, block) in latent.locations().zip(blocks) {
        for (row, &symbol) in block.chunks_exact(row_len).zip(location) {
            let s = alphabet.index(symbol);
            enc.encode(row[s], row[s + 1] - row[s], CDF_ONE);
        }
    }
    Ok(enc.finish())
}

pub fn encode_latent(
    latent: &QuantizedLatent,
    idx: &PriorIndexMap,
    tables: &CdfTableSet,
) -> Result<Vec<u8>> {
    encode_latent_counted(latent, idx, tables, &mut LookupCounter::default())
}

pub fn encode_latent_counted(
    latent: &QuantizedLatent,
    idx: &PriorIndexMap,
    tables: &CdfTableSet,
    counter: &mut LookupCounter,
) -> Result<Vec<u8>> {
    check_shapes(latent.shape(), idx, tables)?;
    check_alphabet(latent, tables.alphabet())?;
    let blocks = gather_cdfs(idx, tables, counter);
    encode_gathered(latent, &blocks, tables)
}

/// Inverse of [`encode_gathered`]. Bytes after the coded data are ignored.
pub fn decode_gathered(
    bytes: &[u8],
    blocks: &[&[u32]],
    tables: &CdfTableSet,
    shape: LatentShape,
) -> Result<QuantizedLatent> {
    if shape.is_empty() {
        return Ok(QuantizedLatent::zeros(shape));
    }
    if blocks.len() != shape.locations() {
        return Err(Error::usage("one CDF block per location is required"));
    }
    let y_min = tables.alphabet().y_min();
    let row_len = tables.row_len();
    let mut dec = RangeDecoder::new(bytes)?;
    let mut symbols = Vec::with_capacity(shape.len());
    for block in blocks {
        for row in block.chunks_exact(row_len) {
            let t = dec.target(CDF_ONE)?;
            let s = row.partition_point(|&v| v <= t) - 1;
            dec.consume(row[s], row[s + 1] - row[s])?;
            symbols.push(y_min + s as i32);
        }
    }
    QuantizedLatent::new(shape, symbols)
}

pub fn decode_latent(
    bytes: &[u8],
    idx: &PriorIndexMap,
    tables: &CdfTableSet,
    shape: LatentShape,
) -> Result<QuantizedLatent> {
    decode_latent_counted(bytes, idx, tables, shape, &mut LookupCounter::default())
}

pub fn decode_latent_counted(
    bytes: &[u8],
    idx: &PriorIndexMap,
    tables: &CdfTableSet,
    shape: LatentShape,
    counter: &mut LookupCounter,
) -> Result<QuantizedLatent> {
    check_shapes(shape, idx, tables)?;
    let blocks = gather_cdfs(idx, tables, counter);
    decode_gathered(bytes, &blocks, tables, shape)
}

/// Sum of `-log2` fixed-point masses: the ideal payload size in bits.
pub fn table_bitcost(
    latent: &QuantizedLatent,
    idx: &PriorIndexMap,
    tables: &CdfTableSet,
) -> Result<f64> {
    check_shapes(latent.shape(), idx, tables)?;
    check_alphabet(latent, tables.alphabet())?;
    let mut total = 0.0;
    for (i, location) in latent.locations().enumerate() {
        let p = idx.as_slice()[i] as usize;
        for (c, &s) in location.iter().enumerate() {
            total += tables.symbol_bitcost(p, c, s);
        }
    }
    Ok(total)
}

/// `[u32 len][indices][u32 len][payload]`, lengths little-endian.
pub fn pack_sections(index_bytes: &[u8], payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(index_bytes.len() + payload.len() + 8);
    put_section(&mut out, index_bytes);
    put_section(&mut out, payload);
    out
}

pub fn unpack_sections(bytes: &[u8]) -> Result<(&[u8], &[u8])> {
    let mut r = ByteReader::new(bytes);
    let index_bytes = r.section("index section")?;
    let payload = r.section("payload section")?;
    Ok((index_bytes, payload))
}
