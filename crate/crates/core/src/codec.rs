//! Image encode/decode pipeline over a frozen table set.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::coder::{
    decode_gathered, decode_indices, encode_gathered, encode_indices, gather_cdfs, select_priors,
    CostTable, LookupCounter,
};
use crate::competition::PriorIndexMap;
use crate::container::{read_stream, write_stream, StreamHeader, FLAG_CLAMPED};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::latent::QuantizedLatent;
use crate::probability_model::{CdfTableSet, MonotoneCdfParams, MODEL_MAGIC, TABLE_MAGIC};
use crate::transform::{
    analyze, latent_shape, quantize, synthesize, TransformConfig, TRANSFORM_CHANNELS,
};

/// Wall-clock time per pipeline stage of one encode or decode.
///
/// On the decode side `prior_select` is the time spent reading the index
/// map back from the side information.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimes {
    pub transform: Duration,
    pub prior_select: Duration,
    pub cdf_gather: Duration,
    pub entropy_code: Duration,
    /// Measured around the whole call, independently of the stages.
    pub total: Duration,
}

impl StageTimes {
    pub fn stage_sum(&self) -> Duration {
        self.transform + self.prior_select + self.cdf_gather + self.entropy_code
    }

    pub fn accumulate(&mut self, other: &StageTimes) {
        self.transform += other.transform;
        self.prior_select += other.prior_select;
        self.cdf_gather += other.cdf_gather;
        self.entropy_code += other.entropy_code;
        self.total += other.total;
    }

    pub fn divided(&self, n: u32) -> StageTimes {
        StageTimes {
            transform: self.transform / n,
            prior_select: self.prior_select / n,
            cdf_gather: self.cdf_gather / n,
            entropy_code: self.entropy_code / n,
            total: self.total / n,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Encoded {
    pub stream: Vec<u8>,
    pub header: StreamHeader,
    /// Symbols actually coded, after clamping.
    pub latent: QuantizedLatent,
    pub idx: PriorIndexMap,
    pub index_bytes: usize,
    pub payload_bytes: usize,
    /// Symbols that fell outside the alphabet and were clamped onto it.
    pub clamped_symbols: usize,
    pub timings: StageTimes,
    pub lookups: LookupCounter,
}

impl Encoded {
    /// The image a decoder will produce from this stream.
    pub fn reconstruction(&self) -> Result<Image> {
        reconstruct(&self.header, &self.latent)
    }
}

#[derive(Debug, Clone)]
pub struct Decoded {
    pub image: Image,
    pub header: StreamHeader,
    pub latent: QuantizedLatent,
    pub idx: PriorIndexMap,
    pub timings: StageTimes,
    pub lookups: LookupCounter,
}

fn header_config(header: &StreamHeader) -> Result<TransformConfig> {
    TransformConfig::new(header.delta as f64, header.planes)
}

fn reconstruct(header: &StreamHeader, latent: &QuantizedLatent) -> Result<Image> {
    synthesize(
        latent,
        &header_config(header)?,
        header.width as usize,
        header.height as usize,
    )
}

/// Frozen tables plus the bitcost lookup table derived from them.
pub struct Codec {
    tables: CdfTableSet,
    costs: CostTable,
    hash: [u8; 32],
}

impl Codec {
    pub fn new(tables: CdfTableSet) -> Self {
        let costs = CostTable::new(&tables);
        let hash = tables.content_hash();
        Self {
            tables,
            costs,
            hash,
        }
    }

    /// Content hash of the table file, as stored in stream headers.
    pub fn model_hash(&self) -> [u8; 32] {
        self.hash
    }

    /// Loads a table file, or freezes a CPM parameter file on the fly.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::new(load_tables(path)?))
    }

    pub fn tables(&self) -> &CdfTableSet {
        &self.tables
    }

    pub fn encode(&self, image: &Image, cfg: &TransformConfig) -> Result<Encoded> {
        let t_start = Instant::now();
        let mut timings = StageTimes::default();
        let mut lookups = LookupCounter::default();
        let mut header = StreamHeader::new(
            &self.tables,
            self.hash,
            image.width(),
            image.height(),
            cfg.delta,
            cfg.planes,
        )?;
        // The decoder only sees the f32 step, so quantize with exactly that.
        let cfg = header_config(&header)?;
        if self.tables.c_l() != TRANSFORM_CHANNELS {
            return Err(Error::usage(format!(
                "tables have {} channels, the image transform produces {TRANSFORM_CHANNELS}",
                self.tables.c_l()
            )));
        }

        let t = Instant::now();
        let mut latent = if image.is_empty() {
            QuantizedLatent::zeros(latent_shape(image.width(), image.height(), cfg.planes))
        } else {
            quantize(&analyze(image, &cfg)?, cfg.delta)?
        };
        let alphabet = self.tables.alphabet();
        let mut clamped_symbols = 0;
        for s in latent.symbols_mut() {
            if !alphabet.contains(*s) {
                *s = alphabet.clamp(*s);
                clamped_symbols += 1;
            }
        }
        if clamped_symbols > 0 {
            header.flags |= FLAG_CLAMPED;
        }
        timings.transform = t.elapsed();

        let t = Instant::now();
        let idx = select_priors(&latent, &self.costs, &mut lookups)?;
        timings.prior_select = t.elapsed();

        let t = Instant::now();
        let blocks = gather_cdfs(&idx, &self.tables, &mut lookups);
        timings.cdf_gather = t.elapsed();

        let t = Instant::now();
        let index_bytes = encode_indices(&idx, self.tables.n_cdf())?;
        let payload = encode_gathered(&latent, &blocks, &self.tables)?;
        let stream = write_stream(&header, &index_bytes, &payload);
        timings.entropy_code = t.elapsed();

        timings.total = t_start.elapsed();
        Ok(Encoded {
            stream,
            header,
            latent,
            idx,
            index_bytes: index_bytes.len(),
            payload_bytes: payload.len(),
            clamped_symbols,
            timings,
            lookups,
        })
    }

    pub fn decode(&self, stream: &[u8]) -> Result<Decoded> {
        let t_start = Instant::now();
        let mut timings = StageTimes::default();
        let mut lookups = LookupCounter::default();
        let (header, index_bytes, payload) = read_stream(stream)?;
        if header.model_hash != self.hash {
            return Err(Error::ModelMismatch);
        }
        let cfg = header_config(&header)?;
        let shape = latent_shape(header.width as usize, header.height as usize, cfg.planes);
        if shape.c_l != header.c_l as usize || self.tables.n_cdf() != header.n_cdf as usize {
            return Err(Error::invalid("stream header disagrees with the tables"));
        }

        let t = Instant::now();
        let idx = decode_indices(index_bytes, shape.h_l, shape.w_l, self.tables.n_cdf())?;
        timings.prior_select = t.elapsed();

        let t = Instant::now();
        let blocks = gather_cdfs(&idx, &self.tables, &mut lookups);
        timings.cdf_gather = t.elapsed();

        let t = Instant::now();
        let latent = decode_gathered(payload, &blocks, &self.tables, shape)?;
        timings.entropy_code = t.elapsed();

        let t = Instant::now();
        let image = reconstruct(&header, &latent)?;
        timings.transform = t.elapsed();

        timings.total = t_start.elapsed();
        Ok(Decoded {
            image,
            header,
            latent,
            idx,
            timings,
            lookups,
        })
    }
}

/// Reads a `.cdf` table file, or a `.cpm` parameter file which is frozen
/// over its own alphabet.
pub fn load_tables(path: impl AsRef<Path>) -> Result<CdfTableSet> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(TABLE_MAGIC.as_bytes()) {
        CdfTableSet::from_bytes(&bytes)
    } else if bytes.starts_with(MODEL_MAGIC.as_bytes()) {
        let params = MonotoneCdfParams::from_bytes(&bytes)?;
        params.freeze(params.alphabet())
    } else {
        Err(Error::BadMagic {
            expected: TABLE_MAGIC,
        })
    }
}
