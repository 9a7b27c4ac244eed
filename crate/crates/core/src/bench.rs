//! Accounting and measurement: lookup counts, stage timings, rate and
//! distortion metrics, segmentation maps and CDF dumps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::codec::{Codec, StageTimes};
use crate::coder::LookupCounter;
use crate::competition::PriorIndexMap;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::latent::LatentShape;
use crate::probability_model::{CdfTableSet, CDF_ONE};
use crate::transform::{TransformConfig, BLOCK};

/// Lookup operations of one encode/decode of an `h_l × w_l × c_l` latent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LookupReport {
    pub h_l: usize,
    pub w_l: usize,
    pub c_l: usize,
    pub n_cdf: usize,
    /// Every latent variable read from every prior's bitcost table.
    pub encode_index_lookups: u64,
    pub encode_cdf_gathers: u64,
    pub decode_cdf_gathers: u64,
    /// One distinct CDF per latent variable, as a per-variable
    /// parametrized prior would need.
    pub hp_equivalent_cdf_evals: u64,
}

impl LookupReport {
    /// Decode-side CDF fetches relative to one CDF per variable (`1 / c_l`).
    pub fn decode_gather_ratio(&self) -> f64 {
        self.decode_cdf_gathers as f64 / self.hp_equivalent_cdf_evals as f64
    }

    /// Encode-side lookups relative to one CDF per variable (`n_cdf`).
    pub fn encode_index_ratio(&self) -> f64 {
        self.encode_index_lookups as f64 / self.hp_equivalent_cdf_evals as f64
    }
}

pub fn count_lookups(h_l: usize, w_l: usize, c_l: usize, n_cdf: usize) -> Result<LookupReport> {
    if h_l == 0 || w_l == 0 || c_l == 0 || n_cdf == 0 {
        return Err(Error::usage("lookup accounting needs nonzero dimensions"));
    }
    let locations = (h_l * w_l) as u64;
    Ok(LookupReport {
        h_l,
        w_l,
        c_l,
        n_cdf,
        encode_index_lookups: locations * c_l as u64 * n_cdf as u64,
        encode_cdf_gathers: locations,
        decode_cdf_gathers: locations,
        hp_equivalent_cdf_evals: locations * c_l as u64,
    })
}

/// Report built from the counters of a real encode and decode.
pub fn instrument_counts(
    shape: LatentShape,
    n_cdf: usize,
    encode: &LookupCounter,
    decode: &LookupCounter,
) -> Result<LookupReport> {
    if decode.index_lookups != 0 {
        return Err(Error::invalid("decoding must not perform index lookups"));
    }
    Ok(LookupReport {
        h_l: shape.h_l,
        w_l: shape.w_l,
        c_l: shape.c_l,
        n_cdf,
        encode_index_lookups: encode.index_lookups,
        encode_cdf_gathers: encode.cdf_gathers,
        decode_cdf_gathers: decode.cdf_gathers,
        hp_equivalent_cdf_evals: shape.len() as u64,
    })
}

pub const PSNR_CAP_DB: f64 = 99.0;

/// Peak signal-to-noise ratio for samples in `[0, 1]`, capped at 99 dB.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() || a.num_planes() != b.num_planes() {
        return Err(Error::usage("PSNR needs images of identical shape"));
    }
    let n = a.pixel_count() * a.num_planes();
    if n == 0 {
        return Ok(PSNR_CAP_DB);
    }
    let sse: f64 = a
        .planes()
        .iter()
        .zip(b.planes())
        .flat_map(|(p, q)| p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)))
        .sum();
    let mse = sse / n as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((-10.0 * mse.log10()).min(PSNR_CAP_DB))
}

pub fn bpp(bytes: usize, height: usize, width: usize) -> f64 {
    8.0 * bytes as f64 / (height * width) as f64
}

/// Averaged stage timings plus rate and distortion of one image.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub width: usize,
    pub height: usize,
    pub runs: u32,
    pub bytes: usize,
    pub index_bytes: usize,
    pub payload_bytes: usize,
    pub bpp: f64,
    pub side_info_bpp: f64,
    pub psnr_db: f64,
    pub clamped_symbols: usize,
    pub encode: StageTimes,
    pub decode: StageTimes,
    pub lookups: LookupReport,
    /// Counters agree with [`count_lookups`] for this shape.
    pub lookups_match_formula: bool,
    /// Decoder output equals the encoder-side reconstruction bit for bit.
    pub bit_exact: bool,
}

/// Encodes and decodes `image` `runs` times and averages each stage.
pub fn stage_timings(
    codec: &Codec,
    image: &Image,
    cfg: &TransformConfig,
    runs: u32,
) -> Result<BenchReport> {
    if runs == 0 {
        return Err(Error::usage("at least one timing run is required"));
    }
    let mut enc_sum = StageTimes::default();
    let mut dec_sum = StageTimes::default();
    let mut last = None;
    for _ in 0..runs {
        let encoded = codec.encode(image, cfg)?;
        let decoded = codec.decode(&encoded.stream)?;
        enc_sum.accumulate(&encoded.timings);
        dec_sum.accumulate(&decoded.timings);
        last = Some((encoded, decoded));
    }
    let (encoded, decoded) = last.expect("runs > 0");
    let shape = encoded.latent.shape();
    let n_cdf = codec.tables().n_cdf();
    let lookups = instrument_counts(shape, n_cdf, &encoded.lookups, &decoded.lookups)?;
    let lookups_match_formula = if shape.is_empty() {
        lookups.encode_index_lookups == 0 && lookups.decode_cdf_gathers == 0
    } else {
        count_lookups(shape.h_l, shape.w_l, shape.c_l, n_cdf)? == lookups
    };
    let pixels = (image.width() * image.height()).max(1);
    let bits = |bytes: usize| 8.0 * bytes as f64 / pixels as f64;
    Ok(BenchReport {
        width: image.width(),
        height: image.height(),
        runs,
        bytes: encoded.stream.len(),
        index_bytes: encoded.index_bytes,
        payload_bytes: encoded.payload_bytes,
        bpp: bits(encoded.stream.len()),
        side_info_bpp: bits(encoded.index_bytes),
        psnr_db: psnr(&image_for(image, cfg), &decoded.image)?,
        clamped_symbols: encoded.clamped_symbols,
        encode: enc_sum.divided(runs),
        decode: dec_sum.divided(runs),
        lookups,
        lookups_match_formula,
        bit_exact: encoded.reconstruction()? == decoded.image,
    })
}

/// The reference the codec actually tries to reproduce.
fn image_for(image: &Image, cfg: &TransformConfig) -> Image {
    match cfg.planes {
        crate::transform::PlanePolicy::Luma if image.num_planes() == 3 => image.to_luma(),
        _ => image.clone(),
    }
}

pub const CSV_HEADER: &str = "image,width,height,n_cdf,runs,bytes,bpp,index_bytes,side_info_bpp,\
payload_bytes,psnr_db,clamped_symbols,\
enc_transform_s,enc_prior_select_s,enc_cdf_gather_s,enc_entropy_s,enc_total_s,\
dec_transform_s,dec_prior_select_s,dec_cdf_gather_s,dec_entropy_s,dec_total_s,\
encode_index_lookups,encode_cdf_gathers,decode_cdf_gathers,hp_equivalent_cdf_evals,\
decode_gather_ratio,lookups_match_formula,bit_exact";

impl BenchReport {
    pub fn csv_row(&self, name: &str) -> String {
        let mut row = format!(
            "{name},{},{},{},{},{},{:.6},{},{:.6},{},{:.4},{}",
            self.width,
            self.height,
            self.lookups.n_cdf,
            self.runs,
            self.bytes,
            self.bpp,
            self.index_bytes,
            self.side_info_bpp,
            self.payload_bytes,
            self.psnr_db,
            self.clamped_symbols
        );
        for t in [&self.encode, &self.decode] {
            for d in [t.transform, t.prior_select, t.cdf_gather, t.entropy_code, t.total] {
                write!(row, ",{:.6}", d.as_secs_f64()).unwrap();
            }
        }
        let l = &self.lookups;
        write!(
            row,
            ",{},{},{},{},{:.6},{},{}",
            l.encode_index_lookups,
            l.encode_cdf_gathers,
            l.decode_cdf_gathers,
            l.hp_equivalent_cdf_evals,
            l.decode_gather_ratio(),
            self.lookups_match_formula,
            self.bit_exact
        )
        .unwrap();
        row
    }
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let sector = h6.floor();
    let f = h6 - sector;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    let (r, g, b) = match sector as u32 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [r, g, b].map(|c| (c * 255.0).round() as u8)
}

/// `n` distinct colors from golden-ratio hue steps starting at a hue
/// derived from `seed`. Value and saturation alternate over three levels so
/// neighbouring indices stay far apart; any 8-bit collision is nudged away.
pub fn palette(n: usize, seed: u64) -> Vec<[u8; 3]> {
    const GOLDEN: f64 = 0.618_033_988_749_895;
    let start = (seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 11) as f64 / (1u64 << 53) as f64;
    let mut colors: Vec<[u8; 3]> = Vec::with_capacity(n);
    for i in 0..n {
        let (s, v) = [(0.85, 0.95), (0.55, 0.80), (0.95, 0.65)][i % 3];
        let mut hue = start + i as f64 * GOLDEN;
        let mut rgb = hsv_to_rgb(hue, s, v);
        while colors.contains(&rgb) {
            hue += 1.0 / 1531.0;
            rgb = hsv_to_rgb(hue, s, v);
        }
        colors.push(rgb);
    }
    colors
}

/// One 16×16 block of the prior's palette color per latent location.
pub fn segmentation_map(idx: &PriorIndexMap, n_cdf: usize, seed: u64) -> Result<Image> {
    if let Some(&bad) = idx.as_slice().iter().find(|&&i| i as usize >= n_cdf) {
        return Err(Error::usage(format!("prior index {bad} >= n_cdf {n_cdf}")));
    }
    let colors = palette(n_cdf, seed);
    let (width, height) = (idx.w_l() * BLOCK, idx.h_l() * BLOCK);
    let mut planes = vec![vec![0.0; width * height]; 3];
    for y in 0..height {
        for x in 0..width {
            let rgb = colors[idx.get(y / BLOCK, x / BLOCK)];
            for (plane, c) in planes.iter_mut().zip(rgb) {
                plane[y * width + x] = c as f64 / 255.0;
            }
        }
    }
    Image::new(width, height, planes)
}

/// CSV of one prior: a row per channel, a column per CDF boundary, in `[0, 1]`.
pub fn cdf_csv(tables: &CdfTableSet, prior: usize) -> String {
    let alphabet = tables.alphabet();
    let mut out = String::from("channel");
    for s in alphabet.y_min()..=alphabet.y_max() + 1 {
        write!(out, ",{}", s as f64 - 0.5).unwrap();
    }
    out.push('\n');
    for c in 0..tables.c_l() {
        write!(out, "{c}").unwrap();
        for &v in tables.row(prior, c) {
            write!(out, ",{}", v as f64 / CDF_ONE as f64).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Writes `prior_NNN.csv` for every prior into `dir`.
pub fn cdf_dump(tables: &CdfTableSet, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    (0..tables.n_cdf())
        .map(|p| {
            let path = dir.join(format!("prior_{p:03}.csv"));
            fs::write(&path, cdf_csv(tables, p))?;
            Ok(path)
        })
        .collect()
}
