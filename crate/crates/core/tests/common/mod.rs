#![allow(dead_code)]

use std::path::PathBuf;

use mprs::competition::{PriorIndexMap, TrainerConfig, TrainerState};
use mprs::probability_model::CDF_ONE;
use mprs::transform::{sample_synthetic, SyntheticSource, SyntheticSourceSpec};
use mprs::{CdfTableSet, Image, LatentShape, MonotoneCdfParams, QuantizedLatent, SymbolAlphabet};
use rand::seq::index::sample;
use rand::Rng;

pub fn moon_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/moon.pgm")
}

pub fn moon() -> Image {
    Image::load(moon_path()).expect("test image")
}

/// Random strictly increasing 16-bit CDF rows.
pub fn random_tables(rng: &mut impl Rng, n_cdf: usize, c_l: usize, alphabet: SymbolAlphabet) -> CdfTableSet {
    let l = alphabet.len();
    let mut table = Vec::with_capacity(n_cdf * c_l * (l + 1));
    for _ in 0..n_cdf * c_l {
        let mut cuts: Vec<u32> = sample(rng, CDF_ONE as usize - 1, l - 1)
            .into_iter()
            .map(|c| c as u32 + 1)
            .collect();
        cuts.sort_unstable();
        table.push(0);
        table.extend(cuts);
        table.push(CDF_ONE);
    }
    CdfTableSet::from_rows(n_cdf, c_l, alphabet, table).unwrap()
}

/// Symbols drawn from the rows they will be coded with, so the coder sees
/// realistic statistics.
pub fn sample_latent(
    rng: &mut impl Rng,
    tables: &CdfTableSet,
    idx: &PriorIndexMap,
    shape: LatentShape,
) -> QuantizedLatent {
    let y_min = tables.alphabet().y_min();
    let mut symbols = Vec::with_capacity(shape.len());
    for k in 0..shape.h_l {
        for l in 0..shape.w_l {
            for c in 0..shape.c_l {
                let row = tables.row(idx.get(k, l), c);
                let u = rng.gen_range(0..CDF_ONE);
                let s = row.partition_point(|&v| v <= u) - 1;
                symbols.push(y_min + s as i32);
            }
        }
    }
    QuantizedLatent::new(shape, symbols).unwrap()
}

pub fn random_index_map(rng: &mut impl Rng, h_l: usize, w_l: usize, n_cdf: usize) -> PriorIndexMap {
    let idx = (0..h_l * w_l).map(|_| rng.gen_range(0..n_cdf) as u16).collect();
    PriorIndexMap::new(h_l, w_l, idx, n_cdf).unwrap()
}

/// Ideal code length of `latent`, straight from the table rows.
pub fn entropy_sum(tables: &CdfTableSet, idx: &PriorIndexMap, latent: &QuantizedLatent) -> f64 {
    let shape = latent.shape();
    let y_min = tables.alphabet().y_min();
    let mut bits = 0.0;
    for k in 0..shape.h_l {
        for l in 0..shape.w_l {
            for c in 0..shape.c_l {
                let row = tables.row(idx.get(k, l), c);
                let s = (latent.get(c, k, l) - y_min) as usize;
                bits -= ((row[s + 1] - row[s]) as f64 / CDF_ONE as f64).log2();
            }
        }
    }
    bits
}

/// Trains `n_cdf` priors on a synthetic source with the default trainer.
pub fn train_synthetic(
    spec: &SyntheticSourceSpec,
    n_cdf: usize,
    steps: u64,
    grid: usize,
) -> (MonotoneCdfParams, mprs::competition::FitReport) {
    let (lo, hi) = spec.support();
    let alphabet = SymbolAlphabet::from_observed(lo, hi).unwrap();
    let mut params = MonotoneCdfParams::init(n_cdf, spec.c_l, alphabet, spec.seed).unwrap();
    let validation: Vec<QuantizedLatent> = (0..4)
        .map(|i| {
            let held_out = SyntheticSourceSpec {
                seed: spec.seed + 1000 + i,
                ..spec.clone()
            };
            sample_synthetic(&held_out, grid, grid).latent
        })
        .collect();
    let mut source = SyntheticSource::new(spec.clone(), grid, grid);
    let mut state = TrainerState::new(&params, TrainerConfig::default()).unwrap();
    let report = mprs::competition::fit(&mut state, &mut params, &mut source, steps, &validation).unwrap();
    (params, report)
}

/// Bilinear resampling of a single-plane image to `width × height`.
pub fn resize(image: &Image, width: usize, height: usize) -> Image {
    let (sw, sh) = (image.width(), image.height());
    let src = image.plane(0);
    let at = |x: usize, y: usize| src[y.min(sh - 1) * sw + x.min(sw - 1)];
    let mut px = Vec::with_capacity(width * height);
    for y in 0..height {
        let fy = ((y as f64 + 0.5) * sh as f64 / height as f64 - 0.5).max(0.0);
        let (y0, ty) = (fy.floor() as usize, fy.fract());
        for x in 0..width {
            let fx = ((x as f64 + 0.5) * sw as f64 / width as f64 - 0.5).max(0.0);
            let (x0, tx) = (fx.floor() as usize, fx.fract());
            let top = at(x0, y0) * (1.0 - tx) + at(x0 + 1, y0) * tx;
            let bottom = at(x0, y0 + 1) * (1.0 - tx) + at(x0 + 1, y0 + 1) * tx;
            px.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    Image::gray(width, height, px).unwrap()
}
