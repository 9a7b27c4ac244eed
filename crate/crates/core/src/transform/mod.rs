//! Fixed analysis/synthesis transform standing in for a learned autoencoder,
//! plus latent sources used for training.
//!
//! Each 16×16 pixel block becomes one latent location whose 256 channels are
//! the block's orthonormal DCT-II coefficients (`c = 16u + v`). Images are
//! zero-padded to a multiple of 16; the true size travels with the stream.

pub mod dct;
pub mod synthetic;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::latent::{LatentShape, QuantizedLatent, RealLatent};

pub use dct::{BLOCK, BLOCK_AREA};
pub use synthetic::{sample_synthetic, Pmf, Regime, RegimeLayout, SyntheticSample, SyntheticSource, SyntheticSourceSpec};

/// Latent channels produced by the block transform.
pub const TRANSFORM_CHANNELS: usize = BLOCK_AREA;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlanePolicy {
    /// Code BT.601 luma only.
    #[default]
    Luma,
    /// Code R, G and B as three independent planes stacked along the latent rows.
    Independent,
}

impl PlanePolicy {
    pub fn planes(self) -> usize {
        match self {
            PlanePolicy::Luma => 1,
            PlanePolicy::Independent => 3,
        }
    }

    pub fn to_byte(self) -> u8 {
        match self {
            PlanePolicy::Luma => 0,
            PlanePolicy::Independent => 1,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(PlanePolicy::Luma),
            1 => Ok(PlanePolicy::Independent),
            _ => Err(Error::invalid(format!("unknown plane policy {b}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformConfig {
    pub delta: f64,
    pub planes: PlanePolicy,
}

impl TransformConfig {
    pub fn new(delta: f64, planes: PlanePolicy) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::usage(format!("quantizer step must be positive, got {delta}")));
        }
        Ok(Self { delta, planes })
    }

    pub fn luma(delta: f64) -> Result<Self> {
        Self::new(delta, PlanePolicy::Luma)
    }
}

/// Latent grid for a `width × height` image under `policy`.
pub fn latent_shape(width: usize, height: usize, policy: PlanePolicy) -> LatentShape {
    LatentShape::new(
        TRANSFORM_CHANNELS,
        policy.planes() * height.div_ceil(BLOCK),
        width.div_ceil(BLOCK),
    )
}

/// Blockwise forward DCT.
pub fn analyze(image: &Image, cfg: &TransformConfig) -> Result<RealLatent> {
    if image.is_empty() {
        return Err(Error::usage("cannot analyze an empty image"));
    }
    let source = match cfg.planes {
        PlanePolicy::Luma => image.to_luma(),
        PlanePolicy::Independent if image.num_planes() == 3 => image.clone(),
        PlanePolicy::Independent => {
            return Err(Error::usage("independent-plane mode needs an RGB image"))
        }
    };
    let (w, h) = (image.width(), image.height());
    let shape = latent_shape(w, h, cfg.planes);
    let blocks_h = h.div_ceil(BLOCK);
    let mut values = vec![0.0; shape.len()];
    values
        .par_chunks_mut(BLOCK_AREA)
        .enumerate()
        .for_each(|(loc, coef)| {
            let (row, l) = (loc / shape.w_l, loc % shape.w_l);
            let (plane, k) = (row / blocks_h, row % blocks_h);
            let src = source.plane(plane);
            let mut block = [0.0; BLOCK_AREA];
            for y in 0..BLOCK {
                let py = k * BLOCK + y;
                if py >= h {
                    break;
                }
                for x in 0..BLOCK {
                    let px = l * BLOCK + x;
                    if px >= w {
                        break;
                    }
                    block[y * BLOCK + x] = src[py * w + px];
                }
            }
            dct::forward(&block, coef);
        });
    RealLatent::new(shape, values)
}

/// Uniform quantizer, rounding half away from zero.
pub fn quantize(latent: &RealLatent, delta: f64) -> Result<QuantizedLatent> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::usage("quantizer step must be positive"));
    }
    let symbols = latent
        .values()
        .iter()
        .map(|v| (v / delta).round() as i32)
        .collect();
    QuantizedLatent::new(latent.shape(), symbols)
}

pub fn dequantize(latent: &QuantizedLatent, delta: f64) -> RealLatent {
    let values = latent.symbols().iter().map(|&s| s as f64 * delta).collect();
    RealLatent::new(latent.shape(), values).expect("shape preserved")
}

/// Inverse DCT of a real latent, cropped to `width × height`, unclipped.
pub fn inverse_transform(
    latent: &RealLatent,
    width: usize,
    height: usize,
    policy: PlanePolicy,
) -> Result<Image> {
    let shape = latent.shape();
    let planes = policy.planes();
    if width == 0 || height == 0 {
        if shape.locations() != 0 {
            return Err(Error::usage("latent is not empty for an empty image"));
        }
        return Image::new(width, height, vec![Vec::new(); planes]);
    }
    if shape != latent_shape(width, height, policy) {
        return Err(Error::usage(format!(
            "latent {}x{}x{} does not match a {width}x{height} image",
            shape.c_l, shape.h_l, shape.w_l
        )));
    }
    let blocks_h = height.div_ceil(BLOCK);
    let mut out = vec![vec![0.0; width * height]; planes];
    for (p, plane) in out.iter_mut().enumerate() {
        // Rows of 16 pixels are disjoint, so each band of blocks is independent.
        plane
            .par_chunks_mut(width * BLOCK)
            .enumerate()
            .for_each(|(k, band)| {
                let rows = band.len() / width;
                let mut block = [0.0; BLOCK_AREA];
                for l in 0..shape.w_l {
                    let loc = (p * blocks_h + k) * shape.w_l + l;
                    let coef = &latent.values()[loc * BLOCK_AREA..(loc + 1) * BLOCK_AREA];
                    dct::inverse(coef, &mut block);
                    for y in 0..rows {
                        for x in 0..BLOCK {
                            let px = l * BLOCK + x;
                            if px < width {
                                band[y * width + px] = block[y * BLOCK + x];
                            }
                        }
                    }
                }
            });
    }
    Image::new(width, height, out)
}

/// Dequantize, inverse DCT, crop and clip to `[0, 1]`.
pub fn synthesize(
    latent: &QuantizedLatent,
    cfg: &TransformConfig,
    width: usize,
    height: usize,
) -> Result<Image> {
    let real = dequantize(latent, cfg.delta);
    let image = inverse_transform(&real, width, height, cfg.planes)?;
    let planes = image
        .planes()
        .iter()
        .map(|p| p.iter().map(|v| v.clamp(0.0, 1.0)).collect())
        .collect();
    Image::new(width, height, planes)
}

/// Supplies one quantized latent per training step.
pub trait LatentSource {
    fn c_l(&self) -> usize;

    fn next_latent(&mut self) -> QuantizedLatent;

    /// Smallest and largest symbol this source can emit.
    fn symbol_range(&self) -> (i32, i32);
}

/// Random crops of quantized image latents.
pub struct ImageLatentSource {
    latents: Vec<QuantizedLatent>,
    crop: usize,
    range: (i32, i32),
    rng: ChaCha8Rng,
}

impl ImageLatentSource {
    /// `crop` is the side of the square window (in locations) returned per step.
    pub fn new(latents: Vec<QuantizedLatent>, crop: usize, seed: u64) -> Result<Self> {
        if latents.is_empty() || latents.iter().any(|l| l.shape().is_empty()) {
            return Err(Error::usage("image source is empty"));
        }
        let c_l = latents[0].c_l();
        if latents.iter().any(|l| l.c_l() != c_l) {
            return Err(Error::usage("image latents disagree on channel count"));
        }
        let range = latents
            .iter()
            .filter_map(QuantizedLatent::min_max)
            .fold((i32::MAX, i32::MIN), |(lo, hi), (a, b)| (lo.min(a), hi.max(b)));
        Ok(Self {
            latents,
            crop: crop.max(1),
            range,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn from_images(
        images: &[Image],
        cfg: &TransformConfig,
        crop: usize,
        seed: u64,
    ) -> Result<Self> {
        let latents = images
            .iter()
            .map(|img| quantize(&analyze(img, cfg)?, cfg.delta))
            .collect::<Result<Vec<_>>>()?;
        Self::new(latents, crop, seed)
    }

    pub fn latents(&self) -> &[QuantizedLatent] {
        &self.latents
    }
}

impl LatentSource for ImageLatentSource {
    fn c_l(&self) -> usize {
        self.latents[0].c_l()
    }

    fn next_latent(&mut self) -> QuantizedLatent {
        let src = &self.latents[self.rng.gen_range(0..self.latents.len())];
        let h = self.crop.min(src.h_l());
        let w = self.crop.min(src.w_l());
        let k0 = self.rng.gen_range(0..=src.h_l() - h);
        let l0 = self.rng.gen_range(0..=src.w_l() - w);
        src.crop(k0, l0, h, w).expect("window inside latent")
    }

    fn symbol_range(&self) -> (i32, i32) {
        self.range
    }
}
