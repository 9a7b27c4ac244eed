//! Latent tensors. Logical shape is `C_L × H_L × W_L`; storage is
//! location-major (`(k, l)` outer, channel inner) because every consumer
//! walks one spatial location at a time.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatentShape {
    pub c_l: usize,
    pub h_l: usize,
    pub w_l: usize,
}

impl LatentShape {
    pub fn new(c_l: usize, h_l: usize, w_l: usize) -> Self {
        Self { c_l, h_l, w_l }
    }

    pub fn locations(&self) -> usize {
        self.h_l * self.w_l
    }

    pub fn len(&self) -> usize {
        self.c_l * self.h_l * self.w_l
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn offset(&self, c: usize, k: usize, l: usize) -> usize {
        (k * self.w_l + l) * self.c_l + c
    }
}

/// Real-valued latent produced by the analysis transform.
#[derive(Debug, Clone, PartialEq)]
pub struct RealLatent {
    shape: LatentShape,
    values: Vec<f64>,
}

impl RealLatent {
    pub fn new(shape: LatentShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::usage("latent values do not match shape"));
        }
        Ok(Self { shape, values })
    }

    pub fn shape(&self) -> LatentShape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, c: usize, k: usize, l: usize) -> f64 {
        self.values[self.shape.offset(c, k, l)]
    }
}

/// Integer symbol tensor; the object the entropy stage codes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuantizedLatent {
    shape: LatentShape,
    symbols: Vec<i32>,
}

impl QuantizedLatent {
    pub fn new(shape: LatentShape, symbols: Vec<i32>) -> Result<Self> {
        if symbols.len() != shape.len() {
            return Err(Error::usage(format!(
                "{} symbols do not fill a {}x{}x{} latent",
                symbols.len(),
                shape.c_l,
                shape.h_l,
                shape.w_l
            )));
        }
        Ok(Self { shape, symbols })
    }

    pub fn zeros(shape: LatentShape) -> Self {
        Self {
            shape,
            symbols: vec![0; shape.len()],
        }
    }

    pub fn shape(&self) -> LatentShape {
        self.shape
    }

    pub fn c_l(&self) -> usize {
        self.shape.c_l
    }

    pub fn h_l(&self) -> usize {
        self.shape.h_l
    }

    pub fn w_l(&self) -> usize {
        self.shape.w_l
    }

    pub fn symbols(&self) -> &[i32] {
        &self.symbols
    }

    pub fn symbols_mut(&mut self) -> &mut [i32] {
        &mut self.symbols
    }

    pub fn get(&self, c: usize, k: usize, l: usize) -> i32 {
        self.symbols[self.shape.offset(c, k, l)]
    }

    /// The `C_L` channel symbols at location `(k, l)`.
    #[inline]
    pub fn location(&self, k: usize, l: usize) -> &[i32] {
        let start = (k * self.shape.w_l + l) * self.shape.c_l;
        &self.symbols[start..start + self.shape.c_l]
    }

    /// Iterates locations in raster order.
    pub fn locations(&self) -> std::slice::ChunksExact<'_, i32> {
        self.symbols.chunks_exact(self.shape.c_l.max(1))
    }

    pub fn min_max(&self) -> Option<(i32, i32)> {
        let min = *self.symbols.iter().min()?;
        let max = *self.symbols.iter().max()?;
        Some((min, max))
    }

    /// Copies out the `h × w` window whose top-left location is `(k0, l0)`.
    pub fn crop(&self, k0: usize, l0: usize, h: usize, w: usize) -> Result<Self> {
        if k0 + h > self.shape.h_l || l0 + w > self.shape.w_l {
            return Err(Error::usage("crop window exceeds latent"));
        }
        let shape = LatentShape::new(self.shape.c_l, h, w);
        let mut symbols = Vec::with_capacity(shape.len());
        for k in k0..k0 + h {
            let start = (k * self.shape.w_l + l0) * self.shape.c_l;
            symbols.extend_from_slice(&self.symbols[start..start + w * self.shape.c_l]);
        }
        Ok(Self { shape, symbols })
    }
}
