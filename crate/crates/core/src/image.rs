//! Planar real-valued images and 8-bit binary PGM (P5) / PPM (P6) I/O.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Image with one (gray) or three (RGB) planes of samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    planes: Vec<Vec<f64>>,
}

impl Image {
    pub fn new(width: usize, height: usize, planes: Vec<Vec<f64>>) -> Result<Self> {
        if planes.is_empty() || planes.len() > 3 || planes.len() == 2 {
            return Err(Error::usage("image must have 1 or 3 planes"));
        }
        if planes.iter().any(|p| p.len() != width * height) {
            return Err(Error::usage("plane size does not match image dimensions"));
        }
        Ok(Self {
            width,
            height,
            planes,
        })
    }

    pub fn gray(width: usize, height: usize, samples: Vec<f64>) -> Result<Self> {
        Self::new(width, height, vec![samples])
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            planes: vec![vec![value; width * height]],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    pub fn planes(&self) -> &[Vec<f64>] {
        &self.planes
    }

    pub fn plane(&self, idx: usize) -> &[f64] {
        &self.planes[idx]
    }

    pub fn num_planes(&self) -> usize {
        self.planes.len()
    }

    /// BT.601 luma of an RGB image; gray images are returned unchanged.
    pub fn to_luma(&self) -> Image {
        if self.planes.len() == 1 {
            return self.clone();
        }
        let (r, g, b) = (&self.planes[0], &self.planes[1], &self.planes[2]);
        let luma = (0..self.pixel_count())
            .map(|i| 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i])
            .collect();
        Image {
            width: self.width,
            height: self.height,
            planes: vec![luma],
        }
    }

    /// Parses binary 8-bit PGM or PPM; samples map to `v / 255`.
    pub fn from_pnm(bytes: &[u8]) -> Result<Image> {
        let mut pos = 0;
        let magic = next_token(bytes, &mut pos).ok_or(Error::Truncated("PNM magic"))?;
        let channels = match magic {
            b"P5" => 1,
            b"P6" => 3,
            _ => return Err(Error::BadMagic { expected: "P5 or P6" }),
        };
        let mut field = |what: &'static str| -> Result<usize> {
            let tok = next_token(bytes, &mut pos).ok_or(Error::Truncated(what))?;
            std::str::from_utf8(tok)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::invalid(format!("bad PNM {what}")))
        };
        let width = field("width")?;
        let height = field("height")?;
        let maxval = field("maxval")?;
        if maxval != 255 {
            return Err(Error::invalid(format!("only 8-bit PNM is supported (maxval {maxval})")));
        }
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let n = width
            .checked_mul(height)
            .and_then(|v| v.checked_mul(channels))
            .ok_or_else(|| Error::invalid("PNM dimensions overflow"))?;
        let raster = bytes
            .get(pos..pos + n)
            .ok_or(Error::Truncated("PNM raster"))?;
        let mut planes = vec![Vec::with_capacity(width * height); channels];
        for px in raster.chunks_exact(channels) {
            for (plane, &v) in planes.iter_mut().zip(px) {
                plane.push(v as f64 / 255.0);
            }
        }
        Image::new(width, height, planes)
    }

    /// Serializes as P5 (gray) or P6 (RGB), rounding and clamping to 8 bits.
    pub fn to_pnm(&self) -> Vec<u8> {
        let magic = if self.planes.len() == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixel_count() * self.planes.len());
        for i in 0..self.pixel_count() {
            for plane in &self.planes {
                out.push(to_u8(plane[i]));
            }
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Image> {
        Image::from_pnm(&fs::read(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_pnm())?;
        Ok(())
    }
}

pub(crate) fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (*pos > start).then(|| &bytes[start..*pos])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip_is_bit_exact() {
        let mut bytes = b"P5\n# comment\n3 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 1, 2, 127, 254, 255]);
        let img = Image::from_pnm(&bytes).unwrap();
        assert_eq!((img.width(), img.height(), img.num_planes()), (3, 2, 1));
        assert_eq!(img.plane(0)[5], 1.0);
        assert_eq!(img.to_pnm()[11..], bytes[21..]);
    }

    #[test]
    fn ppm_interleaving() {
        let mut bytes = b"P6 2 1 255 ".to_vec();
        bytes.extend_from_slice(&[10, 20, 30, 40, 50, 60]);
        let img = Image::from_pnm(&bytes).unwrap();
        assert_eq!(img.num_planes(), 3);
        assert_eq!(img.plane(1)[1], 50.0 / 255.0);
        assert!(img.to_pnm().ends_with(&[10, 20, 30, 40, 50, 60]));
    }

    #[test]
    fn malformed_pnm() {
        assert!(matches!(Image::from_pnm(b"P2 1 1 255 "), Err(Error::BadMagic { .. })));
        assert!(matches!(Image::from_pnm(b"P5 2 2 255 \x00"), Err(Error::Truncated(_))));
        assert!(matches!(Image::from_pnm(b"P5 2 2 65535 "), Err(Error::Invalid(_))));
        assert!(matches!(Image::from_pnm(b"P5 2"), Err(Error::Truncated(_))));
    }
}
