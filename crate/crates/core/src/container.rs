//! `.mprs` stream files.
//!
//! ```text
//! offset size
//!      0    5  magic "MPRS1"
//!      5    1  version
//!      6    1  plane policy (0 luma, 1 independent RGB)
//!      7    1  flags (bit 0: symbols were clamped into the alphabet)
//!      8    4  image height
//!     12    4  image width
//!     16    4  quantizer step (f32)
//!     20    2  latent channels
//!     22    2  number of priors
//!     24    4  y_min
//!     28    4  y_max
//!     32   32  SHA-256 of the CDF table file
//!     64       [u32 len][index map][u32 len][payload]
//! ```
//! All integers little-endian.

use crate::bytes::ByteReader;
use crate::coder::{pack_sections, unpack_sections};
use crate::error::{Error, Result};
use crate::probability_model::{CdfTableSet, SymbolAlphabet};
use crate::transform::PlanePolicy;

pub const STREAM_MAGIC: &str = "MPRS1";
pub const STREAM_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 64;

pub const FLAG_CLAMPED: u8 = 1;

/// Largest accepted image side, in pixels.
pub const MAX_DIMENSION: u32 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamHeader {
    pub version: u8,
    pub planes: PlanePolicy,
    pub flags: u8,
    pub height: u32,
    pub width: u32,
    pub delta: f32,
    pub c_l: u16,
    pub n_cdf: u16,
    pub y_min: i32,
    pub y_max: i32,
    pub model_hash: [u8; 32],
}

impl StreamHeader {
    /// Header for a `width × height` image coded with `tables`.
    pub fn for_tables(
        tables: &CdfTableSet,
        width: usize,
        height: usize,
        delta: f64,
        planes: PlanePolicy,
    ) -> Result<Self> {
        Self::new(tables, tables.content_hash(), width, height, delta, planes)
    }

    /// As [`for_tables`](Self::for_tables) with the table hash already known.
    pub fn new(
        tables: &CdfTableSet,
        model_hash: [u8; 32],
        width: usize,
        height: usize,
        delta: f64,
        planes: PlanePolicy,
    ) -> Result<Self> {
        let dims = u32::try_from(width).ok().zip(u32::try_from(height).ok());
        let (width, height) = dims
            .filter(|&(w, h)| w <= MAX_DIMENSION && h <= MAX_DIMENSION)
            .ok_or_else(|| Error::usage("image too large"))?;
        let c_l = u16::try_from(tables.c_l()).map_err(|_| Error::usage("too many channels"))?;
        let n_cdf = u16::try_from(tables.n_cdf()).map_err(|_| Error::usage("too many priors"))?;
        Ok(Self {
            version: STREAM_VERSION,
            planes,
            flags: 0,
            height,
            width,
            delta: delta as f32,
            c_l,
            n_cdf,
            y_min: tables.alphabet().y_min(),
            y_max: tables.alphabet().y_max(),
            model_hash,
        })
    }

    pub fn clamped(&self) -> bool {
        self.flags & FLAG_CLAMPED != 0
    }

    pub fn alphabet(&self) -> Result<SymbolAlphabet> {
        SymbolAlphabet::new(self.y_min, self.y_max).map_err(|e| Error::invalid(e.to_string()))
    }

    /// Refuses tables other than the ones the stream was encoded with.
    pub fn check_model(&self, tables: &CdfTableSet) -> Result<()> {
        if tables.content_hash() != self.model_hash {
            return Err(Error::ModelMismatch);
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..5].copy_from_slice(STREAM_MAGIC.as_bytes());
        out[5] = self.version;
        out[6] = self.planes.to_byte();
        out[7] = self.flags;
        out[8..12].copy_from_slice(&self.height.to_le_bytes());
        out[12..16].copy_from_slice(&self.width.to_le_bytes());
        out[16..20].copy_from_slice(&self.delta.to_le_bytes());
        out[20..22].copy_from_slice(&self.c_l.to_le_bytes());
        out[22..24].copy_from_slice(&self.n_cdf.to_le_bytes());
        out[24..28].copy_from_slice(&self.y_min.to_le_bytes());
        out[28..32].copy_from_slice(&self.y_max.to_le_bytes());
        out[32..64].copy_from_slice(&self.model_hash);
        out
    }

    fn read(r: &mut ByteReader<'_>) -> Result<Self> {
        r.expect_magic(STREAM_MAGIC)?;
        let version = r.u8("version")?;
        if version != STREAM_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                expected: STREAM_VERSION,
            });
        }
        let planes = PlanePolicy::from_byte(r.u8("plane policy")?)?;
        let flags = r.u8("flags")?;
        if flags & !FLAG_CLAMPED != 0 {
            return Err(Error::invalid(format!("unknown header flags {flags:#04x}")));
        }
        let header = Self {
            version,
            planes,
            flags,
            height: r.u32("height")?,
            width: r.u32("width")?,
            delta: r.f32("delta")?,
            c_l: r.u16("channel count")?,
            n_cdf: r.u16("prior count")?,
            y_min: r.i32("y_min")?,
            y_max: r.i32("y_max")?,
            model_hash: r.array("model hash")?,
        };
        if !(header.delta > 0.0 && header.delta.is_finite()) {
            return Err(Error::invalid(format!("bad quantizer step {}", header.delta)));
        }
        if header.width > MAX_DIMENSION || header.height > MAX_DIMENSION {
            return Err(Error::invalid(format!(
                "image {}x{} exceeds the {MAX_DIMENSION} pixel limit",
                header.width, header.height
            )));
        }
        if header.n_cdf == 0 || header.c_l == 0 {
            return Err(Error::invalid("header declares zero priors or channels"));
        }
        header.alphabet()?;
        Ok(header)
    }
}

pub fn write_stream(header: &StreamHeader, index_bytes: &[u8], payload: &[u8]) -> Vec<u8> {
    let mut out = header.to_bytes().to_vec();
    out.extend_from_slice(&pack_sections(index_bytes, payload));
    out
}

/// Splits a stream into header, index map bytes and payload bytes.
pub fn read_stream(bytes: &[u8]) -> Result<(StreamHeader, &[u8], &[u8])> {
    let mut r = ByteReader::new(bytes);
    let header = StreamHeader::read(&mut r)?;
    let (index_bytes, payload) = unpack_sections(&bytes[HEADER_LEN..])?;
    Ok((header, index_bytes, payload))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> StreamHeader {
        StreamHeader {
            version: STREAM_VERSION,
            planes: PlanePolicy::Independent,
            flags: FLAG_CLAMPED,
            height: 2160,
            width: 3840,
            delta: 0.1,
            c_l: 256,
            n_cdf: 64,
            y_min: -40,
            y_max: 90,
            model_hash: [7; 32],
        }
    }

    #[test]
    fn round_trip() {
        let h = header();
        let bytes = write_stream(&h, b"idx", b"payload");
        assert_eq!(bytes.len(), HEADER_LEN + 8 + 3 + 7);
        let (back, idx, payload) = read_stream(&bytes).unwrap();
        assert_eq!(back, h);
        assert!(back.clamped());
        assert_eq!((idx, payload), (&b"idx"[..], &b"payload"[..]));
    }

    #[test]
    fn empty_image_stream() {
        let h = StreamHeader {
            height: 0,
            width: 0,
            ..header()
        };
        let bytes = write_stream(&h, &[], &[]);
        assert_eq!(bytes.len(), HEADER_LEN + 8);
        assert_eq!(read_stream(&bytes).unwrap().0, h);
    }

    #[test]
    fn distinct_errors() {
        let bytes = write_stream(&header(), b"i", b"p");
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_stream(&bad), Err(Error::BadMagic { .. })));
        let mut newer = bytes.clone();
        newer[5] = STREAM_VERSION + 1;
        assert!(matches!(
            read_stream(&newer),
            Err(Error::UnsupportedVersion { found: 2, expected: 1 })
        ));
        assert!(matches!(
            read_stream(&bytes[..bytes.len() - 1]),
            Err(Error::Truncated(_))
        ));
    }
}
