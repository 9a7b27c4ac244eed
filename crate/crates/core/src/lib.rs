//! Learned-prior image codec where several static CDF tables compete for
//! every latent location.
//!
//! Pipeline: [`transform`] turns an image into a quantized latent, the
//! [`competition`] trainer fits a set of [`probability_model`] priors,
//! which are frozen into fixed-point tables. At coding time the
//! [`coder`] picks the cheapest table per location, range codes the
//! symbols and stores the chosen indices as side information inside a
//! [`container`] stream. [`bench`] measures all of it.

mod bytes;

pub mod bench;
pub mod codec;
pub mod coder;
pub mod competition;
pub mod container;
pub mod error;
pub mod image;
pub mod latent;
pub mod probability_model;
pub mod transform;

pub use codec::{Codec, Decoded, Encoded, StageTimes};
pub use competition::PriorIndexMap;
pub use error::{Error, Result};
pub use image::Image;
pub use latent::{LatentShape, QuantizedLatent, RealLatent};
pub use probability_model::{CdfTableSet, MonotoneCdfParams, SymbolAlphabet};
