//! Differentiable cumulative probability model (CPM) and its frozen form.
//!
//! Every `(prior, channel)` pair owns one monotone scalar map built from a
//! stack of width-one layers
//!
//! ```text
//! u_k = softplus(w_k) * h_k + b_k
//! h_{k+1} = u_k + tanh(a_k) * tanh(u_k)      (hidden layers)
//! F(x) = sigmoid(u_{D-1})                      (output layer)
//! ```
//!
//! Softplus keeps every effective weight positive and `tanh(a_k) > -1` keeps
//! every gate derivative positive, so `F` is strictly increasing with values
//! in `(0, 1)`. Training evaluates `F` at half-integer boundaries; inference
//! uses [`CdfTableSet`], the same boundaries rounded to 16-bit fixed point.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::bytes::ByteReader;
use crate::error::{Error, Result};

/// Number of scalar layers per `(prior, channel)` map.
pub const DEFAULT_DEPTH: usize = 4;
pub const MAX_DEPTH: usize = 8;

/// Fixed-point precision of frozen CDF tables.
pub const CDF_PRECISION: u32 = 16;
pub const CDF_ONE: u32 = 1 << CDF_PRECISION;

/// Interval masses are floored here before taking the logarithm.
pub const MASS_FLOOR: f64 = 1.0 / (1u64 << 24) as f64;

/// Largest alphabet for which every symbol can keep at least one quantum.
pub const MAX_ALPHABET: usize = 1 << 15;

/// Symbols observed on a training source are widened by this much on each side.
pub const ALPHABET_MARGIN: i32 = 2;

const INIT_BIAS_JITTER: f64 = 0.05;

pub const MODEL_MAGIC: &str = "MPCPM1";
pub const TABLE_MAGIC: &str = "MPCDF1";

/// Inclusive range of coded symbol values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SymbolAlphabet {
    y_min: i32,
    y_max: i32,
}

impl SymbolAlphabet {
    pub fn new(y_min: i32, y_max: i32) -> Result<Self> {
        if y_min > 0 || y_max < 0 {
            return Err(Error::usage(format!(
                "alphabet [{y_min}, {y_max}] must contain 0"
            )));
        }
        if (y_max as i64 - y_min as i64) < 1 {
            return Err(Error::usage("alphabet needs at least two symbols"));
        }
        Ok(Self { y_min, y_max })
    }

    /// Alphabet covering `[min, max]` plus [`ALPHABET_MARGIN`] on both sides.
    pub fn from_observed(min: i32, max: i32) -> Result<Self> {
        let lo = min.saturating_sub(ALPHABET_MARGIN).min(0);
        let hi = max.saturating_add(ALPHABET_MARGIN).max(0);
        Self::new(lo, hi)
    }

    pub fn y_min(&self) -> i32 {
        self.y_min
    }

    pub fn y_max(&self) -> i32 {
        self.y_max
    }

    /// Number of symbols `L`.
    pub fn len(&self) -> usize {
        (self.y_max as i64 - self.y_min as i64 + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, symbol: i32) -> bool {
        (self.y_min..=self.y_max).contains(&symbol)
    }

    /// Position of `symbol` in a CDF row. Caller guarantees membership.
    #[inline]
    pub fn index(&self, symbol: i32) -> usize {
        (symbol - self.y_min) as usize
    }

    pub fn clamp(&self, symbol: i32) -> i32 {
        symbol.clamp(self.y_min, self.y_max)
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn inv_softplus(y: f64) -> f64 {
    y + (-(-y).exp_m1()).ln()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn sigmoid_slope(x: f64) -> f64 {
    sigmoid(x) * sigmoid(-x)
}

/// One `(prior, channel)` map with its per-layer nonlinearities of the
/// parameters evaluated once, for repeated evaluation.
#[derive(Clone, Copy)]
pub(crate) struct PreparedUnit {
    depth: usize,
    /// `softplus(w_k)`, the positive layer slope.
    slope: [f64; MAX_DEPTH],
    /// `sigmoid(w_k)`, the derivative of the slope.
    slope_grad: [f64; MAX_DEPTH],
    bias: [f64; MAX_DEPTH],
    /// `tanh(a_k)`, the gate of each hidden layer.
    gate: [f64; MAX_DEPTH],
}

impl PreparedUnit {
    #[inline]
    pub(crate) fn new(unit: &[f64]) -> Self {
        let depth = (unit.len() + 1) / 3;
        let mut p = Self {
            depth,
            slope: [0.0; MAX_DEPTH],
            slope_grad: [0.0; MAX_DEPTH],
            bias: [0.0; MAX_DEPTH],
            gate: [0.0; MAX_DEPTH],
        };
        for k in 0..depth {
            p.slope[k] = softplus(unit[3 * k]);
            p.slope_grad[k] = sigmoid(unit[3 * k]);
            p.bias[k] = unit[3 * k + 1];
            if k + 1 < depth {
                p.gate[k] = unit[3 * k + 2].tanh();
            }
        }
        p
    }

    /// Pre-sigmoid output at `x`.
    #[inline]
    pub(crate) fn logit(&self, x: f64) -> f64 {
        let mut h = x;
        for k in 0..self.depth {
            let u = self.slope[k] * h + self.bias[k];
            h = if k + 1 < self.depth {
                u + self.gate[k] * u.tanh()
            } else {
                u
            };
        }
        h
    }

    /// Accumulates `scale * d(logit at x)/d(unit)` into `grad`.
    fn logit_grad(&self, x: f64, scale: f64, grad: &mut [f64]) {
        let depth = self.depth;
        let mut inputs = [0.0; MAX_DEPTH];
        let mut pre = [0.0; MAX_DEPTH];
        let mut h = x;
        for k in 0..depth {
            inputs[k] = h;
            let u = self.slope[k] * h + self.bias[k];
            pre[k] = u;
            h = if k + 1 < depth { u + self.gate[k] * u.tanh() } else { u };
        }

        // g holds d(logit)/d(h_{k+1}) on entry to iteration k.
        let mut g = scale;
        for k in (0..depth).rev() {
            let g_u = if k + 1 < depth {
                let ta = self.gate[k];
                let tu = pre[k].tanh();
                grad[3 * k + 2] += g * (1.0 - ta * ta) * tu;
                g * (1.0 + ta * (1.0 - tu * tu))
            } else {
                g
            };
            grad[3 * k] += g_u * self.slope_grad[k] * inputs[k];
            grad[3 * k + 1] += g_u;
            g = g_u * self.slope[k];
        }
    }

    #[inline]
    pub(crate) fn bitcost(&self, symbol: i32) -> f64 {
        let s = symbol as f64;
        let mass = interval_mass(self.logit(s - 0.5), self.logit(s + 0.5));
        -mass.max(MASS_FLOOR).log2()
    }

    /// Bitcost of `symbol`, accumulating `scale * d(bitcost)/d(unit)` into `grad`.
    ///
    /// Below the mass floor the reported cost is floored but the gradient of
    /// the true mass is still returned, so far-off symbols keep pulling the CDF.
    pub(crate) fn bitcost_grad(&self, symbol: i32, scale: f64, grad: &mut [f64]) -> f64 {
        let s = symbol as f64;
        let z_lo = self.logit(s - 0.5);
        let z_hi = self.logit(s + 0.5);
        let mass = interval_mass(z_lo, z_hi);
        let cost = -mass.max(MASS_FLOOR).log2();
        if mass > 0.0 && mass.is_finite() {
            let k = -scale / (mass * std::f64::consts::LN_2);
            self.logit_grad(s + 0.5, k * sigmoid_slope(z_hi), grad);
            self.logit_grad(s - 0.5, -k * sigmoid_slope(z_lo), grad);
        }
        cost
    }
}

/// Mass of `[sigmoid(z_lo), sigmoid(z_hi)]`, computed on whichever tail keeps precision.
#[inline]
pub(crate) fn interval_mass(z_lo: f64, z_hi: f64) -> f64 {
    if z_lo + z_hi > 0.0 {
        sigmoid(-z_lo) - sigmoid(-z_hi)
    } else {
        sigmoid(z_hi) - sigmoid(z_lo)
    }
}

/// Trainable parameters of `n_cdf × c_l` monotone scalar CDFs.
///
/// Storage order is `(prior, channel, layer)` with each layer laid out as
/// `[w, b, a]`; the output layer has no gate.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCdfParams {
    n_cdf: usize,
    c_l: usize,
    depth: usize,
    alphabet: SymbolAlphabet,
    values: Vec<f64>,
}

impl MonotoneCdfParams {
    /// Fresh parameters whose CDFs roughly span `alphabet`, with seeded
    /// per-prior bias jitter so competing priors differ from step zero.
    pub fn init(n_cdf: usize, c_l: usize, alphabet: SymbolAlphabet, seed: u64) -> Result<Self> {
        Self::init_with_depth(n_cdf, c_l, DEFAULT_DEPTH, alphabet, seed)
    }

    pub fn init_with_depth(
        n_cdf: usize,
        c_l: usize,
        depth: usize,
        alphabet: SymbolAlphabet,
        seed: u64,
    ) -> Result<Self> {
        check_dims(n_cdf, c_l, depth)?;
        let unit_len = unit_len(depth);
        let scale = alphabet.len() as f64 / 8.0;
        let mid = (alphabet.y_min() as f64 + alphabet.y_max() as f64) / 2.0;

        let mut base = vec![0.0; unit_len];
        for k in 0..depth {
            base[3 * k] = inv_softplus(if k == 0 { 1.0 / scale } else { 1.0 });
        }
        base[1] = -mid / scale;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(n_cdf * c_l * unit_len);
        for _ in 0..n_cdf * c_l {
            let start = values.len();
            values.extend_from_slice(&base);
            for k in 0..depth {
                values[start + 3 * k + 1] += INIT_BIAS_JITTER * rng.gen_range(-1.0..=1.0);
            }
        }
        Ok(Self {
            n_cdf,
            c_l,
            depth,
            alphabet,
            values,
        })
    }

    /// Builds parameters from raw values in storage order.
    pub fn from_values(
        n_cdf: usize,
        c_l: usize,
        depth: usize,
        alphabet: SymbolAlphabet,
        values: Vec<f64>,
    ) -> Result<Self> {
        check_dims(n_cdf, c_l, depth)?;
        if values.len() != n_cdf * c_l * unit_len(depth) {
            return Err(Error::usage(format!(
                "expected {} parameters, got {}",
                n_cdf * c_l * unit_len(depth),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite CPM parameter"));
        }
        Ok(Self {
            n_cdf,
            c_l,
            depth,
            alphabet,
            values,
        })
    }

    pub fn n_cdf(&self) -> usize {
        self.n_cdf
    }

    pub fn c_l(&self) -> usize {
        self.c_l
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn alphabet(&self) -> SymbolAlphabet {
        self.alphabet
    }

    /// Parameters per `(prior, channel)` pair.
    pub fn unit_len(&self) -> usize {
        unit_len(self.depth)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Parameters of one prior, all channels.
    pub fn prior(&self, prior: usize) -> &[f64] {
        let n = self.c_l * self.unit_len();
        &self.values[prior * n..(prior + 1) * n]
    }

    pub fn unit(&self, prior: usize, channel: usize) -> Result<&[f64]> {
        self.check_index(prior, channel)?;
        Ok(self.unit_unchecked(prior, channel))
    }

    pub(crate) fn unit_unchecked(&self, prior: usize, channel: usize) -> &[f64] {
        let n = self.unit_len();
        let start = (prior * self.c_l + channel) * n;
        &self.values[start..start + n]
    }

    fn check_index(&self, prior: usize, channel: usize) -> Result<()> {
        if prior >= self.n_cdf || channel >= self.c_l {
            return Err(Error::usage(format!(
                "(prior {prior}, channel {channel}) out of range for {}x{} model",
                self.n_cdf, self.c_l
            )));
        }
        Ok(())
    }

    /// Modeled cumulative probability at `v`.
    pub fn cpm_eval(&self, prior: usize, channel: usize, v: f64) -> Result<f64> {
        if !v.is_finite() {
            return Err(Error::usage("cpm_eval needs a finite input"));
        }
        Ok(sigmoid(PreparedUnit::new(self.unit(prior, channel)?).logit(v)))
    }

    /// `-log2(F(s + 0.5) - F(s - 0.5))` with the mass floored at [`MASS_FLOOR`].
    pub fn symbol_bitcost(&self, prior: usize, channel: usize, symbol: i32) -> Result<f64> {
        Ok(PreparedUnit::new(self.unit(prior, channel)?).bitcost(symbol))
    }

    /// Gradient of [`symbol_bitcost`](Self::symbol_bitcost) with respect to
    /// the parameters of `(prior, channel)`, in storage order.
    pub fn bitcost_grad(&self, prior: usize, channel: usize, symbol: i32) -> Result<Vec<f64>> {
        let unit = self.unit(prior, channel)?;
        let mut grad = vec![0.0; unit.len()];
        PreparedUnit::new(unit).bitcost_grad(symbol, 1.0, &mut grad);
        Ok(grad)
    }

    /// Freezes every map into a fixed-point [`CdfTableSet`] over `alphabet`.
    pub fn freeze(&self, alphabet: SymbolAlphabet) -> Result<CdfTableSet> {
        let len = alphabet.len();
        if len > MAX_ALPHABET {
            return Err(Error::usage(format!(
                "alphabet of {len} symbols exceeds the 16-bit table limit of {MAX_ALPHABET}"
            )));
        }
        let row_len = len + 1;
        let mut table = vec![0u32; self.n_cdf * self.c_l * row_len];
        table
            .par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(row, out)| {
                let unit = PreparedUnit::new(self.unit_unchecked(row / self.c_l, row % self.c_l));
                for (s, entry) in out.iter_mut().enumerate() {
                    let v = alphabet.y_min() as f64 + s as f64 - 0.5;
                    *entry = (sigmoid(unit.logit(v)) * CDF_ONE as f64).round() as u32;
                }
                repair_row(out);
            });
        Ok(CdfTableSet {
            n_cdf: self.n_cdf,
            c_l: self.c_l,
            depth: self.depth,
            alphabet,
            table,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = header_bytes(MODEL_MAGIC, self.n_cdf, self.c_l, self.depth, self.alphabet);
        out.reserve(self.values.len() * 4);
        for v in &self.values {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let (n_cdf, c_l, depth, alphabet) = read_header(&mut r, MODEL_MAGIC)?;
        let count = n_cdf * c_l * unit_len(depth);
        let raw = r.take(count * 4, "model parameters")?;
        let values = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        Self::from_values(n_cdf, c_l, depth, alphabet, values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn unit_len(depth: usize) -> usize {
    3 * depth - 1
}

fn check_dims(n_cdf: usize, c_l: usize, depth: usize) -> Result<()> {
    if n_cdf == 0 || n_cdf > u16::MAX as usize {
        return Err(Error::usage(format!("n_cdf must be in 1..=65535, got {n_cdf}")));
    }
    if c_l == 0 || c_l > u16::MAX as usize {
        return Err(Error::usage(format!("c_l must be in 1..=65535, got {c_l}")));
    }
    if depth == 0 || depth > MAX_DEPTH {
        return Err(Error::usage(format!("depth must be in 1..={MAX_DEPTH}, got {depth}")));
    }
    Ok(())
}

/// Pins the endpoints to `{0, 2^16}` and enforces strict monotonicity.
///
/// The forward pass bumps later entries up on ties; the backward pass only
/// touches entries that the forward pass pushed to or past the top.
fn repair_row(row: &mut [u32]) {
    let last = row.len() - 1;
    row[0] = 0;
    row[last] = CDF_ONE;
    for s in 1..last {
        row[s] = row[s].max(row[s - 1] + 1);
    }
    for s in (1..last).rev() {
        row[s] = row[s].min(row[s + 1] - 1);
    }
}

fn header_bytes(magic: &str, n_cdf: usize, c_l: usize, depth: usize, a: SymbolAlphabet) -> Vec<u8> {
    let mut out = Vec::with_capacity(26);
    out.extend_from_slice(magic.as_bytes());
    out.extend_from_slice(&(n_cdf as u32).to_le_bytes());
    out.extend_from_slice(&(c_l as u32).to_le_bytes());
    out.extend_from_slice(&(depth as u32).to_le_bytes());
    out.extend_from_slice(&a.y_min().to_le_bytes());
    out.extend_from_slice(&a.y_max().to_le_bytes());
    out
}

fn read_header(
    r: &mut ByteReader<'_>,
    magic: &'static str,
) -> Result<(usize, usize, usize, SymbolAlphabet)> {
    r.expect_magic(magic)?;
    let n_cdf = r.u32("n_cdf")? as usize;
    let c_l = r.u32("c_l")? as usize;
    let depth = r.u32("depth")? as usize;
    let y_min = r.i32("y_min")?;
    let y_max = r.i32("y_max")?;
    check_dims(n_cdf, c_l, depth).map_err(|e| Error::invalid(e.to_string()))?;
    let alphabet = SymbolAlphabet::new(y_min, y_max).map_err(|e| Error::invalid(e.to_string()))?;
    if alphabet.len() > MAX_ALPHABET {
        return Err(Error::invalid("alphabet too large"));
    }
    Ok((n_cdf, c_l, depth, alphabet))
}

/// Frozen CDF tables: `n_cdf × c_l` rows of `L + 1` fixed-point entries.
///
/// Each row starts at 0, ends at `2^16` and is strictly increasing, so every
/// symbol keeps a nonzero mass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CdfTableSet {
    n_cdf: usize,
    c_l: usize,
    depth: usize,
    alphabet: SymbolAlphabet,
    table: Vec<u32>,
}

impl CdfTableSet {
    /// Wraps raw rows after checking every table invariant.
    pub fn from_rows(
        n_cdf: usize,
        c_l: usize,
        alphabet: SymbolAlphabet,
        table: Vec<u32>,
    ) -> Result<Self> {
        check_dims(n_cdf, c_l, DEFAULT_DEPTH)?;
        if alphabet.len() > MAX_ALPHABET {
            return Err(Error::usage("alphabet too large for 16-bit tables"));
        }
        if table.len() != n_cdf * c_l * (alphabet.len() + 1) {
            return Err(Error::usage("table size does not match n_cdf x c_l x (L+1)"));
        }
        let set = Self {
            n_cdf,
            c_l,
            depth: DEFAULT_DEPTH,
            alphabet,
            table,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn n_cdf(&self) -> usize {
        self.n_cdf
    }

    pub fn c_l(&self) -> usize {
        self.c_l
    }

    pub fn alphabet(&self) -> SymbolAlphabet {
        self.alphabet
    }

    pub fn row_len(&self) -> usize {
        self.alphabet.len() + 1
    }

    #[inline]
    pub fn row(&self, prior: usize, channel: usize) -> &[u32] {
        let n = self.row_len();
        let start = (prior * self.c_l + channel) * n;
        &self.table[start..start + n]
    }

    /// All channel rows of one prior, back to back.
    #[inline]
    pub fn prior_block(&self, prior: usize) -> &[u32] {
        let n = self.c_l * self.row_len();
        &self.table[prior * n..(prior + 1) * n]
    }

    pub fn entries(&self) -> &[u32] {
        &self.table
    }

    pub fn validate(&self) -> Result<()> {
        for (row_idx, row) in self.table.chunks_exact(self.row_len()).enumerate() {
            let ok = row[0] == 0
                && row[row.len() - 1] == CDF_ONE
                && row.windows(2).all(|w| w[1] > w[0]);
            if !ok {
                return Err(Error::invalid(format!(
                    "CDF row (prior {}, channel {}) is not a valid 16-bit CDF",
                    row_idx / self.c_l,
                    row_idx % self.c_l
                )));
            }
        }
        Ok(())
    }

    /// `-log2` of the fixed-point interval mass of `symbol`.
    pub fn symbol_bitcost(&self, prior: usize, channel: usize, symbol: i32) -> f64 {
        let row = self.row(prior, channel);
        let s = self.alphabet.index(symbol);
        CDF_PRECISION as f64 - ((row[s + 1] - row[s]) as f64).log2()
    }

    /// Entries are written modulo 2^16, so the pinned final 2^16 is stored as 0.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = header_bytes(TABLE_MAGIC, self.n_cdf, self.c_l, self.depth, self.alphabet);
        out.reserve(self.table.len() * 2);
        for &v in &self.table {
            out.extend_from_slice(&(v as u16).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let (n_cdf, c_l, depth, alphabet) = read_header(&mut r, TABLE_MAGIC)?;
        let row_len = alphabet.len() + 1;
        let count = n_cdf * c_l * row_len;
        let raw = r.take(count * 2, "table entries")?;
        let mut table: Vec<u32> = raw
            .chunks_exact(2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]) as u32)
            .collect();
        for row in table.chunks_exact_mut(row_len) {
            if row[row_len - 1] != 0 {
                return Err(Error::invalid("CDF row does not end at 2^16"));
            }
            row[row_len - 1] = CDF_ONE;
        }
        let set = Self {
            n_cdf,
            c_l,
            depth,
            alphabet,
            table,
        };
        set.validate()?;
        Ok(set)
    }

    /// SHA-256 of the serialized table file; identifies the model in streams.
    pub fn content_hash(&self) -> [u8; 32] {
        let digest = Sha256::digest(self.to_bytes());
        let mut out = [0u8; 32];
        out.copy_from_slice(&digest);
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
