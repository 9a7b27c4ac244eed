//! Synthetic latent sources with known per-location entropy.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LatentSource;
use crate::error::{Error, Result};
use crate::latent::{LatentShape, QuantizedLatent};

/// Discrete pmf over the consecutive symbols `first, first + 1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    first: i32,
    probs: Vec<f64>,
}

impl Pmf {
    pub fn new(first: i32, probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::usage("pmf needs finite non-negative probabilities"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::usage(format!("pmf sums to {total}, not 1")));
        }
        Ok(Self { first, probs })
    }

    pub fn from_weights(first: i32, weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::usage("pmf weights must have positive sum"));
        }
        Self::new(first, weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(first: i32, n: usize) -> Self {
        Self {
            first,
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point(symbol: i32) -> Self {
        Self {
            first: symbol,
            probs: vec![1.0],
        }
    }

    /// `p(s) ∝ exp(-|s - center| / scale)` truncated to `|s - center| ≤ radius`.
    pub fn discrete_laplace(center: i32, scale: f64, radius: i32) -> Self {
        let weights: Vec<f64> = (-radius..=radius)
            .map(|d| (-(d.abs() as f64) / scale).exp())
            .collect();
        Self::from_weights(center - radius, &weights).expect("positive weights")
    }

    pub fn first(&self) -> i32 {
        self.first
    }

    pub fn last(&self) -> i32 {
        self.first + self.probs.len() as i32 - 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, symbol: i32) -> f64 {
        usize::try_from(symbol - self.first)
            .ok()
            .and_then(|i| self.probs.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    /// Shannon entropy in bits.
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| p * p.log2())
            .sum::<f64>()
    }
}

/// One statistical regime: a pmf per latent channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Regime {
    pub channels: Vec<Pmf>,
}

impl Regime {
    pub fn iid(pmf: Pmf, c_l: usize) -> Self {
        Self {
            channels: vec![pmf; c_l],
        }
    }

    pub fn entropy(&self) -> f64 {
        self.channels.iter().map(Pmf::entropy).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeLayout {
    /// Every location draws its regime uniformly at random.
    Random,
    /// Vertical bands of equal width, regime 0 on the left.
    Columns,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSourceSpec {
    pub c_l: usize,
    pub regimes: Vec<Regime>,
    pub layout: RegimeLayout,
    pub seed: u64,
}

impl SyntheticSourceSpec {
    pub fn new(c_l: usize, regimes: Vec<Regime>, layout: RegimeLayout, seed: u64) -> Result<Self> {
        if c_l == 0 || regimes.is_empty() {
            return Err(Error::usage("synthetic source needs channels and regimes"));
        }
        if regimes.iter().any(|r| r.channels.len() != c_l) {
            return Err(Error::usage("every regime needs one pmf per channel"));
        }
        Ok(Self {
            c_l,
            regimes,
            layout,
            seed,
        })
    }

    /// Single regime, every channel uniform over `n` symbols centered on zero.
    pub fn uniform(c_l: usize, n: usize, seed: u64) -> Self {
        let first = -(n as i32 / 2);
        Self::new(c_l, vec![Regime::iid(Pmf::uniform(first, n), c_l)], RegimeLayout::Random, seed)
            .expect("valid preset")
    }

    /// `k` discrete-Laplace regimes whose centers sit 4 symbols apart.
    pub fn separated_regimes(c_l: usize, k: usize, seed: u64) -> Self {
        let regimes = (0..k as i32)
            .map(|r| {
                let center = 4 * r - 2 * (k as i32 - 1);
                Regime::iid(Pmf::discrete_laplace(center, 1.0, 2), c_l)
            })
            .collect();
        Self::new(c_l, regimes, RegimeLayout::Random, seed).expect("valid preset")
    }

    /// Two zero-centered regimes: a narrow one and a wide one.
    pub fn narrow_wide(c_l: usize, seed: u64) -> Self {
        let regimes = vec![
            Regime::iid(Pmf::discrete_laplace(0, 0.5, 3), c_l),
            Regime::iid(Pmf::discrete_laplace(0, 4.0, 12), c_l),
        ];
        Self::new(c_l, regimes, RegimeLayout::Random, seed).expect("valid preset")
    }

    pub fn n_regimes(&self) -> usize {
        self.regimes.len()
    }

    /// Smallest and largest symbol with nonzero probability in any regime.
    pub fn support(&self) -> (i32, i32) {
        self.regimes
            .iter()
            .flat_map(|r| &r.channels)
            .fold((i32::MAX, i32::MIN), |(lo, hi), p| {
                (lo.min(p.first()), hi.max(p.last()))
            })
    }

    /// Mean per-symbol entropy when every regime is equally likely.
    pub fn mean_regime_entropy_per_symbol(&self) -> f64 {
        let total: f64 = self.regimes.iter().map(Regime::entropy).sum();
        total / (self.regimes.len() * self.c_l) as f64
    }

    fn regime_at(&self, l: usize, w_l: usize, rng: &mut impl Rng) -> usize {
        match self.layout {
            RegimeLayout::Random => rng.gen_range(0..self.regimes.len()),
            RegimeLayout::Columns => l * self.regimes.len() / w_l.max(1),
        }
    }
}

/// Draw from a synthetic source together with its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticSample {
    pub latent: QuantizedLatent,
    /// Generating regime per location, raster order.
    pub labels: Vec<usize>,
    /// Exact entropy in bits of each location's channel column.
    pub entropy: Vec<f64>,
}

struct Samplers(Vec<Vec<WeightedIndex<f64>>>);

impl Samplers {
    fn new(spec: &SyntheticSourceSpec) -> Self {
        Self(
            spec.regimes
                .iter()
                .map(|r| {
                    r.channels
                        .iter()
                        .map(|p| WeightedIndex::new(p.probs()).expect("validated pmf"))
                        .collect()
                })
                .collect(),
        )
    }

    fn sample(
        &self,
        spec: &SyntheticSourceSpec,
        h_l: usize,
        w_l: usize,
        rng: &mut impl Rng,
    ) -> SyntheticSample {
        let shape = LatentShape::new(spec.c_l, h_l, w_l);
        let mut symbols = Vec::with_capacity(shape.len());
        let mut labels = Vec::with_capacity(shape.locations());
        let mut entropy = Vec::with_capacity(shape.locations());
        for _k in 0..h_l {
            for l in 0..w_l {
                let r = spec.regime_at(l, w_l, rng);
                let regime = &spec.regimes[r];
                for (pmf, dist) in regime.channels.iter().zip(&self.0[r]) {
                    symbols.push(pmf.first() + dist.sample(rng) as i32);
                }
                labels.push(r);
                entropy.push(regime.entropy());
            }
        }
        SyntheticSample {
            latent: QuantizedLatent::new(shape, symbols).expect("shape filled"),
            labels,
            entropy,
        }
    }
}

/// One-shot draw seeded from `spec.seed`.
pub fn sample_synthetic(spec: &SyntheticSourceSpec, h_l: usize, w_l: usize) -> SyntheticSample {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Samplers::new(spec).sample(spec, h_l, w_l, &mut rng)
}

/// Endless stream of synthetic latents of a fixed grid size.
pub struct SyntheticSource {
    spec: SyntheticSourceSpec,
    samplers: Samplers,
    h_l: usize,
    w_l: usize,
    rng: ChaCha8Rng,
}

impl SyntheticSource {
    pub fn new(spec: SyntheticSourceSpec, h_l: usize, w_l: usize) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(spec.seed);
        Self {
            samplers: Samplers::new(&spec),
            spec,
            h_l,
            w_l,
            rng,
        }
    }

    pub fn spec(&self) -> &SyntheticSourceSpec {
        &self.spec
    }

    /// Next draw with labels and entropies.
    pub fn next_sample(&mut self) -> SyntheticSample {
        self.samplers
            .sample(&self.spec, self.h_l, self.w_l, &mut self.rng)
    }
}

impl LatentSource for SyntheticSource {
    fn c_l(&self) -> usize {
        self.spec.c_l
    }

    fn next_latent(&mut self) -> QuantizedLatent {
        self.next_sample().latent
    }

    fn symbol_range(&self) -> (i32, i32) {
        self.spec.support()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_has_zero_entropy() {
        let spec = SyntheticSourceSpec::new(3, vec![Regime::iid(Pmf::point(2), 3)], RegimeLayout::Random, 0)
            .unwrap();
        let s = sample_synthetic(&spec, 4, 5);
        assert!(s.latent.symbols().iter().all(|&v| v == 2));
        assert!(s.entropy.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn uniform_eight_is_three_bits() {
        assert_eq!(Pmf::uniform(-4, 8).entropy(), 3.0);
        let spec = SyntheticSourceSpec::uniform(4, 8, 0);
        assert_eq!(spec.support(), (-4, 3));
        let s = sample_synthetic(&spec, 2, 2);
        assert!(s.entropy.iter().all(|&h| h == 12.0));
    }

    #[test]
    fn empirical_frequencies_within_three_sigma() {
        let pmf = Pmf::discrete_laplace(1, 1.5, 4);
        let spec = SyntheticSourceSpec::new(1, vec![Regime::iid(pmf.clone(), 1)], RegimeLayout::Random, 9)
            .unwrap();
        let n = 1_000_000usize;
        let s = sample_synthetic(&spec, 1000, 1000);
        let mut counts = vec![0usize; pmf.probs().len()];
        for &v in s.latent.symbols() {
            counts[(v - pmf.first()) as usize] += 1;
        }
        for (i, &count) in counts.iter().enumerate() {
            let p = pmf.probs()[i];
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            let dev = (count as f64 - n as f64 * p).abs();
            assert!(dev <= 3.0 * sigma, "symbol {i}: {count} vs {}", n as f64 * p);
        }
    }

    #[test]
    fn columns_layout_labels() {
        let spec = SyntheticSourceSpec {
            layout: RegimeLayout::Columns,
            ..SyntheticSourceSpec::separated_regimes(2, 4, 0)
        };
        let s = sample_synthetic(&spec, 1, 8);
        assert_eq!(s.labels, vec![0, 0, 1, 1, 2, 2, 3, 3]);
    }

    #[test]
    fn invalid_pmfs() {
        assert!(Pmf::new(0, vec![0.5, 0.4]).is_err());
        assert!(Pmf::new(0, vec![]).is_err());
        assert!(Pmf::new(0, vec![1.5, -0.5]).is_err());
    }
}
