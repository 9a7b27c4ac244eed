use mprs::{MonotoneCdfParams, SymbolAlphabet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn softplus(x: f64) -> f64 {
    (1.0 + x.exp()).ln()
}

/// Straight transcription of the four-layer map, kept apart from the library.
fn reference_cdf(unit: &[f64], x: f64) -> f64 {
    let depth = (unit.len() + 1) / 3;
    let mut h = x;
    for k in 0..depth {
        let u = softplus(unit[3 * k]) * h + unit[3 * k + 1];
        h = if k + 1 < depth { u + unit[3 * k + 2].tanh() * u.tanh() } else { u };
    }
    1.0 / (1.0 + (-h).exp())
}

fn perturbed_model(rng: &mut ChaCha8Rng) -> MonotoneCdfParams {
    let alphabet = SymbolAlphabet::new(-10, 10).unwrap();
    let mut p = MonotoneCdfParams::init(3, 4, alphabet, rng.gen()).unwrap();
    for v in p.values_mut() {
        *v += rng.gen_range(-0.5..0.5);
    }
    p
}

#[test]
fn forward_matches_reference_transcription() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = perturbed_model(&mut rng);
    for _ in 0..200 {
        let (prior, channel) = (rng.gen_range(0..3), rng.gen_range(0..4));
        let symbol = rng.gen_range(-6..=6);
        let unit = p.unit(prior, channel).unwrap();
        let mass = reference_cdf(unit, symbol as f64 + 0.5) - reference_cdf(unit, symbol as f64 - 0.5);
        let got = p.symbol_bitcost(prior, channel, symbol).unwrap();
        assert!((got + mass.log2()).abs() < 1e-9, "{got} vs {}", -mass.log2());
    }
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mut p = perturbed_model(&mut rng);
        let (prior, channel) = (rng.gen_range(0..3), rng.gen_range(0..4));
        let symbol = rng.gen_range(-6..=6);
        let grad = p.bitcost_grad(prior, channel, symbol).unwrap();
        let offset = (prior * p.c_l() + channel) * p.unit_len();
        let h = 1e-6;
        let mut err = 0.0;
        let mut norm = 0.0;
        for (j, g) in grad.iter().enumerate() {
            let keep = p.values()[offset + j];
            p.values_mut()[offset + j] = keep + h;
            let up = p.symbol_bitcost(prior, channel, symbol).unwrap();
            p.values_mut()[offset + j] = keep - h;
            let down = p.symbol_bitcost(prior, channel, symbol).unwrap();
            p.values_mut()[offset + j] = keep;
            let fd = (up - down) / (2.0 * h);
            err += (g - fd) * (g - fd);
            norm += fd * fd;
        }
        worst = worst.max((err / norm).sqrt());
    }
    assert!(worst < 1e-3, "worst relative error {worst:e}");
}
