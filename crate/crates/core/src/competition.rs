//! Competition of priors: every latent location is claimed by the prior
//! with the lowest bitcost, and only that prior learns from it.
//!
//! A training step
//! 1. evaluates every `(prior, channel)` CPM on the symbol range of the batch,
//! 2. assigns each location to its argmin prior (ties go to the lower index),
//! 3. hands the highest-cost locations to priors that have not won anything
//!    for [`TrainerConfig::revive_after`] steps,
//! 4. backpropagates each location's bitcost into its assigned prior only,
//! 5. applies Adam to the priors that received gradient, leaving every
//!    other prior (including its moments) untouched.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::latent::QuantizedLatent;
use crate::probability_model::{
    interval_mass, MonotoneCdfParams, PreparedUnit, MASS_FLOOR,
};
use crate::transform::LatentSource;

/// Winning prior per latent location, raster order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PriorIndexMap {
    h_l: usize,
    w_l: usize,
    idx: Vec<u16>,
}

impl PriorIndexMap {
    pub fn new(h_l: usize, w_l: usize, idx: Vec<u16>, n_cdf: usize) -> Result<Self> {
        if idx.len() != h_l * w_l {
            return Err(Error::usage("index map size does not match its shape"));
        }
        if let Some(bad) = idx.iter().find(|&&i| i as usize >= n_cdf) {
            return Err(Error::usage(format!("prior index {bad} >= n_cdf {n_cdf}")));
        }
        Ok(Self { h_l, w_l, idx })
    }

    pub fn zeros(h_l: usize, w_l: usize) -> Self {
        Self {
            h_l,
            w_l,
            idx: vec![0; h_l * w_l],
        }
    }

    pub fn h_l(&self) -> usize {
        self.h_l
    }

    pub fn w_l(&self) -> usize {
        self.w_l
    }

    pub fn get(&self, k: usize, l: usize) -> usize {
        self.idx[k * self.w_l + l] as usize
    }

    pub fn as_slice(&self) -> &[u16] {
        &self.idx
    }

    /// Number of locations won by each prior.
    pub fn histogram(&self, n_cdf: usize) -> Vec<usize> {
        let mut counts = vec![0; n_cdf];
        for &i in &self.idx {
            counts[i as usize] += 1;
        }
        counts
    }
}

/// Sum over channels of the continuous bitcost of location `(k, l)` under `prior`.
pub fn location_bitcost(
    params: &MonotoneCdfParams,
    latent: &QuantizedLatent,
    k: usize,
    l: usize,
    prior: usize,
) -> Result<f64> {
    check_latent(params, latent)?;
    if k >= latent.h_l() || l >= latent.w_l() {
        return Err(Error::usage(format!("location ({k}, {l}) outside latent")));
    }
    latent
        .location(k, l)
        .iter()
        .enumerate()
        .map(|(c, &s)| params.symbol_bitcost(prior, c, s))
        .sum()
}

fn check_latent(params: &MonotoneCdfParams, latent: &QuantizedLatent) -> Result<()> {
    if latent.c_l() != params.c_l() {
        return Err(Error::usage(format!(
            "latent has {} channels, model has {}",
            latent.c_l(),
            params.c_l()
        )));
    }
    Ok(())
}

/// Continuous bitcost of every `(prior, channel, symbol)` over the symbol
/// range each channel takes in one latent. Entries match
/// [`MonotoneCdfParams::symbol_bitcost`] exactly.
///
/// Layout per prior: the channels' ranges back to back, so a prior's
/// block is `per_prior = offset[c_l]` entries long.
struct BitcostTable {
    lo: Vec<i32>,
    offset: Vec<usize>,
    costs: Vec<f64>,
}

impl BitcostTable {
    fn build(params: &MonotoneCdfParams, latent: &QuantizedLatent) -> Self {
        let c_l = params.c_l();
        let mut lo = vec![i32::MAX; c_l];
        let mut hi = vec![i32::MIN; c_l];
        for symbols in latent.locations() {
            for (c, &s) in symbols.iter().enumerate() {
                lo[c] = lo[c].min(s);
                hi[c] = hi[c].max(s);
            }
        }
        let mut offset = Vec::with_capacity(c_l + 1);
        offset.push(0);
        for c in 0..c_l {
            if lo[c] > hi[c] {
                (lo[c], hi[c]) = (0, 0);
            }
            offset.push(offset[c] + (hi[c] - lo[c] + 1) as usize);
        }
        let per_prior = offset[c_l];
        let mut costs = vec![0.0; params.n_cdf() * per_prior];
        costs.par_chunks_mut(per_prior).enumerate().for_each(|(p, block)| {
            for c in 0..c_l {
                let unit = PreparedUnit::new(params.unit_unchecked(p, c));
                let out = &mut block[offset[c]..offset[c + 1]];
                let mut z_lo = unit.logit(lo[c] as f64 - 0.5);
                for (j, cost) in out.iter_mut().enumerate() {
                    let z_hi = unit.logit((lo[c] + j as i32) as f64 + 0.5);
                    *cost = -interval_mass(z_lo, z_hi).max(MASS_FLOOR).log2();
                    z_lo = z_hi;
                }
            }
        });
        Self { lo, offset, costs }
    }

    fn per_prior(&self) -> usize {
        self.offset[self.lo.len()]
    }

    /// Position of `symbol` of channel `c` within a prior block.
    #[inline]
    fn slot(&self, c: usize, symbol: i32) -> usize {
        self.offset[c] + (symbol - self.lo[c]) as usize
    }

    #[inline]
    fn location_cost(&self, prior: usize, symbols: &[i32]) -> f64 {
        let block = &self.costs[prior * self.per_prior()..(prior + 1) * self.per_prior()];
        symbols
            .iter()
            .enumerate()
            .map(|(c, &s)| block[self.slot(c, s)])
            .sum()
    }

    fn first_non_finite(&self) -> Option<(usize, usize)> {
        let i = self.costs.iter().position(|v| !v.is_finite())?;
        let within = i % self.per_prior();
        let channel = self.offset.partition_point(|&o| o <= within) - 1;
        Some((i / self.per_prior(), channel))
    }
}

/// Per-location assignment together with each location's winning cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub map: PriorIndexMap,
    pub costs: Vec<f64>,
}

impl Assignment {
    pub fn total_bits(&self) -> f64 {
        self.costs.iter().sum()
    }
}

fn assign_with_table(table: &BitcostTable, latent: &QuantizedLatent, n_cdf: usize) -> Assignment {
    let picks: Vec<(u16, f64)> = latent
        .symbols()
        .par_chunks(latent.c_l())
        .map(|symbols| {
            let mut best = (0u16, table.location_cost(0, symbols));
            for p in 1..n_cdf {
                let cost = table.location_cost(p, symbols);
                if cost < best.1 {
                    best = (p as u16, cost);
                }
            }
            best
        })
        .collect();
    let (idx, costs) = picks.into_iter().unzip();
    Assignment {
        map: PriorIndexMap {
            h_l: latent.h_l(),
            w_l: latent.w_l(),
            idx,
        },
        costs,
    }
}

/// Argmin-bitcost prior for every location, and the summed minimum cost in bits.
pub fn assign_priors(
    params: &MonotoneCdfParams,
    latent: &QuantizedLatent,
) -> Result<(PriorIndexMap, f64)> {
    let a = assignment(params, latent)?;
    let total = a.total_bits();
    Ok((a.map, total))
}

/// Like [`assign_priors`] but keeps per-location costs.
pub fn assignment(params: &MonotoneCdfParams, latent: &QuantizedLatent) -> Result<Assignment> {
    check_latent(params, latent)?;
    let table = BitcostTable::build(params, latent);
    Ok(assign_with_table(&table, latent, params.n_cdf()))
}

/// Mean bits per symbol of `latents` under argmin assignment.
pub fn evaluate_rate(params: &MonotoneCdfParams, latents: &[QuantizedLatent]) -> Result<f64> {
    let mut bits = 0.0;
    let mut symbols = 0usize;
    for latent in latents {
        bits += assign_priors(params, latent)?.1;
        symbols += latent.shape().len();
    }
    if symbols == 0 {
        return Err(Error::usage("validation set is empty"));
    }
    Ok(bits / symbols as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// A prior that has won nothing for this many steps gets revived.
    pub revive_after: u64,
    /// Revived priors pick among this many highest-cost locations.
    pub revive_top_k: usize,
    pub eval_every: u64,
    pub lr_decay: f64,
    /// Consecutive non-improving validation tests before the LR decays.
    pub patience: u32,
    /// Steps per line of training output in the report.
    pub report_every: u64,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            revive_after: 50,
            revive_top_k: 8,
            eval_every: 2500,
            lr_decay: 0.99,
            patience: 2,
            report_every: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationPoint {
    pub step: u64,
    pub rate: f64,
    pub lr: f64,
}

/// Optimizer and bookkeeping state owned by one training run.
#[derive(Debug, Clone)]
pub struct TrainerState {
    pub config: TrainerConfig,
    pub step: u64,
    /// Last step at which each prior won (or was revived onto) a location.
    pub last_used: Vec<u64>,
    pub lr: f64,
    pub plateau: u32,
    pub history: Vec<ValidationPoint>,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    updates: Vec<u64>,
    best_validation: Option<f64>,
    rng: ChaCha8Rng,
}

impl TrainerState {
    pub fn new(params: &MonotoneCdfParams, config: TrainerConfig) -> Result<Self> {
        if !(config.lr > 0.0) {
            return Err(Error::usage("learning rate must be positive"));
        }
        let n = params.values().len();
        Ok(Self {
            step: 0,
            last_used: vec![0; params.n_cdf()],
            lr: config.lr,
            plateau: 0,
            history: Vec::new(),
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
            updates: vec![0; params.n_cdf()],
            best_validation: None,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
        })
    }

    /// Largest `step - last_used` over all priors.
    pub fn max_unused_lag(&self) -> u64 {
        self.last_used
            .iter()
            .map(|&u| self.step - u)
            .max()
            .unwrap_or(0)
    }

    /// Records a validation result and applies the plateau LR rule.
    /// Returns whether it is the best so far.
    pub fn record_validation(&mut self, rate: f64) -> bool {
        let improved = self.best_validation.is_none_or(|best| rate < best);
        if improved {
            self.best_validation = Some(rate);
            self.plateau = 0;
        } else {
            self.plateau += 1;
            if self.plateau >= self.config.patience {
                self.lr *= self.config.lr_decay;
                self.plateau = 0;
            }
        }
        self.history.push(ValidationPoint {
            step: self.step,
            rate,
            lr: self.lr,
        });
        improved
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub step: u64,
    /// Mean minimum bitcost per symbol before revival.
    pub rate: f64,
    pub priors_in_use: usize,
    pub revived: Vec<usize>,
    /// Priors whose parameters were updated this step.
    pub updated: Vec<usize>,
}

/// Hands each dead prior one of the highest-cost locations of the batch.
///
/// A prior is dead when it won nothing in `assignment` and
/// `state.step - last_used >= revive_after`. Locations
/// are drawn without replacement, uniformly among the `revive_top_k`
/// costliest (widened if more priors are dead than that).
pub fn revive_dead_priors(state: &mut TrainerState, assignment: &mut Assignment) -> Vec<usize> {
    let step = state.step;
    let mut winning = vec![false; state.last_used.len()];
    for &p in assignment.map.as_slice() {
        winning[p as usize] = true;
    }
    let dead: Vec<usize> = (0..state.last_used.len())
        .filter(|&p| !winning[p] && step - state.last_used[p] >= state.config.revive_after)
        .collect();
    let n_loc = assignment.costs.len();
    if dead.is_empty() || n_loc == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..n_loc).collect();
    order.sort_by(|&a, &b| assignment.costs[b].total_cmp(&assignment.costs[a]).then(a.cmp(&b)));
    let pool = state.config.revive_top_k.max(dead.len()).min(n_loc).max(1);

    let mut revived = Vec::with_capacity(dead.len());
    let mut picks = sample(&mut state.rng, pool, dead.len().min(pool)).into_vec();
    for (n, &p) in dead.iter().enumerate() {
        if n >= picks.len() {
            picks.push(state.rng.gen_range(0..pool));
        }
        let loc = order[picks[n]];
        assignment.map.idx[loc] = p as u16;
        state.last_used[p] = step;
        revived.push(p);
    }
    revived
}

/// One winner-take-all update on `latent`.
pub fn train_step(
    state: &mut TrainerState,
    params: &mut MonotoneCdfParams,
    latent: &QuantizedLatent,
) -> Result<StepReport> {
    check_latent(params, latent)?;
    if state.last_used.len() != params.n_cdf() || state.first_moment.len() != params.values().len() {
        return Err(Error::usage("trainer state was built for a different model"));
    }
    state.step += 1;
    let n_symbols = latent.shape().len();
    if n_symbols == 0 {
        return Err(Error::usage("empty training latent"));
    }

    let table = BitcostTable::build(params, latent);
    let mut assignment = assign_with_table(&table, latent, params.n_cdf());
    let total = assignment.total_bits();
    if !total.is_finite() {
        let (prior, channel) = table.first_non_finite().unwrap_or((0, 0));
        return Err(Error::NonFinite { prior, channel });
    }
    let revived = revive_dead_priors(state, &mut assignment);
    // After revival, so a prior whose only location was handed over stays idle.
    for &p in assignment.map.as_slice() {
        state.last_used[p as usize] = state.step;
    }

    // Histogram of symbols per (assigned prior, channel), laid out like the table.
    let c_l = params.c_l();
    let per_prior = table.per_prior();
    let mut counts = vec![0u32; params.n_cdf() * per_prior];
    let mut touched = vec![false; params.n_cdf()];
    for (symbols, &p) in latent.locations().zip(assignment.map.as_slice()) {
        let p = p as usize;
        touched[p] = true;
        let base = p * per_prior;
        for (c, &s) in symbols.iter().enumerate() {
            counts[base + table.slot(c, s)] += 1;
        }
    }

    let unit_len = params.unit_len();
    let scale = 1.0 / n_symbols as f64;
    let mut grad = vec![0.0; params.values().len()];
    {
        let params = &*params;
        grad.par_chunks_mut(unit_len)
            .enumerate()
            .filter(|(u, _)| touched[u / c_l])
            .for_each(|(u, g)| {
                let (p, c) = (u / c_l, u % c_l);
                let unit = PreparedUnit::new(params.unit_unchecked(p, c));
                let base = p * per_prior;
                let hist = &counts[base + table.offset[c]..base + table.offset[c + 1]];
                for (j, &n) in hist.iter().enumerate() {
                    if n > 0 {
                        unit.bitcost_grad(table.lo[c] + j as i32, n as f64 * scale, g);
                    }
                }
            });
    }

    let updated: Vec<usize> = (0..params.n_cdf()).filter(|&p| touched[p]).collect();
    let prior_params = c_l * unit_len;
    let cfg = &state.config;
    for &p in &updated {
        state.updates[p] += 1;
        let t = state.updates[p] as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let range = p * prior_params..(p + 1) * prior_params;
        let values = &mut params.values_mut()[range.clone()];
        let m = &mut state.first_moment[range.clone()];
        let v = &mut state.second_moment[range.clone()];
        for (((x, m), v), g) in values.iter_mut().zip(m).zip(v).zip(&grad[range]) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *x -= state.lr * (*m / bc1) / ((*v / bc2).sqrt() + cfg.eps);
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                prior: p,
                channel: i / unit_len,
            });
        }
    }

    Ok(StepReport {
        step: state.step,
        rate: total / n_symbols as f64,
        priors_in_use: updated.len(),
        revived,
        updated,
    })
}

#[derive(Debug, Clone, Default)]
pub struct FitReport {
    /// Line-oriented text log (one header line, then one row per event).
    pub log: String,
    pub initial_rate: f64,
    pub best_rate: f64,
    pub best_step: u64,
    pub final_lr: f64,
    pub total_revivals: usize,
    /// Largest `step - last_used` seen at the end of any step.
    pub max_unused_lag: u64,
}

const REPORT_HEADER: &str = "# kind step rate_bits_per_symbol lr priors_in_use revivals\n";

/// Trains for `steps` steps and leaves the best-validating snapshot in `params`.
///
/// Validation runs before training, every `eval_every` steps, and after the
/// last step.
pub fn fit(
    state: &mut TrainerState,
    params: &mut MonotoneCdfParams,
    source: &mut dyn LatentSource,
    steps: u64,
    validation: &[QuantizedLatent],
) -> Result<FitReport> {
    if steps == 0 {
        return Err(Error::usage("fit needs at least one step"));
    }
    if source.c_l() != params.c_l() {
        return Err(Error::usage("source and model disagree on channel count"));
    }
    let mut report = FitReport {
        log: REPORT_HEADER.to_string(),
        ..Default::default()
    };
    let initial = evaluate_rate(params, validation)?;
    state.record_validation(initial);
    report.initial_rate = initial;
    report.best_rate = initial;
    report.best_step = state.step;
    push_line(&mut report.log, "validate", state.step, initial, state.lr, 0, 0);
    let mut best = params.clone();
    let mut diverging = 0;

    let mut window = (0.0, 0u64, 0usize, 0usize);
    for i in 1..=steps {
        let latent = source.next_latent();
        let step = train_step(state, params, &latent)?;
        report.total_revivals += step.revived.len();
        report.max_unused_lag = report.max_unused_lag.max(state.max_unused_lag());

        window.0 += step.rate;
        window.1 += 1;
        window.2 = window.2.max(step.priors_in_use);
        window.3 += step.revived.len();
        if state.step % state.config.report_every == 0 || i == steps {
            let rate = window.0 / window.1 as f64;
            push_line(&mut report.log, "train", state.step, rate, state.lr, window.2, window.3);
            window = (0.0, 0, 0, 0);
        }

        if state.step % state.config.eval_every == 0 || i == steps {
            let rate = evaluate_rate(params, validation)?;
            if state.record_validation(rate) {
                best = params.clone();
                report.best_rate = rate;
                report.best_step = state.step;
            }
            push_line(&mut report.log, "validate", state.step, rate, state.lr, 0, 0);
            diverging = if rate > 2.0 * initial { diverging + 1 } else { 0 };
            if diverging >= 3 {
                return Err(Error::Diverged { rate, initial });
            }
        }
    }
    *params = best;
    report.final_lr = state.lr;
    Ok(report)
}

fn push_line(log: &mut String, kind: &str, step: u64, rate: f64, lr: f64, in_use: usize, revivals: usize) {
    let _ = writeln!(log, "{kind} {step} {rate:.6} {lr:.8} {in_use} {revivals}");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::LatentShape;
    use crate::probability_model::SymbolAlphabet;
    use crate::transform::{SyntheticSource, SyntheticSourceSpec};

    fn model(n_cdf: usize, c_l: usize) -> MonotoneCdfParams {
        MonotoneCdfParams::init(n_cdf, c_l, SymbolAlphabet::new(-6, 6).unwrap(), 3).unwrap()
    }

    fn latent(c_l: usize, h: usize, w: usize, seed: u64) -> QuantizedLatent {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = LatentShape::new(c_l, h, w);
        let symbols = (0..shape.len()).map(|_| rng.gen_range(-4..=4)).collect();
        QuantizedLatent::new(shape, symbols).unwrap()
    }

    #[test]
    fn single_prior_assigns_zero_everywhere() {
        let p = model(1, 3);
        let (map, total) = assign_priors(&p, &latent(3, 4, 5, 1)).unwrap();
        assert!(map.as_slice().iter().all(|&i| i == 0));
        assert!(total > 0.0);
    }

    #[test]
    fn duplicate_prior_never_wins() {
        let mut p = model(3, 2);
        let n = p.c_l() * p.unit_len();
        let copy = p.prior(1).to_vec();
        p.values_mut()[2 * n..3 * n].copy_from_slice(&copy);
        let (map, _) = assign_priors(&p, &latent(2, 6, 6, 2)).unwrap();
        assert!(map.as_slice().iter().all(|&i| i != 2));
    }

    #[test]
    fn table_costs_match_direct_evaluation() {
        let p = model(4, 3);
        let lat = latent(3, 3, 3, 5);
        let a = assignment(&p, &lat).unwrap();
        for k in 0..3 {
            for l in 0..3 {
                let i = a.map.get(k, l);
                let direct = location_bitcost(&p, &lat, k, l, i).unwrap();
                assert_eq!(direct, a.costs[k * 3 + l]);
            }
        }
    }

    #[test]
    fn channel_mismatch_is_usage_error() {
        let p = model(2, 3);
        assert!(matches!(assign_priors(&p, &latent(4, 2, 2, 0)), Err(Error::Usage(_))));
        assert!(matches!(
            location_bitcost(&p, &latent(3, 2, 2, 0), 2, 0, 0),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn no_revival_when_all_priors_recent() {
        let p = model(3, 2);
        let mut state = TrainerState::new(&p, TrainerConfig::default()).unwrap();
        state.step = 120;
        state.last_used = vec![100, 71, 119];
        let mut a = assignment(&p, &latent(2, 3, 3, 1)).unwrap();
        let before = a.clone();
        assert!(revive_dead_priors(&mut state, &mut a).is_empty());
        assert_eq!(a, before);
    }

    #[test]
    fn dead_prior_is_moved_to_a_top_cost_location() {
        let mut p = model(4, 2);
        // Prior 3 sits far off the data so it wins nothing on its own.
        let unit = p.unit_len();
        let base = 3 * p.c_l() * unit;
        for u in 0..2 {
            p.values_mut()[base + u * unit + 1] += 50.0;
        }
        let mut state = TrainerState::new(&p, TrainerConfig::default()).unwrap();
        state.step = 60;
        state.last_used = vec![60, 60, 60, 10];
        let mut a = assignment(&p, &latent(2, 5, 5, 4)).unwrap();
        assert!(!a.map.as_slice().contains(&3));
        let mut order: Vec<usize> = (0..25).collect();
        order.sort_by(|&x, &y| a.costs[y].total_cmp(&a.costs[x]).then(x.cmp(&y)));
        let revived = revive_dead_priors(&mut state, &mut a);
        assert_eq!(revived, vec![3]);
        assert_eq!(state.last_used[3], 60);
        let moved: Vec<usize> = (0..25).filter(|&i| a.map.as_slice()[i] == 3).collect();
        assert_eq!(moved.len(), 1);
        assert!(order[..8].contains(&moved[0]));
    }

    #[test]
    fn lr_decays_after_two_flat_tests() {
        let p = model(1, 1);
        let mut state = TrainerState::new(&p, TrainerConfig::default()).unwrap();
        assert!(state.record_validation(3.0));
        assert!(!state.record_validation(3.0));
        assert_eq!(state.lr, 1e-3);
        assert!(!state.record_validation(3.5));
        assert_eq!(state.lr, 0.99 * 1e-3);
        assert!(state.record_validation(2.9));
        assert_eq!(state.plateau, 0);
    }

    #[test]
    fn idle_prior_is_bitwise_frozen() {
        let mut p = model(2, 2);
        // Push prior 1 far away so it never wins.
        let unit = p.unit_len();
        let n = p.c_l() * unit;
        for u in 0..2 {
            p.values_mut()[n + u * unit + 1] += 50.0;
        }
        let mut state = TrainerState::new(&p, TrainerConfig::default()).unwrap();
        let frozen = p.prior(1).to_vec();
        for s in 0..20 {
            let report = train_step(&mut state, &mut p, &latent(2, 4, 4, s)).unwrap();
            assert_eq!(report.updated, vec![0]);
        }
        assert_eq!(p.prior(1), &frozen[..]);
    }

    #[test]
    fn fit_rejects_zero_steps() {
        let mut p = model(1, 2);
        let mut state = TrainerState::new(&p, TrainerConfig::default()).unwrap();
        let mut src = SyntheticSource::new(SyntheticSourceSpec::uniform(2, 4, 0), 2, 2);
        let val = vec![src.next_latent()];
        assert!(matches!(
            fit(&mut state, &mut p, &mut src, 0, &val),
            Err(Error::Usage(_))
        ));
    }
}
