//! Statistics implied by a Gaussian mean-shift alternative on the outcomes.
//!
//! Ranks are invariant to common location and scale changes, so the
//! alternative is parameterised by the standardised effect size
//! `(mu_post - mu_pre) / sigma` alone.
//!
//! For reduced ranks the conditional law given the pre-treatment outcomes is
//! available in closed form: with pre outcomes sorted as `x_(1) < .. < x_(T0)`
//! a post observation lands in slot `j` with probability
//! `g(j | x) = Φ(x_(j) - δ) - Φ(x_(j-1) - δ)`. The statistic for the next
//! reduced rank is the Monte Carlo average over standard normal draws `x^m`
//! of `Π_j g(j | x^m)^{n_j + 1[j = r]}`, where `n_j` counts earlier reduced
//! ranks in slot `j`. The product is kept per draw as a log-weight so the
//! average is a weighted mean of `g(r | x^m)`.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::normal::interval_prob;
use crate::ranks::{NullCategorical, RankHistory, RankPair};
use crate::rng::{purpose, stream};

use super::{expect_state, Statistic, StatisticStrategy, StrategyState};

/// Draws whose log-weight trails the best by more than this are skipped.
const NEGLIGIBLE_LOG_WEIGHT: f64 = 45.0;
/// Draws trailing by more than this are dropped for the rest of the stream.
const PRUNE_LOG_WEIGHT: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianAltConfig {
    /// Standardised effect size `(mu_post - mu_pre) / sigma`.
    pub effect_size: f64,
    /// Monte Carlo draws `M`.
    pub mc_draws: usize,
    pub seed: u64,
    /// Per-period effect sizes for the generic alternative; the last entry is
    /// repeated when the path is shorter than the horizon.
    pub mu_path: Option<Vec<f64>>,
}

impl GaussianAltConfig {
    pub fn new(effect_size: f64, mc_draws: usize, seed: u64) -> Self {
        Self {
            effect_size,
            mc_draws,
            seed,
            mu_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mc_draws == 0 {
            return Err(Error::Config("mc_draws must be at least 1".into()));
        }
        if !self.effect_size.is_finite() {
            return Err(Error::Config(format!("effect size {} is not finite", self.effect_size)));
        }
        if let Some(path) = &self.mu_path {
            if path.is_empty() || path.iter().any(|m| !m.is_finite()) {
                return Err(Error::Config("mu_path must be non-empty and finite".into()));
            }
        }
        Ok(())
    }
}

/// Slot probabilities `g(j | x^m)` for a fixed bank of pre-treatment draws.
#[derive(Debug, Clone)]
pub struct GaussianBank {
    t0: usize,
    draws: usize,
    effect_size: f64,
    probs: Vec<f64>,
    log_probs: Vec<f64>,
}

impl GaussianBank {
    pub fn new(effect_size: f64, t0: usize, draws: usize, seed: u64) -> Self {
        let mut rng = stream(seed, &[purpose::GAUSSIAN_BANK, t0 as u64]);
        let slots = t0 + 1;
        let mut probs = Vec::with_capacity(draws * slots);
        let mut row = vec![0.0; t0];
        for _ in 0..draws {
            row.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
            row.sort_by(f64::total_cmp);
            for j in 0..slots {
                let lo = if j == 0 {
                    f64::NEG_INFINITY
                } else {
                    row[j - 1] - effect_size
                };
                let hi = if j == t0 { f64::INFINITY } else { row[j] - effect_size };
                probs.push(interval_prob(lo, hi));
            }
        }
        let log_probs = probs.iter().map(|p| p.ln()).collect();
        Self {
            t0,
            draws,
            effect_size,
            probs,
            log_probs,
        }
    }

    pub fn t0(&self) -> usize {
        self.t0
    }

    pub fn draws(&self) -> usize {
        self.draws
    }

    pub fn effect_size(&self) -> f64 {
        self.effect_size
    }

    fn slots(&self) -> usize {
        self.t0 + 1
    }

    /// Log-weights `Σ_j n_j log g(j | x^m)` for slot counts `n`.
    pub fn log_weights(&self, counts: &[u64]) -> Vec<f64> {
        (0..self.draws)
            .map(|m| {
                let row = &self.log_probs[m * self.slots()..(m + 1) * self.slots()];
                counts
                    .iter()
                    .zip(row)
                    .filter(|(&n, _)| n > 0)
                    .map(|(&n, &lg)| n as f64 * lg)
                    .sum()
            })
            .collect()
    }

    /// Adds `log g(slot | x^m)` to every draw's log-weight.
    pub fn accumulate(&self, log_weights: &mut [f64], reduced_rank: usize) {
        let slots = self.slots();
        for (m, lw) in log_weights.iter_mut().enumerate() {
            *lw += self.log_probs[m * slots + reduced_rank - 1];
        }
    }

    /// Normalised statistic `S̃(1..=T0+1)` from per-draw log-weights.
    pub fn statistic(&self, log_weights: &[f64]) -> Vec<f64> {
        self.statistic_over(log_weights, 0..self.draws)
    }

    fn statistic_over(&self, log_weights: &[f64], draws: impl Iterator<Item = usize> + Clone) -> Vec<f64> {
        let slots = self.slots();
        let top = draws.clone().map(|m| log_weights[m]).fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return vec![1.0 / slots as f64; slots];
        }
        let mut acc = vec![0.0; slots];
        let mut total = 0.0;
        for m in draws {
            let gap = log_weights[m] - top;
            if gap < -NEGLIGIBLE_LOG_WEIGHT {
                continue;
            }
            let w = gap.exp();
            total += w;
            let row = &self.probs[m * slots..(m + 1) * slots];
            acc.iter_mut().zip(row).for_each(|(a, &g)| *a += w * g);
        }
        acc.iter_mut().for_each(|a| *a /= total);
        acc
    }
}

/// One-shot reduced-rank Gaussian statistic given earlier reduced ranks.
pub fn gaussian_statistic_reduced(cfg: &GaussianAltConfig, t0: usize, observed: &[usize]) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut counts = vec![0u64; t0 + 1];
    for &r in observed {
        if r == 0 || r > t0 + 1 {
            return Err(Error::InvalidInput(format!("reduced rank {r} outside 1..={}", t0 + 1)));
        }
        counts[r - 1] += 1;
    }
    let bank = GaussianBank::new(cfg.effect_size, t0, cfg.mc_draws, cfg.seed);
    Ok(bank.statistic(&bank.log_weights(&counts)))
}

/// Incremental reduced-rank Gaussian strategy over a fixed draw bank.
///
/// Draws that fall more than 100 log-units behind the leading draw are
/// dropped for good (their log-weight becomes `-inf`), so long streams only
/// touch the handful of draws that still carry weight.
#[derive(Debug, Clone)]
pub struct GaussianReducedStrategy {
    bank: Arc<GaussianBank>,
    log_weights: Vec<f64>,
    active: Vec<usize>,
}

impl GaussianReducedStrategy {
    pub fn new(bank: Arc<GaussianBank>) -> Self {
        let log_weights = vec![0.0; bank.draws()];
        let active = (0..bank.draws()).collect();
        Self {
            bank,
            log_weights,
            active,
        }
    }

    pub fn from_config(cfg: &GaussianAltConfig, t0: usize) -> Result<Self> {
        cfg.validate()?;
        Ok(Self::new(Arc::new(GaussianBank::new(
            cfg.effect_size,
            t0,
            cfg.mc_draws,
            cfg.seed,
        ))))
    }

    pub fn bank(&self) -> &GaussianBank {
        &self.bank
    }

    pub fn current(&self) -> Vec<f64> {
        self.bank.statistic_over(&self.log_weights, self.active.iter().copied())
    }

    /// Number of draws still carrying weight.
    pub fn active_draws(&self) -> usize {
        self.active.len()
    }

    fn prune(&mut self) {
        let lw = &mut self.log_weights;
        let top = self.active.iter().map(|&m| lw[m]).fold(f64::NEG_INFINITY, f64::max);
        self.active.retain(|&m| {
            let keep = lw[m] >= top - PRUNE_LOG_WEIGHT;
            if !keep {
                lw[m] = f64::NEG_INFINITY;
            }
            keep
        });
    }
}

impl StatisticStrategy for GaussianReducedStrategy {
    fn next_statistic(&mut self, history: &RankHistory) -> Result<Statistic> {
        if history.t0() != self.bank.t0() {
            return Err(Error::State(format!(
                "bank built for T0 = {} used with T0 = {}",
                self.bank.t0(),
                history.t0()
            )));
        }
        Ok(Statistic::Reduced(self.current()))
    }

    fn observe(&mut self, _: &Statistic, ranks: &RankPair, _: &NullCategorical) -> Result<()> {
        if ranks.reduced == 0 || ranks.reduced > self.bank.slots() {
            return Err(Error::InvalidInput(format!(
                "reduced rank {} outside 1..={}",
                ranks.reduced,
                self.bank.slots()
            )));
        }
        let slots = self.bank.slots();
        for &m in &self.active {
            self.log_weights[m] += self.bank.log_probs[m * slots + ranks.reduced - 1];
        }
        self.prune();
        Ok(())
    }

    fn snapshot(&self) -> StrategyState {
        StrategyState::Gaussian {
            log_weights: self.log_weights.clone(),
        }
    }

    fn restore(&mut self, state: StrategyState) -> Result<()> {
        match state {
            StrategyState::Gaussian { log_weights } if log_weights.len() == self.bank.draws() => {
                self.active = (0..log_weights.len())
                    .filter(|&m| log_weights[m] > f64::NEG_INFINITY)
                    .collect();
                self.log_weights = log_weights;
                Ok(())
            }
            other => expect_state(other, |_| false),
        }
    }
}

/// Gaussian outcome model on the raw scale, used by the generic estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeModel {
    pub mean_pre: f64,
    /// Post-treatment means by period; the last entry repeats.
    pub mean_post: Vec<f64>,
    pub sd: f64,
}

impl OutcomeModel {
    pub fn standardised(cfg: &GaussianAltConfig) -> Self {
        Self {
            mean_pre: 0.0,
            mean_post: cfg.mu_path.clone().unwrap_or_else(|| vec![cfg.effect_size]),
            sd: 1.0,
        }
    }

    fn post_mean(&self, k: usize) -> f64 {
        self.mean_post[k.min(self.mean_post.len() - 1)]
    }
}

/// Estimated conditional law of the next sequential rank.
#[derive(Debug, Clone, PartialEq)]
pub struct GenericGaussianEstimate {
    /// Normalised statistic over `1..=t`.
    pub statistic: Vec<f64>,
    /// Simulated paths whose rank prefix matched the observed one.
    pub matches: usize,
}

/// Prefix-matching estimate of `Q(R_t = r | R_{T0+1..t-1})`.
///
/// Simulates `draws` outcome paths, keeps those whose sequential ranks agree
/// with `observed` and tallies the rank of observation `t`; counts get add-one
/// smoothing. With no matching path the result is uniform.
pub fn simulate_generic(
    model: &OutcomeModel,
    t0: usize,
    observed: &[usize],
    draws: usize,
    seed: u64,
) -> Result<GenericGaussianEstimate> {
    if t0 == 0 || model.mean_post.is_empty() || !(model.sd > 0.0) {
        return Err(Error::Config(
            "outcome model needs T0 >= 1, a post mean and sd > 0".into(),
        ));
    }
    let t = t0 + observed.len() + 1;
    for (k, &r) in observed.iter().enumerate() {
        if r == 0 || r > t0 + k + 1 {
            return Err(Error::InvalidInput(format!(
                "sequential rank {r} invalid at t = {}",
                t0 + k + 1
            )));
        }
    }
    let mut rng = stream(seed, &[purpose::GENERIC_PATHS, t as u64]);
    let mut counts = vec![0usize; t];
    let mut matches = 0;
    let mut sorted: Vec<f64> = Vec::with_capacity(t);
    'paths: for _ in 0..draws {
        sorted.clear();
        for _ in 0..t0 {
            let z: f64 = rng.sample(StandardNormal);
            sorted.push(model.mean_pre + model.sd * z);
        }
        sorted.sort_by(f64::total_cmp);
        for k in 0..=observed.len() {
            let z: f64 = rng.sample(StandardNormal);
            let y = model.post_mean(k) + model.sd * z;
            let below = sorted.partition_point(|&s| s < y);
            match observed.get(k) {
                Some(&r) if r != below + 1 => continue 'paths,
                Some(_) => sorted.insert(below, y),
                None => {
                    counts[below] += 1;
                    matches += 1;
                }
            }
        }
    }
    if matches == 0 {
        log::warn!("no simulated path matched the observed rank prefix at t = {t}; using a uniform statistic");
    }
    let total = (matches + t) as f64;
    Ok(GenericGaussianEstimate {
        statistic: counts.iter().map(|&c| (c + 1) as f64 / total).collect(),
        matches,
    })
}

/// Generic-alternative Gaussian statistic for the rank at `t`, given the
/// sequential ranks `R_{T0+1..t-1}`.
pub fn gaussian_statistic_generic(
    cfg: &GaussianAltConfig,
    t0: usize,
    observed: &[usize],
    t: usize,
) -> Result<GenericGaussianEstimate> {
    cfg.validate()?;
    if t != t0 + observed.len() + 1 {
        return Err(Error::State(format!(
            "t = {t} inconsistent with T0 = {t0} and {} observed ranks",
            observed.len()
        )));
    }
    simulate_generic(&OutcomeModel::standardised(cfg), t0, observed, cfg.mc_draws, cfg.seed)
}

/// Generic-alternative Gaussian strategy; re-simulates every step.
#[derive(Debug, Clone)]
pub struct GaussianGenericStrategy {
    cfg: GaussianAltConfig,
}

impl GaussianGenericStrategy {
    pub fn new(cfg: GaussianAltConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }
}

impl StatisticStrategy for GaussianGenericStrategy {
    fn next_statistic(&mut self, history: &RankHistory) -> Result<Statistic> {
        let est = gaussian_statistic_generic(&self.cfg, history.t0(), history.seq_ranks(), history.next_t())?;
        Ok(Statistic::Generic(est.statistic))
    }

    fn observe(&mut self, _: &Statistic, _: &RankPair, _: &NullCategorical) -> Result<()> {
        Ok(())
    }

    fn snapshot(&self) -> StrategyState {
        StrategyState::Stateless
    }

    fn restore(&mut self, state: StrategyState) -> Result<()> {
        expect_state(state, |s| matches!(s, StrategyState::Stateless))
    }
}
