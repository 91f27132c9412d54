//! Plug-in statistic: a kernel density estimate of past smoothed ranks.

use crate::error::{Error, Result};
use crate::ranks::{smoothed_rank, NullCategorical, RankHistory, RankPair};
use crate::rng::{purpose, uniform_open};

use super::kde::ReflectedKde;
use super::{expect_state, Statistic, StatisticStrategy, StrategyState};

/// Lower bound on the kernel bandwidth.
pub const MIN_BANDWIDTH: f64 = 0.05;

/// Accumulated smoothed ranks `V_{T0+1..t-1}` and the jitter stream.
#[derive(Debug, Clone, PartialEq)]
pub struct PluginState {
    samples: Vec<f64>,
    init_statistic: Option<Vec<f64>>,
    seed: u64,
    min_bandwidth: f64,
}

impl PluginState {
    pub fn new(seed: u64) -> Self {
        Self {
            samples: Vec::new(),
            init_statistic: None,
            seed,
            min_bandwidth: MIN_BANDWIDTH,
        }
    }

    /// Statistic used at `t = T0 + 1`, before any smoothed rank exists.
    pub fn with_init_statistic(mut self, init: Vec<f64>) -> Self {
        self.init_statistic = Some(init);
        self
    }

    pub fn with_min_bandwidth(mut self, min_bandwidth: f64) -> Self {
        self.min_bandwidth = min_bandwidth;
        self
    }

    /// Smoothed ranks seen so far, ascending.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Jitter `u_t`, uniform on (0, 1) and independent of all data.
    pub fn jitter(&self, t: usize) -> f64 {
        uniform_open(self.seed, &[purpose::JITTER, t as u64])
    }

    pub fn density(&self) -> Option<ReflectedKde> {
        ReflectedKde::fit(&self.samples, self.min_bandwidth)
    }

    /// `S_t(r) = f̂_t((r - u_t) / t)`.
    pub fn generic_statistic(&self, t: usize) -> DensityStatistic {
        let init = self
            .init_statistic
            .as_ref()
            .filter(|init| self.samples.is_empty() && init.len() == t)
            .cloned();
        DensityStatistic {
            kde: self.density(),
            init,
            t,
            jitter: self.jitter(t),
        }
    }

    /// `S̃_t(r) = F̂(q^1 + .. + q^r) - F̂(q^1 + .. + q^{r-1})`.
    pub fn reduced_statistic(&self, q: &NullCategorical) -> Vec<f64> {
        self.reduced_density().values(q)
    }

    /// Lazy form of [`Self::reduced_statistic`].
    pub fn reduced_density(&self) -> ReducedDensityStatistic {
        ReducedDensityStatistic {
            kde: self.density(),
            init: self.init_statistic.clone().filter(|_| self.samples.is_empty()),
        }
    }

    /// Adds `V_t = (R_t - u_t) / t`.
    pub fn record(&mut self, seq_rank: usize, t: usize) -> Result<f64> {
        let v = smoothed_rank(seq_rank, t, self.jitter(t))?;
        let at = self.samples.partition_point(|&s| s < v);
        self.samples.insert(at, v);
        Ok(v)
    }
}

/// Plug-in statistic over sequential ranks, evaluated lazily because only
/// the realised rank is ever scored.
#[derive(Debug, Clone)]
pub struct DensityStatistic {
    kde: Option<ReflectedKde>,
    init: Option<Vec<f64>>,
    t: usize,
    jitter: f64,
}

impl DensityStatistic {
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `S_t(r)`.
    pub fn score(&self, r: usize) -> f64 {
        match (&self.kde, &self.init) {
            (Some(kde), _) => kde.pdf((r as f64 - self.jitter) / self.t as f64),
            (None, Some(init)) => init[r - 1],
            (None, None) => 1.0,
        }
    }

    /// E-value with unit denominator: the density integrates to one over the
    /// uniform law of `V_t`, so no normalisation over ranks is needed.
    pub fn e_value(&self, r: usize) -> Result<f64> {
        if r == 0 || r > self.t {
            return Err(Error::InvalidInput(format!("rank {r} outside 1..={}", self.t)));
        }
        match (&self.kde, &self.init) {
            (Some(_), _) => Ok(self.score(r)),
            (None, Some(init)) => crate::eprocess::e_value_generic(init, r),
            (None, None) => Ok(1.0),
        }
    }
}

/// Reduced plug-in statistic, evaluated lazily at the realised reduced rank.
///
/// `S̃(r) = F̂(c_r) - F̂(c_{r-1})` with `c` the cumulative null law, so
/// `Σ S̃ = F̂(1) - F̂(0) = 1` and the e-value is `S̃(R̃) / q^{R̃}`.
#[derive(Debug, Clone)]
pub struct ReducedDensityStatistic {
    kde: Option<ReflectedKde>,
    init: Option<Vec<f64>>,
}

impl ReducedDensityStatistic {
    /// The full vector `S̃(1..=T0+1)` under the null law `q`.
    pub fn values(&self, q: &NullCategorical) -> Vec<f64> {
        (1..=q.len()).map(|r| self.score(r, q)).collect()
    }

    fn score(&self, r: usize, q: &NullCategorical) -> f64 {
        match (&self.kde, &self.init) {
            (Some(kde), _) => {
                let below: u64 = q.numerators()[..r - 1].iter().sum();
                let lo = below as f64 / q.t() as f64;
                let hi = (below + q.numerators()[r - 1]) as f64 / q.t() as f64;
                (kde.cdf(hi) - kde.cdf(lo)).max(0.0)
            }
            (None, Some(init)) if init.len() == q.len() => init[r - 1],
            _ => q.prob(r),
        }
    }

    pub fn e_value(&self, r: usize, q: &NullCategorical) -> Result<f64> {
        if r == 0 || r > q.len() {
            return Err(Error::InvalidInput(format!("reduced rank {r} outside 1..={}", q.len())));
        }
        match (&self.kde, &self.init) {
            (Some(_), _) => Ok(self.score(r, q) / q.prob(r)),
            _ => crate::eprocess::e_value_reduced(&self.values(q), r, q),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PluginVariant {
    Generic,
    Reduced,
}

/// Plug-in strategy over either sequential or reduced ranks.
#[derive(Debug, Clone)]
pub struct PluginStrategy {
    state: PluginState,
    variant: PluginVariant,
}

impl PluginStrategy {
    pub fn new(state: PluginState, variant: PluginVariant) -> Self {
        Self { state, variant }
    }

    pub fn state(&self) -> &PluginState {
        &self.state
    }
}

impl StatisticStrategy for PluginStrategy {
    fn next_statistic(&mut self, history: &RankHistory) -> Result<Statistic> {
        Ok(match self.variant {
            PluginVariant::Generic => Statistic::Density(self.state.generic_statistic(history.next_t())),
            PluginVariant::Reduced => Statistic::ReducedDensity(self.state.reduced_density()),
        })
    }

    fn observe(&mut self, _: &Statistic, ranks: &RankPair, _: &NullCategorical) -> Result<()> {
        self.state.record(ranks.seq, ranks.t).map(|_| ())
    }

    fn snapshot(&self) -> StrategyState {
        StrategyState::Plugin {
            samples: self.state.samples.clone(),
        }
    }

    fn restore(&mut self, state: StrategyState) -> Result<()> {
        match state {
            StrategyState::Plugin { samples } => {
                self.state.samples = samples;
                Ok(())
            }
            other => expect_state(other, |_| false),
        }
    }
}
