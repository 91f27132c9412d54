//! Test statistics for the rank e-values.
//!
//! A [`StatisticStrategy`] commits to the next statistic using only the
//! history up to `t - 1`; the rank of observation `t` is revealed to it only
//! afterwards through [`StatisticStrategy::observe`]. This ordering is what
//! makes every statistic predictable, and hence every e-value valid, no
//! matter how the statistic was estimated.

mod gaussian;
mod kde;
mod mixture;
mod plugin;

pub use gaussian::{
    gaussian_statistic_generic, gaussian_statistic_reduced, GaussianAltConfig, GaussianBank, GaussianGenericStrategy,
    GaussianReducedStrategy, GenericGaussianEstimate, OutcomeModel,
};
pub use kde::ReflectedKde;
pub use mixture::{mixture_step, MixtureMode, MixtureState, MixtureStrategy, DEFAULT_MULTIPLIERS};
pub use plugin::{
    DensityStatistic, PluginState, PluginStrategy, PluginVariant, ReducedDensityStatistic, MIN_BANDWIDTH,
};

use serde::{Deserialize, Serialize};

use crate::eprocess::{e_value_generic, e_value_reduced};
use crate::error::{Error, Result};
use crate::ranks::{NullCategorical, RankHistory, RankPair};

/// A committed test statistic for one time step.
#[derive(Debug, Clone)]
pub enum Statistic {
    /// `S(1..=t)` scored against the sequential rank.
    Generic(Vec<f64>),
    /// `S̃(1..=T0+1)` scored against the reduced rank.
    Reduced(Vec<f64>),
    /// Plug-in density of smoothed ranks, scored with a unit denominator.
    Density(DensityStatistic),
    /// Plug-in distribution function over reduced-rank slots.
    ReducedDensity(ReducedDensityStatistic),
    /// Convex combination of candidate e-values with predictable weights.
    Mixture { parts: Vec<Statistic>, weights: Vec<f64> },
}

impl Statistic {
    pub fn e_value(&self, ranks: &RankPair, q: &NullCategorical) -> Result<f64> {
        match self {
            Statistic::Generic(values) => {
                if values.len() != ranks.t {
                    return Err(Error::InvalidStatistic(format!(
                        "generic statistic has {} values at t = {}",
                        values.len(),
                        ranks.t
                    )));
                }
                e_value_generic(values, ranks.seq)
            }
            Statistic::Reduced(values) => e_value_reduced(values, ranks.reduced, q),
            Statistic::Density(density) => density.e_value(ranks.seq),
            Statistic::ReducedDensity(density) => density.e_value(ranks.reduced, q),
            Statistic::Mixture { parts, weights } => {
                let evalues = self.candidate_evalues(ranks, q)?;
                debug_assert_eq!(parts.len(), weights.len());
                Ok(weights.iter().zip(&evalues).map(|(w, e)| w * e).sum())
            }
        }
    }

    /// Per-candidate e-values of a mixture; a single-element vector otherwise.
    pub fn candidate_evalues(&self, ranks: &RankPair, q: &NullCategorical) -> Result<Vec<f64>> {
        match self {
            Statistic::Mixture { parts, .. } => parts.iter().map(|p| p.e_value(ranks, q)).collect(),
            other => Ok(vec![other.e_value(ranks, q)?]),
        }
    }
}

/// Serializable internal state of a strategy, used by monitor checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StrategyState {
    Stateless,
    Plugin {
        samples: Vec<f64>,
    },
    Gaussian {
        log_weights: Vec<f64>,
    },
    Mixture {
        mixture: MixtureState,
        parts: Vec<StrategyState>,
    },
}

/// Producer of predictable test statistics.
pub trait StatisticStrategy: Send {
    /// Statistic for the next observation, from information strictly before it.
    fn next_statistic(&mut self, history: &RankHistory) -> Result<Statistic>;

    /// Reveals the ranks of the observation the statistic was committed for.
    fn observe(&mut self, statistic: &Statistic, ranks: &RankPair, q: &NullCategorical) -> Result<()>;

    fn snapshot(&self) -> StrategyState;

    fn restore(&mut self, state: StrategyState) -> Result<()>;
}

/// Uniform statistic: every e-value equals 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformStrategy;

impl StatisticStrategy for UniformStrategy {
    fn next_statistic(&mut self, history: &RankHistory) -> Result<Statistic> {
        Ok(Statistic::Generic(vec![1.0; history.next_t()]))
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

pub(crate) fn expect_state(state: StrategyState, ok: impl Fn(&StrategyState) -> bool) -> Result<()> {
    if ok(&state) {
        Ok(())
    } else {
        Err(Error::Checkpoint(format!(
            "strategy state {state:?} does not match the strategy"
        )))
    }
}
