//! Mixtures over candidate statistics.
//!
//! *Adaptive*: the mixture wealth is the plain average of the candidate
//! wealths, `W̃_t = (1/k) Σ_j W_t^j`, so each step's e-value is the
//! wealth-weighted average of candidate e-values. The log-regret against the
//! best candidate never exceeds `log k`.
//!
//! *Average*: each step's e-value is the unweighted mean of the candidates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranks::{NullCategorical, RankHistory, RankPair};

use super::{Statistic, StatisticStrategy, StrategyState};

/// Effect-size multipliers used for the default candidate grid.
pub const DEFAULT_MULTIPLIERS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixtureMode {
    Adaptive,
    Average,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureState {
    log_wealths: Vec<f64>,
    log_mixture_wealth: f64,
    mode: MixtureMode,
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + values.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
}

impl MixtureState {
    pub fn new(k: usize, mode: MixtureMode) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("a mixture needs at least one candidate".into()));
        }
        Ok(Self {
            log_wealths: vec![0.0; k],
            log_mixture_wealth: 0.0,
            mode,
        })
    }

    pub fn k(&self) -> usize {
        self.log_wealths.len()
    }

    pub fn mode(&self) -> MixtureMode {
        self.mode
    }

    pub fn candidate_log_wealths(&self) -> &[f64] {
        &self.log_wealths
    }

    pub fn log_wealth(&self) -> f64 {
        self.log_mixture_wealth
    }

    /// Predictable mixing weights for the next step (they sum to one).
    pub fn weights(&self) -> Vec<f64> {
        let k = self.k();
        match self.mode {
            MixtureMode::Average => vec![1.0 / k as f64; k],
            MixtureMode::Adaptive => {
                let norm = log_sum_exp(&self.log_wealths);
                if norm == f64::NEG_INFINITY {
                    // Every candidate is broke; the mixture wealth is already zero.
                    return vec![1.0 / k as f64; k];
                }
                self.log_wealths.iter().map(|lw| (lw - norm).exp()).collect()
            }
        }
    }

    /// `max_j log W_t^j - log W̃_t`.
    pub fn regret(&self) -> f64 {
        let best = self.log_wealths.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        best - self.log_mixture_wealth
    }

    /// Absorbs one e-value per candidate and returns the mixture e-value.
    pub fn step(&mut self, evalues: &[f64]) -> Result<f64> {
        if evalues.len() != self.k() {
            return Err(Error::Config(format!(
                "mixture has {} candidates but received {} e-values",
                self.k(),
                evalues.len()
            )));
        }
        if let Some(&bad) = evalues.iter().find(|e| !(**e >= 0.0) || !e.is_finite()) {
            return Err(Error::InvalidEValue(bad));
        }
        let e_mix: f64 = self.weights().iter().zip(evalues).map(|(w, e)| w * e).sum();
        for (lw, e) in self.log_wealths.iter_mut().zip(evalues) {
            *lw += e.ln();
        }
        self.log_mixture_wealth += e_mix.ln();
        Ok(e_mix)
    }
}

/// Free-function form of [`MixtureState::step`].
pub fn mixture_step(state: &mut MixtureState, evalues: &[f64]) -> Result<f64> {
    state.step(evalues)
}

/// Strategy mixing the statistics of several candidate strategies.
pub struct MixtureStrategy {
    candidates: Vec<Box<dyn StatisticStrategy>>,
    state: MixtureState,
}

impl MixtureStrategy {
    pub fn new(candidates: Vec<Box<dyn StatisticStrategy>>, mode: MixtureMode) -> Result<Self> {
        let state = MixtureState::new(candidates.len(), mode)?;
        Ok(Self { candidates, state })
    }

    pub fn state(&self) -> &MixtureState {
        &self.state
    }
}

impl StatisticStrategy for MixtureStrategy {
    fn next_statistic(&mut self, history: &RankHistory) -> Result<Statistic> {
        let parts = self
            .candidates
            .iter_mut()
            .map(|c| c.next_statistic(history))
            .collect::<Result<Vec<_>>>()?;
        Ok(Statistic::Mixture {
            parts,
            weights: self.state.weights(),
        })
    }

    fn observe(&mut self, statistic: &Statistic, ranks: &RankPair, q: &NullCategorical) -> Result<()> {
        let Statistic::Mixture { parts, .. } = statistic else {
            return Err(Error::State("mixture strategy observed a non-mixture statistic".into()));
        };
        let evalues = statistic.candidate_evalues(ranks, q)?;
        self.state.step(&evalues)?;
        for (candidate, part) in self.candidates.iter_mut().zip(parts) {
            candidate.observe(part, ranks, q)?;
        }
        Ok(())
    }

    fn snapshot(&self) -> StrategyState {
        StrategyState::Mixture {
            mixture: self.state.clone(),
            parts: self.candidates.iter().map(|c| c.snapshot()).collect(),
        }
    }

    fn restore(&mut self, state: StrategyState) -> Result<()> {
        match state {
            StrategyState::Mixture { mixture, parts }
                if parts.len() == self.candidates.len() && mixture.k() == self.candidates.len() =>
            {
                for (candidate, part) in self.candidates.iter_mut().zip(parts) {
                    candidate.restore(part)?;
                }
                self.state = mixture;
                Ok(())
            }
            other => super::expect_state(other, |_| false),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_candidate_passes_through() {
        for mode in [MixtureMode::Adaptive, MixtureMode::Average] {
            let mut state = MixtureState::new(1, mode).unwrap();
            for e in [0.5, 3.0, 1.25] {
                assert_eq!(state.step(&[e]).unwrap(), e);
            }
        }
    }

    #[test]
    fn adaptive_first_step() {
        let mut state = MixtureState::new(2, MixtureMode::Adaptive).unwrap();
        assert!((state.step(&[2.0, 0.5]).unwrap() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn adaptive_weights_follow_wealth() {
        let mut state = MixtureState::new(2, MixtureMode::Adaptive).unwrap();
        state.step(&[3.0, 1.0]).unwrap();
        let w = state.weights();
        assert!((w[0] - 0.75).abs() < 1e-15 && (w[1] - 0.25).abs() < 1e-15);
        let mut avg = MixtureState::new(2, MixtureMode::Average).unwrap();
        avg.step(&[3.0, 1.0]).unwrap();
        assert_eq!(avg.weights(), vec![0.5, 0.5]);
    }

    #[test]
    fn errors() {
        assert!(MixtureState::new(0, MixtureMode::Average).is_err());
        let mut state = MixtureState::new(3, MixtureMode::Adaptive).unwrap();
        assert!(matches!(state.step(&[1.0, 1.0]), Err(Error::Config(_))));
        assert!(matches!(state.step(&[1.0, -1.0, 1.0]), Err(Error::InvalidEValue(_))));
    }
}
