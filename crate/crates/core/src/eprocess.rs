//! Sequential e-values and the test martingale built from them.
//!
//! Wealth is tracked on the log scale: products of a few hundred e-values
//! leave the range of `f64`. By Ville's inequality the probability that the
//! wealth ever reaches `1/alpha` under the null is at most `alpha`, so the
//! process can be monitored continuously and stopped at any time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranks::NullCategorical;

/// Default significance level.
pub const DEFAULT_ALPHA: f64 = 0.05;

// Slack on the rejection threshold so that e.g. 4 * 5 counts as reaching 20.
const THRESHOLD_SLACK: f64 = 1e-12;

fn check_statistic(values: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidStatistic(format!("S({}) = {v}", i + 1)));
        }
        total += v;
    }
    Ok(total)
}

/// E-value for the sequential rank: `S(R_t) / mean_i S(i)` over `i in 1..=t`,
/// with `0/0 = 1`. `statistic[i - 1]` holds `S(i)` and its length is `t`.
pub fn e_value_generic(statistic: &[f64], rank: usize) -> Result<f64> {
    let total = check_statistic(statistic)?;
    let t = statistic.len();
    if rank == 0 || rank > t {
        return Err(Error::InvalidInput(format!("rank {rank} outside 1..={t}")));
    }
    let numerator = statistic[rank - 1];
    if total == 0.0 {
        return Ok(1.0);
    }
    Ok(numerator * t as f64 / total)
}

/// E-value for the reduced rank: `(S̃(R̃_t) / q^{R̃_t}) / sum_i S̃(i)`, with `0/0 = 1`.
pub fn e_value_reduced(statistic: &[f64], rank: usize, q: &NullCategorical) -> Result<f64> {
    let total = check_statistic(statistic)?;
    if statistic.len() != q.len() {
        return Err(Error::InvalidStatistic(format!(
            "statistic has {} slots but the null law has {}",
            statistic.len(),
            q.len()
        )));
    }
    if rank == 0 || rank > q.len() {
        return Err(Error::InvalidInput(format!(
            "reduced rank {rank} outside 1..={}",
            q.len()
        )));
    }
    let q_r = q.prob(rank);
    if q_r <= 0.0 {
        return Err(Error::State(format!("null probability of slot {rank} is zero")));
    }
    if total == 0.0 {
        return Ok(1.0);
    }
    Ok(statistic[rank - 1] / q_r / total)
}

/// Log-scale test martingale with a rejection latch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EProcess {
    log_wealth: f64,
    log_wealth_max: f64,
    step: usize,
    alpha: f64,
    rejected: bool,
    rejected_at: Option<usize>,
}

impl Default for EProcess {
    fn default() -> Self {
        Self::new(DEFAULT_ALPHA).expect("default alpha is valid")
    }
}

impl EProcess {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Ok(Self {
            log_wealth: 0.0,
            log_wealth_max: 0.0,
            step: 0,
            alpha,
            rejected: false,
            rejected_at: None,
        })
    }

    /// Multiplies the wealth by `e`. Zero is allowed and absorbs the wealth at 0.
    pub fn absorb(&mut self, e: f64) -> Result<()> {
        if !(e >= 0.0) || !e.is_finite() {
            return Err(Error::InvalidEValue(e));
        }
        self.log_wealth += e.ln();
        self.step += 1;
        if self.log_wealth > self.log_wealth_max {
            self.log_wealth_max = self.log_wealth;
        }
        if !self.rejected && self.log_wealth + THRESHOLD_SLACK >= self.log_threshold() {
            self.rejected = true;
            self.rejected_at = Some(self.step);
        }
        Ok(())
    }

    pub fn log_threshold(&self) -> f64 {
        -self.alpha.ln()
    }

    pub fn log_wealth(&self) -> f64 {
        self.log_wealth
    }

    pub fn log_wealth_max(&self) -> f64 {
        self.log_wealth_max
    }

    pub fn wealth(&self) -> f64 {
        self.log_wealth.exp()
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn rejected(&self) -> bool {
        self.rejected
    }

    /// Step (1-based count of absorbed e-values) at which the latch closed.
    pub fn rejected_at(&self) -> Option<usize> {
        self.rejected_at
    }

    /// Anytime-valid p-value `min(1, 1 / max_s W_s)`; non-increasing in time.
    pub fn anytime_p(&self) -> f64 {
        (-self.log_wealth_max).exp().min(1.0)
    }

    /// `min(1, 1 / W_t)` using the current wealth only. Also anytime-valid,
    /// but it can increase again after a drop in wealth.
    pub fn current_p(&self) -> f64 {
        (-self.log_wealth).exp().min(1.0)
    }
}
