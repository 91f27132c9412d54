//! Driving one or more statistic strategies over a shared rank history.

use crate::alternatives::StatisticStrategy;
use crate::eprocess::EProcess;
use crate::error::Result;
use crate::ranks::{RankHistory, RankPair};

/// A strategy paired with the test martingale it feeds.
pub struct SequentialTest {
    strategy: Box<dyn StatisticStrategy>,
    process: EProcess,
}

impl SequentialTest {
    pub fn new(strategy: Box<dyn StatisticStrategy>, alpha: f64) -> Result<Self> {
        Ok(Self {
            strategy,
            process: EProcess::new(alpha)?,
        })
    }

    pub fn process(&self) -> &EProcess {
        &self.process
    }

    pub fn strategy(&self) -> &dyn StatisticStrategy {
        self.strategy.as_ref()
    }

    pub fn snapshot(&self) -> (crate::alternatives::StrategyState, EProcess) {
        (self.strategy.snapshot(), self.process.clone())
    }

    pub fn restore(&mut self, state: crate::alternatives::StrategyState, process: EProcess) -> Result<()> {
        self.strategy.restore(state)?;
        self.process = process;
        Ok(())
    }
}

/// Outcome of one observation for each test.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub ranks: RankPair,
    pub evalues: Vec<f64>,
}

/// Feeds `y` to every test. Statistics are committed before `y` is ranked.
///
/// Tests listed in `skip` (by index) are left untouched; the harness uses this
/// to stop updating tests that already rejected. Their e-value is reported as 1.
pub fn step_tests(
    history: &mut RankHistory,
    tests: &mut [SequentialTest],
    y: f64,
    skip: &[bool],
) -> Result<StepOutcome> {
    let active = |i: usize| !skip.get(i).copied().unwrap_or(false);
    let mut statistics = Vec::with_capacity(tests.len());
    for (i, test) in tests.iter_mut().enumerate() {
        statistics.push(if active(i) {
            Some(test.strategy.next_statistic(history)?)
        } else {
            None
        });
    }
    let q = history.next_null_probs();
    let ranks = history.push(y)?;
    let mut evalues = Vec::with_capacity(tests.len());
    for (test, statistic) in tests.iter_mut().zip(&statistics) {
        match statistic {
            Some(statistic) => {
                let e = statistic.e_value(&ranks, &q)?;
                test.process.absorb(e)?;
                test.strategy.observe(statistic, &ranks, &q)?;
                evalues.push(e);
            }
            None => evalues.push(1.0),
        }
    }
    Ok(StepOutcome { ranks, evalues })
}
