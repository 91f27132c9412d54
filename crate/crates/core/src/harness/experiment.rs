use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alternatives::{
    GaussianBank, GaussianReducedStrategy, MixtureMode, MixtureStrategy, PluginState, PluginStrategy, PluginVariant,
    StatisticStrategy,
};
use crate::error::{Error, Result};
use crate::fixedt::fixed_t_path;
use crate::panel::{
    did_estimates, scm_estimates, scm_weights, simulate_ife, training_characteristics, TreatmentEstimates,
};
use crate::ranks::RankHistory;
use crate::rng::{derive_key, purpose};
use crate::sequential::{step_tests, SequentialTest};

use super::config::{Estimator, ExperimentConfig, TestSpec};

/// First-rejection times per test and replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub tests: Vec<String>,
    /// Post-treatment blocks observed per replication.
    pub horizon: usize,
    /// Blank periods in blocks; the pre-treatment length seen by the tests.
    pub t0_blocks: usize,
    pub replications: usize,
    /// `rejection_times[test][replication]`, counted in post blocks.
    pub rejection_times: Vec<Vec<Option<usize>>>,
}

/// Per-replication data fed to the tests: blank and post block means.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationData {
    pub blanks: Vec<f64>,
    pub post: Vec<f64>,
}

/// Simulates replication `rep` and returns its blocked estimates.
pub fn replication_data(cfg: &ExperimentConfig, rep: usize) -> Result<ReplicationData> {
    let panel = simulate_ife(&cfg.ife(derive_key(cfg.master_seed, &[rep as u64, purpose::PANEL])))?;
    let estimates: TreatmentEstimates = match cfg.estimator {
        Estimator::Did => did_estimates(&panel)?,
        Estimator::Scm => {
            let x = training_characteristics(&panel);
            let sol = scm_weights(&x, &vec![1.0; x.treated.len()])?;
            scm_estimates(&panel, &sol.weights)?
        }
    };
    let (blanks, post) = estimates.blocked(cfg.block_size)?;
    Ok(ReplicationData { blanks, post })
}

/// Draw banks are independent of the data, so one bank per effect size is
/// shared by every replication.
struct Banks {
    by_multiplier: BTreeMap<u64, Arc<GaussianBank>>,
}

impl Banks {
    fn build(cfg: &ExperimentConfig) -> Self {
        let mut mults: Vec<f64> = Vec::new();
        for t in &cfg.tests {
            match t {
                TestSpec::AvGaussian(c) => mults.push(*c),
                TestSpec::AvPlugin | TestSpec::AvPluginGeneric => mults.push(1.0),
                TestSpec::MixAdaptive | TestSpec::MixAverage => mults.extend(&cfg.multipliers),
                _ => {}
            }
        }
        let t0 = cfg.blank_blocks();
        let by_multiplier = mults
            .into_iter()
            .map(|c| {
                let seed = derive_key(cfg.master_seed, &[purpose::GAUSSIAN_BANK, c.to_bits()]);
                (
                    c.to_bits(),
                    Arc::new(GaussianBank::new(cfg.effect_size() * c, t0, cfg.mc_draws, seed)),
                )
            })
            .collect();
        Self { by_multiplier }
    }

    fn get(&self, c: f64) -> Arc<GaussianBank> {
        Arc::clone(&self.by_multiplier[&c.to_bits()])
    }
}

fn build_strategy(
    cfg: &ExperimentConfig,
    banks: &Banks,
    spec: &TestSpec,
    seed: u64,
) -> Result<Box<dyn StatisticStrategy>> {
    let gaussian = |c: f64| -> Box<dyn StatisticStrategy> { Box::new(GaussianReducedStrategy::new(banks.get(c))) };
    let init = || GaussianReducedStrategy::new(banks.get(1.0)).current();
    let mixture = |mode| -> Result<Box<dyn StatisticStrategy>> {
        let parts = cfg.multipliers.iter().map(|&c| gaussian(c)).collect();
        Ok(Box::new(MixtureStrategy::new(parts, mode)?))
    };
    match spec {
        TestSpec::AvGaussian(c) => Ok(gaussian(*c)),
        TestSpec::AvPlugin => Ok(Box::new(PluginStrategy::new(
            PluginState::new(seed).with_init_statistic(init()),
            PluginVariant::Reduced,
        ))),
        TestSpec::AvPluginGeneric => Ok(Box::new(PluginStrategy::new(
            PluginState::new(seed).with_init_statistic(init()),
            PluginVariant::Generic,
        ))),
        TestSpec::MixAdaptive => mixture(MixtureMode::Adaptive),
        TestSpec::MixAverage => mixture(MixtureMode::Average),
        TestSpec::FixedT(_) | TestSpec::RepeatedFixedT => Err(Error::State(format!("{spec} is not sequential"))),
    }
}

fn run_replication(cfg: &ExperimentConfig, banks: &Banks, rep: usize) -> Result<Vec<Option<usize>>> {
    let data = replication_data(cfg, rep)?;
    let key = |path: &[u64]| derive_key(cfg.master_seed, &[&[rep as u64], path].concat());
    let mut times = vec![None; cfg.tests.len()];

    // Fixed-T: one p-value path serves every single and repeated test.
    let mut fixed_len = 0;
    for t in &cfg.tests {
        match t {
            TestSpec::FixedT(k) => fixed_len = fixed_len.max(*k),
            TestSpec::RepeatedFixedT => {
                fixed_len = fixed_len.max(cfg.fixed_t_horizon.unwrap_or(usize::MAX).min(data.post.len()))
            }
            _ => {}
        }
    }
    if fixed_len > 0 {
        let path = fixed_t_path(
            &data.blanks,
            &data.post[..fixed_len],
            cfg.fixed_t_sided,
            cfg.fixed_t_draws,
            key(&[purpose::FIXED_T]),
        )?;
        for (i, t) in cfg.tests.iter().enumerate() {
            times[i] = match t {
                TestSpec::FixedT(k) => (path[k - 1] <= cfg.alpha).then_some(*k),
                TestSpec::RepeatedFixedT => path.iter().position(|&p| p <= cfg.alpha).map(|k| k + 1),
                _ => continue,
            };
        }
    }

    let sequential: Vec<usize> = (0..cfg.tests.len()).filter(|&i| !cfg.tests[i].is_fixed_t()).collect();
    if sequential.is_empty() {
        return Ok(times);
    }
    let mut tests = sequential
        .iter()
        .map(|&i| {
            let strategy = build_strategy(cfg, banks, &cfg.tests[i], key(&[purpose::JITTER, i as u64]))?;
            SequentialTest::new(strategy, cfg.alpha)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut history = RankHistory::new(&data.blanks, key(&[purpose::TIES]))?;
    let mut done = vec![false; tests.len()];
    for (k, &y) in data.post.iter().enumerate() {
        step_tests(&mut history, &mut tests, y, &done)?;
        for (j, test) in tests.iter().enumerate() {
            if !done[j] && test.process().rejected() {
                done[j] = true;
                times[sequential[j]] = Some(k + 1);
            }
        }
        if done.iter().all(|&d| d) {
            break;
        }
    }
    Ok(times)
}

/// Runs every replication in parallel. Each replication derives its own
/// streams from `(master_seed, replication)`, so the result does not depend
/// on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let banks = Banks::build(cfg);
    let per_rep = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| run_replication(cfg, &banks, rep))
        .collect::<Result<Vec<_>>>()?;
    let mut rejection_times = vec![Vec::with_capacity(cfg.replications); cfg.tests.len()];
    for times in per_rep {
        for (i, t) in times.into_iter().enumerate() {
            rejection_times[i].push(t);
        }
    }
    Ok(ExperimentResult {
        tests: cfg.tests.iter().map(ToString::to_string).collect(),
        horizon: cfg.horizon(),
        t0_blocks: cfg.blank_blocks(),
        replications: cfg.replications,
        rejection_times,
    })
}

/// Discount factors `0.01, 0.02, .., 1.00`.
pub fn delta_grid() -> Vec<f64> {
    (1..=100).map(|i| i as f64 / 100.0).collect()
}

impl ExperimentResult {
    pub fn test_index(&self, tag: &str) -> Result<usize> {
        self.tests
            .iter()
            .position(|t| t == tag)
            .ok_or_else(|| Error::UnknownTest(tag.to_string()))
    }

    /// Share of replications rejected by post block `k`, for `k = 1..=horizon`.
    pub fn curve(&self, tag: &str) -> Result<Vec<f64>> {
        let times = &self.rejection_times[self.test_index(tag)?];
        let mut counts = vec![0usize; self.horizon + 1];
        for k in times.iter().flatten() {
            counts[*k] += 1;
        }
        let n = self.replications as f64;
        let mut acc = 0;
        Ok((1..=self.horizon)
            .map(|k| {
                acc += counts[k];
                acc as f64 / n
            })
            .collect())
    }

    /// Rejection rate by the end of the horizon.
    pub fn size(&self, tag: &str) -> Result<f64> {
        Ok(self.curve(tag)?.last().copied().unwrap_or(0.0))
    }

    /// `Σ_k δ^(T0 + k) P̂(rejected by k)`, with times in blocks.
    pub fn discounted_utility(&self, tag: &str, delta: f64) -> Result<f64> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidInput(format!("discount factor {delta} outside (0, 1]")));
        }
        let curve = self.curve(tag)?;
        Ok(curve
            .iter()
            .enumerate()
            .map(|(k, p)| delta.powi((self.t0_blocks + k + 1) as i32) * p)
            .sum())
    }

    /// For each fixed-T test, the discount factors on the 0.01 grid where it
    /// has strictly higher utility than `av_tag`. Ties favour the AV test.
    pub fn preference_region(&self, av_tag: &str, fixed_t: &[usize]) -> Result<Vec<(usize, Vec<f64>)>> {
        let grid = delta_grid();
        let av: Vec<f64> = grid
            .iter()
            .map(|&d| self.discounted_utility(av_tag, d))
            .collect::<Result<_>>()?;
        fixed_t
            .iter()
            .map(|&k| {
                let tag = TestSpec::FixedT(k).to_string();
                let mut region = Vec::new();
                for (&d, &u_av) in grid.iter().zip(&av) {
                    if self.discounted_utility(&tag, d)? > u_av {
                        region.push(d);
                    }
                }
                Ok((k, region))
            })
            .collect()
    }

    /// Writes `results.csv`, `curves.csv`, `utility.csv` and `meta.json`.
    pub fn write_dir(&self, dir: &Path, deltas: &[f64]) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("results.csv"))?;
        w.write_record(["test", "replication", "rejection_time"])?;
        for (tag, times) in self.tests.iter().zip(&self.rejection_times) {
            for (rep, t) in times.iter().enumerate() {
                let t = t.map(|k| k.to_string()).unwrap_or_default();
                w.write_record([tag.as_str(), &rep.to_string(), &t])?;
            }
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("curves.csv"))?;
        w.write_record(["test", "t", "rejection_rate"])?;
        for tag in &self.tests {
            for (k, p) in self.curve(tag)?.iter().enumerate() {
                w.write_record([tag.as_str(), &(k + 1).to_string(), &p.to_string()])?;
            }
        }
        w.flush()?;
        self.write_utility(&dir.join("utility.csv"), deltas)?;
        let meta = serde_json::json!({
            "tests": self.tests,
            "horizon": self.horizon,
            "t0_blocks": self.t0_blocks,
            "replications": self.replications,
        });
        fs::write(
            dir.join("meta.json"),
            serde_json::to_string_pretty(&meta).map_err(|e| Error::Data(e.to_string()))? + "\n",
        )?;
        Ok(())
    }

    pub fn write_utility(&self, path: &Path, deltas: &[f64]) -> Result<()> {
        self.write_utility_to(fs::File::create(path)?, deltas)
    }

    pub fn write_utility_to<W: std::io::Write>(&self, out: W, deltas: &[f64]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["test", "delta", "utility"])?;
        for tag in &self.tests {
            for &d in deltas {
                let label = ((d * 1e10).round() / 1e10).to_string();
                w.write_record([tag.as_str(), &label, &self.discounted_utility(tag, d)?.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads back a directory written by [`ExperimentResult::write_dir`].
    pub fn read_dir(dir: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Meta {
            tests: Vec<String>,
            horizon: usize,
            t0_blocks: usize,
            replications: usize,
        }
        let meta: Meta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)
            .map_err(|e| Error::Data(format!("meta.json: {e}")))?;
        let mut times = vec![vec![None; meta.replications]; meta.tests.len()];
        for row in csv::Reader::from_path(dir.join("results.csv"))?.records() {
            let row = row?;
            let bad = || Error::Data(format!("malformed results row {:?}", row.iter().collect::<Vec<_>>()));
            let i = meta.tests.iter().position(|t| t == &row[0]).ok_or_else(bad)?;
            let rep: usize = row[1].parse().map_err(|_| bad())?;
            if rep >= meta.replications {
                return Err(bad());
            }
            times[i][rep] = match &row[2] {
                "" => None,
                k => Some(k.parse().map_err(|_| bad())?),
            };
        }
        Ok(Self {
            tests: meta.tests,
            horizon: meta.horizon,
            t0_blocks: meta.t0_blocks,
            replications: meta.replications,
            rejection_times: times,
        })
    }
}
