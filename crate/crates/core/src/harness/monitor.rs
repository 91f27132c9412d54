//! Streaming monitor over real estimates, with checkpoint and resume.
//!
//! Statistic specs:
//!
//! | spec                             | statistic                                   |
//! |----------------------------------|---------------------------------------------|
//! | `gaussian:<effect>[:<draws>]`    | reduced-rank Gaussian alternative           |
//! | `plugin` / `plugin-generic`      | plug-in KDE over reduced / sequential ranks |
//! | `mix-adaptive:<effect>[:<draws>]`| adaptive mixture of Gaussian alternatives   |
//! | `mix-average:<effect>[:<draws>]` | average mixture of Gaussian alternatives    |
//! | `uniform`                        | constant statistic (e-values all 1)         |
//!
//! Mixtures use the multipliers `0.25, 0.5, 1, 2, 4` on `<effect>`.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alternatives::{
    GaussianAltConfig, GaussianReducedStrategy, MixtureMode, MixtureStrategy, PluginState, PluginStrategy,
    PluginVariant, StatisticStrategy, StrategyState, UniformStrategy, DEFAULT_MULTIPLIERS,
};
use crate::eprocess::EProcess;
use crate::error::{Error, Result};
use crate::panel::read_estimates_csv;
use crate::ranks::RankHistory;
use crate::rng::derive_key;
use crate::sequential::{step_tests, SequentialTest};

const MAGIC: &[u8; 8] = b"SEQRANK\0";
pub const CHECKPOINT_VERSION: u32 = 1;
const DEFAULT_DRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StatisticSpec {
    Gaussian {
        effect: f64,
        draws: usize,
    },
    Plugin,
    PluginGeneric,
    Mixture {
        mode: MixtureMode,
        effect: f64,
        draws: usize,
    },
    Uniform,
}

impl std::str::FromStr for StatisticSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Config(format!("invalid statistic spec `{s}`"));
        let effect_draws = |rest: &[&str]| -> Result<(f64, usize)> {
            let effect: f64 = rest.first().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let draws = match rest.get(1) {
                Some(d) => d.parse().map_err(|_| bad())?,
                None => DEFAULT_DRAWS,
            };
            if !effect.is_finite() || draws == 0 || rest.len() > 2 {
                return Err(bad());
            }
            Ok((effect, draws))
        };
        match parts[0] {
            "gaussian" => effect_draws(&parts[1..]).map(|(effect, draws)| StatisticSpec::Gaussian { effect, draws }),
            "mix-adaptive" | "mix-average" => {
                let mode = if parts[0] == "mix-adaptive" {
                    MixtureMode::Adaptive
                } else {
                    MixtureMode::Average
                };
                effect_draws(&parts[1..]).map(|(effect, draws)| StatisticSpec::Mixture { mode, effect, draws })
            }
            "plugin" if parts.len() == 1 => Ok(StatisticSpec::Plugin),
            "plugin-generic" if parts.len() == 1 => Ok(StatisticSpec::PluginGeneric),
            "uniform" if parts.len() == 1 => Ok(StatisticSpec::Uniform),
            _ => Err(bad()),
        }
    }
}

/// Monitor settings; their hash guards checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorConfig {
    pub statistic: String,
    pub alpha: f64,
    pub seed: u64,
}

impl MonitorConfig {
    fn hash(&self, pre: &[f64]) -> String {
        let mut h = Sha256::new();
        h.update(format!(
            "statistic={};alpha={};seed={};pre=",
            self.statistic,
            self.alpha.to_bits(),
            self.seed
        ));
        for v in pre {
            h.update(v.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One output row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorRow {
    pub t: usize,
    pub seq_rank: usize,
    pub red_rank: usize,
    pub e: f64,
    pub wealth: f64,
    pub p_anytime: f64,
    pub rejected: bool,
}

#[derive(Serialize, Deserialize)]
struct Payload {
    config_hash: String,
    history: RankHistory,
    strategy: StrategyState,
    process: EProcess,
}

pub struct Monitor {
    config: MonitorConfig,
    config_hash: String,
    history: RankHistory,
    test: SequentialTest,
}

fn build_strategy(spec: StatisticSpec, t0: usize, seed: u64) -> Result<Box<dyn StatisticStrategy>> {
    let gaussian = |effect: f64, draws: usize, label: u64| -> Result<GaussianReducedStrategy> {
        GaussianReducedStrategy::from_config(&GaussianAltConfig::new(effect, draws, derive_key(seed, &[label])), t0)
    };
    Ok(match spec {
        StatisticSpec::Gaussian { effect, draws } => Box::new(gaussian(effect, draws, 0)?),
        StatisticSpec::Plugin => Box::new(PluginStrategy::new(PluginState::new(seed), PluginVariant::Reduced)),
        StatisticSpec::PluginGeneric => Box::new(PluginStrategy::new(PluginState::new(seed), PluginVariant::Generic)),
        StatisticSpec::Mixture { mode, effect, draws } => {
            let parts = DEFAULT_MULTIPLIERS
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    gaussian(effect * c, draws, i as u64 + 1).map(|g| Box::new(g) as Box<dyn StatisticStrategy>)
                })
                .collect::<Result<Vec<_>>>()?;
            Box::new(MixtureStrategy::new(parts, mode)?)
        }
        StatisticSpec::Uniform => Box::new(UniformStrategy),
    })
}

/// Reads blank-period estimates: an estimates CSV (`t,tau_hat,phase`, blank
/// rows used) or one number per line with an optional header.
pub fn read_pre_file(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    if text.trim_start().starts_with("t,tau_hat,phase") {
        let est = read_estimates_csv(text.as_bytes())?;
        if est.blank.is_empty() {
            return Err(Error::Data("estimates file has no blank rows".into()));
        }
        return Ok(est.blank);
    }
    let mut values = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ if n == 0 && values.is_empty() => {} // header
            _ => {
                return Err(Error::Data(format!(
                    "{}: line {} is not a finite number",
                    path.display(),
                    n + 1
                )))
            }
        }
    }
    if values.is_empty() {
        return Err(Error::Data(format!("{}: no pre-treatment estimates", path.display())));
    }
    Ok(values)
}

impl Monitor {
    pub fn new(pre: &[f64], config: MonitorConfig) -> Result<Self> {
        let spec: StatisticSpec = config.statistic.parse()?;
        if !(config.alpha > 0.0 && config.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", config.alpha)));
        }
        let history = RankHistory::new(pre, derive_key(config.seed, &[u64::from_le_bytes(*b"ties\0\0\0\0")]))?;
        let strategy = build_strategy(
            spec,
            pre.len(),
            derive_key(config.seed, &[u64::from_le_bytes(*b"stat\0\0\0\0")]),
        )?;
        let test = SequentialTest::new(strategy, config.alpha)?;
        let config_hash = config.hash(pre);
        Ok(Self {
            config,
            config_hash,
            history,
            test,
        })
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.config
    }

    pub fn process(&self) -> &EProcess {
        self.test.process()
    }

    pub fn history(&self) -> &RankHistory {
        &self.history
    }

    /// Feeds one post-treatment estimate.
    pub fn push(&mut self, y: f64) -> Result<MonitorRow> {
        let out = step_tests(&mut self.history, std::slice::from_mut(&mut self.test), y, &[])?;
        let p = self.test.process();
        Ok(MonitorRow {
            t: out.ranks.t,
            seq_rank: out.ranks.seq,
            red_rank: out.ranks.reduced,
            e: out.evalues[0],
            wealth: p.wealth(),
            p_anytime: p.anytime_p(),
            rejected: p.rejected(),
        })
    }

    /// Writes the checkpoint atomically, plus a JSON sidecar at `<path>.json`.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let (strategy, process) = self.test.snapshot();
        let payload = Payload {
            config_hash: self.config_hash.clone(),
            history: self.history.clone(),
            strategy,
            process,
        };
        let body = bincode::serialize(&payload).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut bytes = Vec::with_capacity(body.len() + 20);
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        bytes.extend_from_slice(&(body.len() as u64).to_le_bytes());
        bytes.extend_from_slice(&body);
        write_atomic(path, &bytes)?;
        let sidecar = serde_json::json!({
            "version": CHECKPOINT_VERSION,
            "config_hash": self.config_hash,
            "statistic": self.config.statistic,
            "alpha": self.config.alpha,
            "seed": self.config.seed,
            "t": self.history.t(),
            "log_wealth": self.process().log_wealth(),
        });
        let text = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Checkpoint(e.to_string()))?;
        write_atomic(&sidecar_path(path), format!("{text}\n").as_bytes())
    }

    /// Restores state saved by [`Monitor::save_checkpoint`]. The monitor must
    /// have been built from the same pre-treatment data and config.
    pub fn load_checkpoint(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path)?;
        let err = |m: &str| Error::Checkpoint(format!("{}: {m}", path.display()));
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(err("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(err(&format!("version {version}, expected {CHECKPOINT_VERSION}")));
        }
        let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        if bytes.len() != 20 + len {
            return Err(err("truncated payload"));
        }
        let payload: Payload = bincode::deserialize(&bytes[20..]).map_err(|e| err(&e.to_string()))?;
        if payload.config_hash != self.config_hash {
            return Err(err("written for a different configuration or pre-treatment data"));
        }
        self.test.restore(payload.strategy, payload.process)?;
        self.history = payload.history;
        Ok(())
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads estimates line by line from `input` and writes one CSV row per
/// estimate to `out`. Malformed lines are skipped with a warning. With a
/// checkpoint path, an existing checkpoint is resumed and the state is saved
/// after every estimate.
pub fn run_monitor<R: BufRead, W: Write>(
    pre: &[f64],
    config: MonitorConfig,
    input: R,
    out: W,
    checkpoint: Option<&Path>,
) -> Result<Monitor> {
    let mut monitor = Monitor::new(pre, config)?;
    if let Some(path) = checkpoint.filter(|p| p.exists()) {
        monitor.load_checkpoint(path)?;
        log::info!("resumed from {} at t = {}", path.display(), monitor.history.t());
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["t", "seq_rank", "red_rank", "e", "wealth", "p_anytime", "rejected"])?;
    w.flush()?;
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let y = match text.parse::<f64>() {
            Ok(y) if y.is_finite() => y,
            _ => {
                log::warn!("skipping malformed line {}: `{text}`", n + 1);
                continue;
            }
        };
        let row = monitor.push(y)?;
        w.serialize(&row)?;
        w.flush()?;
        if let Some(path) = checkpoint {
            monitor.save_checkpoint(path)?;
        }
    }
    w.flush()?;
    Ok(monitor)
}
