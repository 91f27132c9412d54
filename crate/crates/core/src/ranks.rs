//! Sequential and reduced sequential ranks.
//!
//! Observations arrive as a pre-treatment batch followed by a post-treatment
//! stream. For the post observation at time `t` (1-based, so the first post
//! observation has `t = T0 + 1`) we record
//!
//! * the sequential rank `R_t`, its position among all `t - 1` earlier
//!   observations, uniform on `{1..t}` under exchangeability, and
//! * the reduced rank `R̃_t`, its position among the `T0` pre-treatment
//!   observations only, taking values in `{1..T0+1}`.
//!
//! Ties are broken by an independent uniform key attached to every
//! observation, which is the same as adding noise of vanishing scale. Keys are
//! derived from `tie_seed` and the arrival index, so replays are bit-identical.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{purpose, uniform_open};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Keyed {
    value: f64,
    key: f64,
    pre: bool,
}

impl Keyed {
    fn cmp(&self, other: &Keyed) -> Ordering {
        self.value.total_cmp(&other.value).then(self.key.total_cmp(&other.key))
    }
}

/// Ranks produced by one post-treatment observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankPair {
    /// Time index of the observation (1-based).
    pub t: usize,
    /// Sequential rank in `{1..t}`.
    pub seq: usize,
    /// Reduced rank in `{1..T0+1}`.
    pub reduced: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankHistory {
    pre: Vec<f64>,
    post: Vec<f64>,
    sorted_pre: Vec<Keyed>,
    sorted_all: Vec<Keyed>,
    seq_ranks: Vec<usize>,
    red_ranks: Vec<usize>,
    slot_counts: Vec<u64>,
    tie_seed: u64,
}

impl RankHistory {
    pub fn new(pre: &[f64], tie_seed: u64) -> Result<Self> {
        if pre.is_empty() {
            return Err(Error::InvalidInput("pre-treatment batch is empty".into()));
        }
        if let Some(bad) = pre.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite pre-treatment value {bad}")));
        }
        let mut sorted_pre: Vec<Keyed> = pre
            .iter()
            .enumerate()
            .map(|(i, &value)| Keyed {
                value,
                key: tie_key(tie_seed, i),
                pre: true,
            })
            .collect();
        sorted_pre.sort_by(Keyed::cmp);
        Ok(Self {
            pre: pre.to_vec(),
            post: Vec::new(),
            sorted_all: sorted_pre.clone(),
            sorted_pre,
            seq_ranks: Vec::new(),
            red_ranks: Vec::new(),
            slot_counts: vec![0; pre.len() + 1],
            tie_seed,
        })
    }

    /// Number of pre-treatment observations `T0`.
    pub fn t0(&self) -> usize {
        self.pre.len()
    }

    /// Time index of the most recent observation.
    pub fn t(&self) -> usize {
        self.pre.len() + self.post.len()
    }

    /// Time index the next pushed observation will receive.
    pub fn next_t(&self) -> usize {
        self.t() + 1
    }

    pub fn pre(&self) -> &[f64] {
        &self.pre
    }

    pub fn post(&self) -> &[f64] {
        &self.post
    }

    pub fn seq_ranks(&self) -> &[usize] {
        &self.seq_ranks
    }

    pub fn red_ranks(&self) -> &[usize] {
        &self.red_ranks
    }

    /// Number of earlier post observations in each reduced-rank slot.
    pub fn slot_counts(&self) -> &[u64] {
        &self.slot_counts
    }

    fn keyed(&self, value: f64) -> Keyed {
        Keyed {
            value,
            key: tie_key(self.tie_seed, self.t()),
            pre: false,
        }
    }

    /// Ranks `y` would receive if pushed now, without recording it.
    pub fn peek(&self, y: f64) -> Result<RankPair> {
        if !y.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite observation {y}")));
        }
        let obs = self.keyed(y);
        let below_all = self.sorted_all.partition_point(|o| o.cmp(&obs) == Ordering::Less);
        let below_pre = self.sorted_pre.partition_point(|o| o.cmp(&obs) == Ordering::Less);
        Ok(RankPair {
            t: self.next_t(),
            seq: below_all + 1,
            reduced: below_pre + 1,
        })
    }

    /// Appends a post-treatment observation and returns its ranks.
    pub fn push(&mut self, y: f64) -> Result<RankPair> {
        let ranks = self.peek(y)?;
        let obs = self.keyed(y);
        self.sorted_all.insert(ranks.seq - 1, obs);
        self.post.push(y);
        self.seq_ranks.push(ranks.seq);
        self.red_ranks.push(ranks.reduced);
        self.slot_counts[ranks.reduced - 1] += 1;
        Ok(ranks)
    }

    /// Reduced rank implied by a sequential rank for the next observation:
    /// one plus the number of pre-treatment observations among the
    /// `seq_rank - 1` earlier observations ranked below it.
    pub fn reduce(&self, seq_rank: usize) -> Result<usize> {
        if seq_rank == 0 || seq_rank > self.next_t() {
            return Err(Error::InvalidInput(format!(
                "sequential rank {seq_rank} outside 1..={}",
                self.next_t()
            )));
        }
        Ok(1 + self.sorted_all[..seq_rank - 1].iter().filter(|o| o.pre).count())
    }

    /// Null law of the reduced rank at time `t`; `t` must be the next time index.
    pub fn null_probs(&self, t: usize) -> Result<NullCategorical> {
        if t != self.next_t() {
            return Err(Error::State(format!(
                "null probabilities requested for t = {t} but the next observation is t = {}",
                self.next_t()
            )));
        }
        Ok(NullCategorical {
            numerators: self.slot_counts.iter().map(|c| c + 1).collect(),
            t,
        })
    }

    pub fn next_null_probs(&self) -> NullCategorical {
        self.null_probs(self.next_t()).expect("next_t is always consistent")
    }
}

fn tie_key(seed: u64, index: usize) -> f64 {
    uniform_open(seed, &[purpose::TIES, index as u64])
}

/// Categorical null law of the reduced rank: `q_i = (1 + #{earlier reduced
/// ranks equal to i}) / t`, stored as integer numerators over `t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NullCategorical {
    numerators: Vec<u64>,
    t: usize,
}

impl NullCategorical {
    /// Builds the law from explicit numerators; they must be positive and sum to `t`.
    pub fn from_numerators(numerators: Vec<u64>, t: usize) -> Result<Self> {
        let total: u64 = numerators.iter().sum();
        if numerators.is_empty() || numerators.contains(&0) || total != t as u64 {
            return Err(Error::State(format!(
                "numerators {numerators:?} are not a valid null law over t = {t}"
            )));
        }
        Ok(Self { numerators, t })
    }

    pub fn len(&self) -> usize {
        self.numerators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numerators.is_empty()
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn numerators(&self) -> &[u64] {
        &self.numerators
    }

    /// `q^r` for `r` in `1..=T0+1`.
    pub fn prob(&self, r: usize) -> f64 {
        self.numerators[r - 1] as f64 / self.t as f64
    }

    pub fn probs(&self) -> Vec<f64> {
        (1..=self.len()).map(|r| self.prob(r)).collect()
    }

    /// Cumulative sums `0, q^1, q^1 + q^2, ..., 1` (length `T0 + 2`), exact at
    /// the grid `k / t`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0u64;
        let mut out = Vec::with_capacity(self.len() + 1);
        out.push(0.0);
        for &n in &self.numerators {
            acc += n;
            out.push(acc as f64 / self.t as f64);
        }
        out
    }
}

/// Smoothed rescaled rank `V_t = (R_t - u) / t`.
pub fn smoothed_rank(rank: usize, t: usize, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::InvalidInput(format!("jitter {u} outside (0, 1)")));
    }
    if rank == 0 || rank > t {
        return Err(Error::InvalidInput(format!("rank {rank} outside 1..={t}")));
    }
    Ok((rank as f64 - u) / t as f64)
}
