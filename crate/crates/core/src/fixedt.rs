//! Fixed-horizon split-conformal permutation test.
//!
//! The blank estimates and the post estimates form one pool of size
//! `n = T_B + k`. The p-value is the share of size-`k` subsets of the pool
//! whose statistic is at least the statistic of the actual post window.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{derive_key, purpose, stream};

/// Largest number of subsets enumerated in exact mode.
pub const EXACT_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sided {
    /// `Σ e`: large positive effects.
    #[default]
    One,
    /// `Σ |e|`.
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    /// `draws` uniform subsets; `p = (1 + #{exceedances}) / (draws + 1)`.
    Sampled {
        draws: usize,
        seed: u64,
    },
    /// Exact when there are at most `draws` subsets, sampled otherwise.
    Auto {
        draws: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedTResult {
    pub p_value: f64,
    /// Subsets enumerated, or subsets drawn in sampled mode.
    pub n_combinations: u128,
    pub statistic: f64,
    pub exact: bool,
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| match acc.checked_mul((n - i) as u128) {
        Some(v) => v / (i as u128 + 1),
        None => u128::MAX,
    })
}

fn statistic(pool: &[f64], idx: impl Iterator<Item = usize>, sided: Sided) -> f64 {
    match sided {
        Sided::One => idx.map(|i| pool[i]).sum(),
        Sided::Two => idx.map(|i| pool[i].abs()).sum(),
    }
}

/// Advances `c` to the next size-`k` subset of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let Some(i) = (0..k).rev().find(|&i| c[i] < n - k + i) else {
        return false;
    };
    c[i] += 1;
    for j in i + 1..k {
        c[j] = c[j - 1] + 1;
    }
    true
}

/// Permutation p-value of the post window against the blank periods.
pub fn fixed_t_pvalue(blanks: &[f64], post: &[f64], sided: Sided, mode: Mode) -> Result<FixedTResult> {
    if blanks.is_empty() || post.is_empty() {
        return Err(Error::InvalidInput(
            "fixed-T test needs blank and post estimates".into(),
        ));
    }
    let pool: Vec<f64> = blanks.iter().chain(post).copied().collect();
    if pool.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("estimates must be finite".into()));
    }
    let (n, k) = (pool.len(), post.len());
    let observed = statistic(&pool, blanks.len()..n, sided);
    // Exhaustive subset sums run in index order, so equal multisets give equal
    // sums; the tolerance absorbs rounding from summing in another order.
    let scale = pool.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cutoff = observed - 8.0 * f64::EPSILON * n as f64 * scale;
    let total = binomial(n, k);

    let exact = match mode {
        Mode::Exact if total > EXACT_LIMIT => {
            return Err(Error::Config(format!(
                "{total} subsets exceed the exact limit of {EXACT_LIMIT}; use sampled mode"
            )))
        }
        Mode::Exact => true,
        Mode::Auto { draws, .. } => total <= draws as u128,
        Mode::Sampled { .. } => false,
    };
    if exact {
        let mut c: Vec<usize> = (0..k).collect();
        let mut hits: u128 = 0;
        loop {
            if statistic(&pool, c.iter().copied(), sided) >= cutoff {
                hits += 1;
            }
            if !next_combination(&mut c, n) {
                break;
            }
        }
        return Ok(FixedTResult {
            p_value: hits as f64 / total as f64,
            n_combinations: total,
            statistic: observed,
            exact,
        });
    }
    let (Mode::Sampled { draws, seed } | Mode::Auto { draws, seed }) = mode else {
        unreachable!()
    };
    let mut rng = stream(seed, &[purpose::FIXED_T, n as u64, k as u64]);
    let mut hits = 0usize;
    // Partial Fisher-Yates: the first m slots of any permutation, shuffled
    // afresh, are a uniform m-subset, so the buffer is never reset. For
    // k > n/2 the complement is drawn and its sum subtracted from the total.
    let values: Vec<f64> = match sided {
        Sided::One => pool.clone(),
        Sided::Two => pool.iter().map(|v| v.abs()).collect(),
    };
    let total_sum: f64 = values.iter().sum();
    let complement = 2 * k > n;
    let m = if complement { n - k } else { k };
    let mut perm: Vec<usize> = (0..n).collect();
    for _ in 0..draws {
        for i in 0..m {
            let j = rng.gen_range(i..n);
            perm.swap(i, j);
        }
        let part: f64 = perm[..m].iter().map(|&i| values[i]).sum();
        let stat = if complement { total_sum - part } else { part };
        if stat >= cutoff {
            hits += 1;
        }
    }
    Ok(FixedTResult {
        p_value: (1 + hits) as f64 / (draws + 1) as f64,
        n_combinations: draws as u128,
        statistic: observed,
        exact,
    })
}

/// Fixed-T p-values after each of the first `horizon` post estimates. Sampled
/// steps use a seed derived from `seed` and the step.
pub fn fixed_t_path(blanks: &[f64], post: &[f64], sided: Sided, draws: usize, seed: u64) -> Result<Vec<f64>> {
    (1..=post.len())
        .map(|k| {
            let mode = Mode::Auto {
                draws,
                seed: derive_key(seed, &[k as u64]),
            };
            fixed_t_pvalue(blanks, &post[..k], sided, mode).map(|r| r.p_value)
        })
        .collect()
}

/// Naive repeated use of the fixed-T test: the first step (1-based) at which
/// `p <= alpha`. This does not control size and exists as a comparator.
pub fn repeated_fixed_t(
    blanks: &[f64],
    post: &[f64],
    alpha: f64,
    sided: Sided,
    draws: usize,
    seed: u64,
) -> Result<Option<usize>> {
    for k in 1..=post.len() {
        let mode = Mode::Auto {
            draws,
            seed: derive_key(seed, &[k as u64]),
        };
        if fixed_t_pvalue(blanks, &post[..k], sided, mode)?.p_value <= alpha {
            return Ok(Some(k));
        }
    }
    Ok(None)
}
