use crate::error::{Error, Result};

use super::simplex::{simplex_least_squares, SimplexSolution, SIMPLEX_MAX_ITER, SIMPLEX_TOL};
use super::Panel;

/// Per-period treatment estimates, split by phase.
#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentEstimates {
    /// Periods `1..=T_B`.
    pub blank: Vec<f64>,
    /// Periods `T_B+1..=T0`; in-sample fit residuals, kept for export only.
    pub train: Vec<f64>,
    /// Periods `T0+1..=T`.
    pub post: Vec<f64>,
}

impl TreatmentEstimates {
    pub fn t_blank(&self) -> usize {
        self.blank.len()
    }

    pub fn t0(&self) -> usize {
        self.blank.len() + self.train.len()
    }

    /// Block means of the blank and post estimates. Post periods that do not
    /// fill a whole block are dropped.
    pub fn blocked(&self, block_size: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if block_size == 0 {
            return Err(Error::Config("block size must be at least 1".into()));
        }
        if !self.blank.len().is_multiple_of(block_size) {
            return Err(Error::Config(format!(
                "blank periods ({}) are not divisible by block size {block_size}",
                self.blank.len()
            )));
        }
        Ok((
            block_aggregate(&self.blank, block_size)?,
            block_aggregate(&self.post, block_size)?,
        ))
    }
}

/// Means of consecutive blocks of `block_size` values; a trailing partial
/// block is dropped.
pub fn block_aggregate(values: &[f64], block_size: usize) -> Result<Vec<f64>> {
    if block_size == 0 {
        return Err(Error::Config("block size must be at least 1".into()));
    }
    Ok(values
        .chunks_exact(block_size)
        .map(|c| c.iter().sum::<f64>() / block_size as f64)
        .collect())
}

fn split(panel: &Panel, tau: impl Fn(usize) -> f64) -> TreatmentEstimates {
    TreatmentEstimates {
        blank: panel.blank_periods().map(&tau).collect(),
        train: panel.training_periods().map(&tau).collect(),
        post: panel.post_periods().map(&tau).collect(),
    }
}

/// Difference-in-differences: `(Y_1t - Ȳ_t) - (Ȳ_1 - Ȳ)` where `Ȳ_t` is the
/// control mean at `t` and the second bracket compares training-period means.
pub fn did_estimates(panel: &Panel) -> Result<TreatmentEstimates> {
    let train = panel.training_periods();
    if train.is_empty() {
        return Err(Error::Config("difference-in-differences needs training periods".into()));
    }
    let n = panel.n_controls() as f64;
    let control_mean = |t: usize| (2..=panel.n_units()).map(|i| panel.y(i, t)).sum::<f64>() / n;
    let len = train.clone().count() as f64;
    let treated_train = train.clone().map(|t| panel.y(1, t)).sum::<f64>() / len;
    let control_train = train.map(control_mean).sum::<f64>() / len;
    let offset = treated_train - control_train;
    Ok(split(panel, |t| panel.y(1, t) - control_mean(t) - offset))
}

/// Pre-treatment characteristics used to fit synthetic control weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Characteristics {
    pub treated: Vec<f64>,
    /// One vector per control unit, each the same length as `treated`.
    pub controls: Vec<Vec<f64>>,
}

/// The training-period outcomes of every unit.
pub fn training_characteristics(panel: &Panel) -> Characteristics {
    let take = |unit: usize| panel.training_periods().map(|t| panel.y(unit, t)).collect::<Vec<_>>();
    Characteristics {
        treated: take(1),
        controls: (2..=panel.n_units()).map(take).collect(),
    }
}

/// Synthetic control weights: minimises `(X1 - X0 w)' V (X1 - X0 w)` over the
/// simplex with `V = diag(v_diag)`.
pub fn scm_weights(x: &Characteristics, v_diag: &[f64]) -> Result<SimplexSolution> {
    let k = x.treated.len();
    if k == 0 || x.controls.is_empty() {
        return Err(Error::InvalidInput(
            "synthetic control needs characteristics and controls".into(),
        ));
    }
    if v_diag.len() != k || x.controls.iter().any(|c| c.len() != k) {
        return Err(Error::InvalidInput(format!(
            "characteristics and V must all have length {k}"
        )));
    }
    let all = x.treated.iter().chain(x.controls.iter().flatten());
    if all.clone().any(|v| !v.is_finite()) || v_diag.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidInput(
            "characteristics and V must be finite, V non-negative".into(),
        ));
    }
    let n = x.controls.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(v_diag).map(|((a, b), v)| a * v * b).sum::<f64>();
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = dot(&x.controls[i], &x.controls[j]);
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
    }
    let c: Vec<f64> = x.controls.iter().map(|col| dot(col, &x.treated)).collect();
    let constant = dot(&x.treated, &x.treated);
    Ok(simplex_least_squares(&q, &c, constant, SIMPLEX_TOL, SIMPLEX_MAX_ITER))
}

/// `Y_1t - Σ_i w_i Y_it` for every period.
pub fn scm_estimates(panel: &Panel, weights: &[f64]) -> Result<TreatmentEstimates> {
    if weights.len() != panel.n_controls() {
        return Err(Error::InvalidInput(format!(
            "expected {} weights, got {}",
            panel.n_controls(),
            weights.len()
        )));
    }
    let synthetic = |t: usize| {
        weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * panel.y(i + 2, t))
            .sum::<f64>()
    };
    Ok(split(panel, |t| panel.y(1, t) - synthetic(t)))
}
