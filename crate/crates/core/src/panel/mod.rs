//! Interactive fixed effects panels and the estimators that turn them into
//! (approximately) exchangeable treatment-effect streams.
//!
//! Periods are 1-based, as in the model: blank periods `1..=T_B`, training
//! periods `T_B+1..=T0`, post-treatment periods `T0+1..=T`. Unit 1 is the
//! treated unit, units `2..=N+1` are controls. Internally unit 1 is row 0.

mod estimators;
mod io;
mod simplex;

pub use estimators::{
    block_aggregate, did_estimates, scm_estimates, scm_weights, training_characteristics, Characteristics,
    TreatmentEstimates,
};
pub use io::{read_estimates_csv, read_panel_csv, write_estimates_csv, write_panel_csv};
pub use simplex::{simplex_least_squares, SimplexSolution, SIMPLEX_MAX_ITER, SIMPLEX_TOL};

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{purpose, stream, Rng};

/// Treatment effect path `τ_t` for `t > T0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EffectPath {
    Constant(f64),
    /// `intercept + slope * (t - T0)`.
    Linear {
        intercept: f64,
        slope: f64,
    },
    /// Effects for `T0+1..=T` in order.
    Explicit(Vec<f64>),
}

impl EffectPath {
    pub fn none() -> Self {
        EffectPath::Constant(0.0)
    }

    /// Effect `k` periods after treatment (`k >= 1`).
    pub fn at(&self, k: usize) -> f64 {
        match self {
            EffectPath::Constant(c) => *c,
            EffectPath::Linear { intercept, slope } => intercept + slope * k as f64,
            EffectPath::Explicit(v) => v[k - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Loadings {
    /// `μ_i ~ N(0, I_r)` independently per unit.
    StandardNormal,
    /// One row of `r` loadings per unit, treated unit first.
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfeConfig {
    pub n_controls: usize,
    pub t_total: usize,
    pub t0: usize,
    pub t_blank: usize,
    pub r_factors: usize,
    pub loadings: Loadings,
    pub rho_lambda: f64,
    pub rho_eps: f64,
    pub sigma: f64,
    /// Covariate dimension `ℓ`; `Z_i` and `θ_t` are standard normal.
    pub covariates: usize,
    pub treatment: EffectPath,
    pub seed: u64,
}

impl IfeConfig {
    /// i.i.d. standard normal noise, no factors, no covariates.
    pub fn iid(n_controls: usize, t0: usize, t_blank: usize, post: usize, treatment: EffectPath, seed: u64) -> Self {
        Self {
            n_controls,
            t_total: t0 + post,
            t0,
            t_blank,
            r_factors: 0,
            loadings: Loadings::StandardNormal,
            rho_lambda: 0.0,
            rho_eps: 0.0,
            sigma: 1.0,
            covariates: 0,
            treatment,
            seed,
        }
    }

    pub fn n_units(&self) -> usize {
        self.n_controls + 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_controls == 0 {
            return bad("at least one control unit is required".into());
        }
        if !(1 <= self.t_blank && self.t_blank < self.t0 && self.t0 < self.t_total) {
            return bad(format!(
                "need 1 <= T_B < T0 < T, got T_B = {}, T0 = {}, T = {}",
                self.t_blank, self.t0, self.t_total
            ));
        }
        if !(self.rho_lambda.abs() < 1.0) || !(self.rho_eps.abs() < 1.0) {
            return bad(format!(
                "autoregressive parameters must lie in (-1, 1), got {} and {}",
                self.rho_lambda, self.rho_eps
            ));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return bad(format!("noise sd must be finite and non-negative, got {}", self.sigma));
        }
        if let Loadings::Explicit(rows) = &self.loadings {
            if rows.len() != self.n_units() || rows.iter().any(|r| r.len() != self.r_factors) {
                return bad(format!(
                    "explicit loadings must be {} x {}",
                    self.n_units(),
                    self.r_factors
                ));
            }
        }
        if let EffectPath::Explicit(v) = &self.treatment {
            if v.len() != self.t_total - self.t0 {
                return bad(format!(
                    "explicit effect path has {} entries, expected {}",
                    v.len(),
                    self.t_total - self.t0
                ));
            }
        }
        Ok(())
    }
}

/// `(N+1) x T` outcome matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    outcomes: Vec<f64>,
    n_units: usize,
    t_total: usize,
    t0: usize,
    t_blank: usize,
}

impl Panel {
    /// Builds a panel from rows (treated unit first), each of length `T`.
    pub fn from_rows(rows: Vec<Vec<f64>>, t0: usize, t_blank: usize) -> Result<Self> {
        let n_units = rows.len();
        let t_total = rows.first().map_or(0, Vec::len);
        if n_units < 2 || rows.iter().any(|r| r.len() != t_total) {
            return Err(Error::Data(
                "panel needs a treated unit, a control and equal-length rows".into(),
            ));
        }
        if !(1 <= t_blank && t_blank < t0 && t0 < t_total) {
            return Err(Error::Config(format!(
                "need 1 <= T_B < T0 < T, got T_B = {t_blank}, T0 = {t0}, T = {t_total}"
            )));
        }
        if rows.iter().flatten().any(|y| !y.is_finite()) {
            return Err(Error::Data("panel contains non-finite outcomes".into()));
        }
        Ok(Self {
            outcomes: rows.into_iter().flatten().collect(),
            n_units,
            t_total,
            t0,
            t_blank,
        })
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn n_controls(&self) -> usize {
        self.n_units - 1
    }

    pub fn t_total(&self) -> usize {
        self.t_total
    }

    pub fn t0(&self) -> usize {
        self.t0
    }

    pub fn t_blank(&self) -> usize {
        self.t_blank
    }

    /// Outcome of `unit` (1-based, 1 = treated) at period `t` (1-based).
    pub fn y(&self, unit: usize, t: usize) -> f64 {
        self.outcomes[(unit - 1) * self.t_total + (t - 1)]
    }

    pub fn row(&self, unit: usize) -> &[f64] {
        &self.outcomes[(unit - 1) * self.t_total..unit * self.t_total]
    }

    pub fn set_y(&mut self, unit: usize, t: usize, value: f64) {
        self.outcomes[(unit - 1) * self.t_total + (t - 1)] = value;
    }

    pub fn blank_periods(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.t_blank
    }

    pub fn training_periods(&self) -> std::ops::RangeInclusive<usize> {
        self.t_blank + 1..=self.t0
    }

    pub fn post_periods(&self) -> std::ops::RangeInclusive<usize> {
        self.t0 + 1..=self.t_total
    }
}

fn normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Stationary AR(1) path with unit marginal variance times `scale`.
fn ar1_path(rng: &mut Rng, len: usize, rho: f64, scale: f64) -> Vec<f64> {
    let innovation = scale * (1.0 - rho * rho).sqrt();
    let mut path = Vec::with_capacity(len);
    let mut x = scale * normal(rng);
    for t in 0..len {
        if t > 0 {
            x = rho * x + innovation * normal(rng);
        }
        path.push(x);
    }
    path
}

/// Draws `Y_it = μ_i'λ_t + θ_t'Z_i + 1[i = 1, t > T0] τ_t + ε_it`.
///
/// Factors and noise are VAR(1) with diagonal dynamics, started from their
/// stationary law; innovations are scaled by `1 - ρ²` so every component has
/// variance 1 (factors) or `σ²` (noise).
pub fn simulate_ife(cfg: &IfeConfig) -> Result<Panel> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, &[purpose::PANEL]);
    let (n, t_total, r) = (cfg.n_units(), cfg.t_total, cfg.r_factors);
    let loadings: Vec<Vec<f64>> = match &cfg.loadings {
        Loadings::StandardNormal => (0..n).map(|_| (0..r).map(|_| normal(&mut rng)).collect()).collect(),
        Loadings::Explicit(rows) => rows.clone(),
    };
    let factors: Vec<Vec<f64>> = (0..r)
        .map(|_| ar1_path(&mut rng, t_total, cfg.rho_lambda, 1.0))
        .collect();
    let covariates: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..cfg.covariates).map(|_| normal(&mut rng)).collect())
        .collect();
    let theta: Vec<Vec<f64>> = (0..t_total)
        .map(|_| (0..cfg.covariates).map(|_| normal(&mut rng)).collect())
        .collect();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let noise = ar1_path(&mut rng, t_total, cfg.rho_eps, cfg.sigma);
        let row = (0..t_total)
            .map(|t| {
                let common: f64 = (0..r).map(|k| loadings[i][k] * factors[k][t]).sum();
                let cov: f64 = theta[t].iter().zip(&covariates[i]).map(|(a, b)| a * b).sum();
                let period = t + 1;
                let effect = if i == 0 && period > cfg.t0 {
                    cfg.treatment.at(period - cfg.t0)
                } else {
                    0.0
                };
                common + cov + effect + noise[t]
            })
            .collect();
        rows.push(row);
    }
    Panel::from_rows(rows, cfg.t0, cfg.t_blank)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iid_design_is_noise_plus_effect() {
        let cfg = IfeConfig::iid(3, 6, 3, 4, EffectPath::Constant(100.0), 1);
        let p = simulate_ife(&cfg).unwrap();
        assert_eq!((p.n_units(), p.t_total()), (4, 10));
        for t in p.post_periods() {
            assert!(p.y(1, t) > 90.0);
            assert!(p.y(2, t).abs() < 10.0);
        }
        for t in 1..=6 {
            assert!(p.y(1, t).abs() < 10.0);
        }
    }

    #[test]
    fn zero_sigma_and_no_factors_gives_exact_effect() {
        let mut cfg = IfeConfig::iid(
            2,
            4,
            2,
            3,
            EffectPath::Linear {
                intercept: 1.0,
                slope: 0.5,
            },
            0,
        );
        cfg.sigma = 0.0;
        let p = simulate_ife(&cfg).unwrap();
        assert_eq!(p.row(1), &[0.0, 0.0, 0.0, 0.0, 1.5, 2.0, 2.5]);
    }

    #[test]
    fn invalid_configs() {
        let base = IfeConfig::iid(2, 4, 2, 3, EffectPath::none(), 0);
        let mut c = base.clone();
        c.t_blank = 4;
        assert!(matches!(simulate_ife(&c), Err(Error::Config(_))));
        let mut c = base.clone();
        c.rho_eps = 1.0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.n_controls = 0;
        assert!(c.validate().is_err());
        let mut c = base;
        c.treatment = EffectPath::Explicit(vec![1.0]);
        assert!(c.validate().is_err());
    }
}
