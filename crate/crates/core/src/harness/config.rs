//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # Lines starting with '#' are comments.
//! scenario = did-iid        # preset applied before every other key
//! replications = 500
//! effect = 1.5
//! tests = fixed-t:3, fixed-t:6, repeated-fixed-t, av-gaussian, av-plugin
//! ```

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::alternatives::DEFAULT_MULTIPLIERS;
use crate::eprocess::DEFAULT_ALPHA;
use crate::error::{Error, Result};
use crate::fixedt::Sided;
use crate::panel::{EffectPath, IfeConfig, Loadings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Stylised DiD design: no factors, i.i.d. noise, `B = 1`.
    DidIid,
    /// SCM with three VAR(1) factors and VAR(1) noise, `B = 3`.
    ScmVar1,
    /// SCM with `τ_t = 1 + (t - T0) / 15`.
    DynamicEffect,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::DidIid => "did-iid",
            Scenario::ScmVar1 => "scm-var1",
            Scenario::DynamicEffect => "dynamic-effect",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "did-iid" => Ok(Scenario::DidIid),
            "scm-var1" => Ok(Scenario::ScmVar1),
            "dynamic-effect" => Ok(Scenario::DynamicEffect),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    Did,
    Scm,
}

/// One test run on every replication.
///
/// Times are counted in post-treatment blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestSpec {
    /// Single fixed-T test after `k` post blocks.
    FixedT(usize),
    /// Fixed-T p-value recomputed after every block (size-invalid).
    RepeatedFixedT,
    /// Reduced-rank Gaussian alternative at `multiplier` times the configured
    /// effect size.
    AvGaussian(f64),
    /// Reduced-rank plug-in, started from the Gaussian statistic.
    AvPlugin,
    /// Sequential-rank plug-in, started from the Gaussian statistic.
    AvPluginGeneric,
    MixAdaptive,
    MixAverage,
}

impl TestSpec {
    pub fn is_fixed_t(&self) -> bool {
        matches!(self, TestSpec::FixedT(_) | TestSpec::RepeatedFixedT)
    }
}

impl fmt::Display for TestSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestSpec::FixedT(k) => write!(f, "fixed-t:{k}"),
            TestSpec::RepeatedFixedT => f.write_str("repeated-fixed-t"),
            TestSpec::AvGaussian(c) if *c == 1.0 => f.write_str("av-gaussian"),
            TestSpec::AvGaussian(c) => write!(f, "av-gaussian:{c}"),
            TestSpec::AvPlugin => f.write_str("av-plugin"),
            TestSpec::AvPluginGeneric => f.write_str("av-plugin-generic"),
            TestSpec::MixAdaptive => f.write_str("mix-adaptive"),
            TestSpec::MixAverage => f.write_str("mix-average"),
        }
    }
}

impl FromStr for TestSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownTest(s.to_string());
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        match (head, arg) {
            ("fixed-t", Some(k)) => match k.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(TestSpec::FixedT(k)),
                _ => Err(unknown()),
            },
            ("repeated-fixed-t", None) => Ok(TestSpec::RepeatedFixedT),
            ("av-gaussian", None) => Ok(TestSpec::AvGaussian(1.0)),
            ("av-gaussian", Some(c)) => match c.parse::<f64>() {
                Ok(c) if c.is_finite() && c > 0.0 => Ok(TestSpec::AvGaussian(c)),
                _ => Err(unknown()),
            },
            ("av-plugin", None) => Ok(TestSpec::AvPlugin),
            ("av-plugin-generic", None) => Ok(TestSpec::AvPluginGeneric),
            ("mix-adaptive", None) => Ok(TestSpec::MixAdaptive),
            ("mix-average", None) => Ok(TestSpec::MixAverage),
            _ => Err(unknown()),
        }
    }
}

/// Everything needed to reproduce an experiment. Period counts (`t0`,
/// `t_blank`, `post`) are in raw periods; tests see block means.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub estimator: Estimator,
    pub n_controls: usize,
    pub t0: usize,
    pub t_blank: usize,
    pub post: usize,
    pub r_factors: usize,
    pub rho_lambda: f64,
    pub rho_eps: f64,
    pub sigma: f64,
    pub covariates: usize,
    /// Treatment effect `τ` (intercept for the dynamic path).
    pub effect: f64,
    /// Per-period growth of the effect.
    pub effect_slope: f64,
    pub block_size: usize,
    pub tests: Vec<TestSpec>,
    /// Effect size of the Gaussian alternative on the estimate scale.
    pub alt_tau: f64,
    /// Standard deviation used to standardise `alt_tau`; defaults to
    /// `σ sqrt((1 + 1/N) / B)`.
    pub alt_sd: Option<f64>,
    pub mc_draws: usize,
    pub fixed_t_draws: usize,
    pub fixed_t_sided: Sided,
    /// Last post block at which the repeated fixed-T test is evaluated.
    pub fixed_t_horizon: Option<usize>,
    pub multipliers: Vec<f64>,
    pub replications: usize,
    pub alpha: f64,
    pub master_seed: u64,
}

impl ExperimentConfig {
    pub fn preset(scenario: Scenario) -> Self {
        let did = Self {
            scenario,
            estimator: Estimator::Did,
            n_controls: 20,
            t0: 50,
            t_blank: 25,
            post: 30,
            r_factors: 0,
            rho_lambda: 0.0,
            rho_eps: 0.0,
            sigma: 1.0,
            covariates: 0,
            effect: 0.0,
            effect_slope: 0.0,
            block_size: 1,
            tests: vec![
                TestSpec::FixedT(12),
                TestSpec::RepeatedFixedT,
                TestSpec::AvGaussian(1.0),
                TestSpec::AvPlugin,
            ],
            alt_tau: 1.5,
            alt_sd: None,
            mc_draws: 2000,
            fixed_t_draws: 1999,
            fixed_t_sided: Sided::One,
            fixed_t_horizon: None,
            multipliers: DEFAULT_MULTIPLIERS.to_vec(),
            replications: 500,
            alpha: DEFAULT_ALPHA,
            master_seed: 0,
        };
        match scenario {
            Scenario::DidIid => did,
            Scenario::ScmVar1 => Self {
                estimator: Estimator::Scm,
                t0: 60,
                t_blank: 30,
                post: 90,
                r_factors: 3,
                block_size: 3,
                alt_tau: 2.0,
                tests: vec![TestSpec::FixedT(12), TestSpec::AvGaussian(1.0), TestSpec::AvPlugin],
                ..did
            },
            Scenario::DynamicEffect => Self {
                estimator: Estimator::Scm,
                r_factors: 3,
                effect: 1.0,
                effect_slope: 1.0 / 15.0,
                alt_tau: 1.0,
                tests: vec![TestSpec::FixedT(12), TestSpec::MixAdaptive, TestSpec::AvPluginGeneric],
                ..did
            },
        }
    }

    /// Parses the flat config format. The `scenario` key selects the preset
    /// that the remaining keys override, wherever it appears.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let scenario = match pairs.iter().rev().find(|(k, _)| k == "scenario") {
            Some((_, v)) => v.parse()?,
            None => Scenario::DidIid,
        };
        let mut cfg = Self::preset(scenario);
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
        }
        match key {
            "scenario" => self.scenario = value.parse()?,
            "estimator" => {
                self.estimator = match value {
                    "did" => Estimator::Did,
                    "scm" => Estimator::Scm,
                    _ => return Err(Error::Config(format!("unknown estimator `{value}`"))),
                }
            }
            "n_controls" => self.n_controls = num(key, value)?,
            "t0" => self.t0 = num(key, value)?,
            "t_blank" => self.t_blank = num(key, value)?,
            "post" => self.post = num(key, value)?,
            "r_factors" => self.r_factors = num(key, value)?,
            "rho_lambda" => self.rho_lambda = num(key, value)?,
            "rho_eps" => self.rho_eps = num(key, value)?,
            "sigma" => self.sigma = num(key, value)?,
            "covariates" => self.covariates = num(key, value)?,
            "effect" => self.effect = num(key, value)?,
            "effect_slope" => self.effect_slope = num(key, value)?,
            "block_size" => self.block_size = num(key, value)?,
            "tests" => {
                self.tests = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "alt_tau" => self.alt_tau = num(key, value)?,
            "alt_sd" => self.alt_sd = Some(num(key, value)?),
            "mc_draws" => self.mc_draws = num(key, value)?,
            "fixed_t_draws" => self.fixed_t_draws = num(key, value)?,
            "fixed_t_sided" => {
                self.fixed_t_sided = match value {
                    "one" => Sided::One,
                    "two" => Sided::Two,
                    _ => {
                        return Err(Error::Config(format!(
                            "fixed_t_sided must be one or two, got `{value}`"
                        )))
                    }
                }
            }
            "fixed_t_horizon" => self.fixed_t_horizon = Some(num(key, value)?),
            "multipliers" => self.multipliers = value.split(',').map(|v| num(key, v.trim())).collect::<Result<_>>()?,
            "replications" => self.replications = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "master_seed" | "seed" => self.master_seed = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Canonical text form; parsing it gives back the same config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let tests: Vec<String> = self.tests.iter().map(ToString::to_string).collect();
        let mults: Vec<String> = self.multipliers.iter().map(ToString::to_string).collect();
        let estimator = match self.estimator {
            Estimator::Did => "did",
            Estimator::Scm => "scm",
        };
        let sided = match self.fixed_t_sided {
            Sided::One => "one",
            Sided::Two => "two",
        };
        let _ = writeln!(s, "scenario = {}", self.scenario.as_str());
        let _ = writeln!(s, "estimator = {estimator}");
        for (k, v) in [
            ("n_controls", self.n_controls.to_string()),
            ("t0", self.t0.to_string()),
            ("t_blank", self.t_blank.to_string()),
            ("post", self.post.to_string()),
            ("r_factors", self.r_factors.to_string()),
            ("rho_lambda", self.rho_lambda.to_string()),
            ("rho_eps", self.rho_eps.to_string()),
            ("sigma", self.sigma.to_string()),
            ("covariates", self.covariates.to_string()),
            ("effect", self.effect.to_string()),
            ("effect_slope", self.effect_slope.to_string()),
            ("block_size", self.block_size.to_string()),
            ("tests", tests.join(",")),
            ("alt_tau", self.alt_tau.to_string()),
            ("mc_draws", self.mc_draws.to_string()),
            ("fixed_t_draws", self.fixed_t_draws.to_string()),
            ("fixed_t_sided", sided.to_string()),
            ("multipliers", mults.join(",")),
            ("replications", self.replications.to_string()),
            ("alpha", self.alpha.to_string()),
            ("master_seed", self.master_seed.to_string()),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        if let Some(sd) = self.alt_sd {
            let _ = writeln!(s, "alt_sd = {sd}");
        }
        if let Some(h) = self.fixed_t_horizon {
            let _ = writeln!(s, "fixed_t_horizon = {h}");
        }
        s
    }

    /// Blank periods in blocks.
    pub fn blank_blocks(&self) -> usize {
        self.t_blank / self.block_size.max(1)
    }

    /// Post-treatment horizon in blocks.
    pub fn horizon(&self) -> usize {
        self.post / self.block_size.max(1)
    }

    /// Standardised effect size handed to the Gaussian alternative.
    pub fn effect_size(&self) -> f64 {
        let sd = self
            .alt_sd
            .unwrap_or_else(|| self.sigma * ((1.0 + 1.0 / self.n_controls as f64) / self.block_size as f64).sqrt());
        self.alt_tau / sd
    }

    pub fn ife(&self, seed: u64) -> IfeConfig {
        IfeConfig {
            n_controls: self.n_controls,
            t_total: self.t0 + self.post,
            t0: self.t0,
            t_blank: self.t_blank,
            r_factors: self.r_factors,
            loadings: Loadings::StandardNormal,
            rho_lambda: self.rho_lambda,
            rho_eps: self.rho_eps,
            sigma: self.sigma,
            covariates: self.covariates,
            treatment: if self.effect_slope == 0.0 {
                EffectPath::Constant(self.effect)
            } else {
                EffectPath::Linear {
                    intercept: self.effect,
                    slope: self.effect_slope,
                }
            },
            seed,
        }
    }

    /// Checks every constraint up front so no replication fails halfway.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.block_size == 0 {
            return bad("block_size must be at least 1".into());
        }
        if !self.t_blank.is_multiple_of(self.block_size) {
            return bad(format!(
                "t_blank = {} is not divisible by block_size = {}",
                self.t_blank, self.block_size
            ));
        }
        if self.horizon() == 0 {
            return bad(format!(
                "post = {} gives no complete block of size {}",
                self.post, self.block_size
            ));
        }
        if self.tests.is_empty() {
            return bad("no tests configured".into());
        }
        for t in &self.tests {
            if let TestSpec::FixedT(k) = t {
                if *k > self.horizon() {
                    return bad(format!("{t} is beyond the horizon of {} blocks", self.horizon()));
                }
            }
        }
        if self.mc_draws == 0 || self.fixed_t_draws == 0 {
            return bad("mc_draws and fixed_t_draws must be positive".into());
        }
        if self.multipliers.is_empty() || self.multipliers.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return bad("multipliers must be positive and finite".into());
        }
        if !self.alt_tau.is_finite() || self.alt_sd.is_some_and(|sd| !(sd > 0.0 && sd.is_finite())) {
            return bad("alt_tau must be finite and alt_sd positive".into());
        }
        if !(self.effect.is_finite() && self.effect_slope.is_finite()) {
            return bad("effect and effect_slope must be finite".into());
        }
        self.ife(0).validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_text() {
        let mut cfg = ExperimentConfig::preset(Scenario::ScmVar1);
        cfg.tests.push(TestSpec::AvGaussian(0.5));
        cfg.alt_sd = Some(1.25);
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn scenario_applies_before_other_keys() {
        let cfg = ExperimentConfig::parse("replications = 7\nscenario = scm-var1 # preset\n").unwrap();
        assert_eq!(cfg.replications, 7);
        assert_eq!(cfg.block_size, 3);
        assert_eq!(cfg.estimator, Estimator::Scm);
    }

    #[test]
    fn tags() {
        for tag in [
            "fixed-t:12",
            "repeated-fixed-t",
            "av-gaussian",
            "av-gaussian:0.25",
            "av-plugin",
            "mix-average",
        ] {
            assert_eq!(tag.parse::<TestSpec>().unwrap().to_string(), tag);
        }
        for tag in ["fixed-t", "fixed-t:0", "av-gaussian:-1", "plugin"] {
            assert!(matches!(tag.parse::<TestSpec>(), Err(Error::UnknownTest(_))));
        }
    }

    #[test]
    fn indivisible_blank_periods_are_a_config_error() {
        let err = ExperimentConfig::parse("block_size = 3\nt_blank = 25\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert_eq!(err.exit_code(), 2);
        assert!(ExperimentConfig::parse("tests = fixed-t:31").is_err());
        assert!(ExperimentConfig::parse("bogus = 1").is_err());
    }

    #[test]
    fn standardised_effect() {
        let cfg = ExperimentConfig::preset(Scenario::DidIid);
        assert!((cfg.effect_size() - 1.5 / (1.05f64).sqrt()).abs() < 1e-12);
    }
}
