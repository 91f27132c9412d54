//! Anytime-valid rank tests for treatment effects.
//!
//! Treatment estimates from pre-treatment "blank" periods and from
//! post-treatment periods are exchangeable when there is no effect. The crate
//! turns their sequential (or reduced sequential) ranks into e-values whose
//! running product is a test martingale, so the resulting p-value may be
//! monitored after every new estimate.
//!
//! * [`ranks`]: sequential and reduced ranks and their null laws.
//! * [`eprocess`]: e-values and the log-scale test martingale.
//! * [`alternatives`]: plug-in, Gaussian and mixture statistics.
//! * [`panel`]: interactive fixed effects data, DiD and synthetic control estimates.
//! * [`fixedt`]: the fixed-horizon permutation test used as a baseline.
//! * [`harness`]: simulation experiments, utilities and the streaming monitor.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alternatives;
pub mod eprocess;
pub mod error;
pub mod fixedt;
pub mod harness;
pub mod normal;
pub mod panel;
pub mod ranks;
pub mod rng;
pub mod sequential;

pub use error::{Error, Result};
