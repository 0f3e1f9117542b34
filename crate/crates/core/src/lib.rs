//! Tools for testing and estimating the effects of sequentially applied
//! treatments.
//!
//! The crate simulates longitudinal trials with hidden confounders of the
//! covariate process, evaluates the g-computation formula exactly and by
//! Monte Carlo, runs g-null tests, fits structural nested distribution
//! models by g-estimation and by maximum likelihood, and tests direct
//! effects with inverse-weighted moments.

pub mod data;
pub mod design;
pub mod direct_effect;
pub mod error;
pub mod gformula;
pub mod glm;
pub mod gnull;
pub mod optim;
pub mod par;
pub mod reproduce;
pub mod rng;
pub mod simulate;
pub mod sndm;
pub mod stats;

pub use data::{apply_regime, validate, Dataset, History, Kind, Regime, Schema, Trajectory};
pub use error::{Error, Result};
