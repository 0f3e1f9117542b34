//! Structural nested distribution models.

pub mod blip;
pub mod fg;
pub mod gest;
pub mod mle;

pub use blip::{blip, blip_inverse, compute_h, h_inverse, BlipFamily, BlipSpec, HTransformResult};
pub use gest::{g_estimate, invert_score_test, GEstimate, GEstimateConfig, GEstimator, GridPoint, QStar, QStarFn, ScoreSource};
pub use mle::{sndm_lr_test, sndm_mle, sndm_profile_loglik, HCovariateFit, HDensity, MleSpec, SndmMle};
pub use fg::{empirical_fg_static, h_samples, mc_draw_fg, static_counterfactuals, CovariateSampler, FittedHLaws, HSource, ScenarioLaws};
