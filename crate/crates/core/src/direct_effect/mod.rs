//! Direct effects of one treatment component when the other is set.

pub mod estimate;
pub mod gnull;
pub mod lemma2;
pub mod theorem5;
pub mod weights;

pub use estimate::{de_sndm_estimate, de_sndm_p_value, direct_effect_h, DeQStar, DeQStarFn, DeSndmSpec};
pub use gnull::{de_gnull_test, weighted_moment_by_a0, weighted_outcomes, DeGnullSpec, ScoreVariance, TransformFn};
pub use lemma2::{interaction_scenario, lemma2_demo, lemma2_demo_at, Lemma2Report};
pub use theorem5::{theorem5_check, theorem5_check_sample, ConstancyReport, MomentFn};
pub use weights::{densities, AlphaSource, IpwWeights, Role, SplitSchema, TreatmentDensity, WEIGHT_FLOOR};
