//! Structural data-generating processes, counterfactual draws and exact
//! enumeration.

pub mod diagnostics;
pub mod scenario;
pub mod sndm_scenario;
pub mod table;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Regime, Schema, Trajectory};
use crate::error::{Error, Result};
use crate::par;
use crate::rng::{SimRng, StreamKey};

pub use diagnostics::{diagnostics, FaithfulnessDiagnostics, Partial, Var};
pub use scenario::{CovariateLaw, Dag, HiddenLaw, Noise, OutcomeLaw, SequentialConfig, TreatmentLaw};
pub use sndm_scenario::{HCovariateLaw, HLaw, SndmScenario};
pub use table::{Cell, JointTable, YAxis};

/// A structural model that can generate observables, counterfactual
/// outcomes, and (when discrete) its exact observable law.
pub trait Structural: Sync {
    fn schema(&self) -> Schema;
    fn check(&self) -> Result<()>;
    /// One subject together with its hidden variable (`U` or `H`).
    fn draw(&self, rng: &mut SimRng, regime: Option<&Regime>) -> Result<(Trajectory, f64)>;
    fn enumerate(&self, y_bins: Option<&[f64]>) -> Result<JointTable>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioConfig {
    Sequential(SequentialConfig),
    Sndm(SndmScenario),
}

impl Structural for SequentialConfig {
    fn schema(&self) -> Schema {
        SequentialConfig::schema(self)
    }
    fn check(&self) -> Result<()> {
        SequentialConfig::check(self)
    }
    fn draw(&self, rng: &mut SimRng, regime: Option<&Regime>) -> Result<(Trajectory, f64)> {
        SequentialConfig::draw(self, rng, regime)
    }
    fn enumerate(&self, y_bins: Option<&[f64]>) -> Result<JointTable> {
        SequentialConfig::enumerate(self, y_bins)
    }
}

impl Structural for SndmScenario {
    fn schema(&self) -> Schema {
        SndmScenario::schema(self)
    }
    fn check(&self) -> Result<()> {
        SndmScenario::check(self)
    }
    fn draw(&self, rng: &mut SimRng, regime: Option<&Regime>) -> Result<(Trajectory, f64)> {
        SndmScenario::draw(self, rng, regime)
    }
    fn enumerate(&self, y_bins: Option<&[f64]>) -> Result<JointTable> {
        SndmScenario::enumerate(self, y_bins)
    }
}

impl Structural for ScenarioConfig {
    fn schema(&self) -> Schema {
        match self {
            ScenarioConfig::Sequential(c) => c.schema(),
            ScenarioConfig::Sndm(c) => c.schema(),
        }
    }
    fn check(&self) -> Result<()> {
        match self {
            ScenarioConfig::Sequential(c) => c.check(),
            ScenarioConfig::Sndm(c) => c.check(),
        }
    }
    fn draw(&self, rng: &mut SimRng, regime: Option<&Regime>) -> Result<(Trajectory, f64)> {
        match self {
            ScenarioConfig::Sequential(c) => c.draw(rng, regime),
            ScenarioConfig::Sndm(c) => c.draw(rng, regime),
        }
    }
    fn enumerate(&self, y_bins: Option<&[f64]>) -> Result<JointTable> {
        match self {
            ScenarioConfig::Sequential(c) => c.enumerate(y_bins),
            ScenarioConfig::Sndm(c) => c.enumerate(y_bins),
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    Ok(())
}

/// `n` draws of the observables plus the hidden variable of each subject.
pub fn simulate_with_hidden<S: Structural + ?Sized>(config: &S, n: usize, seed: u64) -> Result<(Dataset, Vec<f64>)> {
    check_n(n)?;
    config.check()?;
    let root = StreamKey::root(seed);
    let draws = par::try_map(n, |j| config.draw(&mut root.subject(j).rng(), None))?;
    let (rows, hidden): (Vec<_>, Vec<_>) = draws.into_iter().unzip();
    Ok((Dataset::new(config.schema(), rows)?, hidden))
}

/// `n` independent draws of the observables; subject `j` uses its own
/// stream so results do not depend on `n` or the worker count.
pub fn simulate<S: Structural + ?Sized>(config: &S, n: usize, seed: u64) -> Result<Dataset> {
    simulate_with_hidden(config, n, seed).map(|(d, _)| d)
}

/// `n` draws of `Y` from the manipulated law `F_g`.
pub fn counterfactual_draws<S: Structural + ?Sized>(config: &S, regime: &Regime, n: usize, seed: u64) -> Result<Vec<f64>> {
    check_n(n)?;
    config.check()?;
    let root = StreamKey::root(seed).child("counterfactual");
    par::try_map(n, |j| config.draw(&mut root.subject(j).rng(), Some(regime)).map(|(t, _)| t.y))
}

/// Exact observable law with the hidden variable summed out.
pub fn enumerate_joint<S: Structural + ?Sized>(config: &S, y_bins: Option<&[f64]>) -> Result<JointTable> {
    config.enumerate(y_bins)
}
