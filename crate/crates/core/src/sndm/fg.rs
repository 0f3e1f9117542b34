//! Regime outcome laws from a fitted blip.
//!
//! Monte Carlo: draw `h_v`, draw covariates sequentially given `h_v`, the
//! past and the regime's treatments, then set `y_v = h⁻¹(h_v, l̄_K, ā_K)`.
//! When the blip never reads covariates and the regime is static, the
//! covariate draws are irrelevant and `F_g` is the empirical law of
//! `h⁻¹(H_i(ψ̃), ā)`.

use crate::data::{apply_regime, Dataset, History, Regime, Schema};
use crate::error::{Error, Result};
use crate::gformula::RegimeDistribution;
use crate::par;
use crate::rng::{SimRng, StreamKey};
use crate::simulate::sndm_scenario::{HLaw, SndmScenario};
use crate::sndm::blip::{compute_h, h_inverse, BlipSpec};
use crate::sndm::mle::{HCovariateFit, SndmMle};
use crate::stats::empirical_survivor;

use rand::Rng;

/// Source of the `h_v`.
#[derive(Debug, Clone, PartialEq)]
pub enum HSource {
    /// `h_v = samples[v mod len]`: every sample used in turn.
    Samples(Vec<f64>),
    /// `h_v` resampled uniformly from the values.
    Empirical(Vec<f64>),
    Law(HLaw),
}

impl HSource {
    fn check(&self) -> Result<()> {
        match self {
            HSource::Samples(v) | HSource::Empirical(v) => {
                if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidParameter("h samples must be non-empty and finite".into()));
                }
                Ok(())
            }
            HSource::Law(_) => Ok(()),
        }
    }

    fn draw(&self, v: usize, rng: &mut SimRng) -> f64 {
        match self {
            HSource::Samples(s) => s[v % s.len()],
            HSource::Empirical(s) => s[rng.random_range(0..s.len())],
            HSource::Law(law) => law.draw(rng),
        }
    }
}

/// Covariate laws given the observed past and `H`.
pub trait CovariateSampler: Sync {
    fn schema(&self) -> &Schema;
    fn sample_covariate(&self, m: usize, l_prev: &[f64], a_prev: &[f64], h: f64, rng: &mut SimRng) -> Result<f64>;
}

/// The true structural laws of an SNDM scenario.
pub struct ScenarioLaws<'a> {
    pub scenario: &'a SndmScenario,
    schema: Schema,
}

impl<'a> ScenarioLaws<'a> {
    pub fn new(scenario: &'a SndmScenario) -> Self {
        ScenarioLaws {
            scenario,
            schema: scenario.schema(),
        }
    }
}

impl CovariateSampler for ScenarioLaws<'_> {
    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn sample_covariate(&self, m: usize, l_prev: &[f64], a_prev: &[f64], h: f64, rng: &mut SimRng) -> Result<f64> {
        let lp = l_prev.last().copied().unwrap_or(0.0);
        let ap = a_prev.last().copied().unwrap_or(0.0);
        Ok(self.scenario.covariates[m].draw(rng, h, lp, ap))
    }
}

/// Covariate laws fitted by [`crate::sndm::sndm_mle`].
pub struct FittedHLaws {
    pub schema: Schema,
    pub covariates: Vec<HCovariateFit>,
}

impl FittedHLaws {
    pub fn from_mle(fit: &SndmMle, schema: &Schema) -> Result<Self> {
        if fit.phi_hat.len() != schema.occasions() {
            return Err(Error::InvalidParameter("fit and schema disagree on K".into()));
        }
        Ok(FittedHLaws {
            schema: schema.clone(),
            covariates: fit.phi_hat.clone(),
        })
    }
}

impl CovariateSampler for FittedHLaws {
    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn sample_covariate(&self, m: usize, l_prev: &[f64], a_prev: &[f64], h: f64, rng: &mut SimRng) -> Result<f64> {
        self.covariates[m].sample(m, l_prev, a_prev, h, rng)
    }
}

/// `F_g` by Monte Carlo under the blip at its `psi`.
pub fn mc_draw_fg<C: CovariateSampler + ?Sized>(
    blip: &BlipSpec,
    h: &HSource,
    laws: &C,
    regime: &Regime,
    draws: usize,
    seed: u64,
) -> Result<RegimeDistribution> {
    blip.check()?;
    h.check()?;
    if draws == 0 {
        return Err(Error::InvalidParameter("draws must be at least 1".into()));
    }
    let schema = laws.schema();
    let occ = schema.occasions();
    let root = StreamKey::root(seed).child("regime-law");
    let samples = par::try_map(draws, |v| {
        let mut rng = root.subject(v).rng();
        let hv = h.draw(v, &mut rng);
        let mut l = Vec::with_capacity(occ);
        let mut a = Vec::with_capacity(occ);
        for m in 0..occ {
            let lm = laws.sample_covariate(m, &l, &a, hv, &mut rng)?;
            l.push(lm);
            let am = apply_regime(regime, &History::new(m, &l, &a), &schema.treatments[m])?;
            a.push(am);
        }
        let y = h_inverse(blip, hv, &l, &a)?;
        if !y.is_finite() {
            return Err(Error::InvalidParameter("non-finite counterfactual draw".into()));
        }
        Ok(y)
    })?;
    Ok(RegimeDistribution::Samples {
        regime: regime.name(),
        samples,
    })
}

fn check_static_blip(blip: &BlipSpec) -> Result<()> {
    if blip.features.iter().any(|f| f.uses_covariates()) {
        return Err(Error::Contract("blip reads covariates, so h⁻¹ depends on l̄; use mc_draw_fg".into()));
    }
    Ok(())
}

/// `h⁻¹(H_i(ψ̃), ā)` for every subject.
pub fn static_counterfactuals(dataset: &Dataset, blip: &BlipSpec, a_bar: &[f64]) -> Result<Vec<f64>> {
    check_static_blip(blip)?;
    let occ = dataset.k() + 1;
    if a_bar.len() != occ {
        return Err(Error::Contract(format!("static plan needs {occ} treatments")));
    }
    for (m, v) in a_bar.iter().enumerate() {
        if !dataset.schema.treatments[m].contains(*v) {
            return Err(Error::OutOfSupport { occasion: m, value: *v });
        }
    }
    let zeros = vec![0.0; occ];
    dataset
        .rows
        .iter()
        .map(|t| h_inverse(blip, compute_h(blip, t)?.h, &zeros, a_bar))
        .collect()
}

/// `n⁻¹ Σ_i I{h⁻¹(H_i(ψ̃), ā) > y}`.
pub fn empirical_fg_static(dataset: &Dataset, blip: &BlipSpec, a_bar: &[f64], y: f64) -> Result<f64> {
    Ok(empirical_survivor(&static_counterfactuals(dataset, blip, a_bar)?, y))
}

/// The per-subject `H_i(ψ)`, the default `f_H` sample.
pub fn h_samples(dataset: &Dataset, blip: &BlipSpec) -> Result<Vec<f64>> {
    dataset.rows.iter().map(|t| Ok(compute_h(blip, t)?.h)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::Feature;
    use crate::gformula::g_formula_exact;
    use crate::simulate::{enumerate_joint, simulate};
    use crate::sndm::BlipFamily;
    use crate::stats::dkw_envelope;

    #[test]
    fn zero_psi_returns_the_h_draws() {
        let s = SndmScenario::recovery_default(0.0);
        let hs: Vec<f64> = (0..200).map(|i| i as f64 * 0.1 - 3.0).collect();
        let out = mc_draw_fg(&s.blip, &HSource::Samples(hs.clone()), &ScenarioLaws::new(&s), &Regime::fixed(&[1.0, 1.0]), 200, 3).unwrap();
        let RegimeDistribution::Samples { samples, .. } = out else { panic!() };
        assert_eq!(samples, hs);
    }

    #[test]
    fn collapses_to_the_plug_in_for_static_plans() {
        let s = SndmScenario::recovery_default(1.0);
        let d = simulate(&s, 500, 9).unwrap();
        let hs = h_samples(&d, &s.blip).unwrap();
        let plan = [1.0, 0.0];
        let out = mc_draw_fg(&s.blip, &HSource::Samples(hs), &ScenarioLaws::new(&s), &Regime::fixed(&plan), d.n(), 1).unwrap();
        for y in [-1.0, 0.0, 0.5, 1.5] {
            assert_eq!(out.survivor(y).unwrap(), empirical_fg_static(&d, &s.blip, &plan, y).unwrap());
        }
    }

    #[test]
    fn matches_exact_enumeration() {
        let s = SndmScenario::discrete_default();
        let table = enumerate_joint(&s, None).unwrap();
        let regime = Regime::follow_covariate();
        let exact = g_formula_exact(&table, &regime).unwrap();
        let n = 100_000;
        let mc = mc_draw_fg(&s.blip, &HSource::Law(s.h.clone()), &ScenarioLaws::new(&s), &regime, n, 5).unwrap();
        for (y, sv) in exact.survivor_grid() {
            assert!((mc.survivor(y).unwrap() - sv).abs() < dkw_envelope(n), "y = {y}");
        }
    }

    #[test]
    fn covariate_interacting_blip_is_rejected() {
        let s = SndmScenario::discrete_default();
        let d = simulate(&s, 20, 1).unwrap();
        assert!(matches!(empirical_fg_static(&d, &s.blip, &[1.0, 1.0], 0.0), Err(Error::Contract(_))));
        let plain = BlipSpec::new(BlipFamily::Additive, vec![Feature::a(0)], vec![0.0]).unwrap();
        let ys = d.outcomes();
        assert_eq!(empirical_fg_static(&d, &plain, &[1.0, 0.0], 2.0).unwrap(), empirical_survivor(&ys, 2.0));
    }
}
