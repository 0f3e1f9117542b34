//! Data generated through a structural nested distribution model.
//!
//! `H` is drawn first, covariates are drawn given `H` and the observed
//! past, treatments given the observed past only (so `A_m ⊥ H | L̄_m,
//! Ā_{m-1}`), and finally `Y = h⁻¹(H, L̄_K, Ā_K)` under the configured blip
//! at its true `ψ`. Counterfactual outcomes under a regime reuse the same
//! construction with the regime's treatments.

use serde::{Deserialize, Serialize};

use crate::data::{apply_regime, History, Kind, Regime, Schema, Trajectory};
use crate::error::{Error, Result};
use crate::glm::expit;
use crate::rng::SimRng;
use crate::simulate::scenario::{draw_bernoulli, draw_discrete, draw_normal, TreatmentLaw};
use crate::simulate::table::{Accumulator, JointTable};
use crate::sndm::blip::{h_inverse, BlipSpec};
use crate::stats::normal_ln_pdf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum HLaw {
    Normal { mean: f64, sd: f64 },
    Discrete { levels: Vec<f64>, probs: Vec<f64> },
}

impl HLaw {
    pub fn draw(&self, rng: &mut SimRng) -> f64 {
        match self {
            HLaw::Normal { mean, sd } => draw_normal(rng, *mean, *sd),
            HLaw::Discrete { levels, probs } => draw_discrete(rng, levels, probs),
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            HLaw::Normal { mean, sd } => {
                if !(mean.is_finite() && *sd > 0.0 && sd.is_finite()) {
                    return Err(Error::InvalidParameter("H: invalid normal parameters".into()));
                }
                Ok(())
            }
            HLaw::Discrete { levels, probs } => {
                let total: f64 = probs.iter().sum();
                if levels.is_empty()
                    || levels.len() != probs.len()
                    || probs.iter().any(|p| !(*p > 0.0))
                    || (total - 1.0).abs() > 1e-12
                {
                    return Err(Error::InvalidParameter("H: invalid discrete law".into()));
                }
                Ok(())
            }
        }
    }
}

/// Law of `L_m` given `(H, l_{m-1}, a_{m-1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum HCovariateLaw {
    Absent,
    Bernoulli {
        intercept: f64,
        #[serde(default)]
        h: f64,
        #[serde(default)]
        prev_l: f64,
        #[serde(default)]
        prev_a: f64,
    },
    Normal {
        intercept: f64,
        #[serde(default)]
        h: f64,
        #[serde(default)]
        prev_l: f64,
        #[serde(default)]
        prev_a: f64,
        sd: f64,
    },
}

impl HCovariateLaw {
    pub fn kind(&self) -> Kind {
        match self {
            HCovariateLaw::Absent => Kind::absent(),
            HCovariateLaw::Bernoulli { .. } => Kind::Binary,
            HCovariateLaw::Normal { .. } => Kind::Continuous,
        }
    }

    fn index(&self, hv: f64, l_prev: f64, a_prev: f64) -> f64 {
        match self {
            HCovariateLaw::Absent => 0.0,
            HCovariateLaw::Bernoulli { intercept, h, prev_l, prev_a }
            | HCovariateLaw::Normal { intercept, h, prev_l, prev_a, .. } => {
                intercept + h * hv + prev_l * l_prev + prev_a * a_prev
            }
        }
    }

    pub fn draw(&self, rng: &mut SimRng, h: f64, l_prev: f64, a_prev: f64) -> f64 {
        let eta = self.index(h, l_prev, a_prev);
        match self {
            HCovariateLaw::Absent => 0.0,
            HCovariateLaw::Bernoulli { .. } => draw_bernoulli(rng, expit(eta)),
            HCovariateLaw::Normal { sd, .. } => draw_normal(rng, eta, *sd),
        }
    }

    /// Log density (or mass) of `l_m`.
    pub fn ln_density(&self, l: f64, h: f64, l_prev: f64, a_prev: f64) -> f64 {
        let eta = self.index(h, l_prev, a_prev);
        match self {
            HCovariateLaw::Absent => 0.0,
            HCovariateLaw::Bernoulli { .. } => {
                let p = expit(eta);
                if l == 1.0 {
                    p.ln()
                } else {
                    (1.0 - p).ln()
                }
            }
            HCovariateLaw::Normal { sd, .. } => normal_ln_pdf(l, eta, *sd),
        }
    }

    fn support(&self, h: f64, l_prev: f64, a_prev: f64) -> Result<Vec<(f64, f64)>> {
        match self {
            HCovariateLaw::Absent => Ok(vec![(0.0, 1.0)]),
            HCovariateLaw::Bernoulli { .. } => {
                let p = expit(self.index(h, l_prev, a_prev));
                Ok(vec![(0.0, 1.0 - p), (1.0, p)])
            }
            HCovariateLaw::Normal { .. } => Err(Error::NotEnumerable("continuous covariate".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SndmScenario {
    pub k: usize,
    pub h: HLaw,
    pub covariates: Vec<HCovariateLaw>,
    pub treatments: Vec<TreatmentLaw>,
    /// Blip family at the true `ψ`.
    pub blip: BlipSpec,
}

impl SndmScenario {
    pub fn check(&self) -> Result<()> {
        let occ = self.k + 1;
        if self.covariates.len() != occ || self.treatments.len() != occ {
            return Err(Error::InvalidParameter(format!("K = {} needs {occ} covariate and treatment laws", self.k)));
        }
        self.h.check()?;
        for (m, t) in self.treatments.iter().enumerate() {
            t.check(m)?;
        }
        self.blip.check()
    }

    pub fn schema(&self) -> Schema {
        Schema {
            k: self.k,
            covariates: self.covariates.iter().map(HCovariateLaw::kind).collect(),
            treatments: self.treatments.iter().map(TreatmentLaw::kind).collect(),
        }
    }

    /// One subject and its `H`.
    pub fn draw(&self, rng: &mut SimRng, regime: Option<&Regime>) -> Result<(Trajectory, f64)> {
        let h = self.h.draw(rng);
        self.draw_given_h(rng, h, regime)
    }

    pub fn draw_given_h(&self, rng: &mut SimRng, h: f64, regime: Option<&Regime>) -> Result<(Trajectory, f64)> {
        let occ = self.k + 1;
        let mut l = Vec::with_capacity(occ);
        let mut a = Vec::with_capacity(occ);
        for m in 0..occ {
            let l_prev = if m == 0 { 0.0 } else { l[m - 1] };
            let a_prev = if m == 0 { 0.0 } else { a[m - 1] };
            l.push(self.covariates[m].draw(rng, h, l_prev, a_prev));
            let a_m = match regime {
                Some(g) => apply_regime(g, &History::new(m, &l, &a), &self.treatments[m].kind())?,
                None => self.treatments[m].draw(rng, l[m], a_prev),
            };
            a.push(a_m);
        }
        let y = h_inverse(&self.blip, h, &l, &a)?;
        Ok((Trajectory::new(l, a, y), h))
    }

    pub fn enumerate(&self, y_bins: Option<&[f64]>) -> Result<JointTable> {
        self.check()?;
        let (levels, probs) = match &self.h {
            HLaw::Discrete { levels, probs } => (levels.clone(), probs.clone()),
            HLaw::Normal { .. } => return Err(Error::NotEnumerable("H is continuous".into())),
        };
        let occ = self.k + 1;
        let mut acc = Accumulator::new(self.schema(), y_bins)?;
        let mut l = vec![0.0; occ];
        let mut a = vec![0.0; occ];
        for (h, ph) in levels.into_iter().zip(probs) {
            self.enumerate_from(0, h, ph, &mut l, &mut a, &mut acc)?;
        }
        acc.finish()
    }

    fn enumerate_from(&self, m: usize, h: f64, p: f64, l: &mut Vec<f64>, a: &mut Vec<f64>, acc: &mut Accumulator) -> Result<()> {
        if p == 0.0 {
            return Ok(());
        }
        if m > self.k {
            let y = h_inverse(&self.blip, h, l, a)?;
            acc.add_point(l, a, y, p);
            return Ok(());
        }
        let l_prev = if m == 0 { 0.0 } else { l[m - 1] };
        let a_prev = if m == 0 { 0.0 } else { a[m - 1] };
        for (lv, pl) in self.covariates[m].support(h, l_prev, a_prev)? {
            l[m] = lv;
            for (av, pa) in self.treatments[m].support(lv, a_prev)? {
                a[m] = av;
                self.enumerate_from(m + 1, h, p * pl * pa, l, a, acc)?;
            }
        }
        Ok(())
    }

    /// Two occasions, `H ~ N(0, 1)`, binary covariates and treatments, and
    /// the blip `y + ψ a_m`.
    pub fn recovery_default(psi: f64) -> Self {
        SndmScenario {
            k: 1,
            h: HLaw::Normal { mean: 0.0, sd: 1.0 },
            covariates: vec![
                HCovariateLaw::Bernoulli {
                    intercept: 0.0,
                    h: 1.0,
                    prev_l: 0.0,
                    prev_a: 0.0,
                },
                HCovariateLaw::Bernoulli {
                    intercept: -0.3,
                    h: 1.0,
                    prev_l: 0.5,
                    prev_a: -0.5,
                },
            ],
            treatments: vec![binary_treatment(), binary_treatment()],
            blip: BlipSpec::constant_shift(psi),
        }
    }

    /// All-discrete two-occasion scenario with integer-valued `H`, an
    /// `l`-interacting additive blip `y + a_m + a_m l_m` and hence
    /// integer outcomes.
    pub fn discrete_default() -> Self {
        use crate::design::Feature;
        use crate::sndm::blip::BlipFamily;
        SndmScenario {
            k: 1,
            h: HLaw::Discrete {
                levels: vec![0.0, 1.0, 2.0, 3.0],
                probs: vec![0.2, 0.3, 0.3, 0.2],
            },
            covariates: vec![
                HCovariateLaw::Bernoulli {
                    intercept: -1.0,
                    h: 0.7,
                    prev_l: 0.0,
                    prev_a: 0.0,
                },
                HCovariateLaw::Bernoulli {
                    intercept: -0.8,
                    h: 0.5,
                    prev_l: 0.6,
                    prev_a: -0.4,
                },
            ],
            treatments: vec![binary_treatment(), binary_treatment()],
            blip: BlipSpec {
                family: BlipFamily::Additive,
                features: vec![Feature::a(0), Feature::product(vec![Feature::a(0), Feature::l(0)])],
                psi: vec![1.0, 1.0],
            },
        }
    }
}

fn binary_treatment() -> TreatmentLaw {
    TreatmentLaw::Bernoulli {
        intercept: -0.2,
        l: 0.8,
        prev_a: 0.5,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;
    use crate::sndm::blip::compute_h;

    #[test]
    fn draws_invert_to_h() {
        let s = SndmScenario::discrete_default();
        for j in 0..200 {
            let mut rng = StreamKey::root(3).subject(j).rng();
            let (t, h) = s.draw(&mut rng, None).unwrap();
            assert_eq!(compute_h(&s.blip, &t).unwrap().h, h);
        }
    }

    #[test]
    fn enumeration_normalises() {
        let t = SndmScenario::discrete_default().enumerate(None).unwrap();
        assert!((t.total() - 1.0).abs() < 1e-12);
        assert!(SndmScenario::recovery_default(1.0).enumerate(None).is_err());
    }
}
