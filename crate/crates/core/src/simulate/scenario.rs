//! Sequential-trial structural equations with a hidden confounder `U`.
//!
//! Draw order is `U, L_0, A_0, L_1, A_1, ..., L_K, A_K, Y`. Treatments
//! depend only on the observed past, so every configuration is a
//! sequentially randomised trial; `U` may drive the covariates and the
//! outcome. The four two-occasion graphs (`K = 1`, `L_0` absent, `L_1 = L`)
//! differ only in which outcome arrows are nonzero.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{apply_regime, History, Kind, Regime, Schema, Trajectory};
use crate::error::{Error, Result};
use crate::glm::expit;
use crate::rng::SimRng;
use crate::simulate::table::{Accumulator, JointTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum HiddenLaw {
    Bernoulli { p: f64 },
    Normal { mean: f64, sd: f64 },
    Discrete { levels: Vec<f64>, probs: Vec<f64> },
}

/// Law of `L_m` given `(U, l_{m-1}, a_{m-1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovariateLaw {
    /// Not measured; recorded as 0.
    Absent,
    /// `pr[L_m = 1] = expit(intercept + u·U + prev_l·l_{m-1} + prev_a·a_{m-1})`.
    Bernoulli {
        intercept: f64,
        #[serde(default)]
        u: f64,
        #[serde(default)]
        prev_l: f64,
        #[serde(default)]
        prev_a: f64,
    },
    Normal {
        intercept: f64,
        #[serde(default)]
        u: f64,
        #[serde(default)]
        prev_l: f64,
        #[serde(default)]
        prev_a: f64,
        sd: f64,
    },
}

/// Law of `A_m` given `(l_m, a_{m-1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum TreatmentLaw {
    Bernoulli {
        intercept: f64,
        #[serde(default)]
        l: f64,
        #[serde(default)]
        prev_a: f64,
    },
    Normal {
        intercept: f64,
        #[serde(default)]
        l: f64,
        #[serde(default)]
        prev_a: f64,
        sd: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum Noise {
    Normal { sd: f64 },
    Discrete { levels: Vec<f64>, probs: Vec<f64> },
}

/// `Y = intercept + u·U + Σ_m (a_m·A_m + a_u_m·A_m·U + l_m·L_m) + ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeLaw {
    pub intercept: f64,
    #[serde(default)]
    pub u: f64,
    #[serde(default)]
    pub a: Vec<f64>,
    #[serde(default)]
    pub l: Vec<f64>,
    #[serde(default)]
    pub a_u: Vec<f64>,
    pub noise: Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dag {
    #[serde(rename = "1a")]
    Dag1a,
    #[serde(rename = "1b")]
    Dag1b,
    #[serde(rename = "1c")]
    Dag1c,
    #[serde(rename = "1d")]
    Dag1d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequentialConfig {
    pub k: usize,
    #[serde(default)]
    pub dag: Option<Dag>,
    pub u: HiddenLaw,
    pub covariates: Vec<CovariateLaw>,
    pub treatments: Vec<TreatmentLaw>,
    pub outcome: OutcomeLaw,
}

fn coef(v: &[f64], m: usize) -> f64 {
    v.get(m).copied().unwrap_or(0.0)
}

fn check_probs(levels: &[f64], probs: &[f64], what: &str) -> Result<()> {
    if levels.is_empty() || levels.len() != probs.len() {
        return Err(Error::InvalidParameter(format!("{what}: levels and probabilities must pair up")));
    }
    if probs.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
        return Err(Error::InvalidParameter(format!("{what}: probabilities must lie in (0, 1]")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("{what}: probabilities sum to {total}")));
    }
    if levels.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what}: levels must be finite")));
    }
    Ok(())
}

fn check_finite(vals: &[f64], what: &str) -> Result<()> {
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what}: coefficients must be finite")));
    }
    Ok(())
}

fn check_sd(sd: f64, what: &str, allow_zero: bool) -> Result<()> {
    let ok = if allow_zero { sd >= 0.0 } else { sd > 0.0 };
    if !(ok && sd.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what}: invalid standard deviation {sd}")));
    }
    Ok(())
}

pub(crate) fn draw_discrete(rng: &mut SimRng, levels: &[f64], probs: &[f64]) -> f64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (v, p) in levels.iter().zip(probs) {
        acc += p;
        if u < acc {
            return *v;
        }
    }
    *levels.last().expect("nonempty levels")
}

pub(crate) fn draw_bernoulli(rng: &mut SimRng, p: f64) -> f64 {
    f64::from(u8::from(rng.random::<f64>() < p))
}

pub(crate) fn draw_normal(rng: &mut SimRng, mean: f64, sd: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean + sd * z
}

impl HiddenLaw {
    pub(crate) fn check(&self) -> Result<()> {
        match self {
            HiddenLaw::Bernoulli { p } => {
                if !(*p > 0.0 && *p < 1.0) {
                    return Err(Error::InvalidParameter(format!("pr[U = 1] = {p} is outside (0, 1)")));
                }
                Ok(())
            }
            HiddenLaw::Normal { mean, sd } => {
                check_finite(&[*mean], "U")?;
                check_sd(*sd, "U", false)
            }
            HiddenLaw::Discrete { levels, probs } => check_probs(levels, probs, "U"),
        }
    }

    pub(crate) fn draw(&self, rng: &mut SimRng) -> f64 {
        match self {
            HiddenLaw::Bernoulli { p } => draw_bernoulli(rng, *p),
            HiddenLaw::Normal { mean, sd } => draw_normal(rng, *mean, *sd),
            HiddenLaw::Discrete { levels, probs } => draw_discrete(rng, levels, probs),
        }
    }

    pub(crate) fn support(&self) -> Result<Vec<(f64, f64)>> {
        match self {
            HiddenLaw::Bernoulli { p } => Ok(vec![(0.0, 1.0 - p), (1.0, *p)]),
            HiddenLaw::Discrete { levels, probs } => Ok(levels.iter().copied().zip(probs.iter().copied()).collect()),
            HiddenLaw::Normal { .. } => Err(Error::NotEnumerable("U is continuous".into())),
        }
    }
}

impl CovariateLaw {
    pub fn kind(&self) -> Kind {
        match self {
            CovariateLaw::Absent => Kind::absent(),
            CovariateLaw::Bernoulli { .. } => Kind::Binary,
            CovariateLaw::Normal { .. } => Kind::Continuous,
        }
    }

    fn check(&self, m: usize) -> Result<()> {
        let what = format!("L{m}");
        match self {
            CovariateLaw::Absent => Ok(()),
            CovariateLaw::Bernoulli { intercept, u, prev_l, prev_a } => {
                check_finite(&[*intercept, *u, *prev_l, *prev_a], &what)
            }
            CovariateLaw::Normal { intercept, u, prev_l, prev_a, sd } => {
                check_finite(&[*intercept, *u, *prev_l, *prev_a], &what)?;
                check_sd(*sd, &what, true)
            }
        }
    }

    fn index(&self, u_val: f64, l_prev: f64, a_prev: f64) -> f64 {
        match self {
            CovariateLaw::Absent => 0.0,
            CovariateLaw::Bernoulli { intercept, u, prev_l, prev_a }
            | CovariateLaw::Normal { intercept, u, prev_l, prev_a, .. } => {
                intercept + u * u_val + prev_l * l_prev + prev_a * a_prev
            }
        }
    }

    fn draw(&self, rng: &mut SimRng, u: f64, l_prev: f64, a_prev: f64) -> f64 {
        let eta = self.index(u, l_prev, a_prev);
        match self {
            CovariateLaw::Absent => 0.0,
            CovariateLaw::Bernoulli { .. } => draw_bernoulli(rng, expit(eta)),
            CovariateLaw::Normal { sd, .. } => draw_normal(rng, eta, *sd),
        }
    }

    fn support(&self, u: f64, l_prev: f64, a_prev: f64) -> Result<Vec<(f64, f64)>> {
        match self {
            CovariateLaw::Absent => Ok(vec![(0.0, 1.0)]),
            CovariateLaw::Bernoulli { .. } => {
                let p = expit(self.index(u, l_prev, a_prev));
                Ok(vec![(0.0, 1.0 - p), (1.0, p)])
            }
            CovariateLaw::Normal { .. } => Err(Error::NotEnumerable("continuous covariate".into())),
        }
    }

    pub fn uses_hidden(&self) -> bool {
        match self {
            CovariateLaw::Absent => false,
            CovariateLaw::Bernoulli { u, .. } | CovariateLaw::Normal { u, .. } => *u != 0.0,
        }
    }
}

impl TreatmentLaw {
    pub fn kind(&self) -> Kind {
        match self {
            TreatmentLaw::Bernoulli { .. } => Kind::Binary,
            TreatmentLaw::Normal { .. } => Kind::Continuous,
        }
    }

    pub(crate) fn check(&self, m: usize) -> Result<()> {
        let what = format!("A{m}");
        match self {
            TreatmentLaw::Bernoulli { intercept, l, prev_a } => check_finite(&[*intercept, *l, *prev_a], &what),
            TreatmentLaw::Normal { intercept, l, prev_a, sd } => {
                check_finite(&[*intercept, *l, *prev_a], &what)?;
                check_sd(*sd, &what, false)
            }
        }
    }

    /// Linear index `intercept + l·l_m + prev_a·a_{m-1}`.
    pub fn index(&self, l_m: f64, a_prev: f64) -> f64 {
        match self {
            TreatmentLaw::Bernoulli { intercept, l, prev_a } | TreatmentLaw::Normal { intercept, l, prev_a, .. } => {
                intercept + l * l_m + prev_a * a_prev
            }
        }
    }

    /// Conditional mean of `A_m`.
    pub fn mean(&self, l_m: f64, a_prev: f64) -> f64 {
        match self {
            TreatmentLaw::Bernoulli { .. } => expit(self.index(l_m, a_prev)),
            TreatmentLaw::Normal { .. } => self.index(l_m, a_prev),
        }
    }

    /// Density (or mass) of `a_m` given the past.
    pub fn density(&self, a_m: f64, l_m: f64, a_prev: f64) -> f64 {
        match self {
            TreatmentLaw::Bernoulli { .. } => {
                let p = expit(self.index(l_m, a_prev));
                if a_m == 1.0 {
                    p
                } else {
                    1.0 - p
                }
            }
            TreatmentLaw::Normal { sd, .. } => {
                let z = (a_m - self.index(l_m, a_prev)) / sd;
                crate::stats::normal_pdf(z) / sd
            }
        }
    }

    pub(crate) fn draw(&self, rng: &mut SimRng, l_m: f64, a_prev: f64) -> f64 {
        match self {
            TreatmentLaw::Bernoulli { .. } => draw_bernoulli(rng, self.mean(l_m, a_prev)),
            TreatmentLaw::Normal { sd, .. } => draw_normal(rng, self.index(l_m, a_prev), *sd),
        }
    }

    pub(crate) fn support(&self, l_m: f64, a_prev: f64) -> Result<Vec<(f64, f64)>> {
        match self {
            TreatmentLaw::Bernoulli { .. } => {
                let p = self.mean(l_m, a_prev);
                Ok(vec![(0.0, 1.0 - p), (1.0, p)])
            }
            TreatmentLaw::Normal { .. } => Err(Error::NotEnumerable("continuous treatment".into())),
        }
    }
}

impl Noise {
    fn check(&self) -> Result<()> {
        match self {
            Noise::Normal { sd } => check_sd(*sd, "outcome noise", true),
            Noise::Discrete { levels, probs } => check_probs(levels, probs, "outcome noise"),
        }
    }

    fn draw(&self, rng: &mut SimRng) -> f64 {
        match self {
            Noise::Normal { sd } => draw_normal(rng, 0.0, *sd),
            Noise::Discrete { levels, probs } => draw_discrete(rng, levels, probs),
        }
    }
}

impl OutcomeLaw {
    pub fn mean(&self, u: f64, l: &[f64], a: &[f64]) -> f64 {
        let mut y = self.intercept + self.u * u;
        for m in 0..a.len() {
            y += coef(&self.a, m) * a[m] + coef(&self.a_u, m) * a[m] * u + coef(&self.l, m) * l[m];
        }
        y
    }
}

impl SequentialConfig {
    pub fn check(&self) -> Result<()> {
        let occ = self.k + 1;
        if self.covariates.len() != occ || self.treatments.len() != occ {
            return Err(Error::InvalidParameter(format!(
                "K = {} needs {occ} covariate and treatment laws, got {} and {}",
                self.k,
                self.covariates.len(),
                self.treatments.len()
            )));
        }
        for (name, v) in [("outcome.a", &self.outcome.a), ("outcome.l", &self.outcome.l), ("outcome.a_u", &self.outcome.a_u)] {
            if v.len() > occ {
                return Err(Error::InvalidParameter(format!("{name} has more than {occ} entries")));
            }
            check_finite(v, name)?;
        }
        check_finite(&[self.outcome.intercept, self.outcome.u], "outcome")?;
        self.u.check()?;
        for (m, c) in self.covariates.iter().enumerate() {
            c.check(m)?;
        }
        for (m, t) in self.treatments.iter().enumerate() {
            t.check(m)?;
        }
        self.outcome.noise.check()?;
        if let Some(dag) = self.dag {
            self.check_dag(dag)?;
        }
        Ok(())
    }

    fn check_dag(&self, dag: Dag) -> Result<()> {
        let bad = |why: &str| Err(Error::InvalidParameter(format!("DAG {dag:?}: {why}")));
        if self.k != 1 {
            return bad("the two-occasion graphs need K = 1");
        }
        if self.covariates[0] != CovariateLaw::Absent {
            return bad("L0 must be absent");
        }
        if self.outcome.l.iter().any(|c| *c != 0.0) {
            return bad("there is no arrow from L to Y");
        }
        let a0 = coef(&self.outcome.a, 0) != 0.0 || coef(&self.outcome.a_u, 0) != 0.0;
        let a1 = coef(&self.outcome.a, 1) != 0.0 || coef(&self.outcome.a_u, 1) != 0.0;
        match dag {
            Dag::Dag1a => Ok(()),
            Dag::Dag1b if a0 || a1 => bad("Y must not depend on A0 or A1"),
            Dag::Dag1c if a0 => bad("Y must not depend on A0"),
            Dag::Dag1d if a1 => bad("Y must not depend on A1"),
            _ => Ok(()),
        }
    }

    pub fn schema(&self) -> Schema {
        Schema {
            k: self.k,
            covariates: self.covariates.iter().map(CovariateLaw::kind).collect(),
            treatments: self.treatments.iter().map(TreatmentLaw::kind).collect(),
        }
    }

    /// One subject. With a regime, treatments are set by the regime and no
    /// randomness is spent on them.
    pub fn draw(&self, rng: &mut SimRng, regime: Option<&Regime>) -> Result<(Trajectory, f64)> {
        let occ = self.k + 1;
        let u = self.u.draw(rng);
        let mut l = Vec::with_capacity(occ);
        let mut a = Vec::with_capacity(occ);
        for m in 0..occ {
            let l_prev = if m == 0 { 0.0 } else { l[m - 1] };
            let a_prev = if m == 0 { 0.0 } else { a[m - 1] };
            l.push(self.covariates[m].draw(rng, u, l_prev, a_prev));
            let a_m = match regime {
                Some(g) => apply_regime(g, &History::new(m, &l, &a), &self.treatments[m].kind())?,
                None => self.treatments[m].draw(rng, l[m], a_prev),
            };
            a.push(a_m);
        }
        let y = self.outcome.mean(u, &l, &a) + self.outcome.noise.draw(rng);
        Ok((Trajectory::new(l, a, y), u))
    }

    /// Exact law of the observables with `U` summed out.
    pub fn enumerate(&self, y_bins: Option<&[f64]>) -> Result<JointTable> {
        self.check()?;
        let occ = self.k + 1;
        let noise: Vec<(f64, f64)> = match (&self.outcome.noise, y_bins) {
            (Noise::Discrete { levels, probs }, _) => levels.iter().copied().zip(probs.iter().copied()).collect(),
            (Noise::Normal { .. }, None) => {
                return Err(Error::NotEnumerable("continuous outcome needs y bins".into()));
            }
            (Noise::Normal { .. }, Some(_)) => Vec::new(),
        };
        let mut acc = Accumulator::new(self.schema(), y_bins)?;
        let mut l = vec![0.0; occ];
        let mut a = vec![0.0; occ];
        for (u, pu) in self.u.support()? {
            self.enumerate_from(0, u, pu, &mut l, &mut a, &noise, &mut acc)?;
        }
        acc.finish()
    }

    #[allow(clippy::too_many_arguments)]
    fn enumerate_from(
        &self,
        m: usize,
        u: f64,
        p: f64,
        l: &mut Vec<f64>,
        a: &mut Vec<f64>,
        noise: &[(f64, f64)],
        acc: &mut Accumulator,
    ) -> Result<()> {
        if p == 0.0 {
            return Ok(());
        }
        if m > self.k {
            let mean = self.outcome.mean(u, l, a);
            match &self.outcome.noise {
                Noise::Discrete { .. } => {
                    for (e, pe) in noise {
                        acc.add_point(l, a, mean + e, p * pe);
                    }
                }
                Noise::Normal { sd } => acc.add_normal(l, a, mean, *sd, p),
            }
            return Ok(());
        }
        let l_prev = if m == 0 { 0.0 } else { l[m - 1] };
        let a_prev = if m == 0 { 0.0 } else { a[m - 1] };
        for (lv, pl) in self.covariates[m].support(u, l_prev, a_prev)? {
            l[m] = lv;
            for (av, pa) in self.treatments[m].support(lv, a_prev)? {
                a[m] = av;
                self.enumerate_from(m + 1, u, p * pl * pa, l, a, noise, acc)?;
            }
        }
        Ok(())
    }

    /// `U ~ Bern(0.5)`, `A_0 ~ N(0, 1)`, `L ~ Bern(expit(-0.5 + 1.5U + A_0))`,
    /// `A_1 ~ N(0.5A_0 + 0.7L, 1)`, `Y = 1 + 2U + N(0, 1)`.
    pub fn null_paradox_default() -> Self {
        SequentialConfig {
            k: 1,
            dag: Some(Dag::Dag1b),
            u: HiddenLaw::Bernoulli { p: 0.5 },
            covariates: vec![
                CovariateLaw::Absent,
                CovariateLaw::Bernoulli {
                    intercept: -0.5,
                    u: 1.5,
                    prev_l: 0.0,
                    prev_a: 1.0,
                },
            ],
            treatments: vec![
                TreatmentLaw::Normal {
                    intercept: 0.0,
                    l: 0.0,
                    prev_a: 0.0,
                    sd: 1.0,
                },
                TreatmentLaw::Normal {
                    intercept: 0.0,
                    l: 0.7,
                    prev_a: 0.5,
                    sd: 1.0,
                },
            ],
            outcome: OutcomeLaw {
                intercept: 1.0,
                u: 2.0,
                a: vec![],
                l: vec![],
                a_u: vec![],
                noise: Noise::Normal { sd: 1.0 },
            },
        }
    }

    /// The default trial with direct outcome effects `beta0·A_0 + beta1·A_1`
    /// and an `A_1·U` interaction; the graph label follows from which
    /// effects are nonzero.
    pub fn with_effects(beta0: f64, beta1: f64, a1_u: f64) -> Self {
        let mut c = Self::null_paradox_default();
        c.outcome.a = vec![beta0, beta1];
        c.outcome.a_u = vec![0.0, a1_u];
        let a0 = beta0 != 0.0;
        let a1 = beta1 != 0.0 || a1_u != 0.0;
        c.dag = Some(match (a0, a1) {
            (false, false) => Dag::Dag1b,
            (false, true) => Dag::Dag1c,
            (true, false) => Dag::Dag1d,
            (true, true) => Dag::Dag1a,
        });
        c
    }

    /// An all-binary two-occasion trial with discrete outcome noise, so the
    /// observable law can be enumerated exactly.
    pub fn binary_toy(beta0: f64, beta1: f64) -> Self {
        let mut c = Self::with_effects(beta0, beta1, 0.0);
        c.treatments = vec![
            TreatmentLaw::Bernoulli {
                intercept: 0.2,
                l: 0.0,
                prev_a: 0.0,
            },
            TreatmentLaw::Bernoulli {
                intercept: -0.4,
                l: 1.0,
                prev_a: 0.6,
            },
        ];
        c.covariates[1] = CovariateLaw::Bernoulli {
            intercept: -0.5,
            u: 1.5,
            prev_l: 0.0,
            prev_a: 1.0,
        };
        c.outcome.noise = Noise::Discrete {
            levels: vec![-1.0, 0.0, 1.0],
            probs: vec![0.25, 0.5, 0.25],
        };
        c
    }

    /// A `K`-occasion binary-treatment trial under the null: `Y` depends
    /// on `U` only, while `U` drives every covariate.
    pub fn binary_null_trial(k: usize) -> Self {
        let occ = k + 1;
        SequentialConfig {
            k,
            dag: None,
            u: HiddenLaw::Bernoulli { p: 0.5 },
            covariates: (0..occ)
                .map(|_| CovariateLaw::Bernoulli {
                    intercept: -0.5,
                    u: 1.2,
                    prev_l: 0.5,
                    prev_a: 0.8,
                })
                .collect(),
            treatments: (0..occ)
                .map(|_| TreatmentLaw::Bernoulli {
                    intercept: -0.3,
                    l: 0.9,
                    prev_a: 0.6,
                })
                .collect(),
            outcome: OutcomeLaw {
                intercept: 1.0,
                u: 2.0,
                a: vec![],
                l: vec![],
                a_u: vec![],
                noise: Noise::Normal { sd: 1.0 },
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dag_constraints_enforced() {
        assert!(SequentialConfig::null_paradox_default().check().is_ok());
        let mut c = SequentialConfig::null_paradox_default();
        c.outcome.a = vec![0.0, 1.0];
        assert!(c.check().is_err());
        c.dag = Some(Dag::Dag1c);
        assert!(c.check().is_ok());
        c.outcome.a = vec![1.0, 0.0];
        assert!(c.check().is_err());
        c.dag = Some(Dag::Dag1d);
        assert!(c.check().is_ok());
        c.outcome.l = vec![0.0, 1.0];
        assert!(c.check().is_err());
    }

    #[test]
    fn rejects_bad_probabilities() {
        let mut c = SequentialConfig::null_paradox_default();
        c.u = HiddenLaw::Bernoulli { p: 1.0 };
        assert!(matches!(c.check(), Err(Error::InvalidParameter(_))));
        c.u = HiddenLaw::Discrete {
            levels: vec![0.0, 1.0],
            probs: vec![0.5, 0.6],
        };
        assert!(c.check().is_err());
    }

    #[test]
    fn with_effects_labels() {
        assert_eq!(SequentialConfig::with_effects(0.0, 1.0, 0.0).dag, Some(Dag::Dag1c));
        assert_eq!(SequentialConfig::with_effects(1.0, 1.0, 0.0).dag, Some(Dag::Dag1a));
        assert_eq!(SequentialConfig::with_effects(1.0, 0.0, 0.0).dag, Some(Dag::Dag1d));
        assert!(SequentialConfig::with_effects(0.0, 1.0, 2.0).check().is_ok());
    }
}
