//! Tests of the "g"-null hypothesis of no effect of any treatment regime.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, History};
use crate::design::DesignSpec;
use crate::error::{Error, Result};
use crate::gformula::{fit_standard_models, g_functional_i};
use crate::glm::{fit_logistic, score_statistic, wald_test_at, FittedGlm, TestReport, DEFAULT_LEVEL};
use crate::simulate::table::{JointTable, POSITIVITY_FLOOR};

/// 2-df Wald test of `θ_1 = θ_3 = 0` in the linear model of `Y` on
/// `(1, A_0, L, A_1)`: the test of `(A_0, A_1) ⊥ Y | L`.
pub fn naive_test(dataset: &Dataset) -> Result<TestReport> {
    naive_test_at(dataset, DEFAULT_LEVEL)
}

pub fn naive_test_at(dataset: &Dataset, level: f64) -> Result<TestReport> {
    dataset.require_two_occasion("naive_test")?;
    if dataset.schema.covariates[1] != crate::data::Kind::Binary {
        return Err(Error::Contract("naive_test needs a binary L".into()));
    }
    let (theta, _) = fit_standard_models(dataset)?;
    wald_test_at(&theta, &[1, 3], level)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NullBranch {
    /// `θ_1 = θ_2 = θ_3 = 0`.
    NoOutcomeDependence,
    /// `θ_1 = θ_3 = γ_1 = 0`.
    NoCovariateDependence,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NullCheck {
    pub constant: bool,
    pub branch: Option<NullBranch>,
}

/// Whether `I(a_0, a_1; θ, γ)` is constant, and through which branch.
pub fn parametric_null_check(theta: &[f64], gamma: &[f64], tol: f64) -> Result<NullCheck> {
    if theta.len() != 4 || gamma.len() != 2 {
        return Err(Error::InvalidParameter("need 4 outcome and 2 covariate coefficients".into()));
    }
    let zero = |v: f64| v.abs() <= tol;
    let first = zero(theta[1]) && zero(theta[2]) && zero(theta[3]);
    let second = zero(theta[1]) && zero(theta[3]) && zero(gamma[1]);
    let branch = match (first, second) {
        (true, true) => Some(NullBranch::Both),
        (true, false) => Some(NullBranch::NoOutcomeDependence),
        (false, true) => Some(NullBranch::NoCovariateDependence),
        (false, false) => None,
    };
    Ok(NullCheck {
        constant: branch.is_some(),
        branch,
    })
}

/// Largest absolute difference of `I` across the grid `{-1, 0, 1}²`.
pub fn functional_spread(theta: &[f64], gamma: &[f64]) -> Result<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for a0 in [-1.0, 0.0, 1.0] {
        for a1 in [-1.0, 0.0, 1.0] {
            let v = g_functional_i(theta, gamma, a0, a1)?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    Ok(hi - lo)
}

pub type Pi2Fn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Design means of the two normal treatment laws, `A_0 ~ N(π_1, 1)` and
/// `A_1 | A_0, L ~ N(π_2(A_0, L), 1)`.
#[derive(Clone)]
pub struct GnullScoreInputs {
    pub pi1: f64,
    pub pi2: Arc<Pi2Fn>,
}

impl std::fmt::Debug for GnullScoreInputs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GnullScoreInputs {{ pi1: {} }}", self.pi1)
    }
}

impl GnullScoreInputs {
    /// `π_2(a_0, l) = c_0 + c_1 a_0 + c_2 l`.
    pub fn linear(pi1: f64, pi2: [f64; 3]) -> Self {
        GnullScoreInputs {
            pi1,
            pi2: Arc::new(move |a0, l| pi2[0] + pi2[1] * a0 + pi2[2] * l),
        }
    }
}

/// Per-subject score contributions `U_i = Y_i{A_1 − π_2(A_0, L)} + Y_i{A_0 − π_1}`.
pub fn gnull_score_terms(dataset: &Dataset, inputs: &GnullScoreInputs) -> Result<Vec<f64>> {
    dataset.require_two_occasion("gnull_score_test")?;
    Ok(dataset
        .rows
        .iter()
        .map(|t| t.y * (t.a[1] - (inputs.pi2)(t.a[0], t.l[1])) + t.y * (t.a[0] - inputs.pi1))
        .collect())
}

/// `χ = ΣU_i / (ΣU_i²)^{1/2}` against the standard normal.
pub fn gnull_score_test(dataset: &Dataset, inputs: &GnullScoreInputs) -> Result<TestReport> {
    gnull_score_test_at(dataset, inputs, DEFAULT_LEVEL)
}

pub fn gnull_score_test_at(dataset: &Dataset, inputs: &GnullScoreInputs, level: f64) -> Result<TestReport> {
    let u = gnull_score_terms(dataset, inputs)?;
    let ss: f64 = u.iter().map(|v| v * v).sum();
    if !(ss > 0.0) {
        return Err(Error::Degenerate("sum of squared score terms is zero".into()));
    }
    let chi = u.iter().sum::<f64>() / ss.sqrt();
    Ok(TestReport::normal(chi, level))
}

pub type QFn = dyn Fn(f64, &History<'_>) -> f64 + Send + Sync;

/// The treatment model `pr[A_m = 1 | l̄_m, ā_{m-1}] = expit(α'W_m)` and the
/// analyst's `Q_m = q(Y, l̄_m, ā_{m-1})`.
#[derive(Clone)]
pub struct GTestSpec {
    pub treatment_model: DesignSpec,
    pub q: Arc<QFn>,
    /// Coefficients known by design; estimated by maximum likelihood when
    /// absent.
    pub alpha_known: Option<Vec<f64>>,
}

impl std::fmt::Debug for GTestSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GTestSpec")
            .field("treatment_model", &self.treatment_model)
            .field("alpha_known", &self.alpha_known)
            .finish()
    }
}

impl GTestSpec {
    /// `q(Y, ·) = Y`.
    pub fn outcome(treatment_model: DesignSpec, alpha_known: Option<Vec<f64>>) -> Self {
        GTestSpec {
            treatment_model,
            q: Arc::new(|y, _| y),
            alpha_known,
        }
    }
}

/// Person-occasion rows: one per subject and occasion.
#[derive(Debug, Clone)]
pub struct PersonOccasions {
    pub x: DMatrix<f64>,
    pub treatment: Vec<f64>,
    pub subject: Vec<usize>,
    pub occasion: Vec<usize>,
}

impl PersonOccasions {
    pub fn stack(dataset: &Dataset, design: &DesignSpec) -> Result<Self> {
        design.check_treatment_model()?;
        let occ = dataset.k() + 1;
        let rows = dataset.n() * occ;
        let mut x = DMatrix::zeros(rows, design.width());
        let mut treatment = Vec::with_capacity(rows);
        let mut subject = Vec::with_capacity(rows);
        let mut occasion = Vec::with_capacity(rows);
        for (i, t) in dataset.rows.iter().enumerate() {
            for m in 0..occ {
                let r = i * occ + m;
                for (j, v) in design.row(m, &t.l[..=m], &t.a[..m])?.into_iter().enumerate() {
                    x[(r, j)] = v;
                }
                treatment.push(t.a[m]);
                subject.push(i);
                occasion.push(m);
            }
        }
        Ok(PersonOccasions {
            x,
            treatment,
            subject,
            occasion,
        })
    }

    pub fn len(&self) -> usize {
        self.treatment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.treatment.is_empty()
    }

    /// The pooled logistic treatment model, fit or fixed at known `α`.
    pub fn treatment_fit(&self, alpha_known: Option<&[f64]>) -> Result<FittedGlm> {
        if self.treatment.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Contract("pooled treatment model needs binary treatments".into()));
        }
        match alpha_known {
            Some(alpha) => {
                if alpha.len() != self.x.ncols() {
                    return Err(Error::InvalidParameter(format!(
                        "known alpha has {} entries, design has {}",
                        alpha.len(),
                        self.x.ncols()
                    )));
                }
                let off: Vec<f64> = (0..self.len())
                    .map(|r| (0..alpha.len()).map(|j| self.x[(r, j)] * alpha[j]).sum())
                    .collect();
                FittedGlm::fixed_logistic(&off, &self.treatment)
            }
            None => fit_logistic(&self.x, &self.treatment),
        }
    }
}

/// Pooled logistic score test of `θ = 0` for `θQ_m` added to `α'W_m`.
pub fn pooled_g_test(dataset: &Dataset, spec: &GTestSpec) -> Result<TestReport> {
    pooled_g_test_at(dataset, spec, DEFAULT_LEVEL)
}

pub fn pooled_g_test_at(dataset: &Dataset, spec: &GTestSpec, level: f64) -> Result<TestReport> {
    let stacked = PersonOccasions::stack(dataset, &spec.treatment_model)?;
    let q: Vec<f64> = (0..stacked.len())
        .map(|r| {
            let t = &dataset.rows[stacked.subject[r]];
            let m = stacked.occasion[r];
            (spec.q)(t.y, &t.history(m))
        })
        .collect();
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("Q_m is not finite".into()));
    }
    let fit = stacked.treatment_fit(spec.alpha_known.as_deref())?;
    let report = if q.iter().all(|&v| v == 0.0) {
        TestReport::chi_square(0.0, 1, level)
    } else {
        if q.iter().all(|&v| v == q[0]) {
            return Err(Error::Degenerate("Q_m is constant".into()));
        }
        let added = DMatrix::from_column_slice(q.len(), 1, &q);
        let (stat, df) = score_statistic(&fit, &added)?;
        TestReport::chi_square(stat, df, level)
    };
    Ok(if spec.alpha_known.is_none() {
        report.with_note("valid if the treatment model is correct")
    } else {
        report
    })
}

/// Exact truth values of the conditional-independence statements for a
/// two-occasion table, all given `L_0`:
/// `Y ⊥ A_1 | A_0, L` ([`eq2`](Self::eq2)),
/// `Σ_l f(y | a_0, l, a_1) f(l | a_0)` free of `(a_0, a_1)`
/// ([`eq3`](Self::eq3)), and `Y ⊥ A_0` ([`eq6`](Self::eq6)).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NullPredicates {
    pub eq2: bool,
    pub eq3: bool,
    pub eq6: bool,
}

impl NullPredicates {
    pub fn g_null(&self) -> bool {
        self.eq2 && self.eq3
    }

    pub fn joint_null(&self) -> bool {
        self.eq2 && self.eq6
    }
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

pub fn null_predicates(table: &JointTable, tol: f64) -> Result<NullPredicates> {
    if table.k() != 1 {
        return Err(Error::Contract("null predicates need a two-occasion table".into()));
    }
    let levels = |kind: &crate::data::Kind| kind.levels().ok_or_else(|| Error::NotEnumerable("continuous column".into()));
    let l0s = levels(&table.schema.covariates[0])?;
    let a0s = levels(&table.schema.treatments[0])?;
    let l1s = levels(&table.schema.covariates[1])?;
    let a1s = levels(&table.schema.treatments[1])?;
    let cats = table.axis.categories();
    let outcome = |l: &[f64], a: &[f64]| -> Vec<f64> {
        let mut p = vec![0.0; cats];
        for c in table.cells.iter().filter(|c| c.l.starts_with(l) && c.a.starts_with(a)) {
            p[c.y] += c.prob;
        }
        p
    };
    let normalise = |p: Vec<f64>| -> Option<Vec<f64>> {
        let s: f64 = p.iter().sum();
        (s >= POSITIVITY_FLOOR).then(|| p.into_iter().map(|v| v / s).collect())
    };
    let (mut eq2, mut eq3, mut eq6) = (true, true, true);
    for &l0 in &l0s {
        let Some(base) = normalise(outcome(&[l0], &[])) else { continue };
        let mut g_ref: Option<Vec<f64>> = None;
        for &a0 in &a0s {
            if let Some(p) = normalise(outcome(&[l0], &[a0])) {
                eq6 &= close(&p, &base, tol);
            }
            let denom = table.mass(&[l0], &[a0]);
            if denom < POSITIVITY_FLOOR {
                continue;
            }
            for &l1 in &l1s {
                let Some(marg) = normalise(outcome(&[l0, l1], &[a0])) else { continue };
                for &a1 in &a1s {
                    if let Some(p) = normalise(outcome(&[l0, l1], &[a0, a1])) {
                        eq2 &= close(&p, &marg, tol);
                    }
                }
            }
            for &a1 in &a1s {
                let mut g = vec![0.0; cats];
                for &l1 in &l1s {
                    let pl = table.mass(&[l0, l1], &[a0]) / denom;
                    if pl == 0.0 {
                        continue;
                    }
                    let p = normalise(outcome(&[l0, l1], &[a0, a1]))
                        .ok_or_else(|| Error::Positivity(format!("L = ({l0}, {l1}), A = ({a0}, {a1}) has no mass")))?;
                    for (t, v) in g.iter_mut().zip(p) {
                        *t += pl * v;
                    }
                }
                match &g_ref {
                    Some(r) => eq3 &= close(&g, r, tol),
                    None => g_ref = Some(g),
                }
            }
        }
    }
    Ok(NullPredicates { eq2, eq3, eq6 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Kind, Schema, Trajectory};
    use crate::design::Feature;
    use crate::rng::StreamKey;
    use crate::simulate::{enumerate_joint, simulate, SequentialConfig};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn two_occasion(rows: Vec<Trajectory>) -> Dataset {
        let schema = Schema::new(1, vec![Kind::absent(), Kind::Binary], vec![Kind::Continuous, Kind::Continuous]).unwrap();
        Dataset::new(schema, rows).unwrap()
    }

    fn independent(n: usize, seed: u64) -> Dataset {
        let mut rng = StreamKey::root(seed).rng();
        two_occasion(
            (0..n)
                .map(|_| {
                    let l = f64::from(u8::from(rng.random::<f64>() < 0.4));
                    Trajectory::new(vec![0.0, l], vec![rng.sample(StandardNormal), rng.sample(StandardNormal)], rng.sample(StandardNormal))
                })
                .collect(),
        )
    }

    #[test]
    fn naive_test_level_on_independent_data() {
        let reps = 500;
        let rejections = (0..reps).filter(|&r| naive_test(&independent(500, 100 + r)).unwrap().reject).count();
        let rate = rejections as f64 / reps as f64;
        assert!((rate - 0.05).abs() <= 0.02, "rate {rate}");
    }

    #[test]
    fn naive_test_rejects_on_the_default_null() {
        let cfg = SequentialConfig::null_paradox_default();
        let reps = 40;
        let rej = (0..reps).filter(|&r| naive_test(&simulate(&cfg, 2000, r).unwrap()).unwrap().reject).count();
        assert!(rej as f64 / reps as f64 >= 0.9);
    }

    #[test]
    fn branch_examples() {
        let c = parametric_null_check(&[5.0, 0.0, 0.0, 0.0], &[1.0, 2.0], 1e-12).unwrap();
        assert_eq!(c.branch, Some(NullBranch::NoOutcomeDependence));
        let c = parametric_null_check(&[5.0, 0.0, 1.0, 0.0], &[1.0, 0.0], 1e-12).unwrap();
        assert_eq!(c.branch, Some(NullBranch::NoCovariateDependence));
        let c = parametric_null_check(&[5.0, 0.0, 1.0, 0.0], &[1.0, 2.0], 1e-12).unwrap();
        assert!(!c.constant);
        assert!(functional_spread(&[5.0, 0.0, 1.0, 0.0], &[1.0, 2.0]).unwrap() > 1e-12);
        assert!(functional_spread(&[5.0, 0.0, 1.0, 0.0], &[1.0, 0.0]).unwrap() < 1e-15);
    }

    #[test]
    fn score_term_arithmetic() {
        let d = two_occasion(vec![Trajectory::new(vec![0.0, 1.0], vec![1.0, 1.0], 1.0)]);
        let inputs = GnullScoreInputs {
            pi1: 0.5,
            pi2: Arc::new(|_, _| 0.3),
        };
        let u = gnull_score_terms(&d, &inputs).unwrap();
        assert!((u[0] - 1.2).abs() < 1e-15);
    }

    #[test]
    fn zero_outcomes_are_degenerate() {
        let rows = (0..10).map(|i| Trajectory::new(vec![0.0, 0.0], vec![i as f64, 0.0], 0.0)).collect();
        let r = gnull_score_test(&two_occasion(rows), &GnullScoreInputs::linear(0.0, [0.0, 0.5, 0.7]));
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn score_terms_centre_under_the_null() {
        let d = simulate(&SequentialConfig::null_paradox_default(), 100_000, 3).unwrap();
        let u = gnull_score_terms(&d, &GnullScoreInputs::linear(0.0, [0.0, 0.5, 0.7])).unwrap();
        let sd = crate::stats::variance(&u).sqrt();
        assert!(crate::stats::mean(&u).abs() < 4.0 * sd / (u.len() as f64).sqrt());
    }

    fn trial_spec() -> GTestSpec {
        GTestSpec::outcome(DesignSpec::new(vec![Feature::Intercept, Feature::l(0), Feature::a(1)]).unwrap(), None)
    }

    #[test]
    fn zero_q_gives_zero_statistic() {
        let d = simulate(&SequentialConfig::binary_null_trial(2), 300, 1).unwrap();
        let mut spec = trial_spec();
        spec.q = Arc::new(|_, _| 0.0);
        let r = pooled_g_test(&d, &spec).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn constant_q_is_an_error() {
        let d = simulate(&SequentialConfig::binary_null_trial(2), 300, 1).unwrap();
        let mut spec = trial_spec();
        spec.q = Arc::new(|_, _| 2.0);
        assert!(matches!(pooled_g_test(&d, &spec), Err(Error::Degenerate(_))));
    }

    #[test]
    fn pooled_rows_equal_replicated_fit() {
        let d = simulate(&SequentialConfig::binary_null_trial(1), 400, 8).unwrap();
        let design = DesignSpec::new(vec![Feature::Intercept, Feature::l(0)]).unwrap();
        let stacked = PersonOccasions::stack(&d, &design).unwrap();
        let pooled = stacked.treatment_fit(None).unwrap();
        // Explicit long-format rows built independently.
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for t in &d.rows {
            for m in 0..2 {
                rows.push(vec![1.0, t.l[m]]);
                y.push(t.a[m]);
            }
        }
        let direct = fit_logistic(&crate::glm::design_matrix(&rows).unwrap(), &y).unwrap();
        for (a, b) in pooled.coef.iter().zip(&direct.coef) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn predicates_on_structural_tables() {
        let null = enumerate_joint(&SequentialConfig::binary_toy(0.0, 0.0), None).unwrap();
        let p = null_predicates(&null, 1e-10).unwrap();
        assert!(p.eq2 && p.eq3 && p.eq6);
        let direct = enumerate_joint(&SequentialConfig::binary_toy(1.0, 0.0), None).unwrap();
        let p = null_predicates(&direct, 1e-10).unwrap();
        assert!(p.eq2 && !p.eq3 && !p.eq6);
        let late = enumerate_joint(&SequentialConfig::binary_toy(0.0, 1.0), None).unwrap();
        assert!(!null_predicates(&late, 1e-10).unwrap().eq2);
    }
}
