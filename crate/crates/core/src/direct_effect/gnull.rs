//! Weighted test of no direct effect of `A_0` on `Y` when `A_1` is set.
//!
//! With `𝒲 = t_1(Y) t_2(A_1) / W_1`, the null holds iff `E[𝒲 | A_0]` is free
//! of `A_0`. The test regresses `𝒲` on `(1, A_0)` and score-tests the slope.

use std::sync::Arc;

use crate::data::Dataset;
use crate::direct_effect::weights::{AlphaSource, IpwWeights, SplitSchema, TreatmentDensity};
use crate::error::{Error, Result};
use crate::glm::{TestReport, DEFAULT_LEVEL};
use crate::simulate::JointTable;
use crate::stats::normal_pdf;

pub type TransformFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Variance used for the score of the `A_0` slope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreVariance {
    /// Sandwich `Σ (A_0 − Ā_0)² r²`; valid when `Var(𝒲 | A_0)` varies.
    #[default]
    Robust,
    /// `σ̂² Σ (A_0 − Ā_0)²` from the intercept-only fit.
    ModelBased,
}

#[derive(Clone)]
pub struct DeGnullSpec {
    pub t1: Arc<TransformFn>,
    pub t2: Arc<TransformFn>,
    pub a1_model: TreatmentDensity,
    pub variance: ScoreVariance,
    pub level: f64,
}

impl DeGnullSpec {
    /// `t_1(y) = y`, `t_2 = φ`, robust variance.
    pub fn new(a1_model: TreatmentDensity) -> Self {
        DeGnullSpec {
            t1: Arc::new(|y| y),
            t2: Arc::new(normal_pdf),
            a1_model,
            variance: ScoreVariance::Robust,
            level: DEFAULT_LEVEL,
        }
    }
}

impl std::fmt::Debug for DeGnullSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DeGnullSpec")
            .field("a1_model", &self.a1_model)
            .field("variance", &self.variance)
            .field("level", &self.level)
            .finish()
    }
}

/// `𝒲_i = t_1(Y_i) t_2(A_{1i}) / W_{1i}` together with the weights.
pub fn weighted_outcomes(dataset: &Dataset, spec: &DeGnullSpec) -> Result<(Vec<f64>, IpwWeights)> {
    dataset.require_two_occasion("the direct-effect g-null test")?;
    let w = IpwWeights::new(dataset, &SplitSchema::two_occasion(), &[None, Some(spec.a1_model.clone())])?;
    let out: Vec<f64> = dataset
        .rows
        .iter()
        .zip(&w.w1_per_subject)
        .map(|(t, w1)| (spec.t1)(t.y) * (spec.t2)(t.a[1]) / w1)
        .collect();
    if let Some(i) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("weighted outcome for subject {i} is not finite")));
    }
    Ok((out, w))
}

pub fn de_gnull_test(dataset: &Dataset, spec: &DeGnullSpec) -> Result<TestReport> {
    let (wy, weights) = weighted_outcomes(dataset, spec)?;
    let a0 = dataset.treatment(0);
    let n = wy.len() as f64;
    let mean_w = wy.iter().sum::<f64>() / n;
    let mean_a = a0.iter().sum::<f64>() / n;
    let mut u = 0.0;
    let mut sxx = 0.0;
    let mut robust = 0.0;
    let mut rss = 0.0;
    for (w, a) in wy.iter().zip(&a0) {
        let (r, x) = (w - mean_w, a - mean_a);
        u += x * r;
        sxx += x * x;
        robust += x * x * r * r;
        rss += r * r;
    }
    if !(sxx > 0.0) {
        return Err(Error::ZeroVariance("A0".into()));
    }
    let v = match spec.variance {
        ScoreVariance::Robust => robust,
        ScoreVariance::ModelBased => rss / (n - 1.0) * sxx,
    };
    let stat = if u == 0.0 {
        0.0
    } else if v > 0.0 {
        u * u / v
    } else {
        return Err(Error::Degenerate("weighted outcome has zero variance".into()));
    };
    let mut report = TestReport::chi_square(stat, 1, spec.level);
    if weights.alpha_source == AlphaSource::Estimated {
        report = report.with_note("conservative: treatment-law parameters estimated");
    }
    Ok(report)
}

/// `E[t_1(Y) t_2(A_1) / W_1 | A_0 = a_0]` by exact summation, one entry per
/// `a_0` level with positive mass.
pub fn weighted_moment_by_a0(table: &JointTable, t1: &TransformFn, t2: &TransformFn) -> Result<Vec<(f64, f64)>> {
    if table.k() != 1 {
        return Err(Error::Contract("weighted moment needs K = 1".into()));
    }
    let levels = table.schema.treatments[0]
        .levels()
        .ok_or_else(|| Error::NotEnumerable("A0 is continuous".into()))?;
    let mut out = Vec::new();
    for a0 in levels {
        let p_a0: f64 = table.cells.iter().filter(|c| c.a[0] == a0).map(|c| c.prob).sum();
        if p_a0 <= 0.0 {
            continue;
        }
        let mut acc = 0.0;
        for c in table.cells.iter().filter(|c| c.a[0] == a0) {
            let hist_l = &c.l[..2];
            let w = table.mass(hist_l, &c.a[..2]) / table.mass(hist_l, &c.a[..1]);
            acc += c.prob * t1(table.y_value(c)) * t2(c.a[1]) / w;
        }
        out.push((a0, acc / p_a0));
    }
    Ok(out)
}
