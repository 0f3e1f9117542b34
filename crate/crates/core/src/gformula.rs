//! The G-computation formula.
//!
//! Distributions are reported as survivor functions `S_g(y) = pr[Y_g > y]`;
//! [`RegimeDistribution::cdf`] converts to `pr[Y_g ≤ y]`.

use std::io::Write;

use nalgebra::DMatrix;

use crate::data::{apply_regime, format_float, Dataset, History, Kind, Regime, Schema};
use crate::design::DesignSpec;
use crate::error::{Error, Result};
use crate::glm::{expit, fit_linear, fit_logistic, FittedGlm};
use crate::par;
use crate::rng::{SimRng, StreamKey};
use crate::simulate::scenario::{draw_bernoulli, draw_discrete, draw_normal};
use crate::simulate::table::{JointTable, YAxis, POSITIVITY_FLOOR};
use crate::stats::empirical_survivor;

#[derive(Debug, Clone, PartialEq)]
pub enum RegimeDistribution {
    /// Exact survivor values at the table's grid points. When `steps` is
    /// set the law is supported on the grid and `survivor` is defined
    /// everywhere by right-continuous steps.
    Exact {
        regime: String,
        grid: Vec<f64>,
        survivor: Vec<f64>,
        steps: bool,
    },
    Samples { regime: String, samples: Vec<f64> },
}

impl RegimeDistribution {
    pub fn regime(&self) -> &str {
        match self {
            RegimeDistribution::Exact { regime, .. } | RegimeDistribution::Samples { regime, .. } => regime,
        }
    }

    /// `pr[Y_g > y]`.
    pub fn survivor(&self, y: f64) -> Result<f64> {
        match self {
            RegimeDistribution::Samples { samples, .. } => Ok(empirical_survivor(samples, y)),
            RegimeDistribution::Exact {
                grid, survivor, steps, ..
            } => {
                if let Some(j) = grid.iter().position(|g| (g - y).abs() <= 1e-9) {
                    return Ok(survivor[j]);
                }
                if !steps {
                    return Err(Error::InvalidParameter(format!("{y} is not a grid point of the binned law")));
                }
                Ok(match grid.iter().rposition(|g| *g <= y) {
                    Some(j) => survivor[j],
                    None => 1.0,
                })
            }
        }
    }

    /// `pr[Y_g ≤ y]`.
    pub fn cdf(&self, y: f64) -> Result<f64> {
        self.survivor(y).map(|s| 1.0 - s)
    }

    /// `(y, S(y))` on the exact grid, or at the sorted distinct samples.
    pub fn survivor_grid(&self) -> Vec<(f64, f64)> {
        match self {
            RegimeDistribution::Exact { grid, survivor, .. } => grid.iter().copied().zip(survivor.iter().copied()).collect(),
            RegimeDistribution::Samples { samples, .. } => {
                let mut s = samples.clone();
                s.sort_by(f64::total_cmp);
                s.dedup();
                s.iter().map(|&y| (y, empirical_survivor(samples, y))).collect()
            }
        }
    }

    /// Exact laws as `y,survivor,cdf`; sample laws as a single `y` column.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        match self {
            RegimeDistribution::Exact { grid, survivor, .. } => {
                wr.write_record(["y", "survivor", "cdf"])?;
                for (y, s) in grid.iter().zip(survivor) {
                    wr.write_record([format_float(*y), format_float(*s), format_float(1.0 - s)])?;
                }
            }
            RegimeDistribution::Samples { samples, .. } => {
                wr.write_record(["y"])?;
                for y in samples {
                    wr.write_record([format_float(*y)])?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }
}

fn exact(table: &JointTable, regime: &Regime, survivor: Vec<f64>) -> RegimeDistribution {
    RegimeDistribution::Exact {
        regime: regime.name(),
        grid: table.axis.grid().to_vec(),
        survivor,
        steps: matches!(table.axis, YAxis::Discrete { .. }),
    }
}

/// Sums `Π_j f(l_j | l̄_{j-1}, ā_{j-1}) · S(y | l̄_K, ā_K)` over covariate
/// levels from occasion `m` on, with treatments set by the regime.
fn rollout(table: &JointTable, regime: &Regime, m: usize, l: &mut Vec<f64>, a: &mut Vec<f64>) -> Result<Vec<f64>> {
    if m > table.k() {
        return table.survivor_given(l, a);
    }
    let mut acc = vec![0.0; table.axis.grid().len()];
    for (lv, p) in table.covariate_given(m, l, a)? {
        l.push(lv);
        let am = apply_regime(regime, &History::new(m, l, a), &table.schema.treatments[m])?;
        a.push(am);
        let s = rollout(table, regime, m + 1, l, a);
        a.pop();
        l.pop();
        for (t, v) in acc.iter_mut().zip(s?) {
            *t += p * v;
        }
    }
    Ok(acc)
}

/// `S_g(y)` by direct summation over the covariate support.
pub fn g_formula_exact(table: &JointTable, regime: &Regime) -> Result<RegimeDistribution> {
    let s = rollout(table, regime, 0, &mut Vec::new(), &mut Vec::new())?;
    Ok(exact(table, regime, s))
}

/// `S_g(y | l̄_m)`: the conditioning history's treatments must be the
/// regime's own, and later treatments follow the regime.
pub fn g_formula_conditional(table: &JointTable, regime: &Regime, hist: &History<'_>) -> Result<RegimeDistribution> {
    let m = hist.m;
    if m > table.k() {
        return Err(Error::InvalidParameter(format!("occasion {m} exceeds K = {}", table.k())));
    }
    let mut l = Vec::with_capacity(table.k() + 1);
    let mut a = Vec::with_capacity(table.k() + 1);
    for j in 0..=m {
        l.push(hist.l_bar[j]);
        let aj = apply_regime(regime, &History::new(j, &l, &a), &table.schema.treatments[j])?;
        if j < m && aj != hist.a_bar_prev[j] {
            return Err(Error::Contract(format!(
                "history treatment a{j} = {} differs from the regime's {aj}",
                hist.a_bar_prev[j]
            )));
        }
        a.push(aj);
    }
    let cond = table.mass(&l, &a[..m]);
    if cond < POSITIVITY_FLOOR {
        return Err(Error::Positivity(format!("conditioning history L = {l:?}, A = {:?} has probability {cond:e}", &a[..m])));
    }
    let s = rollout(table, regime, m + 1, &mut l, &mut a)?;
    Ok(exact(table, regime, s))
}

/// Sampleable conditional laws of the covariates and the outcome.
pub trait ConditionalLaws: Sync {
    fn schema(&self) -> &Schema;
    /// A draw of `L_m` given `(l̄_{m-1}, ā_{m-1})`.
    fn sample_covariate(&self, m: usize, l_prev: &[f64], a_prev: &[f64], rng: &mut SimRng) -> Result<f64>;
    /// A draw of `Y` given `(l̄_K, ā_K)`.
    fn sample_outcome(&self, l: &[f64], a: &[f64], rng: &mut SimRng) -> Result<f64>;
}

/// Conditionals read off an exact table.
pub struct TableLaws<'a> {
    pub table: &'a JointTable,
}

impl ConditionalLaws for TableLaws<'_> {
    fn schema(&self) -> &Schema {
        &self.table.schema
    }

    fn sample_covariate(&self, m: usize, l_prev: &[f64], a_prev: &[f64], rng: &mut SimRng) -> Result<f64> {
        let law = self.table.covariate_given(m, l_prev, a_prev)?;
        let (levels, probs): (Vec<f64>, Vec<f64>) = law.into_iter().unzip();
        Ok(draw_discrete(rng, &levels, &probs))
    }

    fn sample_outcome(&self, l: &[f64], a: &[f64], rng: &mut SimRng) -> Result<f64> {
        let p = self.table.outcome_given(l, a)?;
        let reps: Vec<f64> = (0..p.len()).map(|c| self.table.axis.representative(c)).collect();
        Ok(draw_discrete(rng, &reps, &p))
    }
}

/// One fitted conditional: logistic for binary targets, normal-linear
/// otherwise, or a point mass at 0 for an absent covariate.
#[derive(Debug, Clone)]
pub enum FittedConditional {
    Absent,
    Logistic { design: DesignSpec, fit: FittedGlm },
    Normal { design: DesignSpec, fit: FittedGlm },
}

impl FittedConditional {
    fn sample(&self, m: usize, l: &[f64], a: &[f64], rng: &mut SimRng) -> Result<f64> {
        Ok(match self {
            FittedConditional::Absent => 0.0,
            FittedConditional::Logistic { design, fit } => draw_bernoulli(rng, expit(fit.linear_predictor(&design.row(m, l, a)?))),
            FittedConditional::Normal { design, fit } => {
                draw_normal(rng, fit.linear_predictor(&design.row(m, l, a)?), fit.dispersion.sqrt())
            }
        })
    }
}

/// Covariate and outcome models fit by maximum likelihood.
///
/// The model for `L_m` is evaluated at occasion `m` on `(l̄_{m-1},
/// ā_{m-1})`, so its terms must use lags of at least one. The outcome model
/// is evaluated at occasion `K` on the full record.
#[derive(Debug, Clone)]
pub struct FittedLaws {
    pub schema: Schema,
    pub covariates: Vec<FittedConditional>,
    pub outcome: FittedGlm,
    pub outcome_design: DesignSpec,
}

fn fit_conditional(kind: &Kind, design: &DesignSpec, rows: Vec<Vec<f64>>, y: &[f64]) -> Result<FittedConditional> {
    let x = crate::glm::design_matrix(&rows)?;
    if *kind == Kind::Binary {
        Ok(FittedConditional::Logistic {
            design: design.clone(),
            fit: fit_logistic(&x, y)?,
        })
    } else {
        Ok(FittedConditional::Normal {
            design: design.clone(),
            fit: fit_linear(&x, y)?,
        })
    }
}

impl FittedLaws {
    /// `covariate_designs[m] = None` marks `L_m` as absent.
    pub fn fit(dataset: &Dataset, covariate_designs: &[Option<DesignSpec>], outcome_design: &DesignSpec) -> Result<Self> {
        let k = dataset.k();
        if covariate_designs.len() != k + 1 {
            return Err(Error::InvalidParameter(format!("need {} covariate designs", k + 1)));
        }
        let mut covariates = Vec::with_capacity(k + 1);
        for (m, d) in covariate_designs.iter().enumerate() {
            let Some(design) = d else {
                covariates.push(FittedConditional::Absent);
                continue;
            };
            let rows = dataset
                .rows
                .iter()
                .map(|t| design.row(m, &t.l[..m], &t.a[..m]))
                .collect::<Result<Vec<_>>>()?;
            covariates.push(fit_conditional(&dataset.schema.covariates[m], design, rows, &dataset.covariate(m))?);
        }
        let rows = dataset
            .rows
            .iter()
            .map(|t| outcome_design.row(k, &t.l, &t.a))
            .collect::<Result<Vec<_>>>()?;
        let outcome = fit_linear(&crate::glm::design_matrix(&rows)?, &dataset.outcomes())?;
        Ok(FittedLaws {
            schema: dataset.schema.clone(),
            covariates,
            outcome,
            outcome_design: outcome_design.clone(),
        })
    }
}

impl ConditionalLaws for FittedLaws {
    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn sample_covariate(&self, m: usize, l_prev: &[f64], a_prev: &[f64], rng: &mut SimRng) -> Result<f64> {
        self.covariates[m].sample(m, l_prev, a_prev, rng)
    }

    fn sample_outcome(&self, l: &[f64], a: &[f64], rng: &mut SimRng) -> Result<f64> {
        let mean = self.outcome.linear_predictor(&self.outcome_design.row(self.schema.k, l, a)?);
        Ok(draw_normal(rng, mean, self.outcome.dispersion.sqrt()))
    }
}

/// Monte Carlo G-computation: each draw samples `l_0`, sets `a_0 = g_0(l_0)`,
/// samples `l_1` given the history, and so on, ending with `Y`.
pub fn g_formula_mc<C: ConditionalLaws + ?Sized>(laws: &C, regime: &Regime, draws: usize, seed: u64) -> Result<RegimeDistribution> {
    if draws == 0 {
        return Err(Error::InvalidParameter("draws must be at least 1".into()));
    }
    let root = StreamKey::root(seed).child("g-formula");
    let schema = laws.schema();
    let occ = schema.occasions();
    let samples = par::try_map(draws, |v| {
        let mut rng = root.subject(v).rng();
        let mut l = Vec::with_capacity(occ);
        let mut a = Vec::with_capacity(occ);
        for m in 0..occ {
            let lm = laws.sample_covariate(m, &l, &a, &mut rng)?;
            l.push(lm);
            let am = apply_regime(regime, &History::new(m, &l, &a), &schema.treatments[m])?;
            a.push(am);
        }
        let y = laws.sample_outcome(&l, &a, &mut rng)?;
        if !y.is_finite() {
            return Err(Error::InvalidParameter("outcome law produced a non-finite draw".into()));
        }
        Ok(y)
    })?;
    Ok(RegimeDistribution::Samples {
        regime: regime.name(),
        samples,
    })
}

/// Plug-in `I(a_0, a_1; θ, γ) = θ_0 + θ_1 a_0 + θ_3 a_1 + θ_2 expit(γ_0 + γ_1 a_0)`
/// for the linear outcome model on `(1, a_0, l, a_1)` and the logistic
/// model of `L` on `(1, a_0)`.
pub fn g_functional_i(theta: &[f64], gamma: &[f64], a0: f64, a1: f64) -> Result<f64> {
    if theta.len() != 4 || gamma.len() != 2 {
        return Err(Error::InvalidParameter("need 4 outcome and 2 covariate coefficients".into()));
    }
    let v = theta[0] + theta[1] * a0 + theta[3] * a1 + theta[2] * expit(gamma[0] + gamma[1] * a0);
    if !v.is_finite() {
        return Err(Error::InvalidParameter("non-finite functional value".into()));
    }
    Ok(v)
}

/// Fits `E[Y | a_0, l, a_1] = θ_0 + θ_1 a_0 + θ_2 l + θ_3 a_1` and
/// `pr[L = 1 | a_0] = expit(γ_0 + γ_1 a_0)` on a two-occasion dataset.
pub fn fit_standard_models(dataset: &Dataset) -> Result<(FittedGlm, FittedGlm)> {
    dataset.require_two_occasion("fit_standard_models")?;
    let n = dataset.n();
    let rows = &dataset.rows;
    let x = DMatrix::from_fn(n, 4, |i, j| match j {
        0 => 1.0,
        1 => rows[i].a[0],
        2 => rows[i].l[1],
        _ => rows[i].a[1],
    });
    let theta = fit_linear(&x, &dataset.outcomes())?;
    let z = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { rows[i].a[0] });
    let gamma = fit_logistic(&z, &dataset.covariate(1))?;
    Ok((theta, gamma))
}
