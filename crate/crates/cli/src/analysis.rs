//! Named analyses that `study` runs on every replicate.

use serde::{Deserialize, Serialize};

use seqtreat::design::DesignSpec;
use seqtreat::direct_effect::{
    de_gnull_test, de_sndm_estimate, lemma2_demo_at, DeGnullSpec, DeSndmSpec, Role, ScoreVariance, SplitSchema, TreatmentDensity,
};
use seqtreat::glm::TestReport;
use seqtreat::gnull::{gnull_score_test_at, naive_test_at, pooled_g_test_at, GTestSpec, GnullScoreInputs};
use seqtreat::simulate::{ScenarioConfig, TreatmentLaw};
use seqtreat::sndm::{g_estimate, sndm_lr_test, BlipSpec, GEstimate, GEstimateConfig, MleSpec};
use seqtreat::Dataset;

use crate::error::{CliError, CliResult};

#[cfg(test)]
pub const ANALYSES: [&str; 8] = [
    "naive_test",
    "gnull_score_test",
    "pooled_g_test",
    "g_estimate",
    "sndm_mle",
    "de_gnull_test",
    "de_sndm_estimate",
    "lemma2_demo",
];

fn default_level() -> f64 {
    0.05
}

fn default_grid() -> usize {
    201
}

fn default_treatment_model() -> DesignSpec {
    DesignSpec::parse(&["1", "l0", "a1"]).expect("valid design")
}

fn intercept() -> DesignSpec {
    DesignSpec::intercept()
}

fn default_pi2() -> [f64; 3] {
    [0.0, 0.5, 0.7]
}

/// A blip family; `psi`, when given, is only a starting value and
/// defaults to zero.
fn blip_family<'de, D: serde::Deserializer<'de>>(d: D) -> Result<BlipSpec, D::Error> {
    let mut b = BlipSpec::deserialize(d)?;
    if b.psi.is_empty() {
        b.psi = vec![0.0; b.features.len()];
    }
    Ok(b)
}

fn default_roles() -> Vec<Role> {
    vec![Role::P, Role::Z]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum AnalysisSpec {
    NaiveTest(LevelParams),
    GnullScoreTest(GnullScoreParams),
    PooledGTest(PooledGParams),
    GEstimate(GEstimateParams),
    SndmMle(SndmMleParams),
    DeGnullTest(DeGnullParams),
    DeSndmEstimate(DeSndmParams),
    Lemma2Demo(LevelParams),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelParams {
    pub label: Option<String>,
    #[serde(default = "default_level")]
    pub level: f64,
}

/// Design means `π_1` and `π_2(a_0, l) = c_0 + c_1 a_0 + c_2 l`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnullScoreParams {
    pub label: Option<String>,
    #[serde(default)]
    pub pi1: f64,
    #[serde(default = "default_pi2")]
    pub pi2: [f64; 3],
    #[serde(default = "default_level")]
    pub level: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PooledGParams {
    pub label: Option<String>,
    #[serde(default = "default_treatment_model")]
    pub treatment_model: DesignSpec,
    pub alpha_known: Option<Vec<f64>>,
    #[serde(default = "default_level")]
    pub level: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GEstimateParams {
    pub label: Option<String>,
    #[serde(deserialize_with = "blip_family")]
    pub blip: BlipSpec,
    #[serde(default = "default_treatment_model")]
    pub treatment_model: DesignSpec,
    pub alpha_known: Option<Vec<f64>>,
    pub psi_box: Vec<[f64; 2]>,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    /// Component of `ψ` reported as the estimate.
    #[serde(default)]
    pub component: usize,
    /// Value tested for the reject flag; zero by default.
    pub null: Option<Vec<f64>>,
    /// True value, for coverage.
    pub truth: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SndmMleParams {
    pub label: Option<String>,
    #[serde(deserialize_with = "blip_family")]
    pub blip: BlipSpec,
    /// One design per occasion for `L_m` on its past; `[]` marks an
    /// absent covariate.
    pub covariates: Vec<Vec<seqtreat::design::Feature>>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub component: usize,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceChoice {
    #[default]
    Robust,
    ModelBased,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeGnullParams {
    pub label: Option<String>,
    pub a1_model: ModelChoice,
    #[serde(default)]
    pub variance: VarianceChoice,
    #[serde(default = "default_level")]
    pub level: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeSndmParams {
    pub label: Option<String>,
    #[serde(deserialize_with = "blip_family")]
    pub blip: BlipSpec,
    #[serde(default = "intercept")]
    pub mean_model: DesignSpec,
    #[serde(default = "default_roles")]
    pub roles: Vec<Role>,
    /// Law of every `Z` treatment.
    pub z_model: Option<ModelChoice>,
    pub psi_box: Vec<[f64; 2]>,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    /// Component of `ψ` reported as the estimate.
    #[serde(default)]
    pub component: usize,
    /// Value tested for the reject flag; zero by default.
    pub null: Option<Vec<f64>>,
    /// True value, for coverage.
    pub truth: Option<Vec<f64>>,
}

/// Reporting choices shared by the interval estimators.
#[derive(Debug, Clone, Copy)]
pub struct Target<'a> {
    pub component: usize,
    pub null: Option<&'a [f64]>,
    pub truth: Option<&'a [f64]>,
}

impl GEstimateParams {
    pub fn estimate(&self, d: &Dataset) -> CliResult<GEstimate> {
        let mut cfg = GEstimateConfig::new(self.treatment_model.clone(), boxes(&self.psi_box));
        cfg.alpha_known = self.alpha_known.clone();
        cfg.grid_points = self.grid_points;
        cfg.level = self.level;
        Ok(g_estimate(d, &self.blip, &cfg)?)
    }

    pub fn target(&self) -> Target<'_> {
        Target {
            component: self.component,
            null: self.null.as_deref(),
            truth: self.truth.as_deref(),
        }
    }
}

impl DeSndmParams {
    pub fn estimate(&self, d: &Dataset, scenario: Option<&ScenarioConfig>) -> CliResult<GEstimate> {
        let label = self.label.clone().unwrap_or_else(|| "de_sndm_estimate".into());
        let split = SplitSchema::new(self.roles.clone());
        let models = self
            .roles
            .iter()
            .enumerate()
            .map(|(m, r)| match (r, &self.z_model) {
                (Role::Z, Some(z)) => z.resolve(&label, scenario, m).map(Some),
                (Role::Z, None) => Err(config(format!("analysis `{label}`: Z occasions need `z_model`"))),
                (Role::P, _) => Ok(None),
            })
            .collect::<CliResult<Vec<_>>>()?;
        let mut spec = DeSndmSpec::new(self.blip.clone(), self.mean_model.clone());
        spec.grid_points = self.grid_points;
        spec.level = self.level;
        Ok(de_sndm_estimate(d, &split, &spec, &models, &boxes(&self.psi_box))?)
    }

    pub fn target(&self) -> Target<'_> {
        Target {
            component: self.component,
            null: self.null.as_deref(),
            truth: self.truth.as_deref(),
        }
    }
}

/// `"known"` takes the law from the scenario; a feature list fits one.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ModelChoice {
    Keyword(String),
    Design(DesignSpec),
}

/// One analysis on one dataset. Missing entries are left blank in logs.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Outcome {
    pub statistic: Option<f64>,
    pub p: Option<f64>,
    pub reject: Option<bool>,
    pub estimate: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub covered: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Outcome {
    fn from_test(r: &TestReport) -> Self {
        Outcome {
            statistic: Some(r.statistic),
            p: Some(r.p_value),
            reject: Some(r.reject),
            notes: r.notes.clone(),
            ..Outcome::default()
        }
    }

    pub fn from_interval(g: &GEstimate, t: Target<'_>) -> Self {
        let dim = g.psi_hat.len();
        let zero = vec![0.0; dim];
        let null = t.null.unwrap_or(&zero);
        let ci = g.interval(t.component);
        let mut notes = g.notes.clone();
        if g.boundary {
            notes.push("no zero of the score inside the search box".into());
        }
        Outcome {
            statistic: Some(g.statistic),
            p: Some(g.p_value),
            reject: Some(!g.accepts(null)),
            estimate: Some(g.psi_hat[t.component]),
            ci_lo: ci.map(|c| c.0),
            ci_hi: ci.map(|c| c.1),
            covered: t.truth.map(|v| g.accepts(v)),
            notes,
        }
    }
}

fn config(msg: String) -> CliError {
    CliError::Config(msg)
}

fn check_level(label: &str, level: f64) -> CliResult<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(config(format!("analysis `{label}`: level {level} is outside (0, 1)")));
    }
    Ok(())
}

fn check_target(label: &str, dim: usize, boxes: &[[f64; 2]], grid: usize, t: Target<'_>) -> CliResult<()> {
    if boxes.len() != dim {
        return Err(config(format!("analysis `{label}`: psi_box has {} ranges for a {dim}-dimensional blip", boxes.len())));
    }
    if let Some(b) = boxes.iter().find(|b| !(b[0] < b[1])) {
        return Err(config(format!("analysis `{label}`: empty psi_box range {b:?}")));
    }
    if grid < 2 {
        return Err(config(format!("analysis `{label}`: grid_points must be at least 2")));
    }
    if t.component >= dim {
        return Err(config(format!("analysis `{label}`: component {} is out of range for dimension {dim}", t.component)));
    }
    for (key, v) in [("null", &t.null), ("truth", &t.truth)] {
        if v.is_some_and(|v| v.len() != dim) {
            return Err(config(format!("analysis `{label}`: `{key}` must have {dim} entries")));
        }
    }
    Ok(())
}

fn known_law(scenario: Option<&ScenarioConfig>, m: usize) -> Option<TreatmentLaw> {
    let laws = match scenario? {
        ScenarioConfig::Sequential(c) => &c.treatments,
        ScenarioConfig::Sndm(c) => &c.treatments,
    };
    laws.get(m).cloned()
}

impl ModelChoice {
    fn resolve(&self, label: &str, scenario: Option<&ScenarioConfig>, m: usize) -> CliResult<TreatmentDensity> {
        match self {
            ModelChoice::Design(d) => Ok(TreatmentDensity::Estimated(d.clone())),
            ModelChoice::Keyword(k) if k == "known" => known_law(scenario, m)
                .map(TreatmentDensity::Known)
                .ok_or_else(|| config(format!("analysis `{label}`: \"known\" needs a scenario with a law for A{m}"))),
            ModelChoice::Keyword(k) => Err(config(format!(
                "analysis `{label}`: treatment model must be \"known\" or a feature list, not \"{k}\""
            ))),
        }
    }
}

impl AnalysisSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AnalysisSpec::NaiveTest(_) => "naive_test",
            AnalysisSpec::GnullScoreTest(_) => "gnull_score_test",
            AnalysisSpec::PooledGTest(_) => "pooled_g_test",
            AnalysisSpec::GEstimate(_) => "g_estimate",
            AnalysisSpec::SndmMle(_) => "sndm_mle",
            AnalysisSpec::DeGnullTest(_) => "de_gnull_test",
            AnalysisSpec::DeSndmEstimate(_) => "de_sndm_estimate",
            AnalysisSpec::Lemma2Demo(_) => "lemma2_demo",
        }
    }

    pub fn label(&self) -> String {
        let l = match self {
            AnalysisSpec::NaiveTest(p) | AnalysisSpec::Lemma2Demo(p) => &p.label,
            AnalysisSpec::GnullScoreTest(p) => &p.label,
            AnalysisSpec::PooledGTest(p) => &p.label,
            AnalysisSpec::GEstimate(p) => &p.label,
            AnalysisSpec::SndmMle(p) => &p.label,
            AnalysisSpec::DeGnullTest(p) => &p.label,
            AnalysisSpec::DeSndmEstimate(p) => &p.label,
        };
        l.clone().unwrap_or_else(|| self.name().to_string())
    }

    /// Validates parameters that do not depend on the data.
    pub fn check(&self, scenario: Option<&ScenarioConfig>, occasions: Option<usize>) -> CliResult<()> {
        let label = self.label();
        match self {
            AnalysisSpec::NaiveTest(p) | AnalysisSpec::Lemma2Demo(p) => check_level(&label, p.level),
            AnalysisSpec::GnullScoreTest(p) => check_level(&label, p.level),
            AnalysisSpec::PooledGTest(p) => {
                p.treatment_model.check_treatment_model().map_err(|e| config(format!("analysis `{label}`: {e}")))?;
                check_level(&label, p.level)
            }
            AnalysisSpec::GEstimate(p) => {
                p.blip.check().map_err(|e| config(format!("analysis `{label}`: {e}")))?;
                check_target(&label, p.blip.dim(), &p.psi_box, p.grid_points, p.target())?;
                check_level(&label, p.level)
            }
            AnalysisSpec::SndmMle(p) => {
                p.blip.check().map_err(|e| config(format!("analysis `{label}`: {e}")))?;
                if p.component >= p.blip.dim() {
                    return Err(config(format!("analysis `{label}`: component {} is out of range", p.component)));
                }
                if let Some(occ) = occasions.filter(|o| *o != p.covariates.len()) {
                    return Err(config(format!("analysis `{label}`: need {occ} covariate designs, got {}", p.covariates.len())));
                }
                check_level(&label, p.level)
            }
            AnalysisSpec::DeGnullTest(p) => {
                p.a1_model.resolve(&label, scenario, 1)?;
                check_level(&label, p.level)
            }
            AnalysisSpec::DeSndmEstimate(p) => {
                p.blip.check().map_err(|e| config(format!("analysis `{label}`: {e}")))?;
                check_target(&label, p.blip.dim(), &p.psi_box, p.grid_points, p.target())?;
                if let Some(occ) = occasions.filter(|o| *o != p.roles.len()) {
                    return Err(config(format!("analysis `{label}`: need {occ} roles, got {}", p.roles.len())));
                }
                for m in p.roles.iter().enumerate().filter(|(_, r)| **r == Role::Z).map(|(m, _)| m) {
                    p.z_model
                        .as_ref()
                        .ok_or_else(|| config(format!("analysis `{label}`: Z occasions need `z_model`")))?
                        .resolve(&label, scenario, m)?;
                }
                check_level(&label, p.level)
            }
        }
    }

    pub fn run(&self, d: &Dataset, scenario: Option<&ScenarioConfig>) -> CliResult<Outcome> {
        let label = self.label();
        Ok(match self {
            AnalysisSpec::NaiveTest(p) => Outcome::from_test(&naive_test_at(d, p.level)?),
            AnalysisSpec::GnullScoreTest(p) => {
                Outcome::from_test(&gnull_score_test_at(d, &GnullScoreInputs::linear(p.pi1, p.pi2), p.level)?)
            }
            AnalysisSpec::PooledGTest(p) => {
                let spec = GTestSpec::outcome(p.treatment_model.clone(), p.alpha_known.clone());
                Outcome::from_test(&pooled_g_test_at(d, &spec, p.level)?)
            }
            AnalysisSpec::GEstimate(p) => Outcome::from_interval(&p.estimate(d)?, p.target()),
            AnalysisSpec::SndmMle(p) => {
                let covariates = p
                    .covariates
                    .iter()
                    .map(|f| if f.is_empty() { Ok(None) } else { DesignSpec::new(f.clone()).map(Some) })
                    .collect::<seqtreat::Result<Vec<_>>>()?;
                let (fit, report) = sndm_lr_test(d, &MleSpec::new(p.blip.clone(), covariates))?;
                let mut out = Outcome::from_test(&report.at_level(p.level));
                out.estimate = Some(fit.psi_hat[p.component]);
                if !fit.converged {
                    out.notes.push(format!("optimizer stopped after {} iterations without converging", fit.iterations));
                }
                out
            }
            AnalysisSpec::DeGnullTest(p) => {
                let mut spec = DeGnullSpec::new(p.a1_model.resolve(&label, scenario, 1)?);
                spec.variance = match p.variance {
                    VarianceChoice::Robust => ScoreVariance::Robust,
                    VarianceChoice::ModelBased => ScoreVariance::ModelBased,
                };
                spec.level = p.level;
                Outcome::from_test(&de_gnull_test(d, &spec)?)
            }
            AnalysisSpec::DeSndmEstimate(p) => Outcome::from_interval(&p.estimate(d, scenario)?, p.target()),
            AnalysisSpec::Lemma2Demo(p) => {
                let r = lemma2_demo_at(d, p.level)?;
                Outcome {
                    statistic: Some(r.violation_statistic),
                    p: Some(r.test_no_covariate_link.p_value.max(r.test_no_modification.p_value)),
                    reject: Some(r.naive_reject),
                    notes: vec![format!(
                        "spread of the fitted functional over a0: {:.4} (z = {:.3})",
                        r.constancy_spread, r.constancy_z
                    )],
                    ..Outcome::default()
                }
            }
        })
    }
}

fn boxes(b: &[[f64; 2]]) -> Vec<(f64, f64)> {
    b.iter().map(|r| (r[0], r[1])).collect()
}
