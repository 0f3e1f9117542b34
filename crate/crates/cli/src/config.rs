//! The TOML configuration dialect, version 1.
//!
//! ```toml
//! config_version = 1
//! seed = 20240101
//! n = 1000
//! replicates = 200
//! output_dir = "out"
//!
//! [scenario]
//! preset = "null-paradox"
//!
//! [[analysis]]
//! name = "naive_test"
//! ```
//!
//! `[scenario]` is either a preset with optional parameters or a full
//! structural model tagged by `kind = "sequential" | "sndm"`. Relative
//! paths resolve against the directory holding the config file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use seqtreat::direct_effect::interaction_scenario;
use seqtreat::simulate::{ScenarioConfig, SequentialConfig, SndmScenario, Structural};
use seqtreat::Schema;

use crate::analysis::{AnalysisSpec, GEstimateParams};
use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub config_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub n: Option<usize>,
    #[serde(default = "one")]
    pub replicates: usize,
    pub output_dir: Option<PathBuf>,
    pub scenario: Option<toml::Table>,
    pub data: Option<DataSource>,
    #[serde(default)]
    pub analysis: Vec<AnalysisSpec>,
    pub g_formula: Option<GFormulaParams>,
    pub g_estimate: Option<GEstimateParams>,
    pub direct_effect: Option<AnalysisSpec>,
    /// Written into manifests; `simulate` checks it against the seeds it
    /// derives unless `--seed` overrides the root seed.
    #[serde(default)]
    pub replicate: Vec<ReplicateEntry>,
}

fn one() -> usize {
    1
}

/// A dataset on disk together with its schema sidecar.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    pub path: PathBuf,
    pub schema: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicateEntry {
    pub index: usize,
    /// Decimal, since replicate seeds span the full `u64` range.
    pub seed: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GFormulaParams {
    /// `"1,0"` for a static plan, `"follow-covariate"`, `"always"` or `"never"`.
    pub regimes: Vec<String>,
    #[serde(default)]
    pub method: GFormulaMethod,
    #[serde(default = "default_draws")]
    pub draws: usize,
    /// Points at which survivor values are reported.
    #[serde(default)]
    pub y: Vec<f64>,
    /// Per-occasion covariate designs for `method = "fitted"`; an empty
    /// list marks an absent covariate.
    #[serde(default)]
    pub covariates: Vec<Vec<String>>,
    #[serde(default)]
    pub outcome: Vec<String>,
}

fn default_draws() -> usize {
    100_000
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GFormulaMethod {
    /// Direct summation over the scenario's exact joint law.
    #[default]
    Exact,
    /// Monte Carlo from the scenario's exact joint law.
    Mc,
    /// Monte Carlo from models fit to data.
    Fitted,
    /// Counterfactual draws from the structural model itself.
    Counterfactual,
}

/// A resolved scenario with the label used in logs and seeds.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub model: ScenarioConfig,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub raw: RawConfig,
    /// The file as written, for manifests.
    pub source: toml::Table,
    pub base_dir: PathBuf,
    pub output_dir: PathBuf,
    pub seed_overridden: bool,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Config {
    pub fn load(path: &Path, ov: &Overrides) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut raw: RawConfig = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let source: toml::Table = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if raw.config_version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "config_version = {} is not supported (expected {CONFIG_VERSION})",
                raw.config_version
            )));
        }
        if raw.replicates == 0 {
            return Err(CliError::Config("`replicates` must be at least 1".into()));
        }
        if let Some(s) = ov.seed {
            raw.seed = s;
        }
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let output_dir = match (&ov.out, &raw.output_dir) {
            (Some(o), _) => o.clone(),
            (None, Some(o)) => base_dir.join(o),
            (None, None) => base_dir.join("seqtreat-out"),
        };
        Ok(Config {
            raw,
            source,
            base_dir,
            output_dir,
            seed_overridden: ov.seed.is_some(),
        })
    }

    pub fn n(&self) -> CliResult<usize> {
        match self.raw.n {
            Some(0) => Err(CliError::Config("`n` must be at least 1".into())),
            Some(n) => Ok(n),
            None => Err(missing("n")),
        }
    }

    pub fn scenario(&self) -> CliResult<Scenario> {
        let table = self.raw.scenario.clone().ok_or_else(|| missing("scenario"))?;
        resolve_scenario(table)
    }

    /// Reads `[data]`, resolving paths against the config directory.
    pub fn data_source(&self) -> Option<(PathBuf, PathBuf)> {
        self.raw
            .data
            .as_ref()
            .map(|d| (self.base_dir.join(&d.path), self.base_dir.join(&d.schema)))
    }
}

pub fn missing(key: &str) -> CliError {
    CliError::Config(format!("missing key `{key}`"))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetSpec {
    preset: String,
    name: Option<String>,
    beta0: Option<f64>,
    beta1: Option<f64>,
    a1_u: Option<f64>,
    k: Option<usize>,
    psi: Option<f64>,
    delta: Option<f64>,
}

pub const PRESETS: [&str; 7] = [
    "null-paradox",
    "with-effects",
    "binary-toy",
    "binary-null-trial",
    "sndm-recovery",
    "sndm-discrete",
    "interaction",
];

impl PresetSpec {
    fn given(&self) -> Vec<&'static str> {
        let mut g = Vec::new();
        for (key, set) in [
            ("beta0", self.beta0.is_some()),
            ("beta1", self.beta1.is_some()),
            ("a1_u", self.a1_u.is_some()),
            ("k", self.k.is_some()),
            ("psi", self.psi.is_some()),
            ("delta", self.delta.is_some()),
        ] {
            if set {
                g.push(key);
            }
        }
        g
    }

    fn build(&self) -> CliResult<ScenarioConfig> {
        let allowed: &[&str] = match self.preset.as_str() {
            "null-paradox" | "sndm-discrete" => &[],
            "with-effects" => &["beta0", "beta1", "a1_u"],
            "binary-toy" => &["beta0", "beta1"],
            "binary-null-trial" => &["k"],
            "sndm-recovery" => &["psi"],
            "interaction" => &["delta"],
            other => {
                return Err(CliError::Config(format!(
                    "unknown scenario preset `{other}`; valid presets: {}",
                    PRESETS.join(", ")
                )))
            }
        };
        if let Some(p) = self.given().into_iter().find(|p| !allowed.contains(p)) {
            return Err(CliError::Config(format!("scenario preset `{}` does not take `{p}`", self.preset)));
        }
        Ok(match self.preset.as_str() {
            "null-paradox" => ScenarioConfig::Sequential(SequentialConfig::null_paradox_default()),
            "with-effects" => ScenarioConfig::Sequential(SequentialConfig::with_effects(
                self.beta0.unwrap_or(0.0),
                self.beta1.unwrap_or(1.0),
                self.a1_u.unwrap_or(0.0),
            )),
            "binary-toy" => ScenarioConfig::Sequential(SequentialConfig::binary_toy(self.beta0.unwrap_or(0.5), self.beta1.unwrap_or(1.0))),
            "binary-null-trial" => ScenarioConfig::Sequential(SequentialConfig::binary_null_trial(self.k.unwrap_or(1))),
            "sndm-recovery" => ScenarioConfig::Sndm(SndmScenario::recovery_default(self.psi.unwrap_or(1.0))),
            "sndm-discrete" => ScenarioConfig::Sndm(SndmScenario::discrete_default()),
            _ => ScenarioConfig::Sequential(interaction_scenario(self.delta.unwrap_or(1.0))),
        })
    }
}

fn resolve_scenario(mut table: toml::Table) -> CliResult<Scenario> {
    if table.contains_key("preset") {
        let spec: PresetSpec = table.try_into().map_err(|e| CliError::Config(format!("in [scenario]: {e}")))?;
        let model = spec.build()?;
        return finish(spec.name.unwrap_or(spec.preset), model);
    }
    let name = match table.remove("name") {
        Some(toml::Value::String(s)) => Some(s),
        Some(_) => return Err(CliError::Config("in [scenario]: `name` must be a string".into())),
        None => None,
    };
    if !table.contains_key("kind") {
        return Err(CliError::Config(
            "in [scenario]: missing key `preset` or `kind` (\"sequential\" or \"sndm\")".into(),
        ));
    }
    let model: ScenarioConfig = table.try_into().map_err(|e| CliError::Config(format!("in [scenario]: {e}")))?;
    let name = name.unwrap_or_else(|| match model {
        ScenarioConfig::Sequential(_) => "custom-sequential".into(),
        ScenarioConfig::Sndm(_) => "custom-sndm".into(),
    });
    finish(name, model)
}

fn finish(name: String, model: ScenarioConfig) -> CliResult<Scenario> {
    model.check().map_err(|e| CliError::Config(format!("in [scenario]: {e}")))?;
    if name.is_empty() || name.contains(['/', '\\']) {
        return Err(CliError::Config(format!("in [scenario]: invalid name `{name}`")));
    }
    Ok(Scenario { name, model })
}

/// The resolved scenario as a `[scenario]` table that loads back to the
/// same model.
pub fn scenario_table(s: &Scenario) -> CliResult<toml::Table> {
    let mut t = toml::Table::try_from(&s.model).map_err(|e| CliError::Failed(format!("cannot serialize scenario: {e}")))?;
    t.insert("name".into(), toml::Value::String(s.name.clone()));
    Ok(t)
}

pub fn read_schema(path: &Path) -> CliResult<Schema> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let schema: Schema = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    schema.check().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(schema)
}

pub fn schema_toml(schema: &Schema) -> CliResult<String> {
    toml::to_string(schema).map_err(|e| CliError::Failed(format!("cannot serialize schema: {e}")))
}

/// Rejects duplicate analysis labels so every log row is unambiguous.
pub fn check_labels(analyses: &[AnalysisSpec]) -> CliResult<()> {
    let mut seen = BTreeMap::new();
    for (i, a) in analyses.iter().enumerate() {
        if let Some(j) = seen.insert(a.label(), i) {
            return Err(CliError::Config(format!(
                "[[analysis]] entries {j} and {i} share the label `{}`; set `label` to tell them apart",
                a.label()
            )));
        }
    }
    Ok(())
}
