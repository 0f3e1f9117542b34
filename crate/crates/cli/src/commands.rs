//! `simulate`, `g-formula`, `g-estimate`, `direct-effect` and `reproduce`.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use seqtreat::data::{validate, Regime};
use seqtreat::design::DesignSpec;
use seqtreat::gformula::{g_formula_exact, g_formula_mc, FittedLaws, RegimeDistribution, TableLaws};
use seqtreat::par;
use seqtreat::reproduce::{reproduce, valid_names};
use seqtreat::rng::StreamKey;
use seqtreat::simulate::{counterfactual_draws, enumerate_joint, simulate, Structural};
use seqtreat::sndm::GEstimate;
use seqtreat::Dataset;

use crate::analysis::{AnalysisSpec, Outcome};
use crate::config::{missing, read_schema, scenario_table, schema_toml, Config, GFormulaMethod, ReplicateEntry, Scenario};
use crate::error::{CliError, CliResult};
use crate::study::replicate_seed;

pub const MANIFEST: &str = "manifest.toml";

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
}

fn seed_value(seed: u64) -> CliResult<toml::Value> {
    i64::try_from(seed)
        .map(toml::Value::Integer)
        .map_err(|_| CliError::Config(format!("seed {seed} exceeds the largest TOML integer")))
}

/// The effective configuration: a file that, run with the same
/// subcommand, regenerates every output in its own directory.
pub fn write_manifest(cfg: &Config, scenario: Option<&Scenario>, replicates: &[ReplicateEntry]) -> CliResult<()> {
    let mut t = cfg.source.clone();
    t.insert("seed".into(), seed_value(cfg.raw.seed)?);
    t.insert("output_dir".into(), toml::Value::String(".".into()));
    if let Some(s) = scenario {
        t.insert("scenario".into(), toml::Value::Table(scenario_table(s)?));
    }
    if let Some((path, schema)) = cfg.data_source() {
        let mut d = toml::Table::new();
        for (key, p) in [("path", path), ("schema", schema)] {
            let abs = std::path::absolute(&p)?;
            d.insert(key.into(), toml::Value::String(abs.display().to_string()));
        }
        t.insert("data".into(), toml::Value::Table(d));
    }
    t.remove("replicate");
    if !replicates.is_empty() {
        let rows = toml::Value::try_from(replicates).map_err(|e| CliError::Failed(format!("cannot serialize manifest: {e}")))?;
        t.insert("replicate".into(), rows);
    }
    let text = toml::to_string(&t).map_err(|e| CliError::Failed(format!("cannot serialize manifest: {e}")))?;
    let mut w = create(&cfg.output_dir.join(MANIFEST))?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn dataset_file(i: usize, replicates: usize) -> String {
    let width = (replicates.saturating_sub(1)).to_string().len().max(3);
    format!("dataset_{i:0width$}.csv")
}

fn write_dataset(d: &Dataset, path: &Path) -> CliResult<()> {
    let mut w = create(path)?;
    d.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn cmd_simulate(cfg: &Config) -> CliResult<String> {
    let scenario = cfg.scenario()?;
    let n = cfg.n()?;
    let r = cfg.raw.replicates;
    seed_value(cfg.raw.seed)?;
    let seeds: Vec<u64> = (0..r).map(|i| replicate_seed(cfg.raw.seed, &scenario.name, i)).collect();
    if !cfg.seed_overridden {
        for e in &cfg.raw.replicate {
            if seeds.get(e.index).map(u64::to_string).as_deref() != Some(e.seed.as_str()) {
                return Err(CliError::Config(format!(
                    "[[replicate]] entry {} lists seed {} but the config derives another; the manifest was edited",
                    e.index, e.seed
                )));
            }
        }
    }
    let data = par::try_map(r, |i| simulate(&scenario.model, n, seeds[i]))?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(r);
    for (i, d) in data.iter().enumerate() {
        let file = dataset_file(i, r);
        write_dataset(d, &dir.join(&file))?;
        entries.push(ReplicateEntry {
            index: i,
            seed: seeds[i].to_string(),
            file: Some(file),
        });
    }
    let mut w = create(&dir.join("schema.toml"))?;
    w.write_all(schema_toml(&scenario.model.schema())?.as_bytes())?;
    w.flush()?;
    write_manifest(cfg, Some(&scenario), &entries)?;
    Ok(format!(
        "scenario {}: wrote {r} dataset(s) of n = {n} to {}\n",
        scenario.name,
        dir.display()
    ))
}

/// The analysis dataset: `[data]` when given, otherwise replicate 0 of
/// the scenario, identical to `dataset_000.csv` from `simulate`.
struct Loaded {
    data: Dataset,
    scenario: Option<Scenario>,
    replicate: Option<ReplicateEntry>,
}

fn load_dataset(cfg: &Config) -> CliResult<Loaded> {
    let scenario = cfg.raw.scenario.as_ref().map(|_| cfg.scenario()).transpose()?;
    if let Some((path, schema_path)) = cfg.data_source() {
        let schema = read_schema(&schema_path)?;
        let file = File::open(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let data = Dataset::read_csv(schema, BufReader::new(file)).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
        validate(&data).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
        return Ok(Loaded {
            data,
            scenario,
            replicate: None,
        });
    }
    let s = scenario.ok_or_else(|| missing("data` or `scenario"))?;
    let n = cfg.n()?;
    seed_value(cfg.raw.seed)?;
    let seed = replicate_seed(cfg.raw.seed, &s.name, 0);
    let data = simulate(&s.model, n, seed)?;
    Ok(Loaded {
        data,
        scenario: Some(s),
        replicate: Some(ReplicateEntry {
            index: 0,
            seed: seed.to_string(),
            file: None,
        }),
    })
}

fn regime_from(spec: &str, occasions: usize) -> CliResult<Regime> {
    match spec {
        "follow-covariate" => return Ok(Regime::follow_covariate()),
        "always" => return Ok(Regime::fixed(&vec![1.0; occasions])),
        "never" => return Ok(Regime::fixed(&vec![0.0; occasions])),
        _ => {}
    }
    let plan = spec
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|_| {
            CliError::Config(format!(
                "regime `{spec}` is not \"follow-covariate\", \"always\", \"never\" or a comma-separated plan"
            ))
        })?;
    if plan.len() != occasions {
        return Err(CliError::Config(format!("regime `{spec}` has {} entries for {occasions} occasions", plan.len())));
    }
    Ok(Regime::fixed(&plan))
}

fn designs(label: &str, specs: &[Vec<String>]) -> CliResult<Vec<Option<DesignSpec>>> {
    specs
        .iter()
        .map(|s| {
            if s.is_empty() {
                return Ok(None);
            }
            DesignSpec::parse(s)
                .map(Some)
                .map_err(|e| CliError::Config(format!("in [g_formula] {label}: {e}")))
        })
        .collect()
}

/// Deciles of the draws, used when no evaluation points are given.
fn deciles(samples: &[f64]) -> Vec<f64> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    (1..10).map(|q| s[(q * (s.len() - 1)) / 10]).collect()
}

pub fn cmd_g_formula(cfg: &Config) -> CliResult<String> {
    let p = cfg.raw.g_formula.clone().ok_or_else(|| missing("g_formula"))?;
    if p.regimes.is_empty() {
        return Err(missing("g_formula.regimes"));
    }
    if p.draws == 0 && p.method != GFormulaMethod::Exact {
        return Err(CliError::Config("`g_formula.draws` must be at least 1".into()));
    }
    seed_value(cfg.raw.seed)?;
    let (schema, scenario, fitted, replicate) = match p.method {
        GFormulaMethod::Fitted => {
            let l = load_dataset(cfg)?;
            let occ = l.data.schema.occasions();
            if p.covariates.len() != occ {
                return Err(CliError::Config(format!(
                    "`g_formula.covariates` needs {occ} designs, got {}",
                    p.covariates.len()
                )));
            }
            if p.outcome.is_empty() {
                return Err(missing("g_formula.outcome"));
            }
            let outcome = DesignSpec::parse(&p.outcome).map_err(|e| CliError::Config(format!("in [g_formula] outcome: {e}")))?;
            let laws = FittedLaws::fit(&l.data, &designs("covariates", &p.covariates)?, &outcome)?;
            (l.data.schema.clone(), l.scenario, Some(laws), l.replicate)
        }
        _ => {
            let s = cfg.scenario()?;
            (s.model.schema(), Some(s), None, None)
        }
    };
    let occasions = schema.occasions();
    let table = match p.method {
        GFormulaMethod::Exact | GFormulaMethod::Mc => {
            let s = scenario.as_ref().expect("scenario present");
            Some(enumerate_joint(&s.model, None)?)
        }
        _ => None,
    };
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let mut summary = csv::Writer::from_path(dir.join("g_formula_summary.csv"))?;
    summary.write_record(["regime", "y", "survivor"])?;
    let mut text = String::new();
    for (j, spec) in p.regimes.iter().enumerate() {
        let regime = regime_from(spec, occasions)?;
        let seed = StreamKey::root(cfg.raw.seed).child("g-formula").child(spec).raw();
        let dist = match (p.method, &table, &fitted) {
            (GFormulaMethod::Exact, Some(t), _) => g_formula_exact(t, &regime)?,
            (GFormulaMethod::Mc, Some(t), _) => g_formula_mc(&TableLaws { table: t }, &regime, p.draws, seed)?,
            (GFormulaMethod::Fitted, _, Some(laws)) => g_formula_mc(laws, &regime, p.draws, seed)?,
            _ => {
                let s = scenario.as_ref().expect("scenario present");
                RegimeDistribution::Samples {
                    regime: regime.name(),
                    samples: counterfactual_draws(&s.model, &regime, p.draws, seed)?,
                }
            }
        };
        let mut w = create(&dir.join(format!("g_formula_{j}.csv")))?;
        dist.write_csv(&mut w)?;
        w.flush()?;
        let points = match (&dist, p.y.is_empty()) {
            (_, false) => p.y.clone(),
            (RegimeDistribution::Exact { grid, .. }, true) => grid.clone(),
            (RegimeDistribution::Samples { samples, .. }, true) => deciles(samples),
        };
        text.push_str(&format!("regime {}\n", dist.regime()));
        for y in points {
            let s = dist.survivor(y)?;
            summary.write_record([dist.regime().to_string(), seqtreat::data::format_float(y), seqtreat::data::format_float(s)])?;
            text.push_str(&format!("  S({y:.4}) = {s:.6}\n"));
        }
    }
    summary.flush()?;
    let entries: Vec<ReplicateEntry> = replicate.into_iter().collect();
    write_manifest(cfg, scenario.as_ref(), &entries)?;
    Ok(text)
}

fn report_table(command: &str, label: &str, loaded: &Loaded, outcome: &Outcome, g: Option<&GEstimate>) -> CliResult<String> {
    let ser = |e: toml::ser::Error| CliError::Failed(format!("cannot serialize report: {e}"));
    let mut t = toml::Table::try_from(outcome).map_err(ser)?;
    t.insert("command".into(), toml::Value::String(command.into()));
    t.insert("analysis".into(), toml::Value::String(label.into()));
    t.insert("n".into(), toml::Value::Integer(loaded.data.n() as i64));
    if let Some(s) = &loaded.scenario {
        t.insert("scenario".into(), toml::Value::String(s.name.clone()));
    }
    if let Some(g) = g {
        t.insert("psi_hat".into(), toml::Value::try_from(&g.psi_hat).map_err(ser)?);
        t.insert("boundary".into(), toml::Value::Boolean(g.boundary));
        let intervals: Vec<Vec<f64>> = (0..g.psi_hat.len()).filter_map(|j| g.interval(j)).map(|(a, b)| vec![a, b]).collect();
        t.insert("intervals".into(), toml::Value::try_from(intervals).map_err(ser)?);
    }
    toml::to_string(&t).map_err(ser)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn write_grid(g: &GEstimate, path: &Path) -> CliResult<()> {
    let mut w = create(path)?;
    g.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn finish_single(cfg: &Config, command: &str, stem: &str, spec: &AnalysisSpec, loaded: &Loaded, out: &Outcome, g: Option<&GEstimate>) -> CliResult<String> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    if let Some(g) = g {
        write_grid(g, &dir.join(format!("{stem}_grid.csv")))?;
    }
    let report = report_table(command, &spec.label(), loaded, out, g)?;
    write_text(&dir.join(format!("{stem}.toml")), &report)?;
    let entries: Vec<ReplicateEntry> = loaded.replicate.clone().into_iter().collect();
    write_manifest(cfg, loaded.scenario.as_ref(), &entries)?;
    Ok(report)
}

pub fn cmd_g_estimate(cfg: &Config) -> CliResult<String> {
    let p = cfg.raw.g_estimate.clone().ok_or_else(|| missing("g_estimate"))?;
    let loaded = load_dataset(cfg)?;
    let spec = AnalysisSpec::GEstimate(p.clone());
    spec.check(loaded.scenario.as_ref().map(|s| &s.model), Some(loaded.data.schema.occasions()))?;
    let g = p.estimate(&loaded.data)?;
    let out = Outcome::from_interval(&g, p.target());
    finish_single(cfg, "g-estimate", "g_estimate", &spec, &loaded, &out, Some(&g))
}

pub fn cmd_direct_effect(cfg: &Config) -> CliResult<String> {
    let spec = cfg.raw.direct_effect.clone().ok_or_else(|| missing("direct_effect"))?;
    let loaded = load_dataset(cfg)?;
    let model = loaded.scenario.as_ref().map(|s| &s.model);
    spec.check(model, Some(loaded.data.schema.occasions()))?;
    match &spec {
        AnalysisSpec::DeSndmEstimate(p) => {
            let g = p.estimate(&loaded.data, model)?;
            let out = Outcome::from_interval(&g, p.target());
            finish_single(cfg, "direct-effect", "direct_effect", &spec, &loaded, &out, Some(&g))
        }
        AnalysisSpec::DeGnullTest(_) | AnalysisSpec::Lemma2Demo(_) => {
            let out = spec.run(&loaded.data, model)?;
            finish_single(cfg, "direct-effect", "direct_effect", &spec, &loaded, &out, None)
        }
        other => Err(CliError::Config(format!(
            "[direct_effect] takes de_gnull_test, de_sndm_estimate or lemma2_demo, not {}",
            other.name()
        ))),
    }
}

/// Runs a named reproduction; the report is printed before any failure
/// is returned.
pub fn cmd_reproduce(name: &str, seed: Option<u64>, out: Option<&Path>) -> CliResult<String> {
    if !valid_names().contains(&name) {
        return Err(CliError::Config(format!(
            "unknown reproduction `{name}`; valid names: {}",
            valid_names().join(", ")
        )));
    }
    let reports = reproduce(name, seed)?;
    let text: String = reports.iter().map(|r| r.render()).collect();
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_text(&dir.join(format!("reproduce_{name}.txt")), &text)?;
    }
    let failed: Vec<String> = reports.iter().filter(|r| !r.pass()).map(|r| format!("C{}", r.id)).collect();
    if !failed.is_empty() {
        print!("{text}");
        return Err(CliError::Failed(format!("{} of {} criteria failed: {}", failed.len(), reports.len(), failed.join(", "))));
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regimes_parse() {
        assert!(regime_from("follow-covariate", 2).unwrap().name().contains("follow"));
        assert_eq!(regime_from("always", 3).unwrap().name(), "static(1,1,1)");
        assert_eq!(regime_from("1, 0", 2).unwrap().name(), "static(1,0)");
        assert!(matches!(regime_from("1", 2), Err(CliError::Config(_))));
        assert!(matches!(regime_from("sometimes", 2), Err(CliError::Config(_))));
    }

    #[test]
    fn dataset_file_names_sort_by_index() {
        assert_eq!(dataset_file(2, 5), "dataset_002.csv");
        assert_eq!(dataset_file(12, 2000), "dataset_0012.csv");
    }

    #[test]
    fn deciles_of_a_ramp() {
        let v: Vec<f64> = (0..=100).map(f64::from).rev().collect();
        assert_eq!(deciles(&v), (1..10).map(|q| f64::from(q * 10)).collect::<Vec<_>>());
    }
}
