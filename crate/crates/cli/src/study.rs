//! Replicate studies: simulate, analyse, log, summarise.

use std::fs;
use std::path::Path;

use seqtreat::data::format_float;
use seqtreat::par;
use seqtreat::rng::StreamKey;
use seqtreat::simulate::{simulate, Structural};

use crate::analysis::{AnalysisSpec, Outcome};
use crate::commands::write_manifest;
use crate::config::{check_labels, missing, Config, ReplicateEntry, Scenario};
use crate::error::{CliError, CliResult};

pub const LOG_HEADER: [&str; 10] = ["scenario", "n", "replicate", "analysis", "statistic", "p", "reject", "estimate", "ci_lo", "ci_hi"];

pub const SUMMARY_HEADER: [&str; 13] = [
    "analysis",
    "replicates",
    "errors",
    "mean_statistic",
    "mean_p",
    "rejection_rate",
    "rejection_mc_se",
    "mean_estimate",
    "estimate_mc_se",
    "mean_ci_lo",
    "mean_ci_hi",
    "coverage",
    "coverage_mc_se",
];

/// Seed of replicate `i`, drawn from the `scenario/replicate-i` substream.
pub fn replicate_seed(root: u64, scenario: &str, i: usize) -> u64 {
    StreamKey::root(root).child(scenario).replicate(i).raw()
}

pub type Cell = Result<Outcome, String>;

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub scenario: String,
    pub n: usize,
    pub labels: Vec<String>,
    /// `cells[r][a]` for replicate `r` and analysis `a`.
    pub cells: Vec<Vec<Cell>>,
}

impl StudyResult {
    pub fn errors(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.is_err()).count()
    }
}

pub fn run(cfg: &Config) -> CliResult<StudyResult> {
    let scenario: Scenario = cfg.scenario()?;
    let n = cfg.n()?;
    let analyses: &[AnalysisSpec] = &cfg.raw.analysis;
    if analyses.is_empty() {
        return Err(missing("analysis"));
    }
    check_labels(analyses)?;
    let occasions = scenario.model.schema().occasions();
    for a in analyses {
        a.check(Some(&scenario.model), Some(occasions))?;
    }
    let cells = par::map(cfg.raw.replicates, |r| {
        match simulate(&scenario.model, n, replicate_seed(cfg.raw.seed, &scenario.name, r)) {
            Ok(d) => analyses
                .iter()
                .map(|a| a.run(&d, Some(&scenario.model)).map_err(|e| e.to_string()))
                .collect(),
            Err(e) => vec![Err(format!("simulation failed: {e}")); analyses.len()],
        }
    });
    Ok(StudyResult {
        scenario: scenario.name,
        n,
        labels: analyses.iter().map(AnalysisSpec::label).collect(),
        cells,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

fn flag(v: Option<bool>) -> String {
    v.map(|b| b.to_string()).unwrap_or_default()
}

pub fn write_log(res: &StudyResult, path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(LOG_HEADER)?;
    for (r, row) in res.cells.iter().enumerate() {
        for (label, cell) in res.labels.iter().zip(row) {
            let o = cell.as_ref().ok();
            w.write_record([
                res.scenario.clone(),
                res.n.to_string(),
                r.to_string(),
                label.clone(),
                opt(o.and_then(|o| o.statistic)),
                opt(o.and_then(|o| o.p)),
                flag(o.and_then(|o| o.reject)),
                opt(o.and_then(|o| o.estimate)),
                opt(o.and_then(|o| o.ci_lo)),
                opt(o.and_then(|o| o.ci_hi)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_errors(res: &StudyResult, path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["replicate", "analysis", "error"])?;
    for (r, row) in res.cells.iter().enumerate() {
        for (label, cell) in res.labels.iter().zip(row) {
            if let Err(e) = cell {
                w.write_record([r.to_string(), label.clone(), e.clone()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Aggregates for one analysis across replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub analysis: String,
    pub replicates: usize,
    pub errors: usize,
    pub mean_statistic: Option<f64>,
    pub mean_p: Option<f64>,
    pub rejection_rate: Option<f64>,
    pub rejection_mc_se: Option<f64>,
    pub mean_estimate: Option<f64>,
    pub estimate_mc_se: Option<f64>,
    pub mean_ci_lo: Option<f64>,
    pub mean_ci_hi: Option<f64>,
    pub coverage: Option<f64>,
    pub coverage_mc_se: Option<f64>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// `sd / √R`; undefined for a single replicate.
fn mc_se(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    Some((seqtreat::stats::variance(v) / v.len() as f64).sqrt())
}

fn rate(flags: &[bool]) -> (Option<f64>, Option<f64>) {
    if flags.is_empty() {
        return (None, None);
    }
    let r = flags.len();
    let p = flags.iter().filter(|b| **b).count() as f64 / r as f64;
    (Some(p), Some((p * (1.0 - p) / r as f64).sqrt()))
}

pub fn summarise(res: &StudyResult) -> Vec<SummaryRow> {
    res.labels
        .iter()
        .enumerate()
        .map(|(a, label)| {
            let ok: Vec<&Outcome> = res.cells.iter().filter_map(|row| row[a].as_ref().ok()).collect();
            let pick = |f: fn(&Outcome) -> Option<f64>| ok.iter().filter_map(|o| f(o)).collect::<Vec<f64>>();
            let estimates = pick(|o| o.estimate);
            let rejects: Vec<bool> = ok.iter().filter_map(|o| o.reject).collect();
            let covered: Vec<bool> = ok.iter().filter_map(|o| o.covered).collect();
            let (rejection_rate, rejection_mc_se) = rate(&rejects);
            let (coverage, coverage_mc_se) = rate(&covered);
            SummaryRow {
                analysis: label.clone(),
                replicates: ok.len(),
                errors: res.cells.len() - ok.len(),
                mean_statistic: mean(&pick(|o| o.statistic)),
                mean_p: mean(&pick(|o| o.p)),
                rejection_rate,
                rejection_mc_se,
                mean_estimate: mean(&estimates),
                estimate_mc_se: mc_se(&estimates),
                mean_ci_lo: mean(&pick(|o| o.ci_lo)),
                mean_ci_hi: mean(&pick(|o| o.ci_hi)),
                coverage,
                coverage_mc_se,
            }
        })
        .collect()
}

impl SummaryRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.analysis.clone(),
            self.replicates.to_string(),
            self.errors.to_string(),
            opt(self.mean_statistic),
            opt(self.mean_p),
            opt(self.rejection_rate),
            opt(self.rejection_mc_se),
            opt(self.mean_estimate),
            opt(self.estimate_mc_se),
            opt(self.mean_ci_lo),
            opt(self.mean_ci_hi),
            opt(self.coverage),
            opt(self.coverage_mc_se),
        ]
    }
}

pub fn write_summary(rows: &[SummaryRow], path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

fn short(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

/// A fixed-width table for the terminal.
pub fn render_summary(res: &StudyResult, rows: &[SummaryRow]) -> String {
    let mut s = format!("scenario {} | n = {} | replicates = {}\n", res.scenario, res.n, res.cells.len());
    let width = rows.iter().map(|r| r.analysis.len()).max().unwrap_or(8).max(8);
    s.push_str(&format!(
        "{:<width$}  {:>5}  {:>6}  {:>15}  {:>15}  {:>15}\n",
        "analysis", "ok", "errors", "reject (se)", "estimate (se)", "coverage (se)"
    ));
    for r in rows {
        let pair = |a: Option<f64>, b: Option<f64>| match a {
            Some(_) => format!("{} ({})", short(a), short(b)),
            None => "-".into(),
        };
        s.push_str(&format!(
            "{:<width$}  {:>5}  {:>6}  {:>15}  {:>15}  {:>15}\n",
            r.analysis,
            r.replicates,
            r.errors,
            pair(r.rejection_rate, r.rejection_mc_se),
            pair(r.mean_estimate, r.estimate_mc_se),
            pair(r.coverage, r.coverage_mc_se),
        ));
    }
    s
}

/// Runs the study and writes `study_log.csv`, `summary.csv`, the manifest
/// and, when any run failed, `study_errors.csv`.
pub fn cmd_study(cfg: &Config) -> CliResult<String> {
    let res = run(cfg)?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    write_log(&res, &dir.join("study_log.csv"))?;
    let rows = summarise(&res);
    write_summary(&rows, &dir.join("summary.csv"))?;
    let scenario = cfg.scenario()?;
    let entries: Vec<ReplicateEntry> = (0..res.cells.len())
        .map(|r| ReplicateEntry {
            index: r,
            seed: replicate_seed(cfg.raw.seed, &scenario.name, r).to_string(),
            file: None,
        })
        .collect();
    write_manifest(cfg, Some(&scenario), &entries)?;
    let table = render_summary(&res, &rows);
    let errors = res.errors();
    if errors > 0 {
        write_errors(&res, &dir.join("study_errors.csv"))?;
        print!("{table}");
        return Err(CliError::Failed(format!(
            "{errors} of {} analysis runs failed; see {}",
            res.cells.len() * res.labels.len(),
            dir.join("study_errors.csv").display()
        )));
    }
    Ok(table)
}
