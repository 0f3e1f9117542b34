//! The `seqtreat` binary end to end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_seqtreat"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn seqtreat")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

const SIMULATE: &str = r#"
config_version = 1
seed = 99
n = 50
replicates = 2
output_dir = "sim"

[scenario]
preset = "null-paradox"
"#;

const STUDY: &str = r#"
config_version = 1
seed = 4
n = 300
replicates = REPS
output_dir = "study"

[scenario]
preset = "null-paradox"

[[analysis]]
name = "naive_test"

[[analysis]]
name = "gnull_score_test"
"#;

fn study_config(dir: &Path, reps: usize) -> PathBuf {
    write_config(dir, "study.toml", &STUDY.replace("REPS", &reps.to_string()))
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn simulate_writes_one_file_per_replicate_and_a_manifest() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "sim.toml", SIMULATE);
    let o = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let names: Vec<String> = files(&t.path().join("sim")).into_iter().map(|f| f.0).collect();
    assert_eq!(names, ["dataset_000.csv", "dataset_001.csv", "manifest.toml", "schema.toml"]);
    let text = fs::read_to_string(t.path().join("sim/dataset_000.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "L0,A0,L1,A1,Y");
    assert_eq!(text.lines().count(), 51);
    let manifest = fs::read_to_string(t.path().join("sim/manifest.toml")).unwrap();
    assert_eq!(manifest.matches("[[replicate]]").count(), 2);
    assert!(manifest.contains("dataset_001.csv"));
}

#[test]
fn simulate_is_byte_identical_and_the_manifest_regenerates_it() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "sim.toml", SIMULATE);
    let c = cfg.to_str().unwrap();
    let a = t.path().join("a");
    let b = t.path().join("b");
    assert_eq!(code(&run(&["simulate", "--config", c, "--out", a.to_str().unwrap()])), 0);
    assert_eq!(code(&run(&["simulate", "--config", c, "--out", b.to_str().unwrap()])), 0);
    assert_eq!(files(&a), files(&b));

    let regen = t.path().join("regen");
    let manifest = a.join("manifest.toml");
    let o = run(&["simulate", "--config", manifest.to_str().unwrap(), "--out", regen.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(files(&a), files(&regen));

    let other = t.path().join("other");
    assert_eq!(code(&run(&["simulate", "--config", c, "--seed", "100", "--out", other.to_str().unwrap()])), 0);
    assert_ne!(fs::read(a.join("dataset_000.csv")).unwrap(), fs::read(other.join("dataset_000.csv")).unwrap());
}

#[test]
fn edited_manifest_seeds_are_rejected() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "sim.toml", SIMULATE);
    assert_eq!(code(&run(&["simulate", "--config", cfg.to_str().unwrap()])), 0);
    let m = t.path().join("sim/manifest.toml");
    let text = fs::read_to_string(&m).unwrap().replace("seed = 99", "seed = 98");
    fs::write(&m, text).unwrap();
    let o = run(&["simulate", "--config", m.to_str().unwrap(), "--out", t.path().join("x").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("[[replicate]]"), "{}", stderr(&o));
}

#[test]
fn missing_scenario_is_a_config_error_naming_the_key() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "bad.toml", "config_version = 1\nn = 10\n");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing key `scenario`"), "{}", stderr(&o));
}

#[test]
fn malformed_configs_report_the_field() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "bad.toml", "config_version = 1\nn = 10\nrepliactes = 3\n");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let e = stderr(&o);
    assert!(e.contains("repliactes") && e.contains("line 3"), "{e}");

    let cfg = write_config(t.path(), "v2.toml", "config_version = 2\n");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("config_version"));

    let cfg = write_config(t.path(), "an.toml", &STUDY.replace("REPS", "1").replace("gnull_score_test", "t_test"));
    let o = run(&["study", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("t_test"), "{}", stderr(&o));
}

#[test]
fn study_summary_has_one_rate_row_per_analysis() {
    let t = TempDir::new().unwrap();
    let cfg = study_config(t.path(), 20);
    let o = run(&["study", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("naive_test"));
    let dir = t.path().join("study");
    let summary = rows(&dir.join("summary.csv"));
    assert_eq!(summary.len(), 2);
    assert_eq!(summary[0][0], "naive_test");
    assert_eq!(summary[1][0], "gnull_score_test");

    let log = rows(&dir.join("study_log.csv"));
    assert_eq!(log.len(), 40);
    let header = csv::Reader::from_path(dir.join("study_log.csv")).unwrap().headers().unwrap().clone();
    assert_eq!(header.iter().collect::<Vec<_>>(), ["scenario", "n", "replicate", "analysis", "statistic", "p", "reject", "estimate", "ci_lo", "ci_hi"]);
    for (a, s) in ["naive_test", "gnull_score_test"].iter().zip(&summary) {
        let flags: Vec<f64> = log.iter().filter(|r| r[3] == *a).map(|r| if r[6] == "true" { 1.0 } else { 0.0 }).collect();
        let mean = flags.iter().sum::<f64>() / flags.len() as f64;
        let rate: f64 = s[5].parse().unwrap();
        assert!((rate - mean).abs() <= 1e-12, "{a}: {rate} vs {mean}");
    }
    let replicates: Vec<usize> = log.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(replicates.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn single_replicate_summary_equals_its_row() {
    let t = TempDir::new().unwrap();
    let cfg = study_config(t.path(), 1);
    assert_eq!(code(&run(&["study", "--config", cfg.to_str().unwrap()])), 0);
    let dir = t.path().join("study");
    let log = rows(&dir.join("study_log.csv"));
    let summary = rows(&dir.join("summary.csv"));
    for (row, s) in log.iter().zip(&summary) {
        assert_eq!(row[3], s[0]);
        assert_eq!(row[4], s[3], "statistic");
        assert_eq!(row[5], s[4], "p");
        let flag = if row[6] == "true" { "1.0" } else { "0.0" };
        assert_eq!(flag, s[5], "reject");
    }
}

#[test]
fn studies_do_not_depend_on_the_thread_count() {
    let t = TempDir::new().unwrap();
    let cfg = study_config(t.path(), 6);
    let c = cfg.to_str().unwrap();
    let one = t.path().join("one");
    let many = t.path().join("many");
    assert_eq!(code(&run(&["study", "--config", c, "--jobs", "1", "--out", one.to_str().unwrap()])), 0);
    assert_eq!(code(&run(&["study", "--config", c, "--jobs", "3", "--out", many.to_str().unwrap()])), 0);
    assert_eq!(files(&one), files(&many));
}

#[test]
fn failing_analyses_are_logged_and_the_study_exits_nonzero() {
    let t = TempDir::new().unwrap();
    // The pooled test fits a logistic treatment model, so it fails on the
    // normal treatments of this scenario.
    let body = STUDY.replace("REPS", "3").replace("gnull_score_test", "pooled_g_test");
    let cfg = write_config(t.path(), "err.toml", &body);
    let o = run(&["study", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let dir = t.path().join("study");
    assert_eq!(rows(&dir.join("study_log.csv")).len(), 6);
    let errors = rows(&dir.join("study_errors.csv"));
    assert_eq!(errors.len(), 3);
    assert!(errors.iter().all(|r| r[1] == "pooled_g_test"));
    let summary = rows(&dir.join("summary.csv"));
    assert_eq!(summary[1][2], "3");
}

#[test]
fn g_estimate_on_a_file_matches_the_scenario_run() {
    let t = TempDir::new().unwrap();
    let common = r#"
config_version = 1
seed = 8
n = 400
output_dir = "OUT"

[g_estimate]
blip = { family = "additive", features = ["a0"] }
psi_box = [[-1.0, 3.0]]
grid_points = 41
truth = [1.0]
"#;
    let scenario = "\n[scenario]\npreset = \"sndm-recovery\"\n";
    let sim = write_config(t.path(), "sim.toml", &format!("{}{scenario}", common.replace("OUT", "sim")));
    assert_eq!(code(&run(&["simulate", "--config", sim.to_str().unwrap()])), 0);
    let from_scenario = write_config(t.path(), "gs.toml", &format!("{}{scenario}", common.replace("OUT", "gs")));
    let o = run(&["g-estimate", "--config", from_scenario.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("psi_hat"));
    let data = "\n[data]\npath = \"sim/dataset_000.csv\"\nschema = \"sim/schema.toml\"\n";
    let from_file = write_config(t.path(), "gf.toml", &format!("{}{data}", common.replace("OUT", "gf")));
    let o = run(&["g-estimate", "--config", from_file.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        fs::read(t.path().join("gs/g_estimate_grid.csv")).unwrap(),
        fs::read(t.path().join("gf/g_estimate_grid.csv")).unwrap()
    );
    let report: toml::Table = toml::from_str(&fs::read_to_string(t.path().join("gf/g_estimate.toml")).unwrap()).unwrap();
    assert_eq!(report["covered"].as_bool(), Some(true));
}

#[test]
fn exact_g_formula_writes_survivor_tables() {
    let t = TempDir::new().unwrap();
    let body = r#"
config_version = 1
output_dir = "gf"

[scenario]
preset = "binary-toy"

[g_formula]
regimes = ["0,0", "always", "follow-covariate"]
y = [0.0, 1.0, 2.0]
"#;
    let cfg = write_config(t.path(), "gf.toml", body);
    let o = run(&["g-formula", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = rows(&t.path().join("gf/g_formula_summary.csv"));
    assert_eq!(summary.len(), 9);
    for r in &summary {
        let s: f64 = r[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&s));
    }
    assert!(t.path().join("gf/g_formula_2.csv").exists());

    let cfg = write_config(t.path(), "bad.toml", &body.replace("\"0,0\"", "\"0,0,0\""));
    assert_eq!(code(&run(&["g-formula", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn direct_effect_runs_the_configured_test() {
    let t = TempDir::new().unwrap();
    let body = r#"
config_version = 1
seed = 2
n = 500
output_dir = "de"

[scenario]
preset = "null-paradox"

[direct_effect]
name = "de_gnull_test"
a1_model = "known"
"#;
    let cfg = write_config(t.path(), "de.toml", body);
    let o = run(&["direct-effect", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: toml::Table = toml::from_str(&fs::read_to_string(t.path().join("de/direct_effect.toml")).unwrap()).unwrap();
    assert!(report["p"].as_float().is_some());

    let cfg = write_config(t.path(), "wrong.toml", &body.replace("name = \"de_gnull_test\"\na1_model = \"known\"", "name = \"naive_test\""));
    assert_eq!(code(&run(&["direct-effect", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn reproduce_reports_and_validates_names() {
    let o = run(&["reproduce", "h-transform"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("PASS C7"));
    assert_eq!(stdout(&o), stdout(&run(&["reproduce", "h-transform"])));

    let o = run(&["reproduce", "theorem9"]);
    assert_eq!(code(&o), 2);
    let e = stderr(&o);
    for name in ["theorem2", "gnull-level", "sndm-recovery", "appendix29", "lemma2", "direct-effect-level"] {
        assert!(e.contains(name), "{e}");
    }
}

#[test]
fn reproduce_can_write_its_report() {
    let t = TempDir::new().unwrap();
    let o = run(&["reproduce", "h-transform", "--seed", "3", "--out", t.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(t.path().join("reproduce_h-transform.txt")).unwrap();
    assert_eq!(text, stdout(&o));
    assert!(text.contains("(seed 3)"));
}

#[test]
fn commands_without_a_config_are_usage_errors() {
    let o = run(&["study"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--config"));
    assert_eq!(code(&run(&["bogus"])), 2);
}
