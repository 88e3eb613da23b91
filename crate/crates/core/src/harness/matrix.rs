//! The scenario × method × seed comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::rerr;
use crate::models::Family;
use crate::synthdata::Dataset;

use super::config::{Method, RunConfig, Scenario};
use super::report::{csv_error, csv_string, write_atomic, write_run};
use super::train::{train, TrainOutcome};

pub const MATRIX_CSV: &str = "matrix.csv";
pub const SUMMARY_MD: &str = "summary.md";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub scenario: String,
    pub method: String,
    pub seed: u64,
    /// NaN when the references hold no words.
    pub wer: f64,
    pub ter: f64,
    /// Relative WER reduction against the same student's baseline; NaN
    /// when the baseline WER is zero or undefined.
    pub rerr_vs_baseline: f64,
}

fn teacher_path(config: &RunConfig, family: Family, scenario: Scenario) -> Result<PathBuf> {
    let path = match family {
        Family::Tdnn => &config.matrix.teacher_tdnn,
        Family::Rnn => &config.matrix.teacher_rnn,
    };
    match path {
        Some(p) if p.exists() => Ok(p.clone()),
        Some(p) => Err(Error::config(format!(
            "scenario {scenario}: {family} teacher checkpoint {} does not exist",
            p.display()
        ))),
        None => Err(Error::config(format!(
            "scenario {scenario}: no {family} teacher checkpoint configured (matrix.teacher_{family})"
        ))),
    }
}

fn row(scenario: Scenario, method: Method, seed: u64, outcome: &TrainOutcome, baseline_wer: Option<f64>) -> Result<MatrixRow> {
    let eval = outcome
        .report
        .eval
        .as_ref()
        .ok_or_else(|| Error::config("matrix runs need a non-empty held-out set"))?;
    let wer = eval.wer.unwrap_or(f64::NAN);
    let rerr_vs_baseline = match baseline_wer {
        Some(b) if b > 0.0 && !wer.is_nan() => rerr(b, wer)?,
        _ => f64::NAN,
    };
    Ok(MatrixRow {
        scenario: scenario.to_string(),
        method: method.to_string(),
        seed,
        wer,
        ter: eval.ter,
        rerr_vs_baseline,
    })
}

/// Runs every configured scenario for every seed. Baselines are trained
/// once per (student family, seed) and shared across scenarios. With
/// `out_dir`, each run's outputs, `matrix.csv` and `summary.md` are written.
pub fn run_matrix(config: &RunConfig, train_set: &Dataset, eval_set: &Dataset, out_dir: Option<&Path>) -> Result<Vec<MatrixRow>> {
    let scenarios = &config.matrix.scenarios;
    if scenarios.is_empty() || config.matrix.seeds.is_empty() {
        return Err(Error::config("matrix needs at least one scenario and one seed"));
    }
    let mut teachers = Vec::new();
    for &s in scenarios {
        teachers.push((teacher_path(config, s.rkd_teacher(), s)?, teacher_path(config, s.skd_teacher(), s)?));
    }
    let mut rows = Vec::new();
    for &seed in &config.matrix.seeds {
        let mut baselines: BTreeMap<&'static str, (Option<f64>, MatrixRow)> = BTreeMap::new();
        for (&scenario, (rkd, skd)) in scenarios.iter().zip(&teachers) {
            let family = scenario.student();
            let mut c = config.clone();
            c.seed = seed;
            c.student_family = family;
            c.plan.rkd_teacher = Some(rkd.clone());
            c.plan.skd_teacher = Some(skd.clone());
            let key = match family {
                Family::Tdnn => "tdnn",
                Family::Rnn => "rnn",
            };
            let run_dir = |name: String| out_dir.map(|d| d.join("runs").join(name));
            if !baselines.contains_key(key) {
                info!("matrix seed {seed}: baseline {family}");
                let outcome = train(&c, Method::Baseline, train_set, eval_set)?;
                if let Some(d) = run_dir(format!("baseline-{key}-s{seed}")) {
                    write_run(&d, &outcome)?;
                }
                let wer = outcome.report.eval.as_ref().and_then(|e| e.wer);
                baselines.insert(key, (wer, row(scenario, Method::Baseline, seed, &outcome, wer)?));
            }
            let (baseline_wer, baseline_row) = baselines[key].clone();
            if !scenario.is_mixed() {
                rows.push(MatrixRow {
                    scenario: scenario.to_string(),
                    ..baseline_row
                });
            }
            let methods: Vec<Method> = if scenario.is_mixed() {
                vec![Method::Tutornet]
            } else {
                config.matrix.methods.iter().copied().filter(|&m| m != Method::Baseline).collect()
            };
            for method in methods {
                info!("matrix seed {seed}: {scenario} {method}");
                let outcome = train(&c, method, train_set, eval_set)?;
                if let Some(d) = run_dir(format!("{}-{method}-s{seed}", scenario_slug(scenario))) {
                    write_run(&d, &outcome)?;
                }
                rows.push(row(scenario, method, seed, &outcome, baseline_wer)?);
            }
        }
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        write_atomic(&dir.join(MATRIX_CSV), matrix_csv(&rows)?.as_bytes())?;
        write_atomic(&dir.join(SUMMARY_MD), summarize(&rows).as_bytes())?;
    }
    Ok(rows)
}

fn scenario_slug(s: Scenario) -> String {
    s.to_string().replace("->", "-to-").replace('&', "-")
}

pub fn matrix_csv(rows: &[MatrixRow]) -> Result<String> {
    csv_string(
        rows.iter(),
        &["scenario", "method", "seed", "wer", "ter", "rerr_vs_baseline"],
    )
}

pub fn read_matrix_csv(path: &Path) -> Result<Vec<MatrixRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader.deserialize().map(|r| r.map_err(csv_error)).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Markdown table of per-(scenario, method) means over seeds.
pub fn summarize(rows: &[MatrixRow]) -> String {
    let mut groups: BTreeMap<(String, String), Vec<&MatrixRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.scenario.clone(), r.method.clone())).or_default().push(r);
    }
    let mut out = String::from("| scenario | method | seeds | mean WER | mean TER | mean RERR (%) |\n|---|---|---|---|---|---|\n");
    for ((scenario, method), rs) in &groups {
        let wer: Vec<f64> = rs.iter().map(|r| r.wer).collect();
        let ter: Vec<f64> = rs.iter().map(|r| r.ter).collect();
        let rr: Vec<f64> = rs.iter().map(|r| r.rerr_vs_baseline).collect();
        let _ = writeln!(
            out,
            "| {scenario} | {method} | {} | {:.4} | {:.4} | {:.2} |",
            rs.len(),
            mean(&wer),
            mean(&ter),
            mean(&rr)
        );
    }
    out
}
