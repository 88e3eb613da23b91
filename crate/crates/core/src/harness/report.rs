//! Run outputs: loss curves as CSV, a markdown report and the checkpoint.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

use super::train::{RunReport, TrainOutcome};

pub const LOSS_CSV: &str = "loss.csv";
pub const RKD_CSV: &str = "rkd.csv";
pub const REPORT_MD: &str = "report.md";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

#[derive(Serialize)]
struct LossRecord {
    step: usize,
    loss_ctc: f64,
    loss_skd: f64,
    loss_total: f64,
}

#[derive(Serialize)]
struct RkdRecord {
    step: usize,
    loss_rkd: f64,
}

pub(crate) fn csv_string<T: Serialize>(rows: impl IntoIterator<Item = T>, header: &[&str]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

/// Writes via a sibling temp file and rename.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| Error::file(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::file(path, e))
}

/// `step,loss_ctc,loss_skd,loss_total`, one record per optimizer step.
pub fn loss_csv(report: &RunReport) -> Result<String> {
    csv_string(
        report.steps.iter().enumerate().map(|(i, s)| LossRecord {
            step: i + 1,
            loss_ctc: s.ctc,
            loss_skd: s.aux,
            loss_total: s.total,
        }),
        &["step", "loss_ctc", "loss_skd", "loss_total"],
    )
}

pub fn rkd_csv(report: &RunReport) -> Result<String> {
    csv_string(
        report.rkd_steps.iter().enumerate().map(|(i, &l)| RkdRecord {
            step: i + 1,
            loss_rkd: l,
        }),
        &["step", "loss_rkd"],
    )
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |x| format!("{x:.4}"))
}

pub fn report_markdown(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {} (seed {})\n", report.method, report.seed);
    let _ = writeln!(out, "- skipped utterances: {}", report.skipped);
    let _ = writeln!(out, "- aux weight: {}", report.aux_weight);
    let _ = writeln!(out, "- wall clock: {:.1} s", report.wall_clock_secs);
    if let Some(e) = &report.eval {
        let _ = writeln!(out, "- held-out WER: {}", fmt_opt(e.wer));
        let _ = writeln!(out, "- held-out TER: {:.4}", e.ter);
    }
    if !report.rkd_epochs.is_empty() {
        let _ = writeln!(
            out,
            "- L_RKD over the training set: {} -> {}",
            fmt_opt(report.rkd_initial),
            fmt_opt(report.rkd_final)
        );
        let _ = writeln!(out, "\n## Stage 1\n\n| epoch | L_RKD |\n|---|---|");
        for (i, l) in report.rkd_epochs.iter().enumerate() {
            let _ = writeln!(out, "| {} | {l:.4} |", i + 1);
        }
    }
    let _ = writeln!(out, "\n## Supervised stage\n\n| epoch | L_CTC | L_aux | L_total |\n|---|---|---|---|");
    for (i, e) in report.epochs.iter().enumerate() {
        let _ = writeln!(out, "| {} | {:.4} | {:.4} | {:.4} |", i + 1, e.ctc, e.aux, e.total);
    }
    out
}

/// `model.ckpt`, `loss.csv`, `report.md` and, after a representation
/// stage, `rkd.csv`.
pub fn write_run(dir: &Path, outcome: &TrainOutcome) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    outcome.checkpoint().save(&dir.join(CHECKPOINT_FILE))?;
    write_atomic(&dir.join(LOSS_CSV), loss_csv(&outcome.report)?.as_bytes())?;
    if !outcome.report.rkd_steps.is_empty() {
        write_atomic(&dir.join(RKD_CSV), rkd_csv(&outcome.report)?.as_bytes())?;
    }
    write_atomic(&dir.join(REPORT_MD), report_markdown(&outcome.report).as_bytes())
}
