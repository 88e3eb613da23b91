//! Training, evaluation and experiment orchestration behind the CLI.

mod config;
mod eval;
mod matrix;
mod optim;
mod report;
mod train;

pub use config::{ArchConfig, MatrixConfig, Method, RunConfig, Scenario, TaskConfig, SEED_ENV};
pub use eval::{evaluate, EvalReport};
pub use matrix::{read_matrix_csv, run_matrix, summarize, MatrixRow, MATRIX_CSV, SUMMARY_MD};
pub use optim::{Adam, AdamConfig};
pub use report::{loss_csv, report_markdown, rkd_csv, write_run, CHECKPOINT_FILE, LOSS_CSV, REPORT_MD, RKD_CSV};
pub use train::{
    load_data, load_teacher, train, train_baseline, train_baseline_kd, train_two_stage, RunReport, StepLoss,
    TrainOutcome,
};
