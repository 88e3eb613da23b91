//! Knowledge distillation for CTC sequence models.
//!
//! Two-stage training of a student encoder from frozen teachers: first the
//! student's last hidden layer is fitted to a teacher's representation under
//! a frame-weighting mask, then the student is trained on CTC plus an l2
//! match between temperature-scaled teacher and student posteriors.
//! Baselines (frame-level KD, guided CTC, sequence-level KD) and an
//! experiment harness are included.

pub mod ctc;
pub mod distill;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod numcore;
pub mod synthdata;

pub use error::{Error, Result};
