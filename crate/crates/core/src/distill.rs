//! Distillation objectives.
//!
//! Teacher-side quantities always enter the tape as constants, so no
//! gradient can reach a teacher parameter.

use std::path::PathBuf;

use crate::ctc::{argmax, beam_nbest, LabelSeq, PosteriorGrid};
use crate::error::{Error, Result};
use crate::models::{adapter_forward, AdapterVars};
use crate::numcore::{sigmoid, softmax_rows, DenseArray, Tape, Var};

/// Lower bound applied to any probability before a log.
pub const PROB_FLOOR: f64 = 1e-12;
pub const DEFAULT_TAU: f64 = 1.0;
pub const DEFAULT_LAMBDA_SKD: f64 = 0.25;
pub const DEFAULT_GUIDED_WEIGHT: f64 = 0.5;

/// Per-frame weights derived from a teacher representation, `T x D_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameWeightMask {
    values: DenseArray,
}

impl FrameWeightMask {
    pub fn values(&self) -> &DenseArray {
        &self.values
    }

    pub fn into_array(self) -> DenseArray {
        self.values
    }
}

/// Mean over the hidden axis, squashed by a sigmoid, tiled back to `D_t`.
pub fn frame_weight_mask(teacher: &DenseArray) -> Result<FrameWeightMask> {
    if teacher.rank() != 2 || teacher.rows() == 0 || teacher.cols() == 0 {
        return Err(Error::config(format!(
            "frame weighting needs a non-empty T x D array, got {:?}",
            teacher.shape()
        )));
    }
    let width = teacher.cols();
    let mut data = Vec::with_capacity(teacher.len());
    for t in 0..teacher.rows() {
        let mean = teacher.row(t).iter().sum::<f64>() / width as f64;
        data.extend(std::iter::repeat_n(sigmoid(mean), width));
    }
    Ok(FrameWeightMask {
        values: DenseArray::new(teacher.shape().to_vec(), data)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerPair {
    pub teacher_layer: usize,
    pub student_layer: usize,
}

/// One term of the representation loss.
pub struct RkdTerm<'a> {
    /// Teacher hidden layer, `T x D_t`.
    pub teacher: &'a DenseArray,
    /// Student hidden layer on the tape, `T x D_s`.
    pub student: Var,
    pub adapter: &'a AdapterVars,
}

/// `Σ_pairs ‖M ⊙ (w_tea − c_θ(w_stu))‖²`, with `M` the frame-weighting mask
/// or all ones when `frame_weighting` is off.
pub fn rkd_loss(tape: &mut Tape, terms: &[RkdTerm<'_>], frame_weighting: bool) -> Result<Var> {
    if terms.is_empty() {
        return Err(Error::config("representation loss needs at least one layer pair"));
    }
    let mut total: Option<Var> = None;
    for term in terms {
        let frames = tape.value(term.student).rows();
        if term.teacher.rows() != frames {
            return Err(Error::config(format!(
                "teacher has {} frames, student {frames}; encoders must preserve T",
                term.teacher.rows()
            )));
        }
        let projected = adapter_forward(tape, term.adapter, term.student)?;
        let teacher = tape.constant(term.teacher.clone());
        let diff = tape.sub(teacher, projected)?;
        let weighted = if frame_weighting {
            let mask = tape.constant(frame_weight_mask(term.teacher)?.into_array());
            tape.mul(mask, diff)?
        } else {
            diff
        };
        let sq = tape.square(weighted)?;
        let term_loss = tape.sum(sq, None)?;
        total = Some(match total {
            Some(acc) => tape.add(acc, term_loss)?,
            None => term_loss,
        });
    }
    Ok(total.expect("at least one term"))
}

/// `Σ_t ‖softmax(f_tea/τ) − softmax(f_stu/τ)‖²`, teacher side constant.
pub fn skd_loss(tape: &mut Tape, teacher_logits: &DenseArray, student_logits: Var, tau: f64) -> Result<Var> {
    if !(tau > 0.0) {
        return Err(Error::config(format!("temperature must be > 0, got {tau}")));
    }
    let student_shape = tape.value(student_logits).shape().to_vec();
    if teacher_logits.shape() != student_shape.as_slice() {
        return Err(Error::config(format!(
            "teacher logits {:?} vs student logits {student_shape:?}",
            teacher_logits.shape()
        )));
    }
    let teacher_post = softmax_rows(&teacher_logits.map(|v| v / tau))?;
    let teacher = tape.constant(teacher_post);
    let scaled = tape.scale(student_logits, 1.0 / tau)?;
    let axis = student_shape.len() - 1;
    let student = tape.softmax(scaled, axis)?;
    let diff = tape.sub(teacher, student)?;
    let sq = tape.square(diff)?;
    tape.sum(sq, None)
}

/// `L_CTC + λ · L_SKD`.
pub fn combined_loss(tape: &mut Tape, ctc: Var, skd: Var, lambda_skd: f64) -> Result<Var> {
    if !(lambda_skd >= 0.0) {
        return Err(Error::config(format!("lambda_skd must be >= 0, got {lambda_skd}")));
    }
    let weighted = tape.scale(skd, lambda_skd)?;
    tape.add(ctc, weighted)
}

/// Floored student log-posteriors, `ln max(p, PROB_FLOOR)`.
fn floored_log_posteriors(tape: &mut Tape, logits: Var) -> Result<Var> {
    let axis = tape.value(logits).rank() - 1;
    let lp = tape.log_softmax(logits, axis)?;
    tape.clamp_min(lp, PROB_FLOOR.ln())
}

/// Frame-level cross-entropy `−Σ_t Σ_k p_tea[t,k] ln p_stu[t,k]`.
pub fn frame_kd_loss(tape: &mut Tape, teacher: &PosteriorGrid, student_logits: Var) -> Result<Var> {
    if teacher.values().shape() != tape.value(student_logits).shape() {
        return Err(Error::config(format!(
            "teacher posteriors {:?} vs student logits {:?}",
            teacher.values().shape(),
            tape.value(student_logits).shape()
        )));
    }
    let lp = floored_log_posteriors(tape, student_logits)?;
    let p = tape.constant(teacher.values().clone());
    let prod = tape.mul(p, lp)?;
    let s = tape.sum(prod, None)?;
    tape.scale(s, -1.0)
}

/// One-hot mask at each frame's teacher argmax (lowest index on ties).
pub fn guided_mask(teacher: &PosteriorGrid) -> DenseArray {
    let mut mask = DenseArray::zeros(teacher.values().shape());
    let classes = teacher.classes();
    for t in 0..teacher.frames() {
        mask.data_mut()[t * classes + argmax(teacher.row(t))] = 1.0;
    }
    mask
}

/// `weight · (−(1/T) Σ_t ln p_stu[t, argmax_t])`.
pub fn guided_loss(tape: &mut Tape, mask: &DenseArray, student_logits: Var, weight: f64) -> Result<Var> {
    if mask.shape() != tape.value(student_logits).shape() {
        return Err(Error::config(format!(
            "guided mask {:?} vs student logits {:?}",
            mask.shape(),
            tape.value(student_logits).shape()
        )));
    }
    let frames = mask.rows().max(1);
    let lp = floored_log_posteriors(tape, student_logits)?;
    let m = tape.constant(mask.clone());
    let picked = tape.mul(m, lp)?;
    let s = tape.sum(picked, None)?;
    tape.scale(s, -weight / frames as f64)
}

/// Teacher n-best with weights renormalised over the returned hypotheses.
pub fn seq_kd_targets(teacher: &PosteriorGrid, n: usize, beam_width: usize) -> Result<Vec<(LabelSeq, f64)>> {
    if n == 0 {
        return Err(Error::config("n-best size must be >= 1"));
    }
    let hyps = beam_nbest(teacher, beam_width, n);
    let scores: Vec<f64> = hyps.iter().map(|(_, s)| *s).collect();
    let weights = softmax_rows(&DenseArray::vector(scores))?;
    Ok(hyps
        .into_iter()
        .zip(weights.data())
        .map(|((seq, _), &w)| (seq, w))
        .collect())
}

/// Which teachers and weights a distillation run uses.
#[derive(Clone, Debug, PartialEq)]
pub struct DistillPlan {
    pub skd_teacher: Option<PathBuf>,
    pub rkd_teacher: Option<PathBuf>,
    pub layer_pairs: Vec<LayerPair>,
    pub lambda_skd: f64,
    pub tau: f64,
    pub guided_weight: f64,
    pub nbest_n: usize,
    pub beam_width: usize,
    pub frame_weighting: bool,
}

impl Default for DistillPlan {
    fn default() -> Self {
        DistillPlan {
            skd_teacher: None,
            rkd_teacher: None,
            layer_pairs: Vec::new(),
            lambda_skd: DEFAULT_LAMBDA_SKD,
            tau: DEFAULT_TAU,
            guided_weight: DEFAULT_GUIDED_WEIGHT,
            nbest_n: crate::ctc::DEFAULT_NBEST,
            beam_width: crate::ctc::DEFAULT_BEAM_WIDTH,
            frame_weighting: true,
        }
    }
}

impl DistillPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_skd >= 0.0) {
            return Err(Error::config("plan.lambda_skd must be >= 0"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::config("plan.tau must be > 0"));
        }
        if !(self.guided_weight >= 0.0) {
            return Err(Error::config("plan.guided_weight must be >= 0"));
        }
        if self.nbest_n == 0 {
            return Err(Error::config("plan.nbest must be >= 1"));
        }
        Ok(())
    }
}
