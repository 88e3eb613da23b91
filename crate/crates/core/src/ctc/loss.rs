use crate::error::{Error, Result};
use crate::numcore::{logsumexp, CustomBackward, DenseArray, Tape, Var};

use super::LabelSeq;

/// Target with a blank before, between and after every label.
fn extended(target: &LabelSeq) -> Vec<usize> {
    let blank = target.blank();
    let mut ext = Vec::with_capacity(2 * target.len() + 1);
    ext.push(blank);
    for &l in target.labels() {
        ext.push(l);
        ext.push(blank);
    }
    ext
}

fn skip_allowed(ext: &[usize], s: usize, blank: usize) -> bool {
    s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]
}

fn check_inputs(log_probs: &DenseArray, target: &LabelSeq) -> Result<()> {
    if log_probs.rank() != 2 || log_probs.cols() != target.alphabet_size() + 1 {
        return Err(Error::config(format!(
            "CTC expects T x {} log-probabilities, got {:?}",
            target.alphabet_size() + 1,
            log_probs.shape()
        )));
    }
    let frames = log_probs.rows();
    let required = target.min_frames().max(1);
    if frames < required {
        return Err(Error::Infeasible {
            labels: target.len(),
            required,
            frames,
        });
    }
    Ok(())
}

/// Log-space forward variables, `T x S` row-major, plus the log-likelihood.
fn forward(log_probs: &DenseArray, ext: &[usize], blank: usize) -> (Vec<f64>, f64) {
    let frames = log_probs.rows();
    let s_len = ext.len();
    let mut alpha = vec![f64::NEG_INFINITY; frames * s_len];
    alpha[0] = log_probs.at(0, ext[0]);
    if s_len > 1 {
        alpha[1] = log_probs.at(0, ext[1]);
    }
    for t in 1..frames {
        let (prev, cur) = alpha.split_at_mut(t * s_len);
        let prev = &prev[(t - 1) * s_len..];
        let lp = log_probs.row(t);
        for s in 0..s_len {
            let mut terms = [prev[s], f64::NEG_INFINITY, f64::NEG_INFINITY];
            if s >= 1 {
                terms[1] = prev[s - 1];
            }
            if skip_allowed(ext, s, blank) {
                terms[2] = prev[s - 2];
            }
            let reach = logsumexp(&terms);
            cur[s] = if reach == f64::NEG_INFINITY {
                reach
            } else {
                reach + lp[ext[s]]
            };
        }
    }
    let last = &alpha[(frames - 1) * s_len..];
    let ll = if s_len > 1 {
        logsumexp(&[last[s_len - 1], last[s_len - 2]])
    } else {
        last[0]
    };
    (alpha, ll)
}

/// Reverse-mode adjoint of the forward recursion above: the loss gradient
/// with respect to the log-probabilities, without a separate beta pass.
struct ForwardAdjoint {
    alpha: Vec<f64>,
    ext: Vec<usize>,
    blank: usize,
    log_likelihood: f64,
}

impl CustomBackward for ForwardAdjoint {
    fn backward(&self, grad_out: &[f64], inputs: &[&DenseArray]) -> Vec<Vec<f64>> {
        let log_probs = inputs[0];
        let (frames, classes) = (log_probs.rows(), log_probs.cols());
        let s_len = self.ext.len();
        let alpha = |t: usize, s: usize| self.alpha[t * s_len + s];
        let mut grad = vec![0.0; frames * classes];
        let mut adj = vec![0.0; s_len];
        // loss = -logsumexp(final states)
        for s in s_len.saturating_sub(2)..s_len {
            let a = alpha(frames - 1, s);
            if a > f64::NEG_INFINITY {
                adj[s] = -grad_out[0] * (a - self.log_likelihood).exp();
            }
        }
        for t in (1..frames).rev() {
            let mut prev_adj = vec![0.0; s_len];
            for s in 0..s_len {
                let a = alpha(t, s);
                if adj[s] == 0.0 || a == f64::NEG_INFINITY {
                    continue;
                }
                let label = self.ext[s];
                grad[t * classes + label] += adj[s];
                let reach = a - log_probs.at(t, label);
                prev_adj[s] += adj[s] * (alpha(t - 1, s) - reach).exp();
                if s >= 1 {
                    prev_adj[s - 1] += adj[s] * (alpha(t - 1, s - 1) - reach).exp();
                }
                if skip_allowed(&self.ext, s, self.blank) {
                    prev_adj[s - 2] += adj[s] * (alpha(t - 1, s - 2) - reach).exp();
                }
            }
            adj = prev_adj;
        }
        for s in 0..s_len.min(2) {
            grad[self.ext[s]] += adj[s];
        }
        vec![grad]
    }
}

/// `-ln p(target | x)` for `T x |Y'|` logits, recorded on the tape.
pub fn ctc_loss(tape: &mut Tape, logits: Var, target: &LabelSeq) -> Result<Var> {
    let log_probs = tape.log_softmax(logits, 1)?;
    let lp = tape.value(log_probs);
    check_inputs(lp, target)?;
    let ext = extended(target);
    let blank = target.blank();
    let (alpha, ll) = forward(lp, &ext, blank);
    if ll == f64::NEG_INFINITY {
        return Err(Error::Infeasible {
            labels: target.len(),
            required: target.min_frames(),
            frames: lp.rows(),
        });
    }
    let adjoint = ForwardAdjoint {
        alpha,
        ext,
        blank,
        log_likelihood: ll,
    };
    tape.custom(
        "ctc_loss",
        &[log_probs],
        DenseArray::scalar(-ll),
        Box::new(adjoint),
    )
}

/// Loss value only, from log-probabilities, for evaluation paths.
pub fn ctc_neg_log_likelihood(log_probs: &DenseArray, target: &LabelSeq) -> Result<f64> {
    check_inputs(log_probs, target)?;
    let ext = extended(target);
    let (_, ll) = forward(log_probs, &ext, target.blank());
    Ok(-ll)
}
