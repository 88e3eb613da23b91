//! Connectionist temporal classification: the collapse mapping, the
//! log-space forward recursion as a differentiable loss, an exhaustive
//! path-enumeration oracle, and greedy / prefix-beam decoding.
//!
//! The blank label always sits at the last index of the output layer, so a
//! model over an alphabet of `|Y|` labels emits `|Y| + 1` classes.

mod decode;
mod loss;
mod oracle;

use crate::error::{Error, Result};
use crate::numcore::{softmax_rows, DenseArray};

pub use decode::{beam_nbest, greedy_decode, DEFAULT_BEAM_WIDTH, DEFAULT_NBEST};
pub use loss::{ctc_loss, ctc_neg_log_likelihood};
pub use oracle::{brute_force_log_prob, collapsed_distribution, ENUMERATION_BUDGET};

/// Target or decoded label sequence over `Y` (never contains the blank).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelSeq {
    labels: Vec<usize>,
    alphabet_size: usize,
}

impl LabelSeq {
    pub fn new(labels: Vec<usize>, alphabet_size: usize) -> Result<Self> {
        if let Some(bad) = labels.iter().find(|&&l| l >= alphabet_size) {
            return Err(Error::config(format!(
                "label {bad} outside alphabet of size {alphabet_size}"
            )));
        }
        Ok(LabelSeq {
            labels,
            alphabet_size,
        })
    }

    pub fn empty(alphabet_size: usize) -> Self {
        LabelSeq {
            labels: Vec::new(),
            alphabet_size,
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn blank(&self) -> usize {
        self.alphabet_size
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Fewest frames any path needs: one per label plus a blank between
    /// each pair of equal neighbours.
    pub fn min_frames(&self) -> usize {
        min_frames(&self.labels)
    }
}

pub fn min_frames(labels: &[usize]) -> usize {
    labels.len() + labels.windows(2).filter(|w| w[0] == w[1]).count()
}

/// Merge consecutive repeats, then drop blanks.
pub fn collapse(path: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &p in path {
        if Some(p) != prev && p != blank {
            out.push(p);
        }
        prev = Some(p);
    }
    out
}

/// Frame posteriors, `T x |Y'|`, rows summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorGrid {
    values: DenseArray,
}

impl PosteriorGrid {
    pub const ROW_TOLERANCE: f64 = 1e-9;

    pub fn new(values: DenseArray) -> Result<Self> {
        if values.rank() != 2 || values.cols() < 1 {
            return Err(Error::config(format!(
                "posterior grid must be T x |Y'|, got {:?}",
                values.shape()
            )));
        }
        for t in 0..values.rows() {
            let row = values.row(t);
            if row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::config(format!("negative or NaN posterior in frame {t}")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > Self::ROW_TOLERANCE {
                return Err(Error::config(format!("frame {t} sums to {s}, not 1")));
            }
        }
        Ok(PosteriorGrid { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        PosteriorGrid::new(DenseArray::from_rows(rows)?)
    }

    pub fn from_logits(logits: &DenseArray) -> Result<Self> {
        PosteriorGrid::new(softmax_rows(logits)?)
    }

    pub fn frames(&self) -> usize {
        self.values.rows()
    }

    pub fn classes(&self) -> usize {
        self.values.cols()
    }

    pub fn blank(&self) -> usize {
        self.classes() - 1
    }

    pub fn alphabet_size(&self) -> usize {
        self.classes() - 1
    }

    pub fn row(&self, t: usize) -> &[f64] {
        self.values.row(t)
    }

    pub fn values(&self) -> &DenseArray {
        &self.values
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}
