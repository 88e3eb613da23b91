use std::fmt::Write as _;

use crate::ctc::{greedy_decode, PosteriorGrid};
use crate::error::{Error, Result};
use crate::metrics::{pooled_counts, ErrorCounts, Level};
use crate::models::Encoder;
use crate::synthdata::Dataset;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub utterances: usize,
    pub words: ErrorCounts,
    pub tokens: ErrorCounts,
    /// `None` when the references contain no words.
    pub wer: Option<f64>,
    pub ter: f64,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "utterances {}", self.utterances);
        for (name, c) in [("words", &self.words), ("tokens", &self.tokens)] {
            let _ = writeln!(
                out,
                "{name} ref={} sub={} ins={} del={}",
                c.reference_length, c.substitutions, c.insertions, c.deletions
            );
        }
        let wer = self.wer.map_or("nan".to_string(), |w| w.to_string());
        let _ = writeln!(out, "wer {wer}");
        let _ = writeln!(out, "ter {}", self.ter);
        out
    }
}

/// Greedy-decodes every utterance and pools word and token errors.
pub fn evaluate(encoder: &Encoder, data: &Dataset, space: usize) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::config("cannot evaluate on an empty dataset"));
    }
    let spec = encoder.spec();
    if spec.input_dim != data.feature_dim || spec.classes != data.alphabet_size + 1 {
        return Err(Error::config(format!(
            "model expects {} features and {} classes; dataset has {} features and {} labels",
            spec.input_dim, spec.classes, data.feature_dim, data.alphabet_size
        )));
    }
    let mut refs = Vec::with_capacity(data.len());
    let mut hyps = Vec::with_capacity(data.len());
    for u in &data.utterances {
        let logits = encoder.infer(&u.features)?.logits;
        let grid = PosteriorGrid::from_logits(&logits)?;
        hyps.push(greedy_decode(&grid).into_labels());
        refs.push(u.labels.clone());
    }
    let words = pooled_counts(&refs, &hyps, Level::Word, space)?;
    let tokens = pooled_counts(&refs, &hyps, Level::Token, space)?;
    let ter = tokens
        .rate()
        .ok_or_else(|| Error::config("token error rate undefined: every reference is empty"))?;
    Ok(EvalReport {
        utterances: data.len(),
        wer: words.rate(),
        words,
        tokens,
        ter,
    })
}
