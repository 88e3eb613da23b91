//! Synthetic "toy speech": every label owns a feature template that is held
//! for a random number of frames, with Gaussian noise and optional silence.
//!
//! Dataset text format:
//!
//! ```text
//! CTCD1 <|Y|> <D_in>
//! <id>
//! <N>
//! <label> <label> ...        (empty line when N = 0)
//! <T>
//! <D_in floats>              (T lines, shortest round-trip decimal)
//!                            (blank line between records)
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::ctc::min_frames;
use crate::error::{Error, Result};
use crate::numcore::{DenseArray, Rng};

pub const DATASET_MAGIC: &str = "CTCD1";

#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    /// `|Y|`, space symbol included.
    pub alphabet_size: usize,
    pub space_id: usize,
    pub feature_dim: usize,
    /// `|Y| x D_in`.
    pub templates: DenseArray,
    pub duration_min: usize,
    pub duration_max: usize,
    pub noise_std: f64,
    /// Chance of a silence segment before each symbol.
    pub silence_prob: f64,
    pub length_min: usize,
    pub length_max: usize,
    pub seed: u64,
}

impl TaskSpec {
    /// Templates drawn from N(0, template_scale²) with the task's own stream.
    #[allow(clippy::too_many_arguments)]
    pub fn random(
        alphabet_size: usize,
        feature_dim: usize,
        template_scale: f64,
        durations: (usize, usize),
        noise_std: f64,
        silence_prob: f64,
        lengths: (usize, usize),
        seed: u64,
    ) -> Self {
        let mut rng = Rng::new(seed).fork(0x7e3a);
        let templates = DenseArray::randn(&[alphabet_size, feature_dim], template_scale, &mut rng);
        TaskSpec {
            alphabet_size,
            space_id: 0,
            feature_dim,
            templates,
            duration_min: durations.0,
            duration_max: durations.1,
            noise_std,
            silence_prob,
            length_min: lengths.0,
            length_max: lengths.1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphabet_size < 2 {
            return Err(Error::config("task needs a space symbol plus at least one label"));
        }
        if self.space_id >= self.alphabet_size {
            return Err(Error::config("space symbol outside the alphabet"));
        }
        if self.feature_dim == 0 {
            return Err(Error::config("feature_dim must be >= 1"));
        }
        if self.templates.shape() != [self.alphabet_size, self.feature_dim] {
            return Err(Error::config(format!(
                "templates must be {} x {}, got {:?}",
                self.alphabet_size,
                self.feature_dim,
                self.templates.shape()
            )));
        }
        if self.duration_min < 1 {
            return Err(Error::config(
                "duration_min must be >= 1 or targets become inexpressible",
            ));
        }
        if self.duration_max < self.duration_min {
            return Err(Error::config("duration_max < duration_min"));
        }
        if self.length_min < 1 || self.length_max < self.length_min {
            return Err(Error::config("utterance length range must satisfy 1 <= min <= max"));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::config("noise_std must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.silence_prob) {
            return Err(Error::config("silence_prob must lie in [0, 1]"));
        }
        for a in 0..self.alphabet_size {
            if self.templates.row(a).iter().all(|&v| v == 0.0) {
                return Err(Error::config(format!("template {a} coincides with silence")));
            }
            for b in 0..a {
                if self.templates.row(a) == self.templates.row(b) {
                    return Err(Error::config(format!("templates {a} and {b} are identical")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    pub id: String,
    /// `T x D_in`.
    pub features: DenseArray,
    pub labels: Vec<usize>,
}

impl Utterance {
    pub fn frames(&self) -> usize {
        self.features.rows()
    }

    pub fn is_expressible(&self) -> bool {
        self.frames() >= min_frames(&self.labels).max(1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub alphabet_size: usize,
    pub feature_dim: usize,
    pub utterances: Vec<Utterance>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }
}

fn push_segment(frames: &mut Vec<f64>, template: Option<&[f64]>, dim: usize, len: usize, std: f64, rng: &mut Rng) {
    for _ in 0..len {
        for d in 0..dim {
            let base = template.map_or(0.0, |t| t[d]);
            frames.push(base + std * rng.gaussian());
        }
    }
}

/// `count` utterances with ids `{prefix}-{index}`. Equal labels that meet
/// are always separated by at least one silence frame, so every target is
/// expressible and acoustically separable.
pub fn generate(spec: &TaskSpec, count: usize, prefix: &str, rng: &mut Rng) -> Result<Dataset> {
    spec.validate()?;
    let dim = spec.feature_dim;
    let mut utterances = Vec::with_capacity(count);
    for i in 0..count {
        let n = rng.range_inclusive(spec.length_min, spec.length_max);
        let labels: Vec<usize> = (0..n).map(|_| rng.below(spec.alphabet_size)).collect();
        let mut frames = Vec::new();
        for (k, &label) in labels.iter().enumerate() {
            let forced_gap = k > 0 && labels[k - 1] == label;
            if forced_gap || rng.uniform() < spec.silence_prob {
                let len = rng.range_inclusive(spec.duration_min, spec.duration_max);
                push_segment(&mut frames, None, dim, len, spec.noise_std, rng);
            }
            let len = rng.range_inclusive(spec.duration_min, spec.duration_max);
            push_segment(&mut frames, Some(spec.templates.row(label)), dim, len, spec.noise_std, rng);
        }
        let t_len = frames.len() / dim;
        let utt = Utterance {
            id: format!("{prefix}-{i:05}"),
            features: DenseArray::new(vec![t_len, dim], frames)?,
            labels,
        };
        debug_assert!(utt.is_expressible());
        utterances.push(utt);
    }
    Ok(Dataset {
        alphabet_size: spec.alphabet_size,
        feature_dim: dim,
        utterances,
    })
}

fn join<T: ToString>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn dataset_to_string(data: &Dataset) -> String {
    let mut out = format!("{DATASET_MAGIC} {} {}\n", data.alphabet_size, data.feature_dim);
    for (i, u) in data.utterances.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "{}", u.id);
        let _ = writeln!(out, "{}", u.labels.len());
        let _ = writeln!(out, "{}", join(&u.labels));
        let _ = writeln!(out, "{}", u.frames());
        for t in 0..u.frames() {
            let _ = writeln!(out, "{}", join(u.features.row(t)));
        }
    }
    out
}

/// Writes via a temp file and rename.
pub fn write_dataset(data: &Dataset, path: &Path) -> Result<()> {
    let tmp = path.with_extension("ctcd.tmp");
    fs::write(&tmp, dataset_to_string(data)).map_err(|e| Error::file(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::file(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_dataset(&text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str, record: &str) -> Result<&'a str> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok(l)
            }
            None => Err(Error::Parse {
                line: self.last + 1,
                msg: format!("unexpected end of file reading {what} of record `{record}`"),
            }),
        }
    }

    fn err(&self, msg: String) -> Error {
        Error::Parse {
            line: self.last,
            msg,
        }
    }
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let header = lines.next("header", "<header>")?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != DATASET_MAGIC {
        return Err(lines.err(format!("expected `{DATASET_MAGIC} |Y| D_in`, found `{header}`")));
    }
    let alphabet_size: usize = fields[1].parse().map_err(|_| lines.err("bad alphabet size".into()))?;
    let feature_dim: usize = fields[2].parse().map_err(|_| lines.err("bad feature dim".into()))?;
    let mut utterances = Vec::new();
    loop {
        let id = match lines.inner.next() {
            None => break,
            Some((i, l)) => {
                lines.last = i + 1;
                if l.is_empty() && !utterances.is_empty() {
                    // record separator
                    lines.next("id", "<next>")?
                } else {
                    l
                }
            }
        };
        if id.is_empty() || id.contains(char::is_whitespace) {
            return Err(lines.err(format!("invalid utterance id `{id}`")));
        }
        let n: usize = lines
            .next("label count", id)?
            .trim()
            .parse()
            .map_err(|_| lines.err(format!("bad label count in record `{id}`")))?;
        let label_line = lines.next("labels", id)?;
        let labels: Vec<usize> = label_line
            .split_whitespace()
            .map(|x| x.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| lines.err(format!("bad label in record `{id}`")))?;
        if labels.len() != n {
            return Err(lines.err(format!("record `{id}` declares {n} labels, found {}", labels.len())));
        }
        if labels.iter().any(|&l| l >= alphabet_size) {
            return Err(lines.err(format!("record `{id}` has a label outside the alphabet")));
        }
        let t_len: usize = lines
            .next("frame count", id)?
            .trim()
            .parse()
            .map_err(|_| lines.err(format!("bad frame count in record `{id}`")))?;
        let mut data = Vec::with_capacity(t_len * feature_dim);
        for _ in 0..t_len {
            let row = lines.next("frame", id)?;
            let before = data.len();
            for x in row.split_whitespace() {
                data.push(
                    x.parse::<f64>()
                        .map_err(|_| lines.err(format!("bad float `{x}` in record `{id}`")))?,
                );
            }
            if data.len() - before != feature_dim {
                return Err(lines.err(format!(
                    "record `{id}` frame has {} values, expected {feature_dim}",
                    data.len() - before
                )));
            }
        }
        utterances.push(Utterance {
            id: id.to_string(),
            features: DenseArray::new(vec![t_len, feature_dim], data)?,
            labels,
        });
    }
    Ok(Dataset {
        alphabet_size,
        feature_dim,
        utterances,
    })
}
