//! Time-preserving toy encoders: a stack of same-padded 1-D convolutions
//! ("tdnn") or of GRU layers ("rnn"), each followed by a linear projection
//! to frame logits over `Y'`.

mod adapter;
mod checkpoint;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numcore::{DenseArray, Rng, Tape, Var};

pub use adapter::{adapter_forward, Adapter, AdapterVars, ADAPTER_KERNEL};
pub use checkpoint::{Checkpoint, TrainingMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Tdnn,
    Rnn,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Tdnn => "tdnn",
            Family::Rnn => "rnn",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tdnn" | "cnn" => Ok(Family::Tdnn),
            "rnn" | "gru" => Ok(Family::Rnn),
            other => Err(Error::config(format!("unknown encoder family `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncoderSpec {
    pub family: Family,
    pub input_dim: usize,
    /// Hidden widths; for a bidirectional rnn this is the width per direction.
    pub layer_widths: Vec<usize>,
    /// Per-layer kernel widths (tdnn only, odd).
    pub kernel_widths: Vec<usize>,
    /// rnn only.
    pub bidirectional: bool,
    /// Output classes `|Y'|`, blank included.
    pub classes: usize,
}

impl EncoderSpec {
    pub fn tdnn(input_dim: usize, widths: &[usize], kernels: &[usize], classes: usize) -> Self {
        EncoderSpec {
            family: Family::Tdnn,
            input_dim,
            layer_widths: widths.to_vec(),
            kernel_widths: kernels.to_vec(),
            bidirectional: false,
            classes,
        }
    }

    pub fn rnn(input_dim: usize, widths: &[usize], bidirectional: bool, classes: usize) -> Self {
        EncoderSpec {
            family: Family::Rnn,
            input_dim,
            layer_widths: widths.to_vec(),
            kernel_widths: Vec::new(),
            bidirectional,
            classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.is_empty() {
            return Err(Error::config("encoder needs at least one hidden layer"));
        }
        if self.input_dim == 0 || self.layer_widths.contains(&0) {
            return Err(Error::config("encoder widths must be >= 1"));
        }
        if self.classes < 2 {
            return Err(Error::config("encoder needs at least one label plus blank"));
        }
        match self.family {
            Family::Tdnn => {
                if self.kernel_widths.len() != self.layer_widths.len() {
                    return Err(Error::config(format!(
                        "{} kernel widths for {} tdnn layers",
                        self.kernel_widths.len(),
                        self.layer_widths.len()
                    )));
                }
                if self.kernel_widths.iter().any(|k| k % 2 == 0) {
                    return Err(Error::config("tdnn kernel widths must be odd"));
                }
                if self.bidirectional {
                    return Err(Error::config("bidirectional applies to rnn encoders only"));
                }
            }
            Family::Rnn => {
                if !self.kernel_widths.is_empty() {
                    return Err(Error::config("kernel widths apply to tdnn encoders only"));
                }
            }
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.layer_widths.len()
    }

    /// Width of hidden layer `l` as exposed to distillation.
    pub fn hidden_width(&self, l: usize) -> usize {
        match self.family {
            Family::Rnn if self.bidirectional => 2 * self.layer_widths[l],
            _ => self.layer_widths[l],
        }
    }

    fn directions(&self) -> &'static [&'static str] {
        if self.bidirectional {
            &["fwd", "bwd"]
        } else {
            &["fwd"]
        }
    }

    /// Parameter names and shapes in storage order.
    pub fn param_layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut layout = Vec::new();
        let mut width_in = self.input_dim;
        for (l, &w) in self.layer_widths.iter().enumerate() {
            match self.family {
                Family::Tdnn => {
                    let k = self.kernel_widths[l];
                    layout.push((format!("tdnn.{l}.weight"), vec![k, width_in, w]));
                    layout.push((format!("tdnn.{l}.bias"), vec![w]));
                }
                Family::Rnn => {
                    for dir in self.directions() {
                        layout.push((format!("gru.{l}.{dir}.w_x"), vec![width_in, 3 * w]));
                        layout.push((format!("gru.{l}.{dir}.u_zr"), vec![w, 2 * w]));
                        layout.push((format!("gru.{l}.{dir}.u_h"), vec![w, w]));
                        layout.push((format!("gru.{l}.{dir}.bias"), vec![3 * w]));
                    }
                }
            }
            width_in = self.hidden_width(l);
        }
        layout.push(("out.weight".into(), vec![width_in, self.classes]));
        layout.push(("out.bias".into(), vec![self.classes]));
        layout
    }

    pub fn param_count(&self) -> usize {
        self.param_layout()
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }
}

/// Fan-in of a weight for the uniform initialiser; `None` for biases.
fn fan_in(name: &str, shape: &[usize]) -> Option<usize> {
    if name.ends_with("bias") {
        return None;
    }
    Some(match shape.len() {
        3 => shape[0] * shape[1],
        _ => shape[0],
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    spec: EncoderSpec,
    names: Vec<String>,
    params: Vec<DenseArray>,
}

/// Logits and every hidden layer, all `T x D`.
pub struct EncoderOutput {
    pub logits: Var,
    pub hidden: Vec<Var>,
}

/// Plain-array result of a forward pass outside training.
#[derive(Clone, Debug, PartialEq)]
pub struct Inference {
    pub logits: DenseArray,
    pub hidden: Vec<DenseArray>,
}

impl Encoder {
    /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero, drawn in
    /// layout order.
    pub fn build(spec: EncoderSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let mut names = Vec::new();
        let mut params = Vec::new();
        for (name, shape) in spec.param_layout() {
            let value = match fan_in(&name, &shape) {
                Some(fan) => DenseArray::uniform(&shape, 1.0 / (fan as f64).sqrt(), rng),
                None => DenseArray::zeros(&shape),
            };
            names.push(name);
            params.push(value);
        }
        Ok(Encoder {
            spec,
            names,
            params,
        })
    }

    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    pub fn params(&self) -> &[DenseArray] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [DenseArray] {
        &mut self.params
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn param(&self, name: &str) -> Option<&DenseArray> {
        self.names.iter().position(|n| n == name).map(|i| &self.params[i])
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut DenseArray> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(move |i| &mut self.params[i])
    }

    /// Puts every parameter on the tape, trainable or frozen.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| tape.leaf(p.clone(), trainable))
            .collect()
    }

    pub fn forward(&self, tape: &mut Tape, bound: &[Var], features: Var) -> Result<EncoderOutput> {
        let x = tape.value(features);
        if x.rank() != 2 || x.cols() != self.spec.input_dim {
            return Err(Error::config(format!(
                "encoder expects T x {} features, got {:?}",
                self.spec.input_dim,
                x.shape()
            )));
        }
        let mut h = features;
        let mut hidden = Vec::with_capacity(self.spec.depth());
        let mut next = 0;
        for l in 0..self.spec.depth() {
            let layer = |e: Error| tag_layer(e, l);
            h = match self.spec.family {
                Family::Tdnn => {
                    let (w, b) = (bound[next], bound[next + 1]);
                    next += 2;
                    let z = tape.conv1d(h, w).map_err(layer)?;
                    let z = tape.add(z, b).map_err(layer)?;
                    tape.relu(z).map_err(layer)?
                }
                Family::Rnn => {
                    let width = self.spec.layer_widths[l];
                    let mut outs = Vec::new();
                    for (d, _) in self.spec.directions().iter().enumerate() {
                        let p = &bound[next..next + 4];
                        next += 4;
                        outs.push(gru_layer(tape, h, p, width, d == 1).map_err(layer)?);
                    }
                    if outs.len() == 1 {
                        outs[0]
                    } else {
                        tape.concat(&outs, 1).map_err(layer)?
                    }
                }
            };
            hidden.push(h);
        }
        let out = |e: Error| tag_layer(e, self.spec.depth());
        let logits = tape.matmul(h, bound[next]).map_err(out)?;
        let logits = tape.add(logits, bound[next + 1]).map_err(out)?;
        Ok(EncoderOutput { logits, hidden })
    }

    /// Forward pass with frozen parameters.
    pub fn infer(&self, features: &DenseArray) -> Result<Inference> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let x = tape.constant(features.clone());
        let out = self.forward(&mut tape, &bound, x)?;
        Ok(Inference {
            logits: tape.value(out.logits).clone(),
            hidden: out.hidden.iter().map(|v| tape.value(*v).clone()).collect(),
        })
    }

    /// Replaces parameters from a checkpoint after checking names and shapes.
    pub fn load_params(&mut self, ckpt: &Checkpoint) -> Result<()> {
        if ckpt.params.len() != self.params.len() {
            return Err(Error::Shape {
                name: "parameter count".into(),
                expected: vec![self.params.len()],
                found: vec![ckpt.params.len()],
            });
        }
        for ((name, current), (ck_name, value)) in
            self.names.iter().zip(&self.params).zip(&ckpt.params)
        {
            if name != ck_name || current.shape() != value.shape() {
                return Err(Error::Shape {
                    name: name.clone(),
                    expected: current.shape().to_vec(),
                    found: value.shape().to_vec(),
                });
            }
        }
        self.params = ckpt.params.iter().map(|(_, v)| v.clone()).collect();
        Ok(())
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.spec.validate()?;
        let mut encoder = Encoder::build(ckpt.spec.clone(), &mut Rng::new(0))?;
        encoder.load_params(ckpt)?;
        Ok(encoder)
    }

    pub fn to_checkpoint(&self, meta: TrainingMeta) -> Checkpoint {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            spec: self.spec.clone(),
            params: self.names.iter().cloned().zip(self.params.iter().cloned()).collect(),
            meta,
        }
    }
}

fn tag_layer(e: Error, layer: usize) -> Error {
    match e {
        Error::Numeric { op, index } => Error::Numeric {
            op: format!("layer {layer} {op}"),
            index,
        },
        other => other,
    }
}

/// One GRU direction over the whole sequence:
/// `z, r = σ(x W + h U_zr + b)`, `h̃ = tanh(x W_h + (r ⊙ h) U_h + b_h)`,
/// `h' = h + z ⊙ (h̃ − h)`.
fn gru_layer(tape: &mut Tape, x: Var, p: &[Var], width: usize, reverse: bool) -> Result<Var> {
    let (w_x, u_zr, u_h, bias) = (p[0], p[1], p[2], p[3]);
    let frames = tape.value(x).rows();
    let xw = tape.matmul(x, w_x)?;
    let xw = tape.add(xw, bias)?;
    let mut h = tape.constant(DenseArray::zeros(&[1, width]));
    let mut states = vec![h; frames];
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..frames).rev())
    } else {
        Box::new(0..frames)
    };
    for t in order {
        let xt = tape.slice(xw, 0, t, 1)?;
        let x_zr = tape.slice(xt, 1, 0, 2 * width)?;
        let x_h = tape.slice(xt, 1, 2 * width, width)?;
        let h_zr = tape.matmul(h, u_zr)?;
        let pre = tape.add(x_zr, h_zr)?;
        let zr = tape.sigmoid(pre)?;
        let z = tape.slice(zr, 1, 0, width)?;
        let r = tape.slice(zr, 1, width, width)?;
        let rh = tape.mul(r, h)?;
        let rh_u = tape.matmul(rh, u_h)?;
        let pre_h = tape.add(x_h, rh_u)?;
        let cand = tape.tanh(pre_h)?;
        let delta = tape.sub(cand, h)?;
        let step = tape.mul(z, delta)?;
        h = tape.add(h, step)?;
        states[t] = h;
    }
    tape.concat(&states, 0)
}
