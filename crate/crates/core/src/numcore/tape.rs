//! Reverse-mode differentiation over dense arrays.
//!
//! A [`Tape`] lives for one training step (or one evaluation). Every op
//! appends a node holding its forward value; [`Tape::backward`] walks the
//! nodes in exact reverse recording order and accumulates adjoints.

use crate::error::{Error, Result};

use super::array::{axis_extents, DenseArray};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Vector-Jacobian product for an op defined outside the closed primitive set.
pub trait CustomBackward {
    /// Adjoints for each input, given the output adjoint and the input values.
    fn backward(&self, grad_out: &[f64], inputs: &[&DenseArray]) -> Vec<Vec<f64>>;
}

enum Op {
    Leaf,
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    MatMul { a: Var, b: Var },
    Conv1d { x: Var, w: Var },
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Softmax { a: Var, axis: usize },
    LogSoftmax { a: Var, axis: usize },
    Sum { a: Var, axis: Option<usize> },
    Mean { a: Var, axis: Option<usize> },
    Concat { parts: Vec<Var>, axis: usize },
    Slice { a: Var, axis: usize, start: usize },
    Scale { a: Var, factor: f64 },
    ClampMin { a: Var, floor: f64 },
    Custom { inputs: Vec<Var>, vjp: Box<dyn CustomBackward> },
}

struct Node {
    value: DenseArray,
    requires_grad: bool,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`]. Only nodes that require
/// gradients carry one.
pub struct Gradients {
    grads: Vec<Option<DenseArray>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&DenseArray> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<DenseArray> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn shape_err(op: &str, a: &[usize], b: &[usize]) -> Error {
    Error::config(format!("{op}: incompatible shapes {a:?} and {b:?}"))
}

fn reduced_shape(shape: &[usize], axis: Option<usize>) -> Vec<usize> {
    match axis {
        None => vec![1],
        Some(ax) => {
            let mut s: Vec<usize> = shape.to_vec();
            s.remove(ax);
            if s.is_empty() {
                vec![1]
            } else {
                s
            }
        }
    }
}

/// True when `b` broadcasts over `a` by repetition: b's shape, with leading
/// unit dims dropped, is a suffix of a's shape.
fn broadcasts(a: &[usize], b: &[usize]) -> bool {
    let first = b.iter().position(|&d| d != 1).unwrap_or(b.len());
    let core = &b[first..];
    core.len() <= a.len() && a[a.len() - core.len()..] == *core
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &DenseArray {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A leaf that gradients flow into.
    pub fn param(&mut self, value: DenseArray) -> Var {
        self.push_raw(value, true, Op::Leaf)
    }

    /// A detached leaf.
    pub fn constant(&mut self, value: DenseArray) -> Var {
        self.push_raw(value, false, Op::Leaf)
    }

    pub fn leaf(&mut self, value: DenseArray, requires_grad: bool) -> Var {
        self.push_raw(value, requires_grad, Op::Leaf)
    }

    fn push_raw(&mut self, value: DenseArray, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, name: &str, value: DenseArray, inputs: &[Var], op: Op) -> Result<Var> {
        if let Some(index) = value.first_non_finite() {
            return Err(Error::Numeric {
                op: name.to_string(),
                index,
            });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push_raw(value, requires_grad, op))
    }

    /// Elementwise sum. `b` may also be a repeated suffix of `a` (e.g. a bias row).
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let out = if av.shape() == bv.shape() {
            let data = av.data().iter().zip(bv.data()).map(|(x, y)| x + y).collect();
            DenseArray::new(av.shape().to_vec(), data)?
        } else if broadcasts(av.shape(), bv.shape()) {
            let nb = bv.len();
            let data = av
                .data()
                .iter()
                .enumerate()
                .map(|(i, x)| x + bv.data()[i % nb])
                .collect();
            DenseArray::new(av.shape().to_vec(), data)?
        } else {
            return Err(shape_err("add", av.shape(), bv.shape()));
        };
        self.push("add", out, &[a, b], Op::Add { a, b })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err("mul", av.shape(), bv.shape()));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let out = DenseArray::new(av.shape().to_vec(), data)?;
        self.push("mul", out, &[a, b], Op::Mul { a, b })
    }

    /// `[.., K] x [K, N] -> [.., N]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if bv.rank() != 2 || av.cols() != bv.shape()[0] {
            return Err(shape_err("matmul", av.shape(), bv.shape()));
        }
        let k = av.cols();
        let n = bv.cols();
        let m = av.len() / k.max(1);
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let arow = &av.data()[i * k..(i + 1) * k];
            let orow = &mut data[i * n..(i + 1) * n];
            for (p, &x) in arow.iter().enumerate() {
                let brow = &bv.data()[p * n..(p + 1) * n];
                for (o, &w) in orow.iter_mut().zip(brow) {
                    *o += x * w;
                }
            }
        }
        let mut shape = av.shape().to_vec();
        *shape.last_mut().unwrap() = n;
        let out = DenseArray::new(shape, data)?;
        self.push("matmul", out, &[a, b], Op::MatMul { a, b })
    }

    /// Stride-1, same-padded convolution over time. `x: [T, C_in]`,
    /// `w: [K, C_in, C_out]` with odd K; output `[T, C_out]`.
    pub fn conv1d(&mut self, x: Var, w: Var) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(w));
        if xv.rank() != 2 || wv.rank() != 3 || wv.shape()[1] != xv.cols() || wv.shape()[0] % 2 == 0
        {
            return Err(shape_err("conv1d", xv.shape(), wv.shape()));
        }
        let (t_len, c_in) = (xv.rows(), xv.cols());
        let (k_len, c_out) = (wv.shape()[0], wv.shape()[2]);
        let pad = k_len / 2;
        let mut data = vec![0.0; t_len * c_out];
        for t in 0..t_len {
            let orow = &mut data[t * c_out..(t + 1) * c_out];
            for k in 0..k_len {
                let src = t + k;
                if src < pad || src - pad >= t_len {
                    continue;
                }
                let xrow = xv.row(src - pad);
                for (c, &xval) in xrow.iter().enumerate() {
                    let base = (k * c_in + c) * c_out;
                    let wrow = &wv.data()[base..base + c_out];
                    for (o, &wval) in orow.iter_mut().zip(wrow) {
                        *o += xval * wval;
                    }
                }
            }
        }
        let out = DenseArray::new(vec![t_len, c_out], data)?;
        self.push("conv1d", out, &[x, w], Op::Conv1d { x, w })
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|v| v.max(0.0));
        self.push("relu", out, &[a], Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(sigmoid);
        self.push("sigmoid", out, &[a], Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(f64::tanh);
        self.push("tanh", out, &[a], Op::Tanh(a))
    }

    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let out = softmax_along(self.value(a), axis, false)?;
        self.push("softmax", out, &[a], Op::Softmax { a, axis })
    }

    pub fn log_softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let out = softmax_along(self.value(a), axis, true)?;
        self.push("log_softmax", out, &[a], Op::LogSoftmax { a, axis })
    }

    /// Sum along `axis`, or over everything when `axis` is `None`.
    pub fn sum(&mut self, a: Var, axis: Option<usize>) -> Result<Var> {
        let out = reduce(self.value(a), axis, false)?;
        self.push("sum", out, &[a], Op::Sum { a, axis })
    }

    pub fn mean(&mut self, a: Var, axis: Option<usize>) -> Result<Var> {
        let out = reduce(self.value(a), axis, true)?;
        self.push("mean", out, &[a], Op::Mean { a, axis })
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::config("concat of zero arrays"))?;
        let base = self.value(*first).shape().to_vec();
        if axis >= base.len() {
            return Err(Error::config(format!("concat axis {axis} out of range for {base:?}")));
        }
        let mut total = 0;
        for p in parts {
            let s = self.value(*p).shape();
            let same_rest = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(i, (x, y))| i == axis || x == y);
            if !same_rest {
                return Err(shape_err("concat", &base, s));
            }
            total += s[axis];
        }
        let (outer, _, inner) = axis_extents(&base, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for p in parts {
                let v = self.value(*p);
                let chunk = v.shape()[axis] * inner;
                data.extend_from_slice(&v.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let out = DenseArray::new(shape, data)?;
        self.push("concat", out, parts, Op::Concat {
            parts: parts.to_vec(),
            axis,
        })
    }

    /// `len` entries of `axis` starting at `start`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let av = self.value(a);
        if axis >= av.rank() || start + len > av.shape()[axis] {
            return Err(Error::config(format!(
                "slice [{start}, {}) of axis {axis} out of range for {:?}",
                start + len,
                av.shape()
            )));
        }
        let (outer, n, inner) = axis_extents(av.shape(), axis);
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let from = (o * n + start) * inner;
            data.extend_from_slice(&av.data()[from..from + len * inner]);
        }
        let mut shape = av.shape().to_vec();
        shape[axis] = len;
        let out = DenseArray::new(shape, data)?;
        self.push("slice", out, &[a], Op::Slice { a, axis, start })
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let out = self.value(a).map(|v| v * factor);
        self.push("scale", out, &[a], Op::Scale { a, factor })
    }

    /// `max(a, floor)`; the gradient is zero where the floor is active.
    pub fn clamp_min(&mut self, a: Var, floor: f64) -> Result<Var> {
        let out = self.value(a).map(|v| v.max(floor));
        self.push("clamp_min", out, &[a], Op::ClampMin { a, floor })
    }

    /// `a - b`, built from `scale` and `add`.
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let nb = self.scale(b, -1.0)?;
        self.add(a, nb)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.mul(a, a)
    }

    /// Records an op whose forward value was computed by the caller.
    pub fn custom(
        &mut self,
        name: &str,
        inputs: &[Var],
        value: DenseArray,
        vjp: Box<dyn CustomBackward>,
    ) -> Result<Var> {
        self.push(name, value, inputs, Op::Custom {
            inputs: inputs.to_vec(),
            vjp,
        })
    }

    /// Propagates d(root)/d(node) to every node that requires gradients.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        if self.value(root).shape() != [1] {
            return Err(Error::Usage(format!(
                "backward needs a scalar root, got shape {:?}",
                self.value(root).shape()
            )));
        }
        let mut adj: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        if self.nodes[root.0].requires_grad {
            adj[root.0] = Some(vec![1.0]);
        }
        for i in (0..=root.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            self.propagate(node, &g, &mut adj);
            adj[i] = Some(g);
        }
        let grads = self
            .nodes
            .iter()
            .zip(adj)
            .map(|(node, g)| {
                if !node.requires_grad {
                    return None;
                }
                let data = g.unwrap_or_else(|| vec![0.0; node.value.len()]);
                Some(DenseArray::new(node.value.shape().to_vec(), data).expect("grad shape"))
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let wants = |v: Var| nodes[v.0].requires_grad;
        let val = |v: Var| &nodes[v.0].value;
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::Add { a, b } => {
                if wants(*a) {
                    accumulate(adj, *a, val(*a).len(), |acc| {
                        acc.iter_mut().zip(g).for_each(|(x, gi)| *x += gi)
                    });
                }
                if wants(*b) {
                    let nb = val(*b).len();
                    accumulate(adj, *b, nb, |acc| {
                        for (i, gi) in g.iter().enumerate() {
                            acc[i % nb] += gi;
                        }
                    });
                }
            }
            Op::Mul { a, b } => {
                let (av, bv) = (val(*a).data(), val(*b).data());
                if wants(*a) {
                    accumulate(adj, *a, av.len(), |acc| {
                        for i in 0..acc.len() {
                            acc[i] += g[i] * bv[i];
                        }
                    });
                }
                if wants(*b) {
                    accumulate(adj, *b, bv.len(), |acc| {
                        for i in 0..acc.len() {
                            acc[i] += g[i] * av[i];
                        }
                    });
                }
            }
            Op::MatMul { a, b } => {
                let (av, bv) = (val(*a), val(*b));
                let k = av.cols();
                let n = bv.cols();
                let m = av.len() / k.max(1);
                if wants(*a) {
                    accumulate(adj, *a, av.len(), |acc| {
                        for i in 0..m {
                            let grow = &g[i * n..(i + 1) * n];
                            for p in 0..k {
                                let brow = &bv.data()[p * n..(p + 1) * n];
                                acc[i * k + p] +=
                                    grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                            }
                        }
                    });
                }
                if wants(*b) {
                    accumulate(adj, *b, bv.len(), |acc| {
                        for i in 0..m {
                            let grow = &g[i * n..(i + 1) * n];
                            for p in 0..k {
                                let x = av.data()[i * k + p];
                                let arow = &mut acc[p * n..(p + 1) * n];
                                for (o, gi) in arow.iter_mut().zip(grow) {
                                    *o += x * gi;
                                }
                            }
                        }
                    });
                }
            }
            Op::Conv1d { x, w } => {
                let (xv, wv) = (val(*x), val(*w));
                let (t_len, c_in) = (xv.rows(), xv.cols());
                let (k_len, c_out) = (wv.shape()[0], wv.shape()[2]);
                let pad = k_len / 2;
                let taps = |t: usize, k: usize| {
                    let src = t + k;
                    (src >= pad && src - pad < t_len).then(|| src - pad)
                };
                if wants(*x) {
                    accumulate(adj, *x, xv.len(), |acc| {
                        for t in 0..t_len {
                            let grow = &g[t * c_out..(t + 1) * c_out];
                            for k in 0..k_len {
                                let Some(s) = taps(t, k) else { continue };
                                for c in 0..c_in {
                                    let base = (k * c_in + c) * c_out;
                                    let wrow = &wv.data()[base..base + c_out];
                                    acc[s * c_in + c] +=
                                        grow.iter().zip(wrow).map(|(a, b)| a * b).sum::<f64>();
                                }
                            }
                        }
                    });
                }
                if wants(*w) {
                    accumulate(adj, *w, wv.len(), |acc| {
                        for t in 0..t_len {
                            let grow = &g[t * c_out..(t + 1) * c_out];
                            for k in 0..k_len {
                                let Some(s) = taps(t, k) else { continue };
                                for c in 0..c_in {
                                    let xval = xv.at(s, c);
                                    let base = (k * c_in + c) * c_out;
                                    for (o, gi) in acc[base..base + c_out].iter_mut().zip(grow) {
                                        *o += xval * gi;
                                    }
                                }
                            }
                        }
                    });
                }
            }
            Op::Relu(a) => elementwise(adj, *a, g, y.data(), |_, yi| if yi > 0.0 { 1.0 } else { 0.0 }),
            Op::Sigmoid(a) => elementwise(adj, *a, g, y.data(), |_, yi| yi * (1.0 - yi)),
            Op::Tanh(a) => elementwise(adj, *a, g, y.data(), |_, yi| 1.0 - yi * yi),
            Op::ClampMin { a, floor } => {
                let xv = val(*a).data();
                let floor = *floor;
                elementwise(adj, *a, g, xv, |_, xi| if xi > floor { 1.0 } else { 0.0 })
            }
            Op::Scale { a, factor } => elementwise(adj, *a, g, y.data(), |_, _| *factor),
            Op::Softmax { a, axis } => {
                let (outer, n, inner) = axis_extents(y.shape(), *axis);
                accumulate(adj, *a, y.len(), |acc| {
                    for o in 0..outer {
                        for j in 0..inner {
                            let idx = |i: usize| (o * n + i) * inner + j;
                            let dot: f64 = (0..n).map(|i| g[idx(i)] * y.data()[idx(i)]).sum();
                            for i in 0..n {
                                acc[idx(i)] += y.data()[idx(i)] * (g[idx(i)] - dot);
                            }
                        }
                    }
                });
            }
            Op::LogSoftmax { a, axis } => {
                let (outer, n, inner) = axis_extents(y.shape(), *axis);
                accumulate(adj, *a, y.len(), |acc| {
                    for o in 0..outer {
                        for j in 0..inner {
                            let idx = |i: usize| (o * n + i) * inner + j;
                            let total: f64 = (0..n).map(|i| g[idx(i)]).sum();
                            for i in 0..n {
                                acc[idx(i)] += g[idx(i)] - y.data()[idx(i)].exp() * total;
                            }
                        }
                    }
                });
            }
            Op::Sum { a, axis } | Op::Mean { a, axis } => {
                let shape = val(*a).shape();
                let (outer, n, inner, count) = match axis {
                    Some(ax) => {
                        let (o, n, i) = axis_extents(shape, *ax);
                        (o, n, i, n)
                    }
                    None => (1, val(*a).len(), 1, val(*a).len()),
                };
                let factor = if matches!(node.op, Op::Mean { .. }) {
                    1.0 / count as f64
                } else {
                    1.0
                };
                accumulate(adj, *a, val(*a).len(), |acc| {
                    for o in 0..outer {
                        for i in 0..n {
                            for j in 0..inner {
                                acc[(o * n + i) * inner + j] += factor * g[o * inner + j];
                            }
                        }
                    }
                });
            }
            Op::Concat { parts, axis } => {
                let (outer, total, inner) = axis_extents(y.shape(), *axis);
                let mut offset = 0;
                for p in parts {
                    let len = val(*p).shape()[*axis];
                    if wants(*p) {
                        accumulate(adj, *p, val(*p).len(), |acc| {
                            for o in 0..outer {
                                let src = (o * total + offset) * inner;
                                let dst = o * len * inner;
                                for (d, s) in acc[dst..dst + len * inner]
                                    .iter_mut()
                                    .zip(&g[src..src + len * inner])
                                {
                                    *d += s;
                                }
                            }
                        });
                    }
                    offset += len;
                }
            }
            Op::Slice { a, axis, start } => {
                let (outer, n, inner) = axis_extents(val(*a).shape(), *axis);
                let len = y.shape()[*axis];
                accumulate(adj, *a, val(*a).len(), |acc| {
                    for o in 0..outer {
                        let dst = (o * n + start) * inner;
                        let src = o * len * inner;
                        for (d, s) in acc[dst..dst + len * inner]
                            .iter_mut()
                            .zip(&g[src..src + len * inner])
                        {
                            *d += s;
                        }
                    }
                });
            }
            Op::Custom { inputs, vjp } => {
                let values: Vec<&DenseArray> = inputs.iter().map(|v| val(*v)).collect();
                let grads = vjp.backward(g, &values);
                for (v, gi) in inputs.iter().zip(grads) {
                    if wants(*v) {
                        accumulate(adj, *v, gi.len(), |acc| {
                            acc.iter_mut().zip(&gi).for_each(|(x, y)| *x += y)
                        });
                    }
                }
            }
        }
    }
}

fn accumulate(adj: &mut [Option<Vec<f64>>], v: Var, len: usize, f: impl FnOnce(&mut [f64])) {
    let slot = adj[v.0].get_or_insert_with(|| vec![0.0; len]);
    f(slot);
}

/// Adjoint of a pointwise op: `dx_i += g_i * d(x_i, y_i)` where `d` receives
/// the reference value the derivative is expressed in.
fn elementwise(
    adj: &mut [Option<Vec<f64>>],
    a: Var,
    g: &[f64],
    reference: &[f64],
    d: impl Fn(usize, f64) -> f64,
) {
    accumulate(adj, a, g.len(), |acc| {
        for i in 0..acc.len() {
            acc[i] += g[i] * d(i, reference[i]);
        }
    });
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln Σ exp(x)`, exact for −∞ entries.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax_along(a: &DenseArray, axis: usize, log: bool) -> Result<DenseArray> {
    if axis >= a.rank() || a.shape()[axis] == 0 {
        return Err(Error::config(format!(
            "softmax axis {axis} invalid for shape {:?}",
            a.shape()
        )));
    }
    let (outer, n, inner) = axis_extents(a.shape(), axis);
    let mut out = vec![0.0; a.len()];
    let x = a.data();
    for o in 0..outer {
        for j in 0..inner {
            let idx = |i: usize| (o * n + i) * inner + j;
            let m = (0..n).map(|i| x[idx(i)]).fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = (0..n).map(|i| (x[idx(i)] - m).exp()).sum();
            let lz = z.ln();
            for i in 0..n {
                out[idx(i)] = if log {
                    x[idx(i)] - m - lz
                } else {
                    (x[idx(i)] - m).exp() / z
                };
            }
        }
    }
    DenseArray::new(a.shape().to_vec(), out)
}

fn reduce(a: &DenseArray, axis: Option<usize>, mean: bool) -> Result<DenseArray> {
    match axis {
        None => {
            let s = a.sum();
            let n = a.len().max(1) as f64;
            Ok(DenseArray::scalar(if mean { s / n } else { s }))
        }
        Some(ax) => {
            if ax >= a.rank() {
                return Err(Error::config(format!(
                    "reduce axis {ax} out of range for {:?}",
                    a.shape()
                )));
            }
            let (outer, n, inner) = axis_extents(a.shape(), ax);
            let mut out = vec![0.0; outer * inner];
            for o in 0..outer {
                for i in 0..n {
                    for j in 0..inner {
                        out[o * inner + j] += a.data()[(o * n + i) * inner + j];
                    }
                }
            }
            if mean && n > 0 {
                out.iter_mut().for_each(|v| *v /= n as f64);
            }
            DenseArray::new(reduced_shape(a.shape(), axis), out)
        }
    }
}
