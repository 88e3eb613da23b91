use crate::error::{Error, Result};
use crate::numcore::{DenseArray, Rng, Tape, Var};

pub const ADAPTER_KERNEL: usize = 3;

/// Width-3 same-padded convolution mapping student width `D_s` to teacher
/// width `D_t`. Lives only as long as representation matching.
#[derive(Clone, Debug, PartialEq)]
pub struct Adapter {
    /// `[3, D_s, D_t]`
    pub weight: DenseArray,
    /// `[D_t]`
    pub bias: DenseArray,
}

#[derive(Clone, Copy, Debug)]
pub struct AdapterVars {
    pub weight: Var,
    pub bias: Var,
}

impl Adapter {
    pub fn new(student_width: usize, teacher_width: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / ((ADAPTER_KERNEL * student_width) as f64).sqrt();
        Adapter {
            weight: DenseArray::uniform(&[ADAPTER_KERNEL, student_width, teacher_width], bound, rng),
            bias: DenseArray::zeros(&[teacher_width]),
        }
    }

    pub fn zeros(student_width: usize, teacher_width: usize) -> Self {
        Adapter {
            weight: DenseArray::zeros(&[ADAPTER_KERNEL, student_width, teacher_width]),
            bias: DenseArray::zeros(&[teacher_width]),
        }
    }

    /// Centre tap is the identity, side taps zero.
    pub fn identity(width: usize) -> Self {
        let mut a = Adapter::zeros(width, width);
        for c in 0..width {
            a.weight.data_mut()[(width + c) * width + c] = 1.0;
        }
        a
    }

    pub fn student_width(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn teacher_width(&self) -> usize {
        self.weight.shape()[2]
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> AdapterVars {
        AdapterVars {
            weight: tape.leaf(self.weight.clone(), trainable),
            bias: tape.leaf(self.bias.clone(), trainable),
        }
    }
}

/// `c_θ(w_stu)`: `T x D_s` in, `T x D_t` out.
pub fn adapter_forward(tape: &mut Tape, adapter: &AdapterVars, student: Var) -> Result<Var> {
    let expected = tape.value(adapter.weight).shape()[1];
    let found = tape.value(student).cols();
    if expected != found {
        return Err(Error::config(format!(
            "adapter expects {expected} student channels, got {found}"
        )));
    }
    let y = tape.conv1d(student, adapter.weight)?;
    tape.add(y, adapter.bias)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::gradcheck::{numerical_gradient, relative_error, DEFAULT_STEP};

    fn run(adapter: &Adapter, x: &DenseArray) -> DenseArray {
        let mut tape = Tape::new();
        let vars = adapter.bind(&mut tape, false);
        let xv = tape.constant(x.clone());
        let y = adapter_forward(&mut tape, &vars, xv).unwrap();
        tape.value(y).clone()
    }

    #[test]
    fn identity_adapter_passes_input_through() {
        let x = DenseArray::randn(&[6, 4], 1.0, &mut Rng::new(1));
        assert_eq!(run(&Adapter::identity(4), &x), x);
    }

    #[test]
    fn zero_adapter_gives_zero() {
        let x = DenseArray::randn(&[6, 4], 1.0, &mut Rng::new(1));
        let y = run(&Adapter::zeros(4, 3), &x);
        assert_eq!(y.shape(), &[6, 3]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn channel_mismatch_is_config_error() {
        let mut tape = Tape::new();
        let vars = Adapter::zeros(4, 3).bind(&mut tape, false);
        let x = tape.constant(DenseArray::zeros(&[5, 2]));
        assert!(matches!(adapter_forward(&mut tape, &vars, x), Err(Error::Config(_))));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = Rng::new(7);
        let adapter = Adapter::new(3, 2, &mut rng);
        let x = DenseArray::randn(&[5, 3], 1.0, &mut rng);
        let objective = |a: &Adapter, x: &DenseArray| -> Result<f64> {
            Ok(run(a, x).data().iter().map(|v| v * v * v).sum())
        };
        let mut tape = Tape::new();
        let vars = adapter.bind(&mut tape, true);
        let xv = tape.param(x.clone());
        let y = adapter_forward(&mut tape, &vars, xv).unwrap();
        let y2 = tape.square(y).unwrap();
        let y3 = tape.mul(y2, y).unwrap();
        let root = tape.sum(y3, None).unwrap();
        let g = tape.backward(root).unwrap();
        let nw = numerical_gradient(&adapter.weight, DEFAULT_STEP, |w| {
            let mut a = adapter.clone();
            a.weight = w.clone();
            objective(&a, &x)
        })
        .unwrap();
        assert!(relative_error(g.get(vars.weight).unwrap(), &nw) < 1e-5);
        let nb = numerical_gradient(&adapter.bias, DEFAULT_STEP, |b| {
            let mut a = adapter.clone();
            a.bias = b.clone();
            objective(&a, &x)
        })
        .unwrap();
        assert!(relative_error(g.get(vars.bias).unwrap(), &nb) < 1e-5);
        let nx = numerical_gradient(&x, DEFAULT_STEP, |z| objective(&adapter, z)).unwrap();
        assert!(relative_error(g.get(xv).unwrap(), &nx) < 1e-5);
    }
}
