//! Central finite differences, used to check tape gradients.

use crate::error::Result;

use super::DenseArray;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Numerical gradient of `f` at `x` by central differences.
pub fn numerical_gradient(
    x: &DenseArray,
    step: f64,
    mut f: impl FnMut(&DenseArray) -> Result<f64>,
) -> Result<DenseArray> {
    let mut probe = x.clone();
    let mut grad = DenseArray::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + step;
        let up = f(&probe)?;
        probe.data_mut()[i] = orig - step;
        let down = f(&probe)?;
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (up - down) / (2.0 * step);
    }
    Ok(grad)
}

/// Norm-wise relative error `max|a - n| / max(max|a|, max|n|, 1e-8)`.
pub fn relative_error(analytic: &DenseArray, numeric: &DenseArray) -> f64 {
    let diff = analytic.max_abs_diff(numeric);
    let scale = analytic
        .data()
        .iter()
        .chain(numeric.data())
        .fold(1e-8_f64, |m, v| m.max(v.abs()));
    diff / scale
}
