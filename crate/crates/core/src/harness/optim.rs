use crate::error::{Error, Result};
use crate::numcore::DenseArray;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decay the step size as `lr · (1 − step/total)²`.
    pub poly_decay: bool,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            poly_decay: false,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::config("optim.lr must be > 0"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("optim.beta1 and optim.beta2 must lie in [0, 1)"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::config("optim.eps must be > 0"));
        }
        Ok(())
    }
}

pub struct Adam {
    config: AdamConfig,
    total_steps: usize,
    step: usize,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    /// `total_steps` only matters with polynomial decay.
    pub fn new(config: AdamConfig, shapes: &[&DenseArray], total_steps: usize) -> Self {
        Adam {
            config,
            total_steps,
            step: 0,
            m: shapes.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: shapes.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn current_lr(&self) -> f64 {
        if self.config.poly_decay && self.total_steps > 0 {
            let frac = (self.step as f64 / self.total_steps as f64).min(1.0);
            self.config.lr * (1.0 - frac).powi(2)
        } else {
            self.config.lr
        }
    }

    pub fn update(&mut self, params: &mut [&mut DenseArray], grads: &[&DenseArray]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        let lr = self.current_lr();
        self.step += 1;
        let c = &self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (((x, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = c.beta1 * *mi + (1.0 - c.beta1) * gi;
                *vi = c.beta2 * *vi + (1.0 - c.beta2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *x -= lr * mhat / (vhat.sqrt() + c.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut p = DenseArray::vector(vec![1.0, -2.0, 0.5]);
        let g = DenseArray::vector(vec![3.0, -0.1, 0.0]);
        let mut opt = Adam::new(AdamConfig::default(), &[&p], 10);
        opt.update(&mut [&mut p], &[&g]);
        assert!((p.data()[0] - (1.0 - 1e-3)).abs() < 1e-9);
        assert!((p.data()[1] - (-2.0 + 1e-3)).abs() < 1e-9);
        assert_eq!(p.data()[2], 0.5);
    }

    #[test]
    fn minimises_a_quadratic() {
        let mut p = DenseArray::vector(vec![4.0, -3.0]);
        let config = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        let mut opt = Adam::new(config, &[&p], 0);
        for _ in 0..2000 {
            let g = p.map(|x| 2.0 * x);
            opt.update(&mut [&mut p], &[&g]);
        }
        assert!(p.data().iter().all(|x| x.abs() < 1e-3), "{:?}", p.data());
    }

    #[test]
    fn polynomial_decay_reaches_zero() {
        let p = DenseArray::vector(vec![0.0]);
        let config = AdamConfig {
            poly_decay: true,
            ..AdamConfig::default()
        };
        let mut opt = Adam::new(config, &[&p], 4);
        let mut lrs = Vec::new();
        let mut q = p.clone();
        for _ in 0..4 {
            lrs.push(opt.current_lr());
            opt.update(&mut [&mut q], &[&DenseArray::vector(vec![1.0])]);
        }
        assert_eq!(lrs, vec![1e-3, 1e-3 * 0.5625, 1e-3 * 0.25, 1e-3 * 0.0625]);
        assert_eq!(opt.current_lr(), 0.0);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(AdamConfig { lr: 0.0, ..AdamConfig::default() }.validate().is_err());
        assert!(AdamConfig { beta1: 1.0, ..AdamConfig::default() }.validate().is_err());
    }
}
