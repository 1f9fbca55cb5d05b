use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tensor::{Scalar, Tensor};

/// Optimization recipe: initial learning rate divided by 10 at each listed
/// fraction of the total epochs, weight decay on all parameters, dropout
/// probability, batch size and RNG seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub lr0: f64,
    pub decay_epochs: Vec<f64>,
    pub weight_decay: f64,
    pub dropout_p: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            epochs: 300,
            lr0: 0.01,
            decay_epochs: vec![0.5, 0.75],
            weight_decay: 0.0005,
            dropout_p: 0.5,
            batch_size: 256,
            seed: 0,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!("lr0 must be positive, got {}", self.lr0)));
        }
        if let Some(f) = self.decay_epochs.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
            return Err(Error::Config(format!("decay fraction {f} not in (0,1)")));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!("dropout_p {} not in [0,1)", self.dropout_p)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!("weight_decay must be >= 0, got {}", self.weight_decay)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        Ok(())
    }

    /// Learning rate at a given fraction of training.
    pub fn lr_at_fraction(&self, fraction: f64) -> f64 {
        let drops = self.decay_epochs.iter().filter(|&&f| fraction >= f).count();
        self.lr0 * 0.1f64.powi(drops as i32)
    }

    /// Learning rate for zero-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr_at_fraction(epoch as f64 / self.epochs as f64)
    }
}

fn flush<T: Scalar>(x: T) -> T {
    if x.is_subnormal() {
        T::zero()
    } else {
        x
    }
}

fn flush_below<T: Scalar>(x: T, floor: T) -> T {
    if x.abs() < floor {
        T::zero()
    } else {
        x
    }
}

/// Adam with bias correction. Weight decay enters as an additive gradient
/// term `weight_decay · θ` on every parameter, biases included.
///
/// Parameters of dead units decay geometrically under weight decay. Once
/// they are tiny their products with gradients fall into the subnormal range,
/// which slows every later matrix product by orders of magnitude. Parameters
/// below √(smallest normal) are therefore set to zero, and moment estimates
/// that underflow are flushed.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    moments: Vec<(Vec<T>, Vec<T>)>,
    step: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(weight_decay: f64) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            moments: Vec::new(),
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update of `params` from their accumulated gradients.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>], lr: f64) -> Result<()> {
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|p| (vec![T::zero(); p.len()], vec![T::zero(); p.len()]))
                .collect();
        }
        if self.moments.len() != params.len()
            || self.moments.iter().zip(params.iter()).any(|(m, p)| m.0.len() != p.len())
        {
            return Err(Error::State("optimizer state does not match parameter set".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let b1 = T::from_f64_lossy(self.beta1);
        let b2 = T::from_f64_lossy(self.beta2);
        let one = T::one();
        let c1 = T::from_f64_lossy(1.0 / (1.0 - self.beta1.powi(t)));
        let c2 = T::from_f64_lossy(1.0 / (1.0 - self.beta2.powi(t)));
        let lr = T::from_f64_lossy(lr);
        let eps = T::from_f64_lossy(self.eps);
        let wd = T::from_f64_lossy(self.weight_decay);
        let floor = T::min_positive_value().sqrt();
        for (p, (m, v)) in params.iter_mut().zip(self.moments.iter_mut()) {
            let (theta, grad) = p.value_and_grad_mut();
            for i in 0..theta.len() {
                let g = grad[i] + wd * theta[i];
                m[i] = flush(b1 * m[i] + (one - b1) * g);
                v[i] = flush(b2 * v[i] + (one - b2) * g * g);
                let mhat = m[i] * c1;
                let vhat = v[i] * c2;
                theta[i] = flush_below(theta[i] - lr * mhat / (vhat.sqrt() + eps), floor);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(v: f64, g: f64) -> Tensor<f64> {
        let mut p = Tensor::parameter(vec![1], vec![v]).unwrap();
        p.grad_mut().unwrap()[0] = g;
        p
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m = 0.1, v = 0.001; bias correction gives mhat = vhat = 1
        let mut p = param(0.0, 1.0);
        let mut adam = Adam::new(0.0);
        adam.step(&mut [&mut p], 0.01).unwrap();
        let expected = -0.01 / (1.0 + 1e-8);
        assert!((p.data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut p = param(0.37, 0.0);
        let mut adam = Adam::new(0.0);
        for _ in 0..10 {
            adam.step(&mut [&mut p], 0.01).unwrap();
        }
        assert_eq!(p.data()[0], 0.37);
    }

    #[test]
    fn weight_decay_shrinks_parameters() {
        let mut p = param(2.0, 0.0);
        let mut adam = Adam::new(0.0005);
        adam.step(&mut [&mut p], 0.01).unwrap();
        assert!(p.data()[0] < 2.0);
    }

    #[test]
    fn schedule_divides_by_ten() {
        let s = TrainSchedule::default();
        assert_eq!(s.lr_at(0), 0.01);
        assert_eq!(s.lr_at(149), 0.01);
        assert!((s.lr_at(150) - 0.001).abs() < 1e-18);
        assert!((s.lr_at_fraction(0.5) - 0.001).abs() < 1e-18);
        assert!((s.lr_at(225) - 0.0001).abs() < 1e-18);
        assert!((s.lr_at(299) - 0.0001).abs() < 1e-18);
    }

    #[test]
    fn schedule_validation() {
        let mut s = TrainSchedule::default();
        s.validate().unwrap();
        s.lr0 = 0.0;
        assert!(s.validate().is_err());
        s = TrainSchedule {
            decay_epochs: vec![1.0],
            ..TrainSchedule::default()
        };
        assert!(s.validate().is_err());
    }
}
