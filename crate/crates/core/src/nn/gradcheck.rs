//! Finite-difference verification of analytic gradients.
//!
//! Uses the fourth-order central stencil
//! `(−f(x+2h) + 8f(x+h) − 8f(x−h) + f(x−2h)) / 12h`. Weights initialized at
//! the 0.01 scale and followed by batchnorm have large higher derivatives, so
//! the plain two-point difference leaves truncation error near 1e-6. The
//! O(h⁴) truncation allows a step of 1e-4, which keeps rounding noise on small
//! gradients well below the tolerance.

use rand::Rng;

use crate::error::Result;
use crate::nn::layer::LayerKind;
use crate::nn::loss::{cross_entropy_loss, mse_loss};
use crate::nn::mlp::{Mlp, Mode};
use crate::nn::tensor::Tensor;
use crate::rng::seeded;

pub const DEFAULT_STEP: f64 = 1e-4;

/// A scalar function of a parameter set that can also report its gradient.
pub trait Objective {
    /// Loss at the current parameters. With `backward` set the parameter
    /// gradients are overwritten with the analytic gradient.
    fn evaluate(&mut self, backward: bool) -> Result<f64>;

    fn parameters(&mut self) -> Vec<&mut Tensor<f64>>;

    /// Parameters whose gradient is identically zero by construction, such as
    /// a linear bias feeding straight into batchnorm (the batch mean removes
    /// it). Finite differences there only measure rounding noise.
    fn structurally_zero(&self) -> Vec<usize> {
        Vec::new()
    }

    /// ReLU states of the last evaluation. Finite differences are only
    /// meaningful when this is unchanged across the stencil.
    fn activation_pattern(&self) -> Vec<bool> {
        Vec::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// `(tensor index, element index)` of the worst agreement.
    pub worst: Option<(usize, usize)>,
    /// Largest analytic gradient magnitude among structurally-zero tensors.
    pub max_structural_zero: f64,
    /// Draws discarded because the stencil crossed a ReLU kink.
    pub kink_skips: usize,
}

/// `|a − n| / max(|a|, |n|)`, zero when both vanish.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs());
    if denom == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / denom
    }
}

/// Compares analytic gradients with finite differences of step `h` on
/// `samples` parameters, drawn round-robin over the parameter tensors so every
/// layer contributes. A draw whose stencil flips any ReLU is not
/// differentiable there; it is discarded and the next draw moves on to the
/// next tensor.
pub fn grad_check<O: Objective>(obj: &mut O, samples: usize, h: f64, seed: u64) -> Result<GradCheckReport> {
    obj.evaluate(true)?;
    let pattern = obj.activation_pattern();
    let skip = obj.structurally_zero();
    let mut rng = seeded(seed);
    let (eligible, analytic, sizes, max_structural_zero) = {
        let params = obj.parameters();
        let max_structural_zero = skip
            .iter()
            .flat_map(|&t| params[t].grad().unwrap_or(&[]).iter())
            .fold(0.0f64, |m, g| m.max(g.abs()));
        let eligible: Vec<usize> = (0..params.len()).filter(|t| !skip.contains(t)).collect();
        let analytic: Vec<Vec<f64>> = params.iter().map(|p| p.grad().map_or_else(|| vec![0.0; p.len()], <[f64]>::to_vec)).collect();
        let sizes: Vec<usize> = params.iter().map(|p| p.len()).collect();
        (eligible, analytic, sizes, max_structural_zero)
    };
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst: None,
        max_structural_zero,
        kink_skips: 0,
    };
    let max_draws = samples * 20;
    let mut draws = 0;
    while report.checked < samples && draws < max_draws {
        let t = eligible[draws % eligible.len()];
        let e = rng.random_range(0..sizes[t]);
        draws += 1;
        let orig = obj.parameters()[t].data()[e];
        let mut kinked = false;
        let mut at = |x: f64| -> Result<f64> {
            obj.parameters()[t].data_mut()[e] = x;
            let v = obj.evaluate(false)?;
            kinked |= obj.activation_pattern() != pattern;
            Ok(v)
        };
        let (up2, up, down, down2) = (at(orig + 2.0 * h)?, at(orig + h)?, at(orig - h)?, at(orig - 2.0 * h)?);
        obj.parameters()[t].data_mut()[e] = orig;
        if kinked {
            report.kink_skips += 1;
            continue;
        }
        let numeric = (8.0 * (up - down) - (up2 - down2)) / (12.0 * h);
        let err = relative_error(analytic[t][e], numeric);
        report.checked += 1;
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = Some((t, e));
        }
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub enum Target {
    Regression(Tensor<f64>),
    Classes(Vec<usize>),
}

/// A single network evaluated in train mode without dropout, against an MSE
/// or cross-entropy target.
#[derive(Debug, Clone)]
pub struct MlpObjective {
    pub model: Mlp<f64>,
    pub input: Tensor<f64>,
    pub target: Target,
}

impl MlpObjective {
    pub fn new(model: &Mlp<f64>, input: Tensor<f64>, target: Target) -> Result<Self> {
        Ok(Self {
            model: model.with_dropout(0.0)?,
            input,
            target,
        })
    }
}

/// Indices (into `parameters_mut` order) of linear biases that reach a
/// batchnorm layer through linear layers only.
pub fn biases_before_batchnorm(model: &Mlp<f64>) -> Vec<usize> {
    let specs = model.specs();
    let mut out = Vec::new();
    let mut idx = 0;
    for (i, s) in specs.iter().enumerate() {
        match s.kind {
            LayerKind::Linear => {
                let next = specs[i + 1..].iter().map(|n| n.kind).find(|&k| k != LayerKind::Linear);
                if next == Some(LayerKind::Batchnorm) {
                    out.push(idx + 1);
                }
                idx += 2;
            }
            LayerKind::Batchnorm => idx += 2,
            _ => {}
        }
    }
    out
}

impl Objective for MlpObjective {
    fn evaluate(&mut self, backward: bool) -> Result<f64> {
        let mut rng = seeded(0);
        let out = self.model.forward(&self.input, Mode::Train, &mut rng)?;
        let loss = match &self.target {
            Target::Regression(t) => mse_loss(&out, t)?,
            Target::Classes(c) => cross_entropy_loss(&out, c)?,
        };
        if backward {
            self.model.zero_grad();
            self.model.backward(&loss.grad)?;
        }
        Ok(loss.value)
    }

    fn parameters(&mut self) -> Vec<&mut Tensor<f64>> {
        self.model.parameters_mut()
    }

    fn structurally_zero(&self) -> Vec<usize> {
        biases_before_batchnorm(&self.model)
    }

    fn activation_pattern(&self) -> Vec<bool> {
        self.model.relu_pattern()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::LayerSpec;
    use rand_distr::{Distribution, StandardNormal};

    fn random(rows: usize, cols: usize, seed: u64) -> Tensor<f64> {
        let mut rng = seeded(seed);
        let v = (0..rows * cols).map(|_| StandardNormal.sample(&mut rng)).collect();
        Tensor::matrix(rows, cols, v).unwrap()
    }

    fn check(specs: Vec<LayerSpec>, target: Target, tol: f64) {
        let inp = specs[0].in_dim;
        let model = Mlp::<f64>::new(specs, &mut seeded(9)).unwrap();
        let mut obj = MlpObjective::new(&model, random(6, inp, 4), target).unwrap();
        let r = grad_check(&mut obj, 100, DEFAULT_STEP, 1).unwrap();
        assert!(r.max_rel_error < tol, "{r:?}");
        assert!(r.max_structural_zero < 1e-12, "{r:?}");
    }

    #[test]
    fn single_linear_layer_is_near_machine_precision() {
        check(
            vec![LayerSpec::linear(5, 3)],
            Target::Regression(random(6, 3, 8)),
            1e-8,
        );
    }

    #[test]
    fn every_layer_kind() {
        let specs = vec![
            LayerSpec::linear(4, 8),
            LayerSpec::batchnorm(8),
            LayerSpec::relu(8),
            LayerSpec::dropout(8, 0.5),
            LayerSpec::residual_begin(8),
            LayerSpec::linear(8, 8),
            LayerSpec::batchnorm(8),
            LayerSpec::relu(8),
            LayerSpec::residual_end(8),
            LayerSpec::linear(8, 3),
        ];
        check(specs.clone(), Target::Regression(random(6, 3, 8)), 1e-6);
        check(specs, Target::Classes(vec![0, 1, 2, 2, 1, 0]), 1e-6);
    }

    #[test]
    fn draws_across_a_relu_kink_are_skipped() {
        let specs = vec![LayerSpec::linear(1, 1), LayerSpec::relu(1), LayerSpec::linear(1, 1)];
        let model = Mlp::<f64>::new(specs, &mut seeded(0)).unwrap();
        let x = Tensor::matrix(2, 1, vec![1.0, 2.0]).unwrap();
        let y = Tensor::matrix(2, 1, vec![0.5, -0.3]).unwrap();
        let mut obj = MlpObjective::new(&model, x, Target::Regression(y)).unwrap();
        {
            let mut p = obj.parameters();
            p[0].data_mut()[0] = 1.0;
            // first row sits 1e-4 above the kink, inside the stencil reach
            p[1].data_mut()[0] = -1.0 + 1e-4;
            p[2].data_mut()[0] = 0.7;
        }
        let r = grad_check(&mut obj, 20, DEFAULT_STEP, 2).unwrap();
        assert!(r.kink_skips > 0, "{r:?}");
        assert_eq!(r.checked, 20, "{r:?}");
        assert!(r.max_rel_error < 1e-8, "{r:?}");
    }

    #[test]
    fn relative_error_conventions() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert_eq!(relative_error(1.0, 0.5), 0.5);
    }
}
