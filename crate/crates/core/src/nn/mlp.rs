//! Sequential network with residual spans, trained by layer-wise reverse-mode
//! differentiation. A training-mode forward pass records the intermediates
//! each layer needs; `backward` consumes them in reverse order.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::nn::layer::{validate_specs, LayerKind, LayerSpec};
use crate::nn::tensor::{gemm, Op, Scalar, Tensor};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;
pub const INIT_STD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone)]
enum Layer<T> {
    Linear {
        weight: Tensor<T>,
        bias: Tensor<T>,
        input: Vec<T>,
    },
    BatchNorm {
        gamma: Tensor<T>,
        beta: Tensor<T>,
        running_mean: Vec<T>,
        running_var: Vec<T>,
        xhat: Vec<T>,
        inv_std: Vec<T>,
    },
    Relu {
        active: Vec<bool>,
    },
    Dropout {
        p: f64,
        scale: Vec<T>,
    },
    ResidualBegin,
    ResidualEnd,
}

#[derive(Debug, Clone)]
pub struct Mlp<T> {
    specs: Vec<LayerSpec>,
    layers: Vec<Layer<T>>,
    cached_rows: Option<usize>,
}

fn column_sums<T: Scalar>(x: &[T], cols: usize, out: &mut [T]) {
    for row in x.chunks_exact(cols) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o = *o + v;
        }
    }
}

impl<T: Scalar> Mlp<T> {
    /// Fully connected weights are drawn from N(0, 0.01²); biases, batchnorm
    /// shifts and running means start at 0, batchnorm scales and running
    /// variances at 1.
    pub fn new<R: Rng + ?Sized>(specs: Vec<LayerSpec>, rng: &mut R) -> Result<Self> {
        validate_specs(&specs)?;
        let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
        let layers = specs
            .iter()
            .map(|s| -> Result<Layer<T>> {
                Ok(match s.kind {
                    LayerKind::Linear => {
                        let w = (0..s.in_dim * s.out_dim)
                            .map(|_| T::from_f64_lossy(normal.sample(rng)))
                            .collect();
                        Layer::Linear {
                            weight: Tensor::parameter(vec![s.out_dim, s.in_dim], w)?,
                            bias: Tensor::parameter(vec![s.out_dim], vec![T::zero(); s.out_dim])?,
                            input: Vec::new(),
                        }
                    }
                    LayerKind::Batchnorm => Layer::BatchNorm {
                        gamma: Tensor::parameter(vec![s.out_dim], vec![T::one(); s.out_dim])?,
                        beta: Tensor::parameter(vec![s.out_dim], vec![T::zero(); s.out_dim])?,
                        running_mean: vec![T::zero(); s.out_dim],
                        running_var: vec![T::one(); s.out_dim],
                        xhat: Vec::new(),
                        inv_std: Vec::new(),
                    },
                    LayerKind::Relu => Layer::Relu { active: Vec::new() },
                    LayerKind::Dropout => Layer::Dropout {
                        p: s.dropout_p,
                        scale: Vec::new(),
                    },
                    LayerKind::ResidualBegin => Layer::ResidualBegin,
                    LayerKind::ResidualEnd => Layer::ResidualEnd,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            specs,
            layers,
            cached_rows: None,
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn in_dim(&self) -> usize {
        self.specs[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.specs[self.specs.len() - 1].out_dim
    }

    pub fn parameter_count(&self) -> usize {
        crate::nn::layer::parameter_count(&self.specs)
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<usize> {
        if x.shape().len() != 2 || x.cols() != self.in_dim() {
            return Err(Error::shape(format!(
                "network expects [batch, {}] input, got {:?}",
                self.in_dim(),
                x.shape()
            )));
        }
        Ok(x.rows())
    }

    /// Runs the network. In train mode batchnorm normalizes with batch
    /// statistics (and updates its running estimates), dropout is active and
    /// intermediates are kept for [`Mlp::backward`]. Eval mode is
    /// [`Mlp::infer`].
    pub fn forward<R: Rng + ?Sized>(&mut self, x: &Tensor<T>, mode: Mode, rng: &mut R) -> Result<Tensor<T>> {
        if mode == Mode::Eval {
            self.cached_rows = None;
            return self.infer(x);
        }
        let rows = self.check_input(x)?;
        self.cached_rows = None;
        let mut cur = x.data().to_vec();
        let mut saved: Vec<Vec<T>> = Vec::new();
        let momentum = T::from_f64_lossy(BN_MOMENTUM);
        let eps = T::from_f64_lossy(BN_EPS);
        for (spec, layer) in self.specs.iter().zip(self.layers.iter_mut()) {
            let width = spec.out_dim;
            match layer {
                Layer::Linear { weight, bias, input } => {
                    let mut y = vec![T::zero(); rows * width];
                    gemm(rows, spec.in_dim, width, &cur, Op::Plain, weight.data(), Op::Trans, &mut y, false);
                    for row in y.chunks_exact_mut(width) {
                        for (v, &b) in row.iter_mut().zip(bias.data()) {
                            *v = *v + b;
                        }
                    }
                    *input = std::mem::replace(&mut cur, y);
                }
                Layer::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                    xhat,
                    inv_std,
                } => {
                    let n = T::from_usize(rows).unwrap();
                    let mut mean = vec![T::zero(); width];
                    column_sums(&cur, width, &mut mean);
                    mean.iter_mut().for_each(|m| *m = *m / n);
                    let mut var = vec![T::zero(); width];
                    for row in cur.chunks_exact(width) {
                        for ((v, &x), &m) in var.iter_mut().zip(row).zip(&mean) {
                            *v = *v + (x - m) * (x - m);
                        }
                    }
                    var.iter_mut().for_each(|v| *v = *v / n);
                    *inv_std = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
                    let mut out = cur;
                    for row in out.chunks_exact_mut(width) {
                        for (j, v) in row.iter_mut().enumerate() {
                            *v = (*v - mean[j]) * inv_std[j];
                        }
                    }
                    *xhat = out.clone();
                    for row in out.chunks_exact_mut(width) {
                        for ((v, &g), &b) in row.iter_mut().zip(gamma.data()).zip(beta.data()) {
                            *v = *v * g + b;
                        }
                    }
                    let unbias = if rows > 1 {
                        n / T::from_usize(rows - 1).unwrap()
                    } else {
                        T::one()
                    };
                    for j in 0..width {
                        running_mean[j] = (T::one() - momentum) * running_mean[j] + momentum * mean[j];
                        running_var[j] = (T::one() - momentum) * running_var[j] + momentum * var[j] * unbias;
                    }
                    cur = out;
                }
                Layer::Relu { active } => {
                    active.clear();
                    active.extend(cur.iter().map(|&v| v > T::zero()));
                    for v in cur.iter_mut() {
                        if !(*v > T::zero()) {
                            *v = T::zero();
                        }
                    }
                }
                Layer::Dropout { p, scale } => {
                    scale.clear();
                    if *p > 0.0 {
                        let keep = T::from_f64_lossy(1.0 / (1.0 - *p));
                        scale.extend((0..cur.len()).map(|_| if rng.random::<f64>() < *p { T::zero() } else { keep }));
                        for (v, &s) in cur.iter_mut().zip(scale.iter()) {
                            *v = *v * s;
                        }
                    }
                }
                Layer::ResidualBegin => saved.push(cur.clone()),
                Layer::ResidualEnd => {
                    let skip = saved.pop().expect("validated residual pairing");
                    for (v, s) in cur.iter_mut().zip(skip) {
                        *v = *v + s;
                    }
                }
            }
        }
        self.cached_rows = Some(rows);
        Tensor::matrix(rows, self.out_dim(), cur)
    }

    /// Eval-mode forward: running statistics in batchnorm, dropout as
    /// identity. Takes `&self`, so a frozen network can serve many callers.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let rows = self.check_input(x)?;
        let mut cur = x.data().to_vec();
        let mut saved: Vec<Vec<T>> = Vec::new();
        let eps = T::from_f64_lossy(BN_EPS);
        for (spec, layer) in self.specs.iter().zip(&self.layers) {
            let width = spec.out_dim;
            match layer {
                Layer::Linear { weight, bias, .. } => {
                    let mut y = vec![T::zero(); rows * width];
                    gemm(rows, spec.in_dim, width, &cur, Op::Plain, weight.data(), Op::Trans, &mut y, false);
                    for row in y.chunks_exact_mut(width) {
                        for (v, &b) in row.iter_mut().zip(bias.data()) {
                            *v = *v + b;
                        }
                    }
                    cur = y;
                }
                Layer::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                    ..
                } => {
                    let scale: Vec<T> = running_var
                        .iter()
                        .zip(gamma.data())
                        .map(|(&v, &g)| g / (v + eps).sqrt())
                        .collect();
                    for row in cur.chunks_exact_mut(width) {
                        for j in 0..width {
                            row[j] = (row[j] - running_mean[j]) * scale[j] + beta.data()[j];
                        }
                    }
                }
                Layer::Relu { .. } => {
                    for v in cur.iter_mut() {
                        if !(*v > T::zero()) {
                            *v = T::zero();
                        }
                    }
                }
                Layer::Dropout { .. } => {}
                Layer::ResidualBegin => saved.push(cur.clone()),
                Layer::ResidualEnd => {
                    let skip = saved.pop().expect("validated residual pairing");
                    for (v, s) in cur.iter_mut().zip(skip) {
                        *v = *v + s;
                    }
                }
            }
        }
        Tensor::matrix(rows, self.out_dim(), cur)
    }

    /// Back-propagates `grad_out` (gradient of the loss with respect to the
    /// last train-mode output), accumulating parameter gradients and returning
    /// the gradient with respect to the network input.
    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let rows = self
            .cached_rows
            .take()
            .ok_or_else(|| Error::State("backward requires a preceding train-mode forward pass".into()))?;
        if grad_out.rows() != rows || grad_out.cols() != self.out_dim() {
            return Err(Error::shape(format!(
                "output gradient {:?} does not match forward output [{rows}, {}]",
                grad_out.shape(),
                self.out_dim()
            )));
        }
        let mut g = grad_out.data().to_vec();
        let mut skips: Vec<Vec<T>> = Vec::new();
        let n = T::from_usize(rows).unwrap();
        for (spec, layer) in self.specs.iter().zip(self.layers.iter_mut()).rev() {
            let width = spec.out_dim;
            match layer {
                Layer::Linear { weight, bias, input } => {
                    let in_dim = spec.in_dim;
                    {
                        let (_, dw) = weight.value_and_grad_mut();
                        gemm(width, rows, in_dim, &g, Op::Trans, input, Op::Plain, dw, true);
                    }
                    {
                        let (_, db) = bias.value_and_grad_mut();
                        column_sums(&g, width, db);
                    }
                    let mut dx = vec![T::zero(); rows * in_dim];
                    gemm(rows, width, in_dim, &g, Op::Plain, weight.data(), Op::Plain, &mut dx, false);
                    input.clear();
                    g = dx;
                }
                Layer::BatchNorm {
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                    ..
                } => {
                    let mut sum_dxhat = vec![T::zero(); width];
                    let mut sum_dxhat_xhat = vec![T::zero(); width];
                    {
                        let (_, dbeta) = beta.value_and_grad_mut();
                        column_sums(&g, width, dbeta);
                    }
                    {
                        let (gval, dgamma) = gamma.value_and_grad_mut();
                        for (grow, xrow) in g.chunks_exact_mut(width).zip(xhat.chunks_exact(width)) {
                            for j in 0..width {
                                dgamma[j] = dgamma[j] + grow[j] * xrow[j];
                                // g becomes d(loss)/d(xhat)
                                grow[j] = grow[j] * gval[j];
                                sum_dxhat[j] = sum_dxhat[j] + grow[j];
                                sum_dxhat_xhat[j] = sum_dxhat_xhat[j] + grow[j] * xrow[j];
                            }
                        }
                    }
                    for (grow, xrow) in g.chunks_exact_mut(width).zip(xhat.chunks_exact(width)) {
                        for j in 0..width {
                            grow[j] = inv_std[j] / n * (n * grow[j] - sum_dxhat[j] - xrow[j] * sum_dxhat_xhat[j]);
                        }
                    }
                    xhat.clear();
                }
                Layer::Relu { active } => {
                    for (v, &a) in g.iter_mut().zip(active.iter()) {
                        if !a {
                            *v = T::zero();
                        }
                    }
                }
                Layer::Dropout { p, scale } => {
                    if *p > 0.0 {
                        for (v, &s) in g.iter_mut().zip(scale.iter()) {
                            *v = *v * s;
                        }
                    }
                }
                Layer::ResidualEnd => skips.push(g.clone()),
                Layer::ResidualBegin => {
                    let skip = skips.pop().expect("validated residual pairing");
                    for (v, s) in g.iter_mut().zip(skip) {
                        *v = *v + s;
                    }
                }
            }
        }
        Tensor::matrix(rows, self.in_dim(), g)
    }

    pub fn zero_grad(&mut self) {
        for p in self.parameters_mut() {
            p.zero_grad();
        }
    }

    /// ReLU on/off states cached by the last train-mode forward pass.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.layers
            .iter()
            .flat_map(|l| match l {
                Layer::Relu { active } => active.as_slice(),
                _ => &[],
            })
            .copied()
            .collect()
    }

    /// Redraws every parameter at unit scale: linear weights from
    /// N(0, 1/fan_in), biases and batchnorm shifts from N(0, 0.1²), batchnorm
    /// scales from U[0.5, 1.5].
    pub fn recondition<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for layer in self.layers.iter_mut() {
            match layer {
                Layer::Linear { weight, bias, .. } => {
                    let std = 1.0 / (weight.len() as f64 / bias.len() as f64).sqrt();
                    for w in weight.data_mut() {
                        *w = T::from_f64_lossy(std * rng.sample::<f64, _>(StandardNormal));
                    }
                    for b in bias.data_mut() {
                        *b = T::from_f64_lossy(0.1 * rng.sample::<f64, _>(StandardNormal));
                    }
                }
                Layer::BatchNorm { gamma, beta, .. } => {
                    for g in gamma.data_mut() {
                        *g = T::from_f64_lossy(rng.random_range(0.5..1.5));
                    }
                    for b in beta.data_mut() {
                        *b = T::from_f64_lossy(0.1 * rng.sample::<f64, _>(StandardNormal));
                    }
                }
                _ => {}
            }
        }
    }

    /// Trainable tensors in layer order (weight, bias / gamma, beta).
    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for layer in self.layers.iter_mut() {
            match layer {
                Layer::Linear { weight, bias, .. } => {
                    out.push(weight);
                    out.push(bias);
                }
                Layer::BatchNorm { gamma, beta, .. } => {
                    out.push(gamma);
                    out.push(beta);
                }
                _ => {}
            }
        }
        out
    }

    /// Every persistent array (parameters and batchnorm running statistics)
    /// under a stable name.
    pub fn state(&self) -> Vec<(String, &[T])> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Linear { weight, bias, .. } => {
                    out.push((format!("{i}.weight"), weight.data()));
                    out.push((format!("{i}.bias"), bias.data()));
                }
                Layer::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                    ..
                } => {
                    out.push((format!("{i}.gamma"), gamma.data()));
                    out.push((format!("{i}.beta"), beta.data()));
                    out.push((format!("{i}.running_mean"), running_mean.as_slice()));
                    out.push((format!("{i}.running_var"), running_var.as_slice()));
                }
                _ => {}
            }
        }
        out
    }

    /// Mutable view matching [`Mlp::state`] entry for entry.
    pub fn state_mut(&mut self) -> Vec<(String, &mut [T])> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            match layer {
                Layer::Linear { weight, bias, .. } => {
                    out.push((format!("{i}.weight"), weight.data_mut()));
                    out.push((format!("{i}.bias"), bias.data_mut()));
                }
                Layer::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                    ..
                } => {
                    out.push((format!("{i}.gamma"), gamma.data_mut()));
                    out.push((format!("{i}.beta"), beta.data_mut()));
                    out.push((format!("{i}.running_mean"), running_mean.as_mut_slice()));
                    out.push((format!("{i}.running_var"), running_var.as_mut_slice()));
                }
                _ => {}
            }
        }
        out
    }

    /// Copy with every dropout probability set to `p`.
    pub fn with_dropout(&self, p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::param(format!("dropout probability {p} not in [0,1)")));
        }
        let mut out = self.clone();
        for (spec, layer) in out.specs.iter_mut().zip(out.layers.iter_mut()) {
            if let Layer::Dropout { p: lp, .. } = layer {
                *lp = p;
                spec.dropout_p = p;
            }
        }
        Ok(out)
    }

    /// Same network in another scalar type. Caches and gradients are reset.
    pub fn cast<U: Scalar>(&self) -> Mlp<U> {
        let conv = |v: &[T]| -> Vec<U> { v.iter().map(|x| U::from_f64_lossy(x.as_f64())).collect() };
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                Layer::Linear { weight, bias, .. } => Layer::Linear {
                    weight: weight.cast(),
                    bias: bias.cast(),
                    input: Vec::new(),
                },
                Layer::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                    ..
                } => Layer::BatchNorm {
                    gamma: gamma.cast(),
                    beta: beta.cast(),
                    running_mean: conv(running_mean),
                    running_var: conv(running_var),
                    xhat: Vec::new(),
                    inv_std: Vec::new(),
                },
                Layer::Relu { .. } => Layer::Relu { active: Vec::new() },
                Layer::Dropout { p, .. } => Layer::Dropout {
                    p: *p,
                    scale: Vec::new(),
                },
                Layer::ResidualBegin => Layer::ResidualBegin,
                Layer::ResidualEnd => Layer::ResidualEnd,
            })
            .collect();
        Mlp {
            specs: self.specs.clone(),
            layers,
            cached_rows: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn identity_linear(d: usize) -> Mlp<f64> {
        let mut m = Mlp::<f64>::new(vec![LayerSpec::linear(d, d)], &mut seeded(0)).unwrap();
        for (name, v) in m.state_mut() {
            if name.ends_with("weight") {
                v.iter_mut().enumerate().for_each(|(i, w)| *w = if i % (d + 1) == 0 { 1.0 } else { 0.0 });
            }
        }
        m
    }

    #[test]
    fn identity_linear_is_identity() {
        let mut m = identity_linear(3);
        let x = Tensor::matrix(2, 3, vec![1.0, -2.0, 3.5, 0.0, 4.0, -1.0]).unwrap();
        let y = m.forward(&x, Mode::Train, &mut seeded(1)).unwrap();
        assert_eq!(y, x);
        assert_eq!(m.infer(&x).unwrap(), x);
    }

    #[test]
    fn relu_clamps_negatives() {
        let mut m = Mlp::<f64>::new(vec![LayerSpec::relu(3)], &mut seeded(0)).unwrap();
        let x = Tensor::matrix(1, 3, vec![-1.0, 0.0, 2.0]).unwrap();
        let y = m.forward(&x, Mode::Train, &mut seeded(0)).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn zero_dropout_is_identity_in_train_mode() {
        let mut m = Mlp::<f64>::new(vec![LayerSpec::dropout(4, 0.0)], &mut seeded(0)).unwrap();
        let x = Tensor::matrix(2, 4, (0..8).map(f64::from).collect()).unwrap();
        assert_eq!(m.forward(&x, Mode::Train, &mut seeded(3)).unwrap(), x);
    }

    #[test]
    fn dropout_rate_and_rescaling() {
        let p = 0.5;
        let n = 20_000;
        let mut m = Mlp::<f64>::new(vec![LayerSpec::dropout(n, p)], &mut seeded(0)).unwrap();
        let x = Tensor::matrix(1, n, vec![1.0; n]).unwrap();
        let y = m.forward(&x, Mode::Train, &mut seeded(11)).unwrap();
        let zeros = y.data().iter().filter(|&&v| v == 0.0).count() as f64;
        let std = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((zeros - n as f64 * p).abs() <= 3.0 * std);
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 2.0));
        assert_eq!(m.infer(&x).unwrap(), x);
    }

    #[test]
    fn batchnorm_standardizes_batch() {
        let (rows, cols) = (64, 5);
        let mut m = Mlp::<f64>::new(vec![LayerSpec::batchnorm(cols)], &mut seeded(0)).unwrap();
        let data: Vec<f64> = (0..rows * cols)
            .map(|i| 40.0 * ((i * 7919 % 101) as f64 / 101.0) + 3.0 * (i % cols) as f64)
            .collect();
        let y = m.forward(&Tensor::matrix(rows, cols, data).unwrap(), Mode::Train, &mut seeded(0)).unwrap();
        for j in 0..cols {
            let col: Vec<f64> = (0..rows).map(|r| y.data()[r * cols + j]).collect();
            let mean = col.iter().sum::<f64>() / rows as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows as f64;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn residual_adds_saved_input_exactly() {
        let specs = vec![
            LayerSpec::residual_begin(3),
            LayerSpec::linear(3, 3),
            LayerSpec::residual_end(3),
        ];
        let mut m = Mlp::<f64>::new(specs, &mut seeded(5)).unwrap();
        let x = Tensor::matrix(2, 3, vec![0.5, -1.0, 2.0, 3.0, 0.25, -0.75]).unwrap();
        let mut inner = Mlp::<f64>::new(vec![LayerSpec::linear(3, 3)], &mut seeded(0)).unwrap();
        for ((_, dst), (_, src)) in inner.state_mut().into_iter().zip(m.state()) {
            dst.copy_from_slice(src);
        }
        let inner_y = inner.infer(&x).unwrap();
        let y = m.forward(&x, Mode::Train, &mut seeded(0)).unwrap();
        for ((a, b), c) in y.data().iter().zip(inner_y.data()).zip(x.data()) {
            assert_eq!(*a, b + c);
        }
    }

    #[test]
    fn linear_weight_gradient_is_outer_product() {
        // L = sum(W x) for one sample: dL/dW[i][j] = x[j]
        let mut m = Mlp::<f64>::new(vec![LayerSpec::linear(3, 2)], &mut seeded(2)).unwrap();
        let x = Tensor::matrix(1, 3, vec![0.5, -2.0, 3.0]).unwrap();
        m.forward(&x, Mode::Train, &mut seeded(0)).unwrap();
        m.backward(&Tensor::matrix(1, 2, vec![1.0, 1.0]).unwrap()).unwrap();
        let params = m.parameters_mut();
        assert_eq!(params[0].grad().unwrap(), &[0.5, -2.0, 3.0, 0.5, -2.0, 3.0]);
        assert_eq!(params[1].grad().unwrap(), &[1.0, 1.0]);
    }

    #[test]
    fn backward_needs_forward() {
        let mut m = Mlp::<f64>::new(vec![LayerSpec::linear(3, 2)], &mut seeded(2)).unwrap();
        let g = Tensor::matrix(1, 2, vec![1.0, 1.0]).unwrap();
        assert!(matches!(m.backward(&g), Err(Error::State(_))));
        let x = Tensor::matrix(1, 3, vec![0.0; 3]).unwrap();
        m.forward(&x, Mode::Eval, &mut seeded(0)).unwrap();
        assert!(matches!(m.backward(&g), Err(Error::State(_))));
    }

    #[test]
    fn width_mismatch_is_shape_error() {
        let mut m = Mlp::<f32>::new(vec![LayerSpec::linear(3, 2)], &mut seeded(2)).unwrap();
        let x = Tensor::matrix(1, 4, vec![0.0; 4]).unwrap();
        assert!(matches!(m.forward(&x, Mode::Train, &mut seeded(0)), Err(Error::Shape(_))));
        assert!(matches!(m.infer(&x), Err(Error::Shape(_))));
    }

    #[test]
    fn distinct_seeds_give_distinct_weights() {
        let a = Mlp::<f32>::new(vec![LayerSpec::linear(4, 4)], &mut seeded(1)).unwrap();
        let b = Mlp::<f32>::new(vec![LayerSpec::linear(4, 4)], &mut seeded(2)).unwrap();
        assert_ne!(a.state()[0].1, b.state()[0].1);
    }
}
