//! Two-modality fall classifier. Separate feature branches read the 2d pose
//! and the lifted 3d pose; their features are summed and an embedding head
//! maps the sum to class logits.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::weighted_prf;
use crate::features::{mask_p, mask_q, FeatureSet, P_WIDTH, Q_WIDTH};
use crate::nn::gradcheck::{biases_before_batchnorm, Objective};
use crate::nn::{cross_entropy_loss, Adam, Checkpoint, LayerSpec, Mlp, Mode, Scalar, Tensor, TrainSchedule};
use crate::ojr::{OcclusionMask, OjrConfig, OjrStream};
use crate::pose::{ReferenceFrame, NUM_JOINTS};
use crate::posenet::{expect_model, read_frame, write_frame, PoseNet3d};
use crate::rng::{derived, seeded};
use crate::training::{check_finite, epoch_batches, EpochRecord};

const INFER_CHUNK: usize = 1024;

/// What feeds the 3d branch during training.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QSource {
    /// The frozen lifter's output for the (occluded) 2d input, as at
    /// inference time.
    #[default]
    Predicted,
    /// Ground-truth 3d joints, occluded with the same pattern as the 2d input.
    GroundTruth,
    /// Zeros: a 2d-only classifier. Also fed zeros at inference.
    Zeros,
}

impl QSource {
    fn as_str(self) -> &'static str {
        match self {
            QSource::Predicted => "predicted",
            QSource::GroundTruth => "ground_truth",
            QSource::Zeros => "zeros",
        }
    }
}

impl std::str::FromStr for QSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "predicted" => Ok(Self::Predicted),
            "ground_truth" => Ok(Self::GroundTruth),
            "zeros" => Ok(Self::Zeros),
            _ => Err(Error::Config(format!("unknown q source {s:?} (predicted|ground_truth|zeros)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FallNetConfig {
    pub joints: usize,
    pub feat_dim: usize,
    /// Linear blocks per branch; blocks after the first share one skip.
    pub n_branch_blocks: usize,
    pub embed_dim: usize,
    pub n_classes: usize,
    pub dropout_p: f64,
    pub q_source: QSource,
}

impl Default for FallNetConfig {
    fn default() -> Self {
        Self {
            joints: NUM_JOINTS,
            feat_dim: 1024,
            n_branch_blocks: 2,
            embed_dim: 256,
            n_classes: 2,
            dropout_p: 0.5,
            q_source: QSource::Predicted,
        }
    }
}

fn block(specs: &mut Vec<LayerSpec>, i: usize, o: usize, p: f64) {
    specs.push(LayerSpec::linear(i, o));
    specs.push(LayerSpec::batchnorm(o));
    specs.push(LayerSpec::relu(o));
    specs.push(LayerSpec::dropout(o, p));
}

impl FallNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.joints != NUM_JOINTS {
            return Err(Error::Config(format!("only {NUM_JOINTS}-joint layouts are supported, got {}", self.joints)));
        }
        if self.feat_dim == 0 || self.embed_dim == 0 || self.n_branch_blocks == 0 {
            return Err(Error::Config("fallnet widths and depth must be positive".into()));
        }
        if self.n_classes < 2 {
            return Err(Error::Config("fallnet needs at least two classes".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!("dropout_p {} not in [0,1)", self.dropout_p)));
        }
        Ok(())
    }

    pub fn branch_specs(&self, in_dim: usize) -> Result<Vec<LayerSpec>> {
        self.validate()?;
        let f = self.feat_dim;
        let mut specs = Vec::new();
        block(&mut specs, in_dim, f, self.dropout_p);
        if self.n_branch_blocks > 1 {
            specs.push(LayerSpec::residual_begin(f));
            for _ in 1..self.n_branch_blocks {
                block(&mut specs, f, f, self.dropout_p);
            }
            specs.push(LayerSpec::residual_end(f));
        }
        Ok(specs)
    }

    pub fn head_specs(&self) -> Result<Vec<LayerSpec>> {
        self.validate()?;
        let mut specs = Vec::new();
        block(&mut specs, self.feat_dim, self.embed_dim, self.dropout_p);
        specs.push(LayerSpec::linear(self.embed_dim, self.n_classes));
        Ok(specs)
    }

    fn write_meta(&self, ck: &mut Checkpoint) {
        ck.set("fallnet.joints", self.joints.to_string());
        ck.set("fallnet.feat_dim", self.feat_dim.to_string());
        ck.set("fallnet.n_branch_blocks", self.n_branch_blocks.to_string());
        ck.set("fallnet.embed_dim", self.embed_dim.to_string());
        ck.set("fallnet.n_classes", self.n_classes.to_string());
        ck.set("fallnet.dropout_p", self.dropout_p.to_string());
        ck.set("fallnet.q_source", self.q_source.as_str());
    }

    fn read_meta(ck: &Checkpoint) -> Result<Self> {
        let num = |k: &str| -> Result<usize> {
            ck.require(k)?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("{k} is not an integer")))
        };
        Ok(Self {
            joints: num("fallnet.joints")?,
            feat_dim: num("fallnet.feat_dim")?,
            n_branch_blocks: num("fallnet.n_branch_blocks")?,
            embed_dim: num("fallnet.embed_dim")?,
            n_classes: num("fallnet.n_classes")?,
            dropout_p: ck
                .require("fallnet.dropout_p")?
                .parse()
                .map_err(|_| Error::Checkpoint("fallnet.dropout_p is not a number".into()))?,
            q_source: ck
                .require("fallnet.q_source")?
                .parse()
                .map_err(|e: Error| Error::Checkpoint(e.to_string()))?,
        })
    }
}

/// The three networks: 2d branch `fp`, 3d branch `fq`, embedding head `g`.
#[derive(Debug, Clone)]
pub struct FallNetNets<T> {
    pub fp: Mlp<T>,
    pub fq: Mlp<T>,
    pub g: Mlp<T>,
}

impl<T: Scalar> FallNetNets<T> {
    pub fn new(cfg: &FallNetConfig, seed: u64) -> Result<Self> {
        let mut rng = seeded(seed);
        Ok(Self {
            fp: Mlp::new(cfg.branch_specs(2 * cfg.joints)?, &mut rng)?,
            fq: Mlp::new(cfg.branch_specs(3 * cfg.joints)?, &mut rng)?,
            g: Mlp::new(cfg.head_specs()?, &mut rng)?,
        })
    }

    /// Logits for a batch; train mode keeps intermediates for `backward`.
    pub fn forward<R: Rng + ?Sized>(&mut self, p: &Tensor<T>, q: &Tensor<T>, mode: Mode, rng: &mut R) -> Result<Tensor<T>> {
        let a = self.fp.forward(p, mode, rng)?;
        let b = self.fq.forward(q, mode, rng)?;
        self.g.forward(&sum(&a, &b)?, mode, rng)
    }

    pub fn infer(&self, p: &Tensor<T>, q: &Tensor<T>) -> Result<Tensor<T>> {
        let a = self.fp.infer(p)?;
        let b = self.fq.infer(q)?;
        self.g.infer(&sum(&a, &b)?)
    }

    /// Back-propagates logit gradients; the summed features pass the same
    /// gradient to both branches.
    pub fn backward(&mut self, grad_logits: &Tensor<T>) -> Result<()> {
        let ds = self.g.backward(grad_logits)?;
        self.fp.backward(&ds)?;
        self.fq.backward(&ds)?;
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.fp.zero_grad();
        self.fq.zero_grad();
        self.g.zero_grad();
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = self.fp.parameters_mut();
        out.extend(self.fq.parameters_mut());
        out.extend(self.g.parameters_mut());
        out
    }

    pub fn cast<U: Scalar>(&self) -> FallNetNets<U> {
        FallNetNets {
            fp: self.fp.cast(),
            fq: self.fq.cast(),
            g: self.g.cast(),
        }
    }

    pub fn with_dropout(&self, p: f64) -> Result<Self> {
        Ok(Self {
            fp: self.fp.with_dropout(p)?,
            fq: self.fq.with_dropout(p)?,
            g: self.g.with_dropout(p)?,
        })
    }

    /// See [`Mlp::recondition`].
    pub fn recondition<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.fp.recondition(rng);
        self.fq.recondition(rng);
        self.g.recondition(rng);
    }

    pub fn parameter_count(&self) -> usize {
        self.fp.parameter_count() + self.fq.parameter_count() + self.g.parameter_count()
    }
}

fn sum<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!("branch outputs differ: {:?} vs {:?}", a.shape(), b.shape())));
    }
    let v = a.data().iter().zip(b.data()).map(|(&x, &y)| x + y).collect();
    Tensor::new(a.shape().to_vec(), v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FallPrediction {
    pub probs: Vec<f64>,
    pub logits: Vec<f64>,
    /// Argmax; ties go to the lowest class index (no-fall).
    pub label: usize,
}

impl FallPrediction {
    pub fn from_logits(logits: &[f64]) -> Self {
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|&v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        let probs: Vec<f64> = e.iter().map(|v| v / s).collect();
        let mut label = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[label] {
                label = i;
            }
        }
        Self {
            probs,
            logits: logits.to_vec(),
            label,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FallNet {
    pub cfg: FallNetConfig,
    pub frame: ReferenceFrame,
    pub nets: FallNetNets<f32>,
}

impl FallNet {
    pub fn new(cfg: &FallNetConfig, frame: ReferenceFrame, seed: u64) -> Result<Self> {
        frame.validate()?;
        Ok(Self {
            cfg: cfg.clone(),
            frame,
            nets: FallNetNets::new(cfg, seed)?,
        })
    }

    pub fn classify(&self, p: &[f32], q: &[f32]) -> Result<FallPrediction> {
        Ok(self.classify_rows(p, q)?.remove(0))
    }

    /// Predictions for `n` rows of encoded 2d (`n × 2K`) and 3d (`n × 3K`)
    /// inputs.
    pub fn classify_rows(&self, p: &[f32], q: &[f32]) -> Result<Vec<FallPrediction>> {
        let (pw, qw) = (2 * self.cfg.joints, 3 * self.cfg.joints);
        if p.is_empty() || p.len() % pw != 0 || q.len() != p.len() / pw * qw {
            return Err(Error::shape(format!("{} 2d values and {} 3d values do not form rows", p.len(), q.len())));
        }
        let mut out = Vec::with_capacity(p.len() / pw);
        for (pc, qc) in p.chunks(INFER_CHUNK * pw).zip(q.chunks(INFER_CHUNK * qw)) {
            let rows = pc.len() / pw;
            let logits = self
                .nets
                .infer(&Tensor::matrix(rows, pw, pc.to_vec())?, &Tensor::matrix(rows, qw, qc.to_vec())?)?;
            for r in 0..rows {
                let l: Vec<f64> = logits.row(r).iter().map(|&v| v as f64).collect();
                out.push(FallPrediction::from_logits(&l));
            }
        }
        Ok(out)
    }

    /// 3d-branch input for encoded 2d rows: zeros for a 2d-only model,
    /// otherwise the lifter's output.
    pub fn q_for(&self, p: &[f32], posenet: Option<&PoseNet3d>) -> Result<Vec<f32>> {
        if self.cfg.q_source == QSource::Zeros {
            return Ok(vec![0.0; p.len() / P_WIDTH * Q_WIDTH]);
        }
        let lifter = posenet.ok_or_else(|| Error::Config("this classifier needs a 3d lifter".into()))?;
        if lifter.frame != self.frame {
            return Err(Error::Config("lifter and classifier use different reference frames".into()));
        }
        lifter.lift_rows(p)
    }

    /// Labels for encoded 2d rows, lifting them first when needed.
    pub fn predict_labels(&self, p: &[f32], posenet: Option<&PoseNet3d>) -> Result<Vec<usize>> {
        let q = self.q_for(p, posenet)?;
        Ok(self.classify_rows(p, &q)?.into_iter().map(|r| r.label).collect())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.set("model", "fallnet");
        self.cfg.write_meta(&mut ck);
        write_frame(&mut ck, &self.frame);
        ck.put_mlp("fp", &self.nets.fp);
        ck.put_mlp("fq", &self.nets.fq);
        ck.put_mlp("g", &self.nets.g);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        expect_model(ck, "fallnet")?;
        let cfg = FallNetConfig::read_meta(ck)?;
        let mut model = Self::new(&cfg, read_frame(ck)?, 0)?;
        ck.fill_mlp("fp", &mut model.nets.fp)?;
        ck.fill_mlp("fq", &mut model.nets.fq)?;
        ck.fill_mlp("g", &mut model.nets.g)?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

/// Rejects empty and single-class label sets.
pub fn check_labels(labels: &[usize], n_classes: usize) -> Result<()> {
    if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::LabelOutOfRange { label: l, classes: n_classes });
    }
    let first = labels
        .first()
        .ok_or_else(|| Error::DegenerateLabels("training set is empty".into()))?;
    if labels.iter().all(|l| l == first) {
        return Err(Error::DegenerateLabels(format!("every training label is class {first}")));
    }
    Ok(())
}

/// Trains a fresh classifier. With `QSource::Predicted`, `posenet` is the
/// frozen lifter that produces the 3d input from the same (occluded) 2d
/// rows the classifier sees. The schedule's dropout probability replaces the
/// one in `cfg`. Validation weighted F1 on unoccluded `val`
/// inputs is recorded after each epoch.
pub fn train_fallnet(
    train: &FeatureSet,
    val: Option<&FeatureSet>,
    posenet: Option<&PoseNet3d>,
    cfg: &FallNetConfig,
    frame: ReferenceFrame,
    schedule: &TrainSchedule,
    ojr: &OjrConfig,
) -> Result<(FallNet, Vec<EpochRecord>)> {
    schedule.validate()?;
    let labels = train.require_labels()?;
    check_labels(labels, cfg.n_classes)?;
    let cfg = &FallNetConfig {
        dropout_p: schedule.dropout_p,
        ..cfg.clone()
    };
    let mut model = FallNet::new(cfg, frame, schedule.seed)?;
    let lifter = match cfg.q_source {
        QSource::Predicted => {
            let l = posenet.ok_or_else(|| Error::Config("predicted 3d input needs a trained lifter".into()))?;
            if l.frame != frame {
                return Err(Error::Config("lifter and classifier use different reference frames".into()));
            }
            Some(l)
        }
        _ => None,
    };
    let gt_q = match cfg.q_source {
        QSource::GroundTruth => Some(train.require_q()?),
        _ => None,
    };
    // without occlusion the lifter's output per sample never changes
    let fixed_q = match (lifter, ojr.enabled) {
        (Some(l), false) => Some(l.lift_rows(&train.p)?),
        _ => None,
    };
    let val_labels = val.map(|v| v.require_labels()).transpose()?;

    let mut adam = Adam::new(schedule.weight_decay);
    let mut stream = OjrStream::new(ojr)?;
    let mut history = Vec::with_capacity(schedule.epochs);
    for epoch in 0..schedule.epochs {
        let lr = schedule.lr_at(epoch);
        let mut dropout_rng = derived(schedule.seed ^ 0xfa11, epoch as u64);
        let mut loss_sum = 0.0;
        let batches = epoch_batches(train.len(), schedule.batch_size, schedule.seed, epoch);
        for batch in &batches {
            let mut x = Vec::with_capacity(batch.len() * P_WIDTH);
            let mut masks = Vec::with_capacity(batch.len());
            for &i in batch {
                let start = x.len();
                x.extend_from_slice(train.p_row(i));
                let mask = if ojr.enabled {
                    stream.next_mask()
                } else {
                    OcclusionMask::all_visible(NUM_JOINTS)
                };
                mask_p(&mut x[start..], &mask);
                masks.push(mask);
            }
            let q = match (cfg.q_source, &fixed_q) {
                (QSource::Zeros, _) => vec![0.0; batch.len() * Q_WIDTH],
                (QSource::Predicted, Some(all)) => gather(all, batch, Q_WIDTH),
                (QSource::Predicted, None) => lifter.expect("checked above").lift_rows(&x)?,
                (QSource::GroundTruth, _) => {
                    let mut q = gather(gt_q.expect("checked above"), batch, Q_WIDTH);
                    for (row, m) in q.chunks_exact_mut(Q_WIDTH).zip(&masks) {
                        mask_q(row, m);
                    }
                    q
                }
            };
            let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let logits = model.nets.forward(
                &Tensor::matrix(batch.len(), P_WIDTH, x)?,
                &Tensor::matrix(batch.len(), Q_WIDTH, q)?,
                Mode::Train,
                &mut dropout_rng,
            )?;
            let loss = cross_entropy_loss(&logits, &y)?;
            check_finite(loss.value as f64, epoch)?;
            loss_sum += loss.value as f64;
            model.nets.zero_grad();
            model.nets.backward(&loss.grad)?;
            adam.step(&mut model.nets.parameters_mut(), lr)?;
        }
        let val_metric = match (val, val_labels) {
            (Some(v), Some(gt)) if !v.is_empty() => {
                let preds = model.predict_labels(&v.p, posenet)?;
                weighted_prf(&preds, gt, cfg.n_classes)?.weighted_f1
            }
            _ => f64::NAN,
        };
        history.push(EpochRecord {
            epoch: epoch + 1,
            lr,
            train_loss: loss_sum / batches.len() as f64,
            val_metric,
        });
    }
    Ok((model, history))
}

fn gather(src: &[f32], idx: &[usize], w: usize) -> Vec<f32> {
    idx.iter().flat_map(|&i| src[i * w..(i + 1) * w].iter().copied()).collect()
}

/// Full classifier graph in f64, train-mode batch statistics, no dropout,
/// cross-entropy against fixed labels. Used for gradient checking.
#[derive(Debug, Clone)]
pub struct FallNetObjective {
    pub nets: FallNetNets<f64>,
    pub p: Tensor<f64>,
    pub q: Tensor<f64>,
    pub labels: Vec<usize>,
}

impl FallNetObjective {
    pub fn new(nets: &FallNetNets<f64>, p: Tensor<f64>, q: Tensor<f64>, labels: Vec<usize>) -> Result<Self> {
        Ok(Self {
            nets: nets.with_dropout(0.0)?,
            p,
            q,
            labels,
        })
    }
}

impl Objective for FallNetObjective {
    fn evaluate(&mut self, backward: bool) -> Result<f64> {
        let mut rng = seeded(0);
        let logits = self.nets.forward(&self.p, &self.q, Mode::Train, &mut rng)?;
        let loss = cross_entropy_loss(&logits, &self.labels)?;
        if backward {
            self.nets.zero_grad();
            self.nets.backward(&loss.grad)?;
        }
        Ok(loss.value)
    }

    fn parameters(&mut self) -> Vec<&mut Tensor<f64>> {
        self.nets.parameters_mut()
    }

    fn structurally_zero(&self) -> Vec<usize> {
        let n_fp = self.nets.fp.specs().iter().map(|s| s.parameter_count().min(1) * 2).sum::<usize>();
        let n_fq = self.nets.fq.specs().iter().map(|s| s.parameter_count().min(1) * 2).sum::<usize>();
        let mut out = biases_before_batchnorm(&self.nets.fp);
        out.extend(biases_before_batchnorm(&self.nets.fq).into_iter().map(|i| i + n_fp));
        out.extend(biases_before_batchnorm(&self.nets.g).into_iter().map(|i| i + n_fp + n_fq));
        out
    }

    fn activation_pattern(&self) -> Vec<bool> {
        let mut out = self.nets.fp.relu_pattern();
        out.extend(self.nets.fq.relu_pattern());
        out.extend(self.nets.g.relu_pattern());
        out
    }
}
