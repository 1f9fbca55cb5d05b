//! 2d→3d lifting network: an input projection, a stack of equal-width
//! linear+batchnorm+ReLU+dropout layers with identity skips around pairs of
//! them, and an output projection to `3K` coordinates.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{decode_q, encode_p, mask_p, FeatureSet, P_WIDTH, Q_WIDTH};
use crate::nn::{mse_loss, Adam, Checkpoint, LayerSpec, Mlp, Mode, Scalar, Tensor, TrainSchedule};
use crate::ojr::{OjrConfig, OjrStream};
use crate::pose::{Pose2D, Pose3D, ReferenceFrame, NUM_JOINTS};
use crate::rng::{derived, seeded};
use crate::training::{check_finite, epoch_batches, EpochRecord};

/// Rows per inference chunk; bounds the activation memory of large sets.
const INFER_CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoseNet3dConfig {
    pub joints: usize,
    /// Width of the input projection.
    pub hidden0: usize,
    /// Width of every hidden layer `f1..fn`.
    pub hidden: usize,
    pub n_hidden_layers: usize,
    pub dropout_p: f64,
    /// One-based `(first, last)` hidden layers wrapped by an identity skip.
    pub residual_spans: Vec<[usize; 2]>,
}

impl Default for PoseNet3dConfig {
    fn default() -> Self {
        Self {
            joints: NUM_JOINTS,
            hidden0: 1024,
            hidden: 4096,
            n_hidden_layers: 5,
            dropout_p: 0.5,
            residual_spans: vec![[2, 3], [4, 5]],
        }
    }
}

impl PoseNet3dConfig {
    pub fn validate(&self) -> Result<()> {
        if self.joints != NUM_JOINTS {
            return Err(Error::Config(format!("only {NUM_JOINTS}-joint layouts are supported, got {}", self.joints)));
        }
        if self.hidden0 == 0 || self.hidden == 0 || self.n_hidden_layers == 0 {
            return Err(Error::Config("posenet widths and depth must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!("dropout_p {} not in [0,1)", self.dropout_p)));
        }
        let mut prev_end = 1;
        for &[b, e] in &self.residual_spans {
            // f1 changes width, so skips can only start at f2
            if b <= prev_end || e < b || e > self.n_hidden_layers {
                return Err(Error::Config(format!(
                    "residual span [{b}, {e}] must lie in 2..={} and follow the previous span",
                    self.n_hidden_layers
                )));
            }
            prev_end = e;
        }
        Ok(())
    }

    pub fn layer_specs(&self) -> Result<Vec<LayerSpec>> {
        self.validate()?;
        let (h0, h) = (self.hidden0, self.hidden);
        let mut specs = vec![LayerSpec::linear(2 * self.joints, h0)];
        for f in 1..=self.n_hidden_layers {
            if self.residual_spans.iter().any(|s| s[0] == f) {
                specs.push(LayerSpec::residual_begin(h));
            }
            specs.push(LayerSpec::linear(if f == 1 { h0 } else { h }, h));
            specs.push(LayerSpec::batchnorm(h));
            specs.push(LayerSpec::relu(h));
            specs.push(LayerSpec::dropout(h, self.dropout_p));
            if self.residual_spans.iter().any(|s| s[1] == f) {
                specs.push(LayerSpec::residual_end(h));
            }
        }
        specs.push(LayerSpec::linear(h, 3 * self.joints));
        Ok(specs)
    }

    fn write_meta(&self, ck: &mut Checkpoint) {
        ck.set("posenet.joints", self.joints.to_string());
        ck.set("posenet.hidden0", self.hidden0.to_string());
        ck.set("posenet.hidden", self.hidden.to_string());
        ck.set("posenet.n_hidden_layers", self.n_hidden_layers.to_string());
        ck.set("posenet.dropout_p", self.dropout_p.to_string());
        let spans: Vec<String> = self.residual_spans.iter().map(|s| format!("{}-{}", s[0], s[1])).collect();
        ck.set("posenet.residual_spans", spans.join(","));
    }

    fn read_meta(ck: &Checkpoint) -> Result<Self> {
        let num = |k: &str| -> Result<usize> {
            ck.require(k)?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("{k} is not an integer")))
        };
        let spans = ck.require("posenet.residual_spans")?;
        let residual_spans = spans
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                let (a, b) = s.split_once('-').ok_or_else(|| Error::Checkpoint(format!("bad span {s:?}")))?;
                let p = |v: &str| v.parse().map_err(|_| Error::Checkpoint(format!("bad span {s:?}")));
                Ok([p(a)?, p(b)?])
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            joints: num("posenet.joints")?,
            hidden0: num("posenet.hidden0")?,
            hidden: num("posenet.hidden")?,
            n_hidden_layers: num("posenet.n_hidden_layers")?,
            dropout_p: ck
                .require("posenet.dropout_p")?
                .parse()
                .map_err(|_| Error::Checkpoint("posenet.dropout_p is not a number".into()))?,
            residual_spans,
        })
    }
}

/// Freshly initialized lifter network.
pub fn build_posenet3d<T: Scalar>(cfg: &PoseNet3dConfig, seed: u64) -> Result<Mlp<T>> {
    Mlp::new(cfg.layer_specs()?, &mut seeded(seed))
}

pub(crate) fn write_frame(ck: &mut Checkpoint, frame: &ReferenceFrame) {
    ck.set("frame.width", frame.width.to_string());
    ck.set("frame.height", frame.height.to_string());
    ck.set("frame.cube_side", frame.cube_side.to_string());
}

pub(crate) fn read_frame(ck: &Checkpoint) -> Result<ReferenceFrame> {
    let f = |k: &str| -> Result<f64> {
        ck.require(k)?
            .parse()
            .map_err(|_| Error::Checkpoint(format!("{k} is not a number")))
    };
    let frame = ReferenceFrame {
        width: f("frame.width")?,
        height: f("frame.height")?,
        cube_side: f("frame.cube_side")?,
    };
    frame.validate()?;
    Ok(frame)
}

pub(crate) fn expect_model(ck: &Checkpoint, kind: &str) -> Result<()> {
    match ck.require("model")? {
        k if k == kind => Ok(()),
        other => Err(Error::Checkpoint(format!("checkpoint holds a {other} model, expected {kind}"))),
    }
}

/// Eval-mode forward over `rows` input rows of width `in_w`, in chunks.
pub(crate) fn infer_rows(net: &Mlp<f32>, x: &[f32], in_w: usize) -> Result<Vec<f32>> {
    if x.len() % in_w != 0 {
        return Err(Error::shape(format!("input length {} is not a multiple of {in_w}", x.len())));
    }
    let mut out = Vec::with_capacity(x.len() / in_w * net.out_dim());
    for chunk in x.chunks(INFER_CHUNK * in_w) {
        let t = Tensor::matrix(chunk.len() / in_w, in_w, chunk.to_vec())?;
        out.extend_from_slice(net.infer(&t)?.data());
    }
    Ok(out)
}

/// A lifter together with the reference frame its inputs and outputs use.
#[derive(Debug, Clone)]
pub struct PoseNet3d {
    pub cfg: PoseNet3dConfig,
    pub frame: ReferenceFrame,
    pub net: Mlp<f32>,
}

impl PoseNet3d {
    pub fn new(cfg: &PoseNet3dConfig, frame: ReferenceFrame, seed: u64) -> Result<Self> {
        frame.validate()?;
        Ok(Self {
            cfg: cfg.clone(),
            frame,
            net: build_posenet3d(cfg, seed)?,
        })
    }

    /// Lifts one reference-frame 2d pose to hip-relative millimetres.
    pub fn lift(&self, p: &Pose2D) -> Result<Pose3D> {
        if p.len() != self.cfg.joints {
            return Err(Error::shape(format!("pose has {} joints, expected {}", p.len(), self.cfg.joints)));
        }
        let out = self.lift_rows(&encode_p(p, &self.frame))?;
        decode_q(&out, &self.frame)
    }

    /// Network-unit lifting of encoded rows (`n × 2K` → `n × 3K`).
    pub fn lift_rows(&self, p: &[f32]) -> Result<Vec<f32>> {
        infer_rows(&self.net, p, P_WIDTH)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.set("model", "posenet3d");
        self.cfg.write_meta(&mut ck);
        write_frame(&mut ck, &self.frame);
        ck.put_mlp("posenet", &self.net);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        expect_model(ck, "posenet3d")?;
        let cfg = PoseNet3dConfig::read_meta(ck)?;
        let mut model = Self::new(&cfg, read_frame(ck)?, 0)?;
        ck.fill_mlp("posenet", &mut model.net)?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

/// Mean per-joint Euclidean distance over matched pose lists.
pub fn mpjpe(pred: &[Pose3D], gt: &[Pose3D]) -> Result<f64> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(Error::shape(format!("{} predictions for {} ground-truth poses", pred.len(), gt.len())));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (a, b) in pred.iter().zip(gt) {
        if a.len() != b.len() {
            return Err(Error::shape("joint counts differ"));
        }
        for (p, q) in a.coords().iter().zip(b.coords()) {
            sum += ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
            n += 1;
        }
    }
    Ok(sum / n as f64)
}

/// MPJPE in millimetres between encoded `n × 3K` rows.
pub fn mpjpe_rows(pred: &[f32], gt: &[f32], frame: &ReferenceFrame) -> Result<f64> {
    if pred.len() != gt.len() || pred.is_empty() || pred.len() % 3 != 0 {
        return Err(Error::shape(format!("mpjpe over {} vs {} values", pred.len(), gt.len())));
    }
    let sum: f64 = pred
        .chunks_exact(3)
        .zip(gt.chunks_exact(3))
        .map(|(a, b)| {
            let d: f64 = (0..3).map(|i| (a[i] as f64 - b[i] as f64).powi(2)).sum();
            d.sqrt()
        })
        .sum();
    Ok(sum / (pred.len() / 3) as f64 * frame.cube_side)
}

/// Minibatch input rows for `batch`, with each row multiplied by the next
/// pattern of `stream`.
pub(crate) fn gather_p(data: &FeatureSet, batch: &[usize], stream: &mut OjrStream, enabled: bool) -> Vec<f32> {
    let mut x = Vec::with_capacity(batch.len() * P_WIDTH);
    for &i in batch {
        let start = x.len();
        x.extend_from_slice(data.p_row(i));
        if enabled {
            mask_p(&mut x[start..], &stream.next_mask());
        }
    }
    x
}

/// Trains a freshly initialized lifter on `train` (which must carry 3d
/// targets). The schedule's dropout probability replaces the one in `cfg`.
/// Validation MPJPE in millimetres on unoccluded `val` inputs is recorded
/// after every epoch.
pub fn train_posenet3d(
    train: &FeatureSet,
    val: Option<&FeatureSet>,
    cfg: &PoseNet3dConfig,
    frame: ReferenceFrame,
    schedule: &TrainSchedule,
    ojr: &OjrConfig,
) -> Result<(PoseNet3d, Vec<EpochRecord>)> {
    schedule.validate()?;
    if train.is_empty() {
        return Err(Error::data("training set is empty"));
    }
    let targets = train.require_q()?;
    let val_q = val.map(|v| v.require_q()).transpose()?;
    let cfg = PoseNet3dConfig {
        dropout_p: schedule.dropout_p,
        ..cfg.clone()
    };
    let mut model = PoseNet3d::new(&cfg, frame, schedule.seed)?;
    let mut adam = Adam::new(schedule.weight_decay);
    let mut stream = OjrStream::new(ojr)?;
    let mut history = Vec::with_capacity(schedule.epochs);
    for epoch in 0..schedule.epochs {
        let lr = schedule.lr_at(epoch);
        let mut dropout_rng = derived(schedule.seed ^ 0x5eed, epoch as u64);
        let mut loss_sum = 0.0;
        let batches = epoch_batches(train.len(), schedule.batch_size, schedule.seed, epoch);
        for batch in &batches {
            let x = Tensor::matrix(batch.len(), P_WIDTH, gather_p(train, batch, &mut stream, ojr.enabled))?;
            let y: Vec<f32> = batch
                .iter()
                .flat_map(|&i| targets[i * Q_WIDTH..(i + 1) * Q_WIDTH].iter().copied())
                .collect();
            let y = Tensor::matrix(batch.len(), Q_WIDTH, y)?;
            let out = model.net.forward(&x, Mode::Train, &mut dropout_rng)?;
            let loss = mse_loss(&out, &y)?;
            check_finite(loss.value as f64, epoch)?;
            loss_sum += loss.value as f64;
            model.net.zero_grad();
            model.net.backward(&loss.grad)?;
            adam.step(&mut model.net.parameters_mut(), lr)?;
        }
        let val_metric = match (val, val_q) {
            (Some(v), Some(q)) if !v.is_empty() => mpjpe_rows(&model.lift_rows(&v.p)?, q, &frame)?,
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
