//! Evaluation under controlled joint occlusion. Record `i` at level `m` is
//! always hidden with the same pattern, so every model variant is scored on
//! identical inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::{weighted_prf, ClassificationReport};
use crate::fallnet::FallNet;
use crate::features::{mask_p, FeatureSet, P_WIDTH};
use crate::ojr::evaluation_mask;
use crate::pose::NUM_JOINTS;
use crate::posenet::{mpjpe_rows, PoseNet3d};

pub const METRIC_MPJPE: &str = "mpjpe_mm";
pub const METRIC_F1: &str = "weighted_f1";

/// Encoded 2d rows with `m` joints per row hidden.
pub fn occlude_rows(p: &[f32], m: usize, seed: u64) -> Result<Vec<f32>> {
    let mut out = p.to_vec();
    if m == 0 {
        return Ok(out);
    }
    for (i, row) in out.chunks_exact_mut(P_WIDTH).enumerate() {
        mask_p(row, &evaluation_mask(seed, m, i)?);
    }
    Ok(out)
}

/// Lifter MPJPE (mm) over `data` with `m` occluded joints per record.
pub fn evaluate_lifter(posenet: &PoseNet3d, data: &FeatureSet, m: usize, seed: u64) -> Result<f64> {
    let q = data.require_q()?;
    let pred = posenet.lift_rows(&occlude_rows(&data.p, m, seed)?)?;
    mpjpe_rows(&pred, q, &posenet.frame)
}

/// Classifier report over `data` with `m` occluded joints per record.
pub fn evaluate_classifier(
    fallnet: &FallNet,
    posenet: Option<&PoseNet3d>,
    data: &FeatureSet,
    m: usize,
    seed: u64,
) -> Result<ClassificationReport> {
    let gt = data.require_labels()?;
    let preds = fallnet.predict_labels(&occlude_rows(&data.p, m, seed)?, posenet)?;
    weighted_prf(&preds, gt, fallnet.cfg.n_classes)
}

/// One named pipeline variant. The lifter is scored on MPJPE when present
/// and the data has 3d targets; the classifier on weighted F1 when present
/// and the data is labeled.
#[derive(Debug, Clone, Copy)]
pub struct SweepSystem<'a> {
    pub name: &'a str,
    pub posenet: Option<&'a PoseNet3d>,
    pub fallnet: Option<&'a FallNet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: usize,
    pub variant: String,
    pub metric: String,
    pub value: f64,
    pub seed: u64,
    pub dataset_id: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepResult {
    pub seed: u64,
    pub dataset_id: String,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn value(&self, m: usize, variant: &str, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.m == m && r.variant == variant && r.metric == metric)
            .map(|r| r.value)
    }

    /// Variant names in first-appearance order.
    pub fn variants(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.variant) {
                out.push(r.variant.clone());
            }
        }
        out
    }

    pub fn metrics(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.metric) {
                out.push(r.metric.clone());
            }
        }
        out
    }

    /// `(m, value)` points of one curve, in grid order.
    pub fn series(&self, variant: &str, metric: &str) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| r.variant == variant && r.metric == metric)
            .map(|r| (r.m, r.value))
            .collect()
    }
}

pub fn occlusion_sweep(
    systems: &[SweepSystem<'_>],
    data: &FeatureSet,
    m_grid: &[usize],
    seed: u64,
    dataset_id: &str,
) -> Result<SweepResult> {
    if let Some(&m) = m_grid.iter().find(|&&m| m >= NUM_JOINTS) {
        return Err(Error::Config(format!("occlusion level {m} must be below {NUM_JOINTS}")));
    }
    let mut names: Vec<&str> = systems.iter().map(|s| s.name).collect();
    names.sort_unstable();
    names.dedup();
    if names.len() != systems.len() {
        return Err(Error::Config("sweep variant names must be unique".into()));
    }
    let mut rows = Vec::new();
    let mut push = |m: usize, variant: &str, metric: &str, value: f64| {
        rows.push(SweepRow {
            m,
            variant: variant.to_string(),
            metric: metric.to_string(),
            value,
            seed,
            dataset_id: dataset_id.to_string(),
        })
    };
    for &m in m_grid {
        let p = occlude_rows(&data.p, m, seed)?;
        for s in systems {
            let mut lifted = None;
            if let (Some(pn), Some(q)) = (s.posenet, data.q.as_deref()) {
                let pred = pn.lift_rows(&p)?;
                push(m, s.name, METRIC_MPJPE, mpjpe_rows(&pred, q, &pn.frame)?);
                lifted = Some(pred);
            }
            if let (Some(fnet), Some(gt)) = (s.fallnet, data.labels.as_deref()) {
                let q = match lifted {
                    Some(q) if fnet.cfg.q_source != crate::fallnet::QSource::Zeros => q,
                    _ => fnet.q_for(&p, s.posenet)?,
                };
                let preds: Vec<usize> = fnet.classify_rows(&p, &q)?.into_iter().map(|r| r.label).collect();
                push(m, s.name, METRIC_F1, weighted_prf(&preds, gt, fnet.cfg.n_classes)?.weighted_f1);
            }
        }
    }
    Ok(SweepResult {
        seed,
        dataset_id: dataset_id.to_string(),
        rows,
    })
}
