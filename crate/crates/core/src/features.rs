//! Conversion between pose records and network tensors.
//!
//! 2d input: joints normalized into the reference frame, then rescaled from
//! `[0, width] × [0, height]` to `[-1, 1]²`. Joints that are invisible or
//! occluded contribute `(0, 0)`, so an occlusion pattern acts as an
//! elementwise product on the input vector.
//!
//! 3d target: world joints made hip-relative and rotated into the camera
//! axes (`x` right, `y` down, `z` forward), divided by the cube side.

use serde::{Deserialize, Serialize};

use crate::data::{PoseDataset, PoseRecord};
use crate::error::{Error, Result};
use crate::ojr::OcclusionMask;
use crate::pose::{normalize_pose2d, normalize_pose3d, BBox, JointLayout, Pose2D, Pose3D, ReferenceFrame, NUM_JOINTS};

pub const P_WIDTH: usize = 2 * NUM_JOINTS;
pub const Q_WIDTH: usize = 3 * NUM_JOINTS;

/// Where the normalization box comes from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BBoxSource {
    /// Tight box around the visible joints, padded.
    #[default]
    Joints,
    /// The record's own `bbox` field, falling back to the joints when absent.
    Record,
}

impl std::str::FromStr for BBoxSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joints" => Ok(Self::Joints),
            "record" => Ok(Self::Record),
            _ => Err(Error::Config(format!("unknown bbox source {s:?} (joints|record)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub frame: ReferenceFrame,
    pub bbox_source: BBoxSource,
    pub bbox_pad: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            frame: ReferenceFrame::default(),
            bbox_source: BBoxSource::Joints,
            bbox_pad: 0.1,
        }
    }
}

impl FeatureConfig {
    pub fn bbox_for(&self, record: &PoseRecord) -> Option<BBox> {
        match (self.bbox_source, record.bbox) {
            (BBoxSource::Record, Some(b)) => Some(b),
            _ => BBox::around_visible(&record.joints2d, self.bbox_pad),
        }
    }

    /// Reference-frame 2d pose of a record. A record without any visible
    /// joint maps to the all-invisible pose.
    pub fn normalized_2d(&self, record: &PoseRecord) -> Result<Pose2D> {
        match self.bbox_for(record) {
            Some(b) => normalize_pose2d(&record.joints2d, &b, &self.frame),
            None => Ok(Pose2D::invisible()),
        }
    }
}

/// Network encoding of a reference-frame pose; hidden joints become zeros.
pub fn encode_p(pose: &Pose2D, frame: &ReferenceFrame) -> Vec<f32> {
    let mut out = vec![0.0f32; P_WIDTH];
    for (j, (c, &v)) in pose.coords().iter().zip(pose.visibility()).enumerate() {
        if v {
            out[2 * j] = (2.0 * c[0] / frame.width - 1.0) as f32;
            out[2 * j + 1] = (2.0 * c[1] / frame.height - 1.0) as f32;
        }
    }
    out
}

/// Zeroes the input slots of every joint the mask hides.
pub fn mask_p(p: &mut [f32], mask: &OcclusionMask) {
    for (j, &v) in mask.visible().iter().enumerate() {
        if !v {
            p[2 * j] = 0.0;
            p[2 * j + 1] = 0.0;
        }
    }
}

/// Same as [`mask_p`] for 3d vectors.
pub fn mask_q(q: &mut [f32], mask: &OcclusionMask) {
    for (j, &v) in mask.visible().iter().enumerate() {
        if !v {
            q[3 * j..3 * j + 3].fill(0.0);
        }
    }
}

pub fn encode_q(pose: &Pose3D, frame: &ReferenceFrame) -> Vec<f32> {
    let mut out = vec![0.0f32; Q_WIDTH];
    for (j, (c, &v)) in pose.coords().iter().zip(pose.visibility()).enumerate() {
        if v {
            for a in 0..3 {
                out[3 * j + a] = (c[a] / frame.cube_side) as f32;
            }
        }
    }
    out
}

/// Inverse of [`encode_q`]: a network output row back to millimetres.
pub fn decode_q(v: &[f32], frame: &ReferenceFrame) -> Result<Pose3D> {
    if v.len() != Q_WIDTH {
        return Err(Error::shape(format!("3d vector has width {}, expected {Q_WIDTH}", v.len())));
    }
    let coords = v
        .chunks_exact(3)
        .map(|c| [c[0] as f64 * frame.cube_side, c[1] as f64 * frame.cube_side, c[2] as f64 * frame.cube_side])
        .collect();
    Pose3D::all_visible(coords)
}

/// Hip-relative 3d pose in the record's camera axes. Without a camera the
/// stored joints are taken to be camera-aligned already.
pub fn camera_aligned_target(record: &PoseRecord, layout: &JointLayout) -> Result<Option<Pose3D>> {
    let Some(p3) = &record.joints3d else {
        return Ok(None);
    };
    let rel = normalize_pose3d(p3, layout)?;
    let Some(cam) = &record.camera else {
        return Ok(Some(rel));
    };
    let coords = rel.coords().iter().map(|&c| cam.rotate(c)).collect();
    Ok(Some(Pose3D::new(coords, rel.visibility().to_vec())?))
}

/// Row-major network-ready arrays for a whole dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub ids: Vec<String>,
    /// `len × P_WIDTH`, unoccluded.
    pub p: Vec<f32>,
    /// `len × Q_WIDTH` targets, present when every record has 3d joints.
    pub q: Option<Vec<f32>>,
    /// Class indices, present when every record is labeled.
    pub labels: Option<Vec<usize>>,
}

impl FeatureSet {
    pub fn from_dataset(ds: &PoseDataset, cfg: &FeatureConfig) -> Result<Self> {
        cfg.frame.validate()?;
        let layout = JointLayout::coco17();
        let mut ids = Vec::with_capacity(ds.len());
        let mut p = Vec::with_capacity(ds.len() * P_WIDTH);
        let mut q = Some(Vec::with_capacity(ds.len() * Q_WIDTH));
        let mut labels = Some(Vec::with_capacity(ds.len()));
        for r in &ds.records {
            if r.joints2d.len() != NUM_JOINTS {
                return Err(Error::data(format!("record {}: {} joints, expected {NUM_JOINTS}", r.id, r.joints2d.len())));
            }
            ids.push(r.id.clone());
            p.extend(encode_p(&cfg.normalized_2d(r)?, &cfg.frame));
            match (q.as_mut(), camera_aligned_target(r, &layout)?) {
                (Some(v), Some(t)) => v.extend(encode_q(&t, &cfg.frame)),
                _ => q = None,
            }
            match (labels.as_mut(), r.label) {
                (Some(v), Some(l)) => v.push(l.index()),
                _ => labels = None,
            }
        }
        Ok(Self { ids, p, q, labels })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn p_row(&self, i: usize) -> &[f32] {
        &self.p[i * P_WIDTH..(i + 1) * P_WIDTH]
    }

    pub fn q_row(&self, i: usize) -> Option<&[f32]> {
        self.q.as_ref().map(|q| &q[i * Q_WIDTH..(i + 1) * Q_WIDTH])
    }

    pub fn require_q(&self) -> Result<&[f32]> {
        self.q
            .as_deref()
            .ok_or_else(|| Error::data("dataset has records without 3d joints"))
    }

    pub fn require_labels(&self) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::data("dataset has unlabeled records"))
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let gather = |src: &[f32], w: usize| -> Vec<f32> {
            idx.iter().flat_map(|&i| src[i * w..(i + 1) * w].iter().copied()).collect()
        };
        Self {
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            p: gather(&self.p, P_WIDTH),
            q: self.q.as_ref().map(|q| gather(q, Q_WIDTH)),
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
        }
    }
}
