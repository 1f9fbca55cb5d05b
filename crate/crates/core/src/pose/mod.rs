//! Joint layout, 2d/3d pose containers and their normalization.
//!
//! Invisible joints always carry zero coordinates (and zero confidence for 2d
//! poses). Occlusion is the multiplicative zeroing of a joint, so a pose that
//! went through an occlusion mask and a pose whose joint was never observed
//! look the same downstream.

pub mod coco;
pub mod heatmap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Joint count of the COCO keypoint layout.
pub const NUM_JOINTS: usize = 17;

pub const COCO_JOINT_NAMES: [&str; NUM_JOINTS] = [
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
];

/// COCO has no pelvis-center keypoint; the left hip serves as the root.
pub const COCO_HIP_INDEX: usize = 11;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointLayout {
    names: Vec<String>,
    hip_index: usize,
}

impl JointLayout {
    pub fn new(names: Vec<String>, hip_index: usize) -> Result<Self> {
        if names.len() != NUM_JOINTS {
            return Err(Error::param(format!(
                "joint layout must have {NUM_JOINTS} joints, got {}",
                names.len()
            )));
        }
        if hip_index >= names.len() {
            return Err(Error::param(format!("hip index {hip_index} out of range")));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(Error::param(format!("duplicate joint name {a:?}")));
            }
        }
        Ok(Self { names, hip_index })
    }

    pub fn coco17() -> Self {
        Self {
            names: COCO_JOINT_NAMES.iter().map(|s| s.to_string()).collect(),
            hip_index: COCO_HIP_INDEX,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn hip_index(&self) -> usize {
        self.hip_index
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

impl Default for JointLayout {
    fn default() -> Self {
        Self::coco17()
    }
}

/// Target space of the normalized fall representation: a square reference
/// image for 2d joints and a cube (side in millimetres) for 3d joints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceFrame {
    pub width: f64,
    pub height: f64,
    pub cube_side: f64,
}

impl Default for ReferenceFrame {
    fn default() -> Self {
        Self {
            width: 224.0,
            height: 224.0,
            cube_side: 1000.0,
        }
    }
}

impl ReferenceFrame {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.width) && ok(self.height) && ok(self.cube_side) {
            Ok(())
        } else {
            Err(Error::param(format!("reference frame must be positive, got {self:?}")))
        }
    }
}

/// Axis-aligned rectangle in pixel coordinates, stored as corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    /// COCO convention `[x, y, width, height]`.
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self::from_corners(x, y, x + w, y + h)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn center(&self) -> [f64; 2] {
        [0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)]
    }

    pub fn is_degenerate(&self) -> bool {
        let finite = [self.x0, self.y0, self.x1, self.y1].iter().all(|v| v.is_finite());
        !finite || !(self.width() > 0.0) || !(self.height() > 0.0)
    }

    /// Tight box around the visible joints, grown by `pad_frac` of its longer
    /// side on every edge. Each extent is at least one pixel so that a single
    /// joint or a perfectly straight limb still yields a usable box.
    /// Returns `None` when no joint is visible.
    pub fn around_visible(pose: &Pose2D, pad_frac: f64) -> Option<Self> {
        let mut it = pose.visible_coords();
        let first = it.next()?;
        let (mut x0, mut y0, mut x1, mut y1) = (first[0], first[1], first[0], first[1]);
        for [x, y] in it {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        let pad = pad_frac * (x1 - x0).max(y1 - y0);
        let (mut x0, mut y0, mut x1, mut y1) = (x0 - pad, y0 - pad, x1 + pad, y1 + pad);
        if x1 - x0 < 1.0 {
            let c = 0.5 * (x0 + x1);
            x0 = c - 0.5;
            x1 = c + 0.5;
        }
        if y1 - y0 < 1.0 {
            let c = 0.5 * (y0 + y1);
            y0 = c - 0.5;
            y1 = c + 0.5;
        }
        Some(Self::from_corners(x0, y0, x1, y1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    coords: Vec<[f64; 2]>,
    visibility: Vec<bool>,
    confidence: Vec<f64>,
}

impl Pose2D {
    /// Builds a pose, forcing the invisible-joint convention (zero coordinates
    /// and zero confidence) onto joints whose visibility is false.
    pub fn new(coords: Vec<[f64; 2]>, visibility: Vec<bool>, confidence: Vec<f64>) -> Result<Self> {
        let k = coords.len();
        if k != NUM_JOINTS || visibility.len() != k || confidence.len() != k {
            return Err(Error::shape(format!(
                "2d pose needs {NUM_JOINTS} coords/visibility/confidence, got {}/{}/{}",
                k,
                visibility.len(),
                confidence.len()
            )));
        }
        let mut pose = Self {
            coords,
            visibility,
            confidence,
        };
        for j in 0..k {
            if pose.visibility[j] {
                if !pose.coords[j].iter().all(|v| v.is_finite()) {
                    return Err(Error::data(format!("joint {j} has non-finite coordinates")));
                }
                pose.confidence[j] = pose.confidence[j].clamp(0.0, 1.0);
            } else {
                pose.coords[j] = [0.0, 0.0];
                pose.confidence[j] = 0.0;
            }
        }
        Ok(pose)
    }

    /// Pose with confidence 1 on every visible joint.
    pub fn from_visible(coords: Vec<[f64; 2]>, visibility: Vec<bool>) -> Result<Self> {
        let confidence = visibility.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
        Self::new(coords, visibility, confidence)
    }

    pub fn invisible() -> Self {
        Self {
            coords: vec![[0.0; 2]; NUM_JOINTS],
            visibility: vec![false; NUM_JOINTS],
            confidence: vec![0.0; NUM_JOINTS],
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn visibility(&self) -> &[bool] {
        &self.visibility
    }

    pub fn confidence(&self) -> &[f64] {
        &self.confidence
    }

    pub fn visible_count(&self) -> usize {
        self.visibility.iter().filter(|&&v| v).count()
    }

    pub fn visible_coords(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.coords
            .iter()
            .zip(&self.visibility)
            .filter(|(_, &v)| v)
            .map(|(c, _)| *c)
    }

    /// Hides joint `j`, zeroing its coordinates and confidence.
    pub fn hide(&mut self, j: usize) {
        self.coords[j] = [0.0, 0.0];
        self.visibility[j] = false;
        self.confidence[j] = 0.0;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose3D {
    coords: Vec<[f64; 3]>,
    visibility: Vec<bool>,
}

impl Pose3D {
    pub fn new(coords: Vec<[f64; 3]>, visibility: Vec<bool>) -> Result<Self> {
        if coords.len() != NUM_JOINTS || visibility.len() != NUM_JOINTS {
            return Err(Error::shape(format!(
                "3d pose needs {NUM_JOINTS} coords/visibility, got {}/{}",
                coords.len(),
                visibility.len()
            )));
        }
        let mut pose = Self { coords, visibility };
        for j in 0..NUM_JOINTS {
            if !pose.visibility[j] {
                pose.coords[j] = [0.0; 3];
            } else if !pose.coords[j].iter().all(|v| v.is_finite()) {
                return Err(Error::data(format!("joint {j} has non-finite coordinates")));
            }
        }
        Ok(pose)
    }

    pub fn all_visible(coords: Vec<[f64; 3]>) -> Result<Self> {
        let n = coords.len();
        Self::new(coords, vec![true; n])
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    pub fn visibility(&self) -> &[bool] {
        &self.visibility
    }

    pub fn hide(&mut self, j: usize) {
        self.coords[j] = [0.0; 3];
        self.visibility[j] = false;
    }
}

/// Maps joints from the source image into the reference frame so that the
/// bounding box corners land on the frame corners. The mapping is affine per
/// axis and does not preserve aspect ratio.
pub fn normalize_pose2d(raw: &Pose2D, bbox: &BBox, frame: &ReferenceFrame) -> Result<Pose2D> {
    if bbox.is_degenerate() {
        return Err(Error::DegenerateGeometry(format!(
            "bounding box must have positive finite extent, got {bbox:?}"
        )));
    }
    frame.validate()?;
    let (w, h) = (bbox.width(), bbox.height());
    let mut out = raw.clone();
    for (c, &v) in out.coords.iter_mut().zip(&raw.visibility) {
        if v {
            // divide first so box corners land exactly on frame corners
            *c = [(c[0] - bbox.x0) / w * frame.width, (c[1] - bbox.y0) / h * frame.height];
        }
    }
    Ok(out)
}

/// Translates the pose so the hip joint sits exactly at the origin.
pub fn normalize_pose3d(raw: &Pose3D, layout: &JointLayout) -> Result<Pose3D> {
    let hip = layout.hip_index();
    if hip >= raw.len() || !raw.visibility[hip] || !raw.coords[hip].iter().all(|v| v.is_finite()) {
        return Err(Error::MissingRoot(hip));
    }
    let root = raw.coords[hip];
    let mut out = raw.clone();
    for (c, &v) in out.coords.iter_mut().zip(&raw.visibility) {
        if v {
            *c = [c[0] - root[0], c[1] - root[1], c[2] - root[2]];
        }
    }
    Ok(out)
}
