//! Synthetic labeled pose generator: forward kinematics over a bone tree,
//! random cameras, pinhole projection.

pub mod camera;
pub mod skeleton;

use std::collections::BTreeMap;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FallLabel, PoseDataset, PoseRecord};
use crate::error::{Error, Result};
use crate::pose::BBox;
use crate::rng::derived;

pub use camera::{project, sample_camera, Camera, CameraBounds};
pub use skeleton::{sample_skeleton, torso_inclination_deg, PoseClass, PoseClassSpec, SkeletonTemplate};

/// Padding applied to the stored detector-style box around visible joints.
pub const RECORD_BBOX_PAD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub size: usize,
    pub seed: u64,
    /// Class weights; must sum to 1.
    pub class_mix: BTreeMap<PoseClass, f64>,
    /// Uniform per-record bone-length jitter, as a fraction.
    pub scale_jitter: f64,
    pub camera: CameraBounds,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let mut class_mix = BTreeMap::new();
        for c in PoseClass::ALL {
            let w = match c.label() {
                FallLabel::NoFall => 0.5 / 4.0,
                FallLabel::Fall => 0.5 / 3.0,
            };
            class_mix.insert(c, w);
        }
        Self {
            size: 10_000,
            seed: 0,
            class_mix,
            scale_jitter: 0.1,
            camera: CameraBounds::default(),
        }
    }
}

impl GeneratorConfig {
    /// Cameras close to the ground plane, where lying and upright bodies are
    /// hardest to tell apart in the image.
    pub fn low_elevation(size: usize, seed: u64) -> Self {
        let mut cfg = Self {
            size,
            seed,
            ..Self::default()
        };
        cfg.camera.elevation_deg = [0.0, 8.0];
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::Config("dataset size must be positive".into()));
        }
        if self.class_mix.values().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config("class weights must be non-negative".into()));
        }
        let total: f64 = self.class_mix.values().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!("class mix sums to {total}, expected 1")));
        }
        if !(0.0..0.5).contains(&self.scale_jitter) {
            return Err(Error::Config(format!("scale jitter {} outside [0, 0.5)", self.scale_jitter)));
        }
        self.camera.validate()
    }

    fn classes(&self) -> (Vec<PoseClass>, WeightedIndex<f64>) {
        let classes: Vec<PoseClass> = self.class_mix.keys().copied().collect();
        let dist = WeightedIndex::new(self.class_mix.values().copied()).expect("validated weights");
        (classes, dist)
    }
}

/// One record from its own RNG stream so that record `i` does not depend on
/// how many records are generated or in what order.
pub fn generate_record(
    cfg: &GeneratorConfig,
    classes: &[PoseClass],
    dist: &WeightedIndex<f64>,
    template: &SkeletonTemplate,
    index: usize,
) -> PoseRecord {
    let mut rng = derived(cfg.seed, index as u64);
    let class = classes[dist.sample(&mut rng)];
    let scale = if cfg.scale_jitter > 0.0 {
        1.0 + rng.random_range(-cfg.scale_jitter..cfg.scale_jitter)
    } else {
        1.0
    };
    let spec = PoseClassSpec::for_class(class);
    let (joints3d, label) = sample_skeleton(&spec, &template.scaled(scale), &mut rng);
    let n = joints3d.len() as f64;
    let mut centroid = [0.0; 3];
    for c in joints3d.coords() {
        for a in 0..3 {
            centroid[a] += c[a] / n;
        }
    }
    let camera = sample_camera(&mut rng, &cfg.camera, centroid).expect("validated bounds");
    let joints2d = project(&joints3d, &camera);
    let bbox = BBox::around_visible(&joints2d, RECORD_BBOX_PAD);
    PoseRecord {
        id: format!("{index:06}"),
        label: Some(label),
        class: Some(class.name().to_string()),
        joints2d,
        joints3d: Some(joints3d),
        camera: Some(camera),
        bbox,
    }
}

pub fn generate_dataset(cfg: &GeneratorConfig) -> Result<PoseDataset> {
    cfg.validate()?;
    let (classes, dist) = cfg.classes();
    let template = SkeletonTemplate::default();
    let one = |i: usize| generate_record(cfg, &classes, &dist, &template, i);
    #[cfg(feature = "parallel")]
    let records = {
        use rayon::prelude::*;
        (0..cfg.size).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let records = (0..cfg.size).map(one).collect();
    Ok(PoseDataset::new(records))
}

/// Largest pixel distance between stored visible 2d joints and the
/// reprojection of the stored 3d joints. `None` if the record carries no 3d
/// pose or no camera, or if a stored-visible joint no longer projects.
pub fn reprojection_error(record: &PoseRecord) -> Option<f64> {
    let (p3, cam) = (record.joints3d.as_ref()?, record.camera.as_ref()?);
    let mut worst = 0.0f64;
    for j in 0..record.joints2d.len() {
        if !record.joints2d.visibility()[j] {
            continue;
        }
        let uv = cam.project_point(p3.coords()[j])?;
        let s = record.joints2d.coords()[j];
        worst = worst.max((uv[0] - s[0]).hypot(uv[1] - s[1]));
    }
    Some(worst)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GenerationSummary {
    pub total: usize,
    pub per_class: BTreeMap<String, usize>,
    pub per_label: BTreeMap<String, usize>,
    pub max_reprojection_px: f64,
    pub fully_visible: usize,
}

impl GenerationSummary {
    pub fn of(ds: &PoseDataset) -> Self {
        let mut s = Self {
            total: ds.len(),
            ..Self::default()
        };
        for r in &ds.records {
            let class = r.class.clone().unwrap_or_else(|| "unknown".into());
            *s.per_class.entry(class).or_default() += 1;
            let label = r.label.map_or("unlabeled", |l| l.as_str());
            *s.per_label.entry(label.to_string()).or_default() += 1;
            if let Some(e) = reprojection_error(r) {
                s.max_reprojection_px = s.max_reprojection_px.max(e);
            }
            if r.joints2d.visible_count() == r.joints2d.len() {
                s.fully_visible += 1;
            }
        }
        s
    }
}
