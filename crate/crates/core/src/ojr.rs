//! Occluded-joints resilience: binary per-joint visibility patterns applied
//! multiplicatively to poses, drawn fresh for every training sample.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::Rng;
use rand::distr::{weighted::WeightedIndex, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{Pose2D, Pose3D, COCO_HIP_INDEX, NUM_JOINTS};
use crate::rng::{derived, StreamRng};

/// `visible[j] == false` hides joint `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OcclusionMask {
    visible: Vec<bool>,
}

impl OcclusionMask {
    pub fn all_visible(k: usize) -> Self {
        Self { visible: vec![true; k] }
    }

    pub fn from_visibility(visible: Vec<bool>) -> Self {
        Self { visible }
    }

    pub fn len(&self) -> usize {
        self.visible.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visible.is_empty()
    }

    pub fn visible(&self) -> &[bool] {
        &self.visible
    }

    pub fn occluded_count(&self) -> usize {
        self.visible.iter().filter(|&&v| !v).count()
    }

    /// Pattern packed into bits (bit `j` set when joint `j` is hidden).
    pub fn bits(&self) -> u64 {
        self.visible
            .iter()
            .enumerate()
            .fold(0u64, |acc, (j, &v)| if v { acc } else { acc | (1 << j) })
    }
}

/// Draws a mask with exactly `m` hidden joints chosen uniformly among the
/// eligible ones (all joints except `protected`, when given).
pub fn sample_occlusion_pattern<R: Rng + ?Sized>(
    k: usize,
    m: usize,
    protected: Option<usize>,
    rng: &mut R,
) -> Result<OcclusionMask> {
    if m >= k {
        return Err(Error::param(format!("cannot occlude {m} of {k} joints")));
    }
    let eligible: Vec<usize> = (0..k).filter(|&j| Some(j) != protected).collect();
    if m > eligible.len() {
        return Err(Error::param(format!("only {} joints are eligible for occlusion", eligible.len())));
    }
    let mut visible = vec![true; k];
    for i in sample(rng, eligible.len(), m) {
        visible[eligible[i]] = false;
    }
    Ok(OcclusionMask { visible })
}

/// Poses that can be multiplied by an occlusion pattern.
pub trait Occludable: Sized {
    fn apply_occlusion(&self, mask: &OcclusionMask) -> Result<Self>;
}

impl Occludable for Pose2D {
    fn apply_occlusion(&self, mask: &OcclusionMask) -> Result<Self> {
        check_len(self.len(), mask)?;
        let mut out = self.clone();
        for (j, &v) in mask.visible.iter().enumerate() {
            if !v {
                out.hide(j);
            }
        }
        Ok(out)
    }
}

impl Occludable for Pose3D {
    fn apply_occlusion(&self, mask: &OcclusionMask) -> Result<Self> {
        check_len(self.len(), mask)?;
        let mut out = self.clone();
        for (j, &v) in mask.visible.iter().enumerate() {
            if !v {
                out.hide(j);
            }
        }
        Ok(out)
    }
}

fn check_len(k: usize, mask: &OcclusionMask) -> Result<()> {
    if mask.len() != k {
        return Err(Error::shape(format!("mask has {} entries for a {k}-joint pose", mask.len())));
    }
    Ok(())
}

pub fn apply_occlusion<P: Occludable>(pose: &P, mask: &OcclusionMask) -> Result<P> {
    pose.apply_occlusion(mask)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OjrConfig {
    pub enabled: bool,
    pub max_occluded: usize,
    /// Probability of hiding `m` joints, for `m = 0..=max_occluded`.
    pub count_distribution: Vec<f64>,
    pub protect_hip: bool,
    pub seed: u64,
}

impl Default for OjrConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            max_occluded: 8,
            count_distribution: vec![1.0 / 9.0; 9],
            protect_hip: false,
            seed: 0,
        }
    }
}

impl OjrConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    /// Uniform count distribution over `0..=max_occluded`.
    pub fn uniform(max_occluded: usize, seed: u64) -> Self {
        let n = max_occluded + 1;
        Self {
            enabled: true,
            max_occluded,
            count_distribution: vec![1.0 / n as f64; n],
            protect_hip: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_occluded >= NUM_JOINTS {
            return Err(Error::Config(format!(
                "max_occluded {} must be below the joint count {NUM_JOINTS}",
                self.max_occluded
            )));
        }
        if self.count_distribution.len() != self.max_occluded + 1 {
            return Err(Error::Config(format!(
                "count_distribution needs {} entries, got {}",
                self.max_occluded + 1,
                self.count_distribution.len()
            )));
        }
        if self.count_distribution.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::Config("count_distribution entries must be non-negative".into()));
        }
        let sum: f64 = self.count_distribution.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("count_distribution sums to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Endless per-sample pattern source with its own RNG. Tracks how many
/// distinct patterns it has produced.
#[derive(Debug, Clone)]
pub struct OjrStream {
    cfg: OjrConfig,
    counts: Option<WeightedIndex<f64>>,
    rng: StreamRng,
    seen: HashSet<u64>,
    emitted: usize,
}

impl OjrStream {
    pub fn new(cfg: &OjrConfig) -> Result<Self> {
        Self::for_worker(cfg, 0)
    }

    /// Stream for training worker `worker`; seeds derive from the config seed
    /// and the worker index.
    pub fn for_worker(cfg: &OjrConfig, worker: u64) -> Result<Self> {
        let counts = if cfg.enabled {
            cfg.validate()?;
            Some(
                WeightedIndex::new(&cfg.count_distribution)
                    .map_err(|e| Error::Config(format!("count_distribution: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self {
            cfg: cfg.clone(),
            counts,
            rng: derived(cfg.seed, worker),
            seen: HashSet::new(),
            emitted: 0,
        })
    }

    pub fn next_mask(&mut self) -> OcclusionMask {
        let mask = match &self.counts {
            None => OcclusionMask::all_visible(NUM_JOINTS),
            Some(dist) => {
                let m = dist.sample(&mut self.rng);
                let protected = self.cfg.protect_hip.then_some(COCO_HIP_INDEX);
                sample_occlusion_pattern(NUM_JOINTS, m, protected, &mut self.rng).expect("validated config")
            }
        };
        self.seen.insert(mask.bits());
        self.emitted += 1;
        mask
    }

    pub fn distinct_patterns(&self) -> usize {
        self.seen.len()
    }

    pub fn emitted(&self) -> usize {
        self.emitted
    }
}

#[derive(Debug, Clone)]
pub struct PatternStream {
    pub masks: Vec<OcclusionMask>,
    pub distinct: usize,
}

/// Draws `n_samples` masks from a fresh stream.
pub fn training_pattern_stream(cfg: &OjrConfig, n_samples: usize) -> Result<PatternStream> {
    let mut stream = OjrStream::new(cfg)?;
    let masks = (0..n_samples).map(|_| stream.next_mask()).collect();
    Ok(PatternStream {
        masks,
        distinct: stream.distinct_patterns(),
    })
}

/// Mask used for evaluation record `index` at occlusion level `m`: a pure
/// function of `(seed, m, index)`, so every model variant sees the same
/// occlusions.
pub fn evaluation_mask(seed: u64, m: usize, index: usize) -> Result<OcclusionMask> {
    let mut rng = derived(crate::rng::mix(seed, m as u64), index as u64);
    sample_occlusion_pattern(NUM_JOINTS, m, None, &mut rng)
}
