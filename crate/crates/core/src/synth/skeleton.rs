//! Forward kinematics over a 17-joint bone tree rooted at the left hip.
//!
//! Body frame: `x` forward (facing direction), `y` to the body's left, `z`
//! up. The torso is rigid with the pelvis, so the whole-body rotation alone
//! sets the torso inclination; limbs articulate at shoulders, elbows, hips
//! and knees.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::FallLabel;
use crate::error::{Error, Result};
use crate::pose::{Pose3D, COCO_HIP_INDEX, NUM_JOINTS};
use crate::synth::camera::{dot, normalize, norm, sub};

type Mat3 = [[f64; 3]; 3];

fn mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn apply(a: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [dot(a[0], v), dot(a[1], v), dot(a[2], v)]
}

fn rot_x(t: f64) -> Mat3 {
    let (s, c) = t.sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

fn rot_y(t: f64) -> Mat3 {
    let (s, c) = t.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

fn rot_z(t: f64) -> Mat3 {
    let (s, c) = t.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

/// Swings a downward-pointing limb forward (towards body `+x`) by `deg`.
fn flex(deg: f64) -> Mat3 {
    rot_y(-deg.to_radians())
}

/// Swings a downward-pointing limb sideways, away from the body's midline.
fn abduct(deg: f64, left: bool) -> Mat3 {
    let t = deg.to_radians();
    rot_x(if left { -t } else { t })
}

/// Which articulation drives a bone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Segment {
    Trunk,
    Head,
    UpperArm(bool),
    Forearm(bool),
    Thigh(bool),
    Shin(bool),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bone {
    pub parent: usize,
    pub child: usize,
    pub length: f64,
    /// Unit direction parent→child in the upright rest pose (body frame).
    pub rest_dir: [f64; 3],
    segment: Segment,
}

/// Bone tree with adult anthropometric lengths (millimetres).
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonTemplate {
    pub bones: Vec<Bone>,
}

impl Default for SkeletonTemplate {
    fn default() -> Self {
        // (parent, child, rest offset in mm, segment); offsets encode both the
        // length and the rest direction
        let pelvis = 200.0;
        let shoulders = 360.0;
        let torso = 500.0;
        let table: [(usize, usize, [f64; 3], Segment); 16] = [
            (11, 12, [0.0, -pelvis, 0.0], Segment::Trunk),
            (11, 5, [0.0, (shoulders - pelvis) / 2.0, torso], Segment::Trunk),
            (5, 6, [0.0, -shoulders, 0.0], Segment::Trunk),
            (5, 0, [80.0, -shoulders / 2.0, 250.0], Segment::Head),
            (0, 1, [-20.0, 32.0, 35.0], Segment::Head),
            (0, 2, [-20.0, -32.0, 35.0], Segment::Head),
            (1, 3, [-80.0, 40.0, -20.0], Segment::Head),
            (2, 4, [-80.0, -40.0, -20.0], Segment::Head),
            (5, 7, [0.0, 0.0, -300.0], Segment::UpperArm(true)),
            (7, 9, [0.0, 0.0, -260.0], Segment::Forearm(true)),
            (6, 8, [0.0, 0.0, -300.0], Segment::UpperArm(false)),
            (8, 10, [0.0, 0.0, -260.0], Segment::Forearm(false)),
            (11, 13, [0.0, 0.0, -440.0], Segment::Thigh(true)),
            (13, 15, [0.0, 0.0, -420.0], Segment::Shin(true)),
            (12, 14, [0.0, 0.0, -440.0], Segment::Thigh(false)),
            (14, 16, [0.0, 0.0, -420.0], Segment::Shin(false)),
        ];
        let bones = table
            .iter()
            .map(|&(parent, child, off, segment)| Bone {
                parent,
                child,
                length: norm(off),
                rest_dir: normalize(off),
                segment,
            })
            .collect();
        Self { bones }
    }
}

impl SkeletonTemplate {
    pub fn root(&self) -> usize {
        COCO_HIP_INDEX
    }

    /// Same tree with every bone length multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.bones.iter_mut().for_each(|b| b.length *= factor);
        out
    }

    /// Checks the tree property: every non-root joint has exactly one parent
    /// that is placed before it, and all lengths are positive.
    pub fn validate(&self) -> Result<()> {
        let mut placed = [false; NUM_JOINTS];
        placed[self.root()] = true;
        for b in &self.bones {
            if !placed[b.parent] || placed[b.child] || !(b.length > 0.0) {
                return Err(Error::Config(format!("bone {}->{} breaks the tree", b.parent, b.child)));
            }
            placed[b.child] = true;
        }
        if placed.iter().any(|p| !p) {
            return Err(Error::Config("skeleton does not reach every joint".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PoseClass {
    #[serde(rename = "stand")]
    Stand,
    #[serde(rename = "walk")]
    Walk,
    #[serde(rename = "sit")]
    Sit,
    #[serde(rename = "crouch")]
    Crouch,
    #[serde(rename = "fall-supine")]
    FallSupine,
    #[serde(rename = "fall-prone")]
    FallProne,
    #[serde(rename = "fall-side")]
    FallSide,
}

impl PoseClass {
    pub const ALL: [PoseClass; 7] = [
        PoseClass::Stand,
        PoseClass::Walk,
        PoseClass::Sit,
        PoseClass::Crouch,
        PoseClass::FallSupine,
        PoseClass::FallProne,
        PoseClass::FallSide,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PoseClass::Stand => "stand",
            PoseClass::Walk => "walk",
            PoseClass::Sit => "sit",
            PoseClass::Crouch => "crouch",
            PoseClass::FallSupine => "fall-supine",
            PoseClass::FallProne => "fall-prone",
            PoseClass::FallSide => "fall-side",
        }
    }

    pub fn label(self) -> FallLabel {
        match self {
            PoseClass::FallSupine | PoseClass::FallProne | PoseClass::FallSide => FallLabel::Fall,
            _ => FallLabel::NoFall,
        }
    }
}

impl fmt::Display for PoseClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PoseClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PoseClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown pose class {s:?}")))
    }
}

/// Direction the whole body tips over when inclined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lean {
    Any,
    Forward,
    Backward,
    ForwardOrBackward,
    Sideways,
}

/// Degree ranges `[lo, hi]` for one pose class.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseClassSpec {
    pub class: PoseClass,
    pub label: FallLabel,
    pub inclination: [f64; 2],
    pub lean: Lean,
    pub hip_flex: [f64; 2],
    pub hip_abduct: [f64; 2],
    pub knee_flex: [f64; 2],
    pub shoulder_flex: [f64; 2],
    pub shoulder_abduct: [f64; 2],
    pub elbow_flex: [f64; 2],
    pub head_pitch: [f64; 2],
    /// Mirror leg and arm flexion between sides (gait).
    pub alternate_limbs: bool,
}

impl PoseClassSpec {
    pub fn for_class(class: PoseClass) -> Self {
        let base = Self {
            class,
            label: class.label(),
            inclination: [0.0, 8.0],
            lean: Lean::Any,
            hip_flex: [-5.0, 10.0],
            hip_abduct: [0.0, 8.0],
            knee_flex: [0.0, 10.0],
            shoulder_flex: [-15.0, 20.0],
            shoulder_abduct: [5.0, 20.0],
            elbow_flex: [0.0, 30.0],
            head_pitch: [-10.0, 10.0],
            alternate_limbs: false,
        };
        match class {
            PoseClass::Stand => base,
            PoseClass::Walk => Self {
                inclination: [0.0, 12.0],
                lean: Lean::Forward,
                hip_flex: [10.0, 30.0],
                knee_flex: [0.0, 40.0],
                shoulder_flex: [5.0, 30.0],
                elbow_flex: [10.0, 40.0],
                alternate_limbs: true,
                ..base
            },
            PoseClass::Sit => Self {
                inclination: [0.0, 25.0],
                lean: Lean::ForwardOrBackward,
                hip_flex: [75.0, 100.0],
                knee_flex: [75.0, 100.0],
                shoulder_flex: [0.0, 40.0],
                elbow_flex: [20.0, 90.0],
                ..base
            },
            PoseClass::Crouch => Self {
                inclination: [20.0, 45.0],
                lean: Lean::Forward,
                hip_flex: [100.0, 130.0],
                knee_flex: [100.0, 140.0],
                shoulder_flex: [20.0, 70.0],
                elbow_flex: [20.0, 90.0],
                ..base
            },
            PoseClass::FallSupine => Self {
                inclination: [80.0, 95.0],
                lean: Lean::Backward,
                hip_flex: [-10.0, 15.0],
                knee_flex: [0.0, 20.0],
                shoulder_flex: [-20.0, 10.0],
                shoulder_abduct: [10.0, 90.0],
                elbow_flex: [0.0, 45.0],
                head_pitch: [-15.0, 15.0],
                ..base
            },
            PoseClass::FallProne => Self {
                inclination: [86.0, 94.0],
                lean: Lean::Forward,
                hip_flex: [-3.0, 5.0],
                hip_abduct: [0.0, 15.0],
                knee_flex: [0.0, 8.0],
                shoulder_flex: [-5.0, 10.0],
                shoulder_abduct: [30.0, 90.0],
                elbow_flex: [0.0, 10.0],
                head_pitch: [-8.0, 8.0],
                ..base
            },
            PoseClass::FallSide => Self {
                inclination: [60.0, 95.0],
                lean: Lean::Sideways,
                hip_flex: [0.0, 60.0],
                knee_flex: [0.0, 60.0],
                shoulder_flex: [0.0, 60.0],
                shoulder_abduct: [0.0, 40.0],
                elbow_flex: [0.0, 60.0],
                ..base
            },
        }
    }
}

fn draw<R: Rng + ?Sized>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[0] >= r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

/// Angle (degrees) between world up and the vector from the hip midpoint to
/// the shoulder midpoint.
pub fn torso_inclination_deg(pose: &Pose3D) -> f64 {
    let c = pose.coords();
    let mid = |a: usize, b: usize| [(c[a][0] + c[b][0]) / 2.0, (c[a][1] + c[b][1]) / 2.0, (c[a][2] + c[b][2]) / 2.0];
    let torso = sub(mid(5, 6), mid(11, 12));
    (torso[2] / norm(torso)).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Places the joints of `template` for one random instance of `spec`: joint
/// angles from the class ranges, whole-body tilt, random yaw, lowest joint on
/// the ground plane and a random ground position within ±1 m.
pub fn sample_skeleton<R: Rng + ?Sized>(
    spec: &PoseClassSpec,
    template: &SkeletonTemplate,
    rng: &mut R,
) -> (Pose3D, FallLabel) {
    let incl = draw(rng, spec.inclination).to_radians();
    let tilt = match spec.lean {
        Lean::Forward => rot_y(incl),
        Lean::Backward => rot_y(-incl),
        Lean::ForwardOrBackward => rot_y(if rng.random_bool(0.5) { incl } else { -incl }),
        Lean::Sideways => rot_x(if rng.random_bool(0.5) { incl } else { -incl }),
        Lean::Any => {
            let az = rng.random_range(0.0..std::f64::consts::TAU);
            mul(&rot_z(az), &mul(&rot_y(incl), &rot_z(-az)))
        }
    };
    let yaw = rot_z(rng.random_range(0.0..std::f64::consts::TAU));
    let body = mul(&yaw, &tilt);

    let swing = if spec.alternate_limbs && rng.random_bool(0.5) { -1.0 } else { 1.0 };
    let mut hip = [0.0; 2];
    let mut knee = [0.0; 2];
    let mut shoulder = [0.0; 2];
    let mut elbow = [0.0; 2];
    let mut hip_abd = [0.0; 2];
    let mut sh_abd = [0.0; 2];
    for side in 0..2 {
        let sign = if spec.alternate_limbs && side == 1 { -1.0 } else { 1.0 };
        hip[side] = if spec.alternate_limbs { sign * swing } else { 1.0 } * draw(rng, spec.hip_flex);
        knee[side] = draw(rng, spec.knee_flex);
        // in gait each arm swings against the leg on the same side
        shoulder[side] = if spec.alternate_limbs { -sign * swing } else { 1.0 } * draw(rng, spec.shoulder_flex);
        elbow[side] = draw(rng, spec.elbow_flex);
        hip_abd[side] = draw(rng, spec.hip_abduct);
        sh_abd[side] = draw(rng, spec.shoulder_abduct);
    }
    let head = mul(&body, &flex(-draw(rng, spec.head_pitch)));

    // left is side 0
    let limb = |seg: Segment| -> Mat3 {
        match seg {
            Segment::Trunk => body,
            Segment::Head => head,
            Segment::UpperArm(l) | Segment::Forearm(l) | Segment::Thigh(l) | Segment::Shin(l) => {
                let s = if l { 0 } else { 1 };
                match seg {
                    Segment::UpperArm(_) => mul(&body, &mul(&abduct(sh_abd[s], l), &flex(shoulder[s]))),
                    Segment::Forearm(_) => mul(
                        &body,
                        &mul(&mul(&abduct(sh_abd[s], l), &flex(shoulder[s])), &flex(elbow[s])),
                    ),
                    Segment::Thigh(_) => mul(&body, &mul(&abduct(hip_abd[s], l), &flex(hip[s]))),
                    _ => mul(&body, &mul(&mul(&abduct(hip_abd[s], l), &flex(hip[s])), &flex(-knee[s]))),
                }
            }
        }
    };

    let mut coords = [[0.0f64; 3]; NUM_JOINTS];
    for b in &template.bones {
        let r = limb(b.segment);
        let d = apply(&r, b.rest_dir);
        let p = coords[b.parent];
        coords[b.child] = [p[0] + b.length * d[0], p[1] + b.length * d[1], p[2] + b.length * d[2]];
    }
    let floor = coords.iter().map(|c| c[2]).fold(f64::INFINITY, f64::min);
    let gx = rng.random_range(-1000.0..1000.0);
    let gy = rng.random_range(-1000.0..1000.0);
    let placed: Vec<[f64; 3]> = coords.iter().map(|c| [c[0] + gx, c[1] + gy, c[2] - floor]).collect();
    (Pose3D::all_visible(placed).expect("finite kinematics"), spec.label)
}
