//! Pinhole cameras looking at the subject from a randomized orbit.
//!
//! World frame: millimetres, `z` up. Camera frame: `x` right, `y` down, `z`
//! along the optical axis, matching image pixel axes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{Pose2D, Pose3D};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Camera {
    pub position: [f64; 3],
    pub target: [f64; 3],
    pub focal: f64,
    pub principal: [f64; 2],
    pub image_size: [u32; 2],
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = norm(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

impl Camera {
    pub fn new(position: [f64; 3], target: [f64; 3], focal: f64, principal: [f64; 2], image_size: [u32; 2]) -> Result<Self> {
        let cam = Self {
            position,
            target,
            focal,
            principal,
            image_size,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        let d = sub(self.target, self.position);
        if !(norm(d) > 0.0) {
            return Err(Error::param("camera position coincides with its target"));
        }
        if !(self.focal > 0.0 && self.focal.is_finite()) {
            return Err(Error::param(format!("focal length must be positive, got {}", self.focal)));
        }
        if norm(cross(normalize(d), [0.0, 0.0, 1.0])) < 1e-9 {
            return Err(Error::param("camera cannot look straight up or down"));
        }
        Ok(())
    }

    /// World-to-camera rotation, rows are the camera axes in world
    /// coordinates.
    pub fn rotation(&self) -> [[f64; 3]; 3] {
        let forward = normalize(sub(self.target, self.position));
        let right = normalize(cross(forward, [0.0, 0.0, 1.0]));
        let down = cross(forward, right);
        [right, down, forward]
    }

    pub fn to_camera(&self, p: [f64; 3]) -> [f64; 3] {
        let r = self.rotation();
        let d = sub(p, self.position);
        [dot(r[0], d), dot(r[1], d), dot(r[2], d)]
    }

    /// Rotates a world-frame direction into the camera frame.
    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        let r = self.rotation();
        [dot(r[0], v), dot(r[1], v), dot(r[2], v)]
    }

    pub fn distance(&self) -> f64 {
        norm(sub(self.target, self.position))
    }

    /// Angle of the line of sight above the horizontal, seen from the target.
    pub fn elevation_deg(&self) -> f64 {
        let d = sub(self.position, self.target);
        (d[2] / norm(d)).asin().to_degrees()
    }

    /// Pixel coordinates of a world point, or `None` behind the camera.
    pub fn project_point(&self, p: [f64; 3]) -> Option<[f64; 2]> {
        let c = self.to_camera(p);
        if !(c[2] > 1e-6) {
            return None;
        }
        Some([
            self.focal * c[0] / c[2] + self.principal[0],
            self.focal * c[1] / c[2] + self.principal[1],
        ])
    }

    pub fn in_image(&self, uv: [f64; 2]) -> bool {
        uv[0] >= 0.0 && uv[1] >= 0.0 && uv[0] < self.image_size[0] as f64 && uv[1] < self.image_size[1] as f64
    }
}

/// Orbit ranges for [`sample_camera`]. Angles in degrees, distances in mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraBounds {
    pub elevation_deg: [f64; 2],
    pub distance_mm: [f64; 2],
    pub focal_px: [f64; 2],
    pub image_size: [u32; 2],
}

impl Default for CameraBounds {
    fn default() -> Self {
        Self {
            elevation_deg: [10.0, 60.0],
            distance_mm: [2000.0, 6000.0],
            focal_px: [300.0, 450.0],
            image_size: [640, 480],
        }
    }
}

impl CameraBounds {
    pub fn validate(&self) -> Result<()> {
        let ordered = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        if !ordered(self.elevation_deg) || self.elevation_deg[0] < -80.0 || self.elevation_deg[1] > 80.0 {
            return Err(Error::Config(format!("elevation range {:?} invalid", self.elevation_deg)));
        }
        if !ordered(self.distance_mm) || self.distance_mm[0] <= 0.0 {
            return Err(Error::Config(format!("distance range {:?} invalid", self.distance_mm)));
        }
        if !ordered(self.focal_px) || self.focal_px[0] <= 0.0 {
            return Err(Error::Config(format!("focal range {:?} invalid", self.focal_px)));
        }
        if self.image_size[0] == 0 || self.image_size[1] == 0 {
            return Err(Error::Config("image size must be positive".into()));
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

/// Camera at a random azimuth, elevation and distance around `target`,
/// looking at it; the target lands on the principal point.
pub fn sample_camera<R: Rng + ?Sized>(rng: &mut R, bounds: &CameraBounds, target: [f64; 3]) -> Result<Camera> {
    bounds.validate()?;
    let azimuth = rng.random_range(0.0..std::f64::consts::TAU);
    let elevation = uniform(rng, bounds.elevation_deg).to_radians();
    let distance = uniform(rng, bounds.distance_mm);
    let focal = uniform(rng, bounds.focal_px);
    let position = [
        target[0] + distance * elevation.cos() * azimuth.cos(),
        target[1] + distance * elevation.cos() * azimuth.sin(),
        target[2] + distance * elevation.sin(),
    ];
    let [w, h] = bounds.image_size;
    Camera::new(position, target, focal, [w as f64 / 2.0, h as f64 / 2.0], bounds.image_size)
}

/// Pinhole projection. Joints behind the camera or outside the image, and
/// joints already invisible in 3d, come out invisible.
pub fn project(pose: &Pose3D, cam: &Camera) -> Pose2D {
    let k = pose.len();
    let mut coords = vec![[0.0; 2]; k];
    let mut vis = vec![false; k];
    for j in 0..k {
        if !pose.visibility()[j] {
            continue;
        }
        if let Some(uv) = cam.project_point(pose.coords()[j]) {
            if cam.in_image(uv) && uv.iter().all(|v| v.is_finite()) {
                coords[j] = uv;
                vis[j] = true;
            }
        }
    }
    Pose2D::from_visible(coords, vis).expect("projection yields finite coordinates")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::NUM_JOINTS;
    use crate::rng::seeded;

    fn cam(focal: f64) -> Camera {
        Camera::new([0.0, -3000.0, 1500.0], [0.0, 0.0, 900.0], focal, [320.0, 240.0], [640, 480]).unwrap()
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let c = cam(400.0);
        let uv = c.project_point(c.target).unwrap();
        assert!((uv[0] - 320.0).abs() < 1e-9 && (uv[1] - 240.0).abs() < 1e-9);
    }

    #[test]
    fn focal_length_scales_offsets() {
        let p = [120.0, 40.0, 1300.0];
        let a = cam(300.0).project_point(p).unwrap();
        let b = cam(600.0).project_point(p).unwrap();
        for i in 0..2 {
            let c = [320.0, 240.0][i];
            assert!(((b[i] - c) - 2.0 * (a[i] - c)).abs() < 1e-9);
        }
    }

    #[test]
    fn image_axes_follow_world_up_and_right() {
        let c = cam(400.0);
        let up = c.project_point([0.0, 0.0, 1500.0]).unwrap();
        assert!(up[1] < 240.0);
        // camera looks along +y, so world +x is image right
        let right = c.project_point([300.0, 0.0, 900.0]).unwrap();
        assert!(right[0] > 320.0);
    }

    #[test]
    fn points_behind_camera_are_invisible() {
        let c = cam(400.0);
        let mut coords = vec![[0.0, 0.0, 900.0]; NUM_JOINTS];
        coords[4] = [0.0, -6000.0, 900.0];
        let p = project(&Pose3D::all_visible(coords).unwrap(), &c);
        assert!(!p.visibility()[4]);
        assert!(p.visibility()[0]);
    }

    #[test]
    fn sampled_camera_respects_bounds_and_seed() {
        let b = CameraBounds::default();
        let target = [100.0, -50.0, 800.0];
        let c1 = sample_camera(&mut seeded(5), &b, target).unwrap();
        let c2 = sample_camera(&mut seeded(5), &b, target).unwrap();
        assert_eq!(c1, c2);
        let mut rng = seeded(6);
        for _ in 0..200 {
            let c = sample_camera(&mut rng, &b, target).unwrap();
            assert!(c.distance() >= 2000.0 - 1e-9 && c.distance() <= 6000.0 + 1e-9);
            let e = c.elevation_deg();
            assert!((10.0 - 1e-9..=60.0 + 1e-9).contains(&e));
            let uv = c.project_point(target).unwrap();
            assert!(uv[0] > 640.0 / 3.0 && uv[0] < 2.0 * 640.0 / 3.0);
            assert!(uv[1] > 480.0 / 3.0 && uv[1] < 2.0 * 480.0 / 3.0);
        }
    }

    #[test]
    fn invalid_cameras_are_rejected() {
        assert!(Camera::new([0.0; 3], [0.0; 3], 400.0, [0.0; 2], [1, 1]).is_err());
        assert!(Camera::new([0.0, 0.0, 5.0], [0.0; 3], 400.0, [0.0; 2], [1, 1]).is_err());
        assert!(Camera::new([1.0, 0.0, 0.0], [0.0; 3], 0.0, [0.0; 2], [1, 1]).is_err());
    }
}
