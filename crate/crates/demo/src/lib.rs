//! Browser bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON string; the page parses it and draws on
//! canvases. The same functions run natively, which is how they are tested.

use std::collections::BTreeMap;

use serde_json::{json, Value};
use sshfd::features::{camera_aligned_target, FeatureConfig};
use sshfd::ojr::{apply_occlusion, evaluation_mask};
use sshfd::pose::heatmap::{decode_heatmaps, encode_heatmaps, peak_value};
use sshfd::synth::{generate_dataset, torso_inclination_deg, GeneratorConfig, PoseClass, SkeletonTemplate};
use sshfd::{Error, JointLayout, Pose2D, Result, NUM_JOINTS};
use wasm_bindgen::prelude::*;

fn points(p: &Pose2D) -> Vec<Value> {
    p.coords()
        .iter()
        .zip(p.visibility())
        .map(|(c, &v)| json!([c[0], c[1], v]))
        .collect()
}

/// Single-joint heatmap of `width`×`height` pixels centred on `(x, y)`,
/// decoded back by argmax.
pub fn heatmap_json(x: f64, y: f64, sigma: f64, width: usize, height: usize) -> Result<Value> {
    let mut coords = vec![[0.0, 0.0]; NUM_JOINTS];
    let mut vis = vec![false; NUM_JOINTS];
    coords[0] = [x, y];
    vis[0] = true;
    let pose = Pose2D::from_visible(coords, vis)?;
    let stack = encode_heatmaps(&pose, width, height, sigma)?;
    let decoded = decode_heatmaps(&stack)?;
    let chan = stack.channel(0);
    Ok(json!({
        "width": width,
        "height": height,
        "values": chan,
        "max": chan.iter().copied().fold(0.0, f64::max),
        "sum": chan.iter().sum::<f64>(),
        "kernel_peak": peak_value(sigma),
        "decoded": decoded.coords()[0],
    }))
}

/// One synthetic record of `class` with `occluded` joints hidden by the
/// evaluation mask for `seed`: image-space joints, the 224×224 normalized
/// view and the camera-aligned hip-relative 3d pose.
pub fn pose_json(class: &str, seed: u64, elevation: [f64; 2], occluded: usize) -> Result<Value> {
    let class: PoseClass = class.parse()?;
    let mut cfg = GeneratorConfig {
        size: 1,
        seed,
        class_mix: BTreeMap::from([(class, 1.0)]),
        ..GeneratorConfig::default()
    };
    cfg.camera.elevation_deg = elevation;
    let record = generate_dataset(&cfg)?.records.remove(0);
    let feats = FeatureConfig::default();
    let mask = evaluation_mask(seed, occluded, 0)?;
    let normalized = apply_occlusion(&feats.normalized_2d(&record)?, &mask)?;
    let layout = JointLayout::coco17();
    let target = camera_aligned_target(&record, &layout)?.ok_or_else(|| Error::Data("record has no 3d joints".into()))?;
    let joints3d = record.joints3d.as_ref().ok_or_else(|| Error::Data("record has no 3d joints".into()))?;
    let bbox = feats.bbox_for(&record).map(|b| [b.x0, b.y0, b.x1, b.y1]);
    let camera = record.camera.as_ref().ok_or_else(|| Error::Data("record has no camera".into()))?;
    Ok(json!({
        "class": class.name(),
        "label": record.label.map(|l| l.as_str()),
        "inclination_deg": torso_inclination_deg(joints3d),
        "elevation_deg": camera.elevation_deg(),
        "image_size": camera.image_size,
        "joints2d": points(&record.joints2d),
        "bbox": bbox,
        "hidden": mask.visible().iter().enumerate().filter(|(_, &v)| !v).map(|(j, _)| j).collect::<Vec<_>>(),
        "normalized": points(&normalized),
        "frame": [feats.frame.width, feats.frame.height],
        "joints3d": target.coords(),
    }))
}

/// Bone list `[parent, child]` and joint names.
pub fn skeleton_json() -> Value {
    let bones: Vec<[usize; 2]> = SkeletonTemplate::default().bones.iter().map(|b| [b.parent, b.child]).collect();
    json!({
        "bones": bones,
        "names": JointLayout::coco17().names(),
        "classes": PoseClass::ALL.iter().map(|c| c.name()).collect::<Vec<_>>(),
    })
}

fn js(r: Result<Value>) -> std::result::Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn heatmap(x: f64, y: f64, sigma: f64, width: usize, height: usize) -> std::result::Result<String, JsError> {
    js(heatmap_json(x, y, sigma, width, height))
}

#[wasm_bindgen]
pub fn synth_pose(class: &str, seed: u64, elevation_lo: f64, elevation_hi: f64, occluded: usize) -> std::result::Result<String, JsError> {
    js(pose_json(class, seed, [elevation_lo, elevation_hi], occluded))
}

#[wasm_bindgen]
pub fn skeleton() -> String {
    skeleton_json().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_decodes_integer_centre() {
        let v = heatmap_json(20.0, 11.0, 3.0, 48, 32).unwrap();
        assert_eq!(v["decoded"], json!([20.0, 11.0]));
        assert_eq!(v["values"].as_array().unwrap().len(), 48 * 32);
        assert!((v["max"].as_f64().unwrap() - v["kernel_peak"].as_f64().unwrap()).abs() < 1e-15);
    }

    #[test]
    fn pose_hides_requested_joints() {
        let v = pose_json("fall-side", 4, [10.0, 60.0], 5).unwrap();
        assert_eq!(v["label"], "fall");
        assert_eq!(v["hidden"].as_array().unwrap().len(), 5);
        for j in v["hidden"].as_array().unwrap() {
            let n = &v["normalized"][j.as_u64().unwrap() as usize];
            assert_eq!(n[2], false);
        }
        assert_eq!(v["joints3d"][11], json!([0.0, 0.0, 0.0]));
    }

    #[test]
    fn unknown_class_is_an_error() {
        assert!(pose_json("juggle", 0, [10.0, 60.0], 0).is_err());
    }

    #[test]
    fn skeleton_lists_every_joint() {
        let v = skeleton_json();
        assert_eq!(v["names"].as_array().unwrap().len(), NUM_JOINTS);
        assert_eq!(v["bones"].as_array().unwrap().len(), NUM_JOINTS - 1);
    }
}
