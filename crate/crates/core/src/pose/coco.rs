//! Importer for COCO keypoint annotations.
//!
//! Accepts a full annotation document (`{"annotations": [...]}`), a bare
//! array of annotations, or a single annotation object. Each annotation
//! carries 17 keypoints as flat `[x, y, v]` triples; any `v > 0` (labelled,
//! whether or not occluded in the image) counts as visible.

use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::pose::{BBox, Pose2D, NUM_JOINTS};

#[derive(Debug, Clone, PartialEq)]
pub struct CocoPerson {
    pub id: String,
    pub image_id: Option<String>,
    pub pose: Pose2D,
    pub bbox: Option<BBox>,
}

#[derive(Debug, Deserialize)]
struct Annotation {
    #[serde(default)]
    id: Option<Value>,
    #[serde(default)]
    image_id: Option<Value>,
    keypoints: Vec<f64>,
    #[serde(default)]
    bbox: Option<Vec<f64>>,
}

fn id_string(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Decodes one flat keypoint list into a pose.
pub fn keypoints_to_pose(kp: &[f64]) -> Result<Pose2D> {
    if kp.len() != 3 * NUM_JOINTS {
        return Err(Error::data(format!(
            "expected {} keypoint values, got {}",
            3 * NUM_JOINTS,
            kp.len()
        )));
    }
    let mut coords = Vec::with_capacity(NUM_JOINTS);
    let mut vis = Vec::with_capacity(NUM_JOINTS);
    for t in kp.chunks_exact(3) {
        coords.push([t[0], t[1]]);
        vis.push(t[2] > 0.0);
    }
    Pose2D::from_visible(coords, vis)
}

fn convert(index: usize, ann: Annotation) -> Result<CocoPerson> {
    let pose = keypoints_to_pose(&ann.keypoints)?;
    let bbox = match ann.bbox.as_deref() {
        Some([x, y, w, h]) => Some(BBox::from_xywh(*x, *y, *w, *h)),
        Some(other) => {
            return Err(Error::data(format!("bbox must have 4 values, got {}", other.len())))
        }
        None => None,
    };
    Ok(CocoPerson {
        id: ann.id.as_ref().map(id_string).unwrap_or_else(|| format!("ann-{index}")),
        image_id: ann.image_id.as_ref().map(id_string),
        pose,
        bbox,
    })
}

/// Parses every annotation in `text`. Annotations that fail to decode are
/// returned as errors in place so that callers can skip and count them.
pub fn parse_coco(text: &str) -> Result<Vec<Result<CocoPerson>>> {
    let doc: Value = serde_json::from_str(text)?;
    let items = match doc {
        Value::Object(mut map) if map.contains_key("annotations") => match map.remove("annotations") {
            Some(Value::Array(a)) => a,
            _ => return Err(Error::data("\"annotations\" must be an array")),
        },
        Value::Object(map) => vec![Value::Object(map)],
        Value::Array(a) => a,
        _ => return Err(Error::data("COCO document must be an object or an array")),
    };
    Ok(items
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let ann: Annotation = serde_json::from_value(v)?;
            convert(i, ann)
        })
        .collect())
}
