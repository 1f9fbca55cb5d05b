//! Labelled pose records and the JSONL interchange format.
//!
//! One record per line:
//!
//! ```json
//! {"id":"000001","label":"fall","class":"fall-side",
//!  "joints2d":[[x,y,v],...17],"joints3d":[[x,y,z],...17] | null,
//!  "camera":{...} | absent, "bbox":[x,y,w,h] | absent}
//! ```
//!
//! `v > 0` marks a visible joint; its value (clamped to `[0, 1]`) is the
//! joint confidence. Invisible joints are written as `[0, 0, 0]`.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{BBox, Pose2D, Pose3D, NUM_JOINTS};
use crate::rng::seeded;
use crate::synth::camera::Camera;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallLabel {
    NoFall,
    Fall,
}

impl FallLabel {
    pub const COUNT: usize = 2;

    pub fn index(self) -> usize {
        match self {
            FallLabel::NoFall => 0,
            FallLabel::Fall => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(FallLabel::NoFall),
            1 => Some(FallLabel::Fall),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FallLabel::NoFall => "no_fall",
            FallLabel::Fall => "fall",
        }
    }
}

impl fmt::Display for FallLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FallLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fall" => Ok(FallLabel::Fall),
            "no_fall" => Ok(FallLabel::NoFall),
            _ => Err(Error::data(format!("unknown label {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseRecord {
    pub id: String,
    pub label: Option<FallLabel>,
    pub class: Option<String>,
    /// Image pixels.
    pub joints2d: Pose2D,
    /// World millimetres.
    pub joints3d: Option<Pose3D>,
    pub camera: Option<Camera>,
    pub bbox: Option<BBox>,
}

#[derive(Serialize, Deserialize)]
struct RecordWire {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<FallLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class: Option<String>,
    joints2d: Vec<[f64; 3]>,
    #[serde(default)]
    joints3d: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    camera: Option<Camera>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bbox: Option<[f64; 4]>,
}

impl PoseRecord {
    pub fn to_json_line(&self) -> String {
        let joints2d = self
            .joints2d
            .coords()
            .iter()
            .zip(self.joints2d.visibility())
            .zip(self.joints2d.confidence())
            .map(|((c, &v), &conf)| if v { [c[0], c[1], conf] } else { [0.0, 0.0, 0.0] })
            .collect();
        let wire = RecordWire {
            id: self.id.clone(),
            label: self.label,
            class: self.class.clone(),
            joints2d,
            joints3d: self.joints3d.as_ref().map(|p| p.coords().to_vec()),
            camera: self.camera.clone(),
            bbox: self.bbox.map(|b| [b.x0, b.y0, b.width(), b.height()]),
        };
        serde_json::to_string(&wire).expect("record serializes")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let w: RecordWire = serde_json::from_str(line)?;
        if w.joints2d.len() != NUM_JOINTS {
            return Err(Error::data(format!(
                "record {:?}: joints2d has {} entries, expected {NUM_JOINTS}",
                w.id,
                w.joints2d.len()
            )));
        }
        let coords = w.joints2d.iter().map(|t| [t[0], t[1]]).collect();
        let vis: Vec<bool> = w.joints2d.iter().map(|t| t[2] > 0.0).collect();
        let conf = w.joints2d.iter().map(|t| t[2].clamp(0.0, 1.0)).collect();
        let joints2d = Pose2D::new(coords, vis, conf)?;
        let joints3d = match w.joints3d {
            Some(c) if c.len() != NUM_JOINTS => {
                return Err(Error::data(format!(
                    "record {:?}: joints3d has {} entries, expected {NUM_JOINTS}",
                    w.id,
                    c.len()
                )))
            }
            Some(c) => Some(Pose3D::all_visible(c)?),
            None => None,
        };
        Ok(Self {
            id: w.id,
            label: w.label,
            class: w.class,
            joints2d,
            joints3d,
            camera: w.camera,
            bbox: w.bbox.map(|[x, y, bw, bh]| BBox::from_xywh(x, y, bw, bh)),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PoseDataset {
    pub records: Vec<PoseRecord>,
}

/// Outcome of a lenient read: good records plus per-line failures.
#[derive(Debug, Default)]
pub struct LenientRead {
    pub records: Vec<PoseRecord>,
    pub skipped: Vec<(usize, Error)>,
}

impl PoseDataset {
    pub fn new(records: Vec<PoseRecord>) -> Self {
        Self { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            w.write_all(r.to_json_line().as_bytes())?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_jsonl(std::io::BufWriter::new(f))
    }

    /// Strict read: the first malformed line is an error.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(
                PoseRecord::from_json_line(&line).map_err(|e| Error::data(format!("line {}: {e}", i + 1)))?,
            );
        }
        Ok(Self { records })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(f))
    }

    /// Reads every parseable line, collecting failures instead of stopping.
    pub fn read_jsonl_lenient<R: BufRead>(r: R) -> Result<LenientRead> {
        let mut out = LenientRead::default();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match PoseRecord::from_json_line(&line) {
                Ok(rec) => out.records.push(rec),
                Err(e) => out.skipped.push((i + 1, e)),
            }
        }
        Ok(out)
    }

    /// `(no_fall, fall, unlabelled)` counts.
    pub fn label_counts(&self) -> (usize, usize, usize) {
        self.records.iter().fold((0, 0, 0), |(n, f, u), r| match r.label {
            Some(FallLabel::NoFall) => (n + 1, f, u),
            Some(FallLabel::Fall) => (n, f + 1, u),
            None => (n, f, u + 1),
        })
    }

    /// Short content hash of the JSONL serialization, used to tag results.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for r in &self.records {
            h.update(r.to_json_line().as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            records: idx.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }
}

/// Seeded shuffle split into `(train, test)` index lists.
pub fn split_indices(n: usize, train_frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded(seed));
    let cut = ((n as f64) * train_frac).round() as usize;
    let test = idx.split_off(cut.min(n));
    (idx, test)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> PoseRecord {
        let coords: Vec<[f64; 2]> = (0..NUM_JOINTS).map(|j| [j as f64 * 1.25, 100.0 - j as f64]).collect();
        let mut vis = vec![true; NUM_JOINTS];
        vis[2] = false;
        PoseRecord {
            id: "r1".into(),
            label: Some(FallLabel::Fall),
            class: Some("fall-side".into()),
            joints2d: Pose2D::from_visible(coords, vis).unwrap(),
            joints3d: Some(Pose3D::all_visible((0..NUM_JOINTS).map(|j| [j as f64, 0.1, -3.0]).collect()).unwrap()),
            camera: None,
            bbox: Some(BBox::from_xywh(1.0, 2.0, 30.0, 40.0)),
        }
    }

    #[test]
    fn jsonl_roundtrip() {
        let ds = PoseDataset::new(vec![record(), record()]);
        let mut buf = Vec::new();
        ds.write_jsonl(&mut buf).unwrap();
        let back = PoseDataset::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn null_joints3d_and_missing_label() {
        let mut line = String::from(r#"{"id":"x","joints2d":["#);
        line.push_str(&vec!["[1,2,2]"; 17].join(","));
        line.push_str(r#"],"joints3d":null}"#);
        let r = PoseRecord::from_json_line(&line).unwrap();
        assert!(r.joints3d.is_none() && r.label.is_none());
        assert_eq!(r.joints2d.confidence()[0], 1.0);
    }

    #[test]
    fn lenient_read_counts_bad_lines() {
        let text = format!("{}\nnot json\n{{\"id\":\"short\",\"joints2d\":[]}}\n", record().to_json_line());
        let r = PoseDataset::read_jsonl_lenient(text.as_bytes()).unwrap();
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.skipped.iter().map(|s| s.0).collect::<Vec<_>>(), vec![2, 3]);
        assert!(PoseDataset::read_jsonl(text.as_bytes()).is_err());
    }

    #[test]
    fn split_is_a_partition() {
        let (a, b) = split_indices(100, 0.7, 3);
        assert_eq!((a.len(), b.len()), (70, 30));
        let mut all: Vec<_> = a.iter().chain(&b).copied().collect();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(split_indices(100, 0.7, 3), (a, b));
    }
}
