//! Built-in consistency checks run by `sshfd selftest`.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{SelftestArgs, EXIT_NUMERIC, EXIT_OK};
use crate::error::Result;
use crate::eval::weighted_prf;
use crate::fallnet::{FallNetConfig, FallNetNets, FallNetObjective};
use crate::nn::checkpoint::Checkpoint;
use crate::nn::gradcheck::{grad_check, MlpObjective, Target, DEFAULT_STEP};
use crate::nn::tensor::Tensor;
use crate::pose::heatmap::{decode_heatmaps, encode_heatmaps};
use crate::pose::{normalize_pose2d, normalize_pose3d, BBox, JointLayout, Pose2D, Pose3D, ReferenceFrame, NUM_JOINTS};
use crate::posenet::{build_posenet3d, PoseNet3dConfig};
use crate::rng::seeded;

const GRAD_TOL: f64 = 1e-6;

struct Check {
    name: &'static str,
    ok: bool,
    detail: String,
}

fn random_tensor<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor<f64> {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::matrix(rows, cols, data).expect("shape matches data")
}

fn grad_posenet() -> Result<Check> {
    let cfg = PoseNet3dConfig {
        hidden0: 24,
        hidden: 24,
        ..PoseNet3dConfig::default()
    };
    let mut net = build_posenet3d::<f64>(&cfg, 1)?;
    net.recondition(&mut seeded(11));
    let mut rng = seeded(2);
    let x = random_tensor(16, 2 * NUM_JOINTS, &mut rng);
    let y = random_tensor(16, 3 * NUM_JOINTS, &mut rng);
    let mut obj = MlpObjective::new(&net, x, Target::Regression(y))?;
    let r = grad_check(&mut obj, 120, DEFAULT_STEP, 3)?;
    Ok(Check {
        name: "gradient check: 3d lifter",
        ok: r.checked >= 100 && r.max_rel_error < GRAD_TOL && r.max_structural_zero < 1e-12,
        detail: format!("{} params, max rel error {:.2e}, {} kink draws skipped", r.checked, r.max_rel_error, r.kink_skips),
    })
}

fn grad_fallnet() -> Result<Check> {
    let cfg = FallNetConfig {
        feat_dim: 16,
        embed_dim: 8,
        ..FallNetConfig::default()
    };
    let mut nets = FallNetNets::<f64>::new(&cfg, 4)?;
    nets.recondition(&mut seeded(12));
    let mut rng = seeded(5);
    let p = random_tensor(16, 2 * NUM_JOINTS, &mut rng);
    let q = random_tensor(16, 3 * NUM_JOINTS, &mut rng);
    let labels = (0..16).map(|i| i % 2).collect();
    let mut obj = FallNetObjective::new(&nets, p, q, labels)?;
    let r = grad_check(&mut obj, 120, DEFAULT_STEP, 6)?;
    Ok(Check {
        name: "gradient check: fall classifier",
        ok: r.checked >= 100 && r.max_rel_error < GRAD_TOL && r.max_structural_zero < 1e-12,
        detail: format!("{} params, max rel error {:.2e}, {} kink draws skipped", r.checked, r.max_rel_error, r.kink_skips),
    })
}

fn normalization() -> Result<Check> {
    let mut rng = seeded(7);
    let frame = ReferenceFrame::default();
    let mut worst2d = 0.0f64;
    let mut worst3d = 0.0f64;
    for _ in 0..50 {
        let coords: Vec<[f64; 2]> = (0..NUM_JOINTS)
            .map(|_| [rng.random_range(0.0..500.0), rng.random_range(0.0..500.0)])
            .collect();
        let pose = Pose2D::from_visible(coords.clone(), vec![true; NUM_JOINTS])?;
        let bbox = BBox::around_visible(&pose, 0.1).expect("visible joints");
        let (s, t) = (rng.random_range(0.2..5.0), [rng.random_range(-300.0..300.0), rng.random_range(-300.0..300.0)]);
        let moved = Pose2D::from_visible(
            coords.iter().map(|c| [c[0] * s + t[0], c[1] * s + t[1]]).collect(),
            vec![true; NUM_JOINTS],
        )?;
        let moved_box = BBox::from_corners(bbox.x0 * s + t[0], bbox.y0 * s + t[1], bbox.x1 * s + t[0], bbox.y1 * s + t[1]);
        let a = normalize_pose2d(&pose, &bbox, &frame)?;
        let b = normalize_pose2d(&moved, &moved_box, &frame)?;
        for (u, v) in a.coords().iter().zip(b.coords()) {
            for d in 0..2 {
                worst2d = worst2d.max((u[d] - v[d]).abs() / frame.width);
            }
        }

        let c3: Vec<[f64; 3]> = (0..NUM_JOINTS)
            .map(|_| [rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3), rng.random_range(0.0..2e3)])
            .collect();
        let layout = JointLayout::coco17();
        let n = normalize_pose3d(&Pose3D::all_visible(c3.clone())?, &layout)?;
        let hip = n.coords()[layout.hip_index()];
        worst3d = worst3d.max(hip.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let dist = |p: &[[f64; 3]], i: usize, j: usize| {
            ((p[i][0] - p[j][0]).powi(2) + (p[i][1] - p[j][1]).powi(2) + (p[i][2] - p[j][2]).powi(2)).sqrt()
        };
        for i in 0..NUM_JOINTS {
            for j in i + 1..NUM_JOINTS {
                let d0 = dist(&c3, i, j);
                worst3d = worst3d.max((dist(n.coords(), i, j) - d0).abs() / d0.max(1.0));
            }
        }
    }
    Ok(Check {
        name: "normalization invariants",
        ok: worst2d < 1e-9 && worst3d < 1e-9,
        detail: format!("2d {worst2d:.1e}, 3d {worst3d:.1e}"),
    })
}

fn heatmaps() -> Result<Check> {
    let mut rng = seeded(8);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let coords = (0..NUM_JOINTS)
            .map(|_| [rng.random_range(0..64) as f64, rng.random_range(0..64) as f64])
            .collect();
        let pose = Pose2D::from_visible(coords, vec![true; NUM_JOINTS])?;
        let back = decode_heatmaps(&encode_heatmaps(&pose, 64, 64, 4.0)?)?;
        for (a, b) in pose.coords().iter().zip(back.coords()) {
            worst = worst.max((a[0] - b[0]).abs().max((a[1] - b[1]).abs()));
        }
    }
    Ok(Check {
        name: "heatmap round trip",
        ok: worst == 0.0,
        detail: format!("max pixel error {worst}"),
    })
}

/// Weighted precision, recall and F1 by direct counting.
fn prf_by_counting(preds: &[usize], gts: &[usize], k: usize) -> [f64; 3] {
    let n = gts.len() as f64;
    let mut out = [0.0; 3];
    for c in 0..k {
        let tp = preds.iter().zip(gts).filter(|&(&p, &g)| p == c && g == c).count() as f64;
        let pp = preds.iter().filter(|&&p| p == c).count() as f64;
        let support = gts.iter().filter(|&&g| g == c).count() as f64;
        let p = if pp > 0.0 { tp / pp } else { 0.0 };
        let r = if support > 0.0 { tp / support } else { 0.0 };
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        let w = support / n;
        out[0] += w * p;
        out[1] += w * r;
        out[2] += w * f;
    }
    out
}

fn metrics() -> Result<Check> {
    let mut rng = seeded(9);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..60);
        let gts: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let preds: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let r = weighted_prf(&preds, &gts, 2)?;
        let o = prf_by_counting(&preds, &gts, 2);
        worst = worst
            .max((r.weighted_precision - o[0]).abs())
            .max((r.weighted_recall - o[1]).abs())
            .max((r.weighted_f1 - o[2]).abs());
    }
    Ok(Check {
        name: "weighted precision/recall/F1",
        ok: worst < 1e-12,
        detail: format!("max deviation {worst:.1e}"),
    })
}

fn checkpoint(path: &Path) -> Result<Check> {
    let ck = Checkpoint::load(path)?;
    Ok(Check {
        name: "checkpoint loads",
        ok: true,
        detail: format!("{} ({} blocks)", ck.get("model").unwrap_or("unknown model"), ck.blocks().len()),
    })
}

pub fn cmd_selftest(a: SelftestArgs) -> Result<i32> {
    let mut checks = vec![grad_posenet()?, grad_fallnet()?, normalization()?, heatmaps()?, metrics()?];
    if let Some(p) = &a.checkpoint {
        checks.push(checkpoint(p)?);
    }
    for c in &checks {
        println!("{} {}: {}", if c.ok { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(if checks.iter().all(|c| c.ok) { EXIT_OK } else { EXIT_NUMERIC })
}
