//! Invariants checked over generated inputs.

use proptest::prelude::*;

use sshfd::data::split_indices;
use sshfd::eval::weighted_prf;
use sshfd::features::{decode_q, encode_p, encode_q, mask_p, P_WIDTH};
use sshfd::nn::Checkpoint;
use sshfd::ojr::evaluation_mask;
use sshfd::pose::heatmap::{decode_heatmaps, encode_heatmaps};
use sshfd::pose::{normalize_pose2d, normalize_pose3d};
use sshfd::training::epoch_batches;
use sshfd::{BBox, JointLayout, Pose2D, Pose3D, ReferenceFrame, NUM_JOINTS};

fn coords2d() -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec(prop::array::uniform2(-500.0..1500.0f64), NUM_JOINTS)
}

fn coords3d() -> impl Strategy<Value = Vec<[f64; 3]>> {
    prop::collection::vec(prop::array::uniform3(-2000.0..2000.0f64), NUM_JOINTS)
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

proptest! {
    #[test]
    fn normalization_2d_ignores_translation_and_scale(
        c in coords2d(),
        s in 0.05..20.0f64,
        tx in -1e4..1e4f64,
        ty in -1e4..1e4f64,
    ) {
        let frame = ReferenceFrame::default();
        let pose = Pose2D::from_visible(c.clone(), vec![true; NUM_JOINTS]).unwrap();
        let Some(b) = BBox::around_visible(&pose, 0.1) else { return Ok(()) };
        prop_assume!(!b.is_degenerate());
        let moved = Pose2D::from_visible(c.iter().map(|p| [p[0] * s + tx, p[1] * s + ty]).collect(), vec![true; NUM_JOINTS]).unwrap();
        let mb = BBox::from_corners(b.x0 * s + tx, b.y0 * s + ty, b.x1 * s + tx, b.y1 * s + ty);
        let n0 = normalize_pose2d(&pose, &b, &frame).unwrap();
        let n1 = normalize_pose2d(&moved, &mb, &frame).unwrap();
        for (u, v) in n0.coords().iter().zip(n1.coords()) {
            prop_assert!((u[0] - v[0]).abs() <= 1e-9 * frame.width);
            prop_assert!((u[1] - v[1]).abs() <= 1e-9 * frame.height);
        }
    }

    #[test]
    fn normalization_3d_centers_hip_and_keeps_distances(c in coords3d()) {
        let layout = JointLayout::coco17();
        let n = normalize_pose3d(&Pose3D::all_visible(c.clone()).unwrap(), &layout).unwrap();
        prop_assert_eq!(n.coords()[layout.hip_index()], [0.0, 0.0, 0.0]);
        for i in 0..NUM_JOINTS {
            for j in i + 1..NUM_JOINTS {
                let d = dist(c[i], c[j]);
                prop_assert!((dist(n.coords()[i], n.coords()[j]) - d).abs() <= 1e-9 * d.max(1.0));
            }
        }
    }

    #[test]
    fn heatmap_roundtrip_on_integer_pixels(
        xy in prop::collection::vec((0usize..48, 0usize..40), NUM_JOINTS),
        sigma in 1.0..6.0f64,
    ) {
        let c: Vec<[f64; 2]> = xy.iter().map(|&(x, y)| [x as f64, y as f64]).collect();
        let pose = Pose2D::from_visible(c.clone(), vec![true; NUM_JOINTS]).unwrap();
        let back = decode_heatmaps(&encode_heatmaps(&pose, 48, 40, sigma).unwrap()).unwrap();
        prop_assert_eq!(back.coords(), c.as_slice());
    }

    #[test]
    fn evaluation_masks_hide_exactly_m_joints(seed in any::<u64>(), m in 0usize..NUM_JOINTS, idx in 0usize..100_000) {
        let mask = evaluation_mask(seed, m, idx).unwrap();
        prop_assert_eq!(mask.occluded_count(), m);
        prop_assert_eq!(mask, evaluation_mask(seed, m, idx).unwrap());
    }

    #[test]
    fn masked_2d_rows_are_zero_exactly_where_hidden(c in coords2d(), seed in any::<u64>(), m in 0usize..9) {
        let frame = ReferenceFrame::default();
        let pose = Pose2D::from_visible(c.iter().map(|p| [p[0].rem_euclid(224.0), p[1].rem_euclid(224.0)]).collect(), vec![true; NUM_JOINTS]).unwrap();
        let mut p = encode_p(&pose, &frame);
        prop_assert_eq!(p.len(), P_WIDTH);
        let mask = evaluation_mask(seed, m, 0).unwrap();
        mask_p(&mut p, &mask);
        for (j, &v) in mask.visible().iter().enumerate() {
            if !v {
                prop_assert_eq!((p[2 * j], p[2 * j + 1]), (0.0, 0.0));
            }
        }
    }

    #[test]
    fn q_encoding_roundtrips_within_f32(c in coords3d()) {
        let frame = ReferenceFrame::default();
        let pose = Pose3D::all_visible(c.clone()).unwrap();
        let back = decode_q(&encode_q(&pose, &frame), &frame).unwrap();
        for (a, b) in c.iter().zip(back.coords()) {
            for d in 0..3 {
                prop_assert!((a[d] - b[d]).abs() <= 1e-6 * a[d].abs().max(1.0) * 4.0);
            }
        }
    }

    #[test]
    fn weighted_scores_are_bounded_and_perfect_on_identity(
        labels in prop::collection::vec((0usize..2, 0usize..2), 1..200),
    ) {
        let (preds, gts): (Vec<usize>, Vec<usize>) = labels.into_iter().unzip();
        let r = weighted_prf(&preds, &gts, 2).unwrap();
        for v in [r.weighted_precision, r.weighted_recall, r.weighted_f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let perfect = weighted_prf(&gts, &gts, 2).unwrap();
        prop_assert_eq!(perfect.weighted_f1, 1.0);
    }

    #[test]
    fn split_partitions_indices(n in 0usize..2000, frac in 0.0..=1.0f64, seed in any::<u64>()) {
        let (tr, te) = split_indices(n, frac, seed);
        prop_assert_eq!(tr.len(), ((n as f64) * frac).round() as usize);
        let mut all = [tr, te].concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn batches_partition_and_never_leave_a_singleton(n in 2usize..3000, b in 1usize..300, seed in any::<u64>(), epoch in 0usize..50) {
        let batches = epoch_batches(n, b, seed, epoch);
        prop_assert!(batches.iter().all(|x| x.len() >= 2 || b == 1));
        let mut all = batches.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn checkpoint_bytes_roundtrip(
        blocks in prop::collection::vec(prop::collection::vec(any::<f32>(), 0..50), 0..6),
        meta in prop::collection::btree_map("[a-z.]{1,12}", "[ -~]{0,20}", 0..6),
    ) {
        let mut ck = Checkpoint::new();
        for (k, v) in &meta {
            ck.set(k, v.clone());
        }
        for (i, b) in blocks.iter().enumerate() {
            ck.push_block(format!("b{i}"), b.clone());
        }
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
    }
}
