//! Support-weighted precision, recall and F1.
//!
//! A ratio whose denominator is zero is reported as 0: a class that is never
//! predicted has precision 0, a class that never occurs has recall 0, and F1
//! is 0 when precision and recall are both 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classes: Vec<ClassMetrics>,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl ClassificationReport {
    pub fn samples(&self) -> usize {
        self.classes.iter().map(|c| c.support).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let hits: usize = (0..self.confusion.len()).map(|c| self.confusion[c][c]).sum();
        hits as f64 / self.samples() as f64
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class and support-weighted metrics over `n_classes` classes.
pub fn weighted_prf(preds: &[usize], gts: &[usize], n_classes: usize) -> Result<ClassificationReport> {
    if preds.is_empty() {
        return Err(Error::data("no samples to score"));
    }
    if preds.len() != gts.len() {
        return Err(Error::shape(format!("{} predictions for {} labels", preds.len(), gts.len())));
    }
    if let Some(&l) = preds.iter().chain(gts).find(|&&l| l >= n_classes) {
        return Err(Error::LabelOutOfRange { label: l, classes: n_classes });
    }
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &g) in preds.iter().zip(gts) {
        confusion[g][p] += 1;
    }
    let classes: Vec<ClassMetrics> = (0..n_classes)
        .map(|c| {
            let tp = confusion[c][c];
            let predicted: usize = (0..n_classes).map(|g| confusion[g][c]).sum();
            let support: usize = confusion[c].iter().sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics { precision, recall, f1, support }
        })
        .collect();
    let n = preds.len() as f64;
    let weighted = |f: fn(&ClassMetrics) -> f64| classes.iter().map(|c| c.support as f64 * f(c)).sum::<f64>() / n;
    Ok(ClassificationReport {
        weighted_precision: weighted(|c| c.precision),
        weighted_recall: weighted(|c| c.recall),
        weighted_f1: weighted(|c| c.f1),
        classes,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let l = [0, 1, 1, 0, 1];
        let r = weighted_prf(&l, &l, 2).unwrap();
        assert_eq!((r.weighted_precision, r.weighted_recall, r.weighted_f1), (1.0, 1.0, 1.0));
        assert_eq!(r.accuracy(), 1.0);
    }

    #[test]
    fn hand_computed_example() {
        // F = 1, N = 0
        let gts = [1, 1, 1, 0];
        let preds = [1, 1, 0, 0];
        let r = weighted_prf(&preds, &gts, 2).unwrap();
        assert_eq!(r.classes[1].precision, 1.0);
        assert!((r.classes[1].recall - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.classes[0].precision, 0.5);
        assert!((r.weighted_f1 - (3.0 * 0.8 + 2.0 / 3.0) / 4.0).abs() < 1e-12);
        assert_eq!(r.samples(), 4);
    }

    #[test]
    fn never_predicted_class_has_zero_precision() {
        let r = weighted_prf(&[0, 0, 0], &[0, 1, 1], 2).unwrap();
        assert_eq!(r.classes[1].precision, 0.0);
        assert_eq!(r.classes[1].f1, 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(weighted_prf(&[], &[], 2), Err(Error::Data(_))));
        assert!(weighted_prf(&[0], &[0, 1], 2).is_err());
        assert!(matches!(weighted_prf(&[2], &[0], 2), Err(Error::LabelOutOfRange { .. })));
    }
}
