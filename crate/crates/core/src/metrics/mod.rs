//! Classification metrics, hypothesis tests and k-fold cross-validation.
//!
//! AD is the positive class throughout; ROC scores are AD probabilities.

pub mod cv;
pub mod stats;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::data::Class;
use crate::error::{Error, Result};
use crate::math;

pub use cv::{cv_plan, cv_run, run_fold, score_predictions, stratified_kfold, CvOptions, CvPlan, CvReport, CvSummary, FoldReport};
pub use stats::{one_way_anova, reg_incomplete_beta, t_test, AnovaResult, TTestResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `(tp + tn) / total`; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let n = self.total();
        if n == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / n as f64
    }
}

/// Counts `(predicted, truth)` pairs.
pub fn confusion(predicted: &[Class], truth: &[Class]) -> Result<ConfusionMatrix> {
    if predicted.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    if predicted.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            op: "confusion",
            lhs: alloc::vec![predicted.len()],
            rhs: alloc::vec![truth.len()],
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (Class::Ad, Class::Ad) => cm.tp += 1,
            (Class::Ad, Class::Cn) => cm.fp += 1,
            (Class::Cn, Class::Cn) => cm.tn += 1,
            (Class::Cn, Class::Ad) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    cm.accuracy()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores `>= threshold` are called AD. The leading sentinel uses +∞.
    pub threshold: f64,
}

fn class_counts(labels: &[Class]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l == Class::Ad).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

fn check_lengths(scores: &[f64], labels: &[Class]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "roc",
            lhs: alloc::vec![scores.len()],
            rhs: alloc::vec![labels.len()],
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(crate::error::invalid("NaN score"));
    }
    Ok(())
}

/// ROC curve over the distinct scores in descending order, starting at the
/// `(0, 0)` sentinel and ending at `(1, 1)`.
pub fn roc_points(scores: &[f64], labels: &[Class]) -> Result<Vec<RocPoint>> {
    check_lengths(scores, labels)?;
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = alloc::vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            match labels[order[i]] {
                Class::Ad => tp += 1,
                Class::Cn => fp += 1,
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold,
        });
    }
    Ok(points)
}

/// Trapezoidal area under a ROC sequence.
pub fn auc_trapezoid(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

/// `(#{pos > neg} + ½·#{ties}) / (n_pos · n_neg)` by direct pair count.
pub fn auc_mannwhitney(scores: &[f64], labels: &[Class]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let (pos, neg) = class_counts(labels)?;
    let mut wins = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != Class::Ad {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != Class::Cn {
                continue;
            }
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (pos * neg) as f64)
}

/// Mean and sample standard deviation (`n − 1`); std is 0 for one value.
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("values"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok((mean, math::sqrt(ss / (n - 1.0))))
}

/// `"xx.xx ± yy.yy"`.
pub fn render_mean_std(mean: f64, std: f64) -> String {
    format!("{mean:.2} ± {std:.2}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use Class::{Ad, Cn};

    #[test]
    fn confusion_examples() {
        let cm = confusion(&[Ad, Ad, Cn, Cn], &[Ad, Cn, Cn, Cn]).unwrap();
        assert_eq!(cm, ConfusionMatrix { tp: 1, fp: 1, tn: 2, fn_: 0 });
        assert_eq!(accuracy(&cm), 0.75);
        assert_eq!(confusion(&[Ad, Cn], &[Ad, Cn]).unwrap().accuracy(), 1.0);
        assert_eq!(confusion(&[Cn, Ad], &[Ad, Cn]).unwrap().accuracy(), 0.0);
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn auc_examples() {
        let cases: [(&[f64], &[Class], f64); 3] = [
            (&[0.9, 0.8, 0.3, 0.1], &[Ad, Ad, Cn, Cn], 1.0),
            (&[0.9, 0.6, 0.4, 0.1], &[Ad, Cn, Ad, Cn], 0.75),
            (&[0.5; 4], &[Ad, Cn, Ad, Cn], 0.5),
        ];
        for (s, l, want) in cases {
            let pts = roc_points(s, l).unwrap();
            assert_eq!((pts[0].fpr, pts[0].tpr), (0.0, 0.0));
            let last = pts.last().unwrap();
            assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
            assert!((auc_trapezoid(&pts) - want).abs() < 1e-12);
            assert!((auc_mannwhitney(s, l).unwrap() - want).abs() < 1e-12);
        }
        assert_eq!(auc_mannwhitney(&[0.3, 0.3], &[Ad, Cn]).unwrap(), 0.5);
        assert_eq!(roc_points(&[0.1, 0.2], &[Ad, Ad]), Err(Error::SingleClass));
        let flipped = auc_mannwhitney(&[0.9, 0.6, 0.4, 0.1], &[Cn, Ad, Cn, Ad]).unwrap();
        assert!((flipped - 0.25).abs() < 1e-12);
    }

    #[test]
    fn mean_std_examples() {
        let (m, s) = mean_std(&[98.33; 7]).unwrap();
        assert_eq!(render_mean_std(m, s), "98.33 ± 0.00");
        assert_eq!(mean_std(&[1.0, 2.0, 3.0]).unwrap(), (2.0, 1.0));
        let (m, s) = mean_std(&[42.5]).unwrap();
        assert_eq!(render_mean_std(m, s), "42.50 ± 0.00");
        assert!(mean_std(&[]).is_err());
    }
}
