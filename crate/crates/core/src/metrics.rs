//! Pair-level skeleton scores.
//!
//! Degenerate rates are resolved so that an empty prediction against an empty
//! truth scores perfectly: precision is 1 with no predicted edges, recall is 1
//! with no true edges, and F1 is 0 when precision and recall are both 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Skeleton;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkeletonScore {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub shd: usize,
    pub ci_tests: usize,
}

pub fn score_skeleton(predicted: &Skeleton, truth: &Skeleton, ci_tests: usize) -> Result<SkeletonScore> {
    if predicted.p() != truth.p() {
        return Err(Error::invalid(format!(
            "predicted skeleton has p = {}, truth has p = {}",
            predicted.p(),
            truth.p()
        )));
    }
    let p = truth.p();
    let tp = predicted.edges().filter(|&(i, j)| truth.has_edge(i, j)).count();
    let fp = predicted.edge_count() - tp;
    let fn_ = truth.edge_count() - tp;
    let pairs = p * p.saturating_sub(1) / 2;
    let tn = pairs - tp - fp - fn_;

    let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    let accuracy = if pairs == 0 { 1.0 } else { (tp + tn) as f64 / pairs as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(SkeletonScore {
        tp,
        fp,
        fn_,
        tn,
        precision,
        recall,
        accuracy,
        f1,
        shd: fp + fn_,
        ci_tests,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Arithmetic mean and sample (n - 1) standard deviation; `std` is 0 for one value.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub runs: usize,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub accuracy: MeanStd,
    pub f1: MeanStd,
    pub shd: MeanStd,
    pub ci_tests: MeanStd,
}

pub fn aggregate_scores(scores: &[SkeletonScore]) -> Result<ScoreSummary> {
    if scores.is_empty() {
        return Err(Error::invalid("cannot aggregate an empty score list"));
    }
    let field = |f: fn(&SkeletonScore) -> f64| -> MeanStd {
        MeanStd::of(&scores.iter().map(f).collect::<Vec<_>>())
    };
    Ok(ScoreSummary {
        runs: scores.len(),
        precision: field(|s| s.precision),
        recall: field(|s| s.recall),
        accuracy: field(|s| s.accuracy),
        f1: field(|s| s.f1),
        shd: field(|s| s.shd as f64),
        ci_tests: field(|s| s.ci_tests as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Builds a pair of skeletons over p = 10 with prescribed confusion counts.
    fn confusion(tp: usize, fp: usize, fn_: usize) -> (Skeleton, Skeleton) {
        let pairs: Vec<(usize, usize)> = (0..10).flat_map(|i| (i + 1..10).map(move |j| (i, j))).collect();
        let mut pred = Skeleton::empty(10);
        let mut truth = Skeleton::empty(10);
        let mut it = pairs.into_iter();
        for _ in 0..tp {
            let (i, j) = it.next().unwrap();
            pred.add_edge(i, j);
            truth.add_edge(i, j);
        }
        for _ in 0..fp {
            let (i, j) = it.next().unwrap();
            pred.add_edge(i, j);
        }
        for _ in 0..fn_ {
            let (i, j) = it.next().unwrap();
            truth.add_edge(i, j);
        }
        (pred, truth)
    }

    #[test]
    fn identity_scores_perfectly() {
        let (_, truth) = confusion(5, 0, 3);
        let s = score_skeleton(&truth, &truth, 7).unwrap();
        assert_eq!((s.precision, s.recall, s.accuracy, s.f1, s.shd), (1.0, 1.0, 1.0, 1.0, 0));
        assert_eq!(s.ci_tests, 7);
    }

    #[test]
    fn hand_counted_example() {
        let (pred, truth) = confusion(8, 2, 1);
        let s = score_skeleton(&pred, &truth, 0).unwrap();
        assert_eq!((s.tp, s.fp, s.fn_, s.tn), (8, 2, 1, 34));
        assert!((s.precision - 0.8).abs() < 1e-12);
        assert!((s.recall - 8.0 / 9.0).abs() < 1e-12);
        assert!((s.accuracy - 42.0 / 45.0).abs() < 1e-12);
        assert_eq!(s.shd, 3);
    }

    #[test]
    fn empty_versus_empty() {
        let e = Skeleton::empty(5);
        let s = score_skeleton(&e, &e, 0).unwrap();
        assert_eq!((s.precision, s.recall, s.f1, s.accuracy), (1.0, 1.0, 1.0, 1.0));
        let (pred, truth) = confusion(0, 2, 2);
        let s = score_skeleton(&pred, &truth, 0).unwrap();
        assert_eq!(s.f1, 0.0);
    }

    #[test]
    fn forty_four_node_consistency() {
        // 44 nodes, 66 true edges, every one found, 15 spurious
        let pairs: Vec<(usize, usize)> = (0..44).flat_map(|i| (i + 1..44).map(move |j| (i, j))).collect();
        let truth = Skeleton::from_edges(44, pairs[..66].iter().copied()).unwrap();
        let pred = Skeleton::from_edges(44, pairs[..81].iter().copied()).unwrap();
        let s = score_skeleton(&pred, &truth, 0).unwrap();
        assert_eq!(s.recall, 1.0);
        assert_eq!(s.shd, 15);
        assert!((s.precision - 66.0 / 81.0).abs() < 1e-12);
        assert!((s.accuracy - 931.0 / 946.0).abs() < 1e-12);
        assert!((0.8108..=0.8176).contains(&s.precision));
        assert!((0.9840..=0.9846).contains(&s.accuracy));
    }

    #[test]
    fn dimension_mismatch() {
        assert!(score_skeleton(&Skeleton::empty(3), &Skeleton::empty(4), 0).is_err());
    }

    #[test]
    fn swapping_roles_swaps_errors() {
        let (pred, truth) = confusion(4, 3, 6);
        let a = score_skeleton(&pred, &truth, 0).unwrap();
        let b = score_skeleton(&truth, &pred, 0).unwrap();
        assert_eq!((a.fp, a.fn_), (b.fn_, b.fp));
        assert_eq!(a.shd, b.shd);
        assert_eq!(a.accuracy, b.accuracy);
    }

    #[test]
    fn aggregation() {
        let (pred, truth) = confusion(8, 2, 1);
        let one = score_skeleton(&pred, &truth, 10).unwrap();
        let s = aggregate_scores(&[one]).unwrap();
        assert_eq!(s.precision.mean, one.precision);
        assert_eq!(s.precision.std, 0.0);

        let mut a = one;
        let mut b = one;
        a.shd = 15;
        b.shd = 16;
        assert_eq!(aggregate_scores(&[a, b]).unwrap().shd.mean, 15.5);
        assert!(aggregate_scores(&[]).is_err());
    }
}
