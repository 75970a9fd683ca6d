//! Scoring helpers shared by the benchmarks: confusion counts, point-adjusted
//! F1 for anomaly segments and pairwise F1 for clusterings.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn merge(&mut self, other: Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

// Empty denominators score 1: nothing to find and nothing wrongly found.
fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Point-wise confusion after point adjustment: if any point of a contiguous
/// ground-truth anomaly segment is predicted, every point of that segment
/// counts as detected.
pub fn point_adjusted(pred: &[bool], truth: &[bool]) -> Confusion {
    assert_eq!(pred.len(), truth.len(), "prediction and truth lengths differ");
    let mut adjusted = pred.to_vec();
    let mut i = 0;
    while i < truth.len() {
        if !truth[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < truth.len() && truth[i] {
            i += 1;
        }
        if pred[start..i].iter().any(|&p| p) {
            adjusted[start..i].iter_mut().for_each(|p| *p = true);
        }
    }
    let mut c = Confusion::default();
    for (&p, &t) in adjusted.iter().zip(truth) {
        match (p, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    c
}

/// Pairwise clustering confusion: a pair of items is positive when both
/// carry the same cluster key. Items are matched by position.
pub fn pairwise<P: Eq + Hash, T: Eq + Hash>(pred: &[P], truth: &[T]) -> Confusion {
    assert_eq!(pred.len(), truth.len(), "prediction and truth lengths differ");
    let mut joint: HashMap<(&P, &T), usize> = HashMap::new();
    let mut by_pred: HashMap<&P, usize> = HashMap::new();
    let mut by_truth: HashMap<&T, usize> = HashMap::new();
    for (p, t) in pred.iter().zip(truth) {
        *joint.entry((p, t)).or_default() += 1;
        *by_pred.entry(p).or_default() += 1;
        *by_truth.entry(t).or_default() += 1;
    }
    let tp = same_pairs(joint.values());
    let pred_pairs = same_pairs(by_pred.values());
    let truth_pairs = same_pairs(by_truth.values());
    Confusion {
        tp,
        fp: pred_pairs - tp,
        fn_: truth_pairs - tp,
    }
}

fn same_pairs<'a>(counts: impl Iterator<Item = &'a usize>) -> usize {
    counts.map(|&n| n * n.saturating_sub(1) / 2).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_adjustment_expands_hit_segments_only() {
        let truth = [false, true, true, true, false, true, true, false];
        let pred = [false, false, true, false, false, false, false, true];
        let c = point_adjusted(&pred, &truth);
        assert_eq!(c, Confusion { tp: 3, fp: 1, fn_: 2 });
    }

    #[test]
    fn pairwise_counts_by_enumeration() {
        let pred = [0, 0, 1, 1, 1];
        let truth = ["a", "a", "a", "b", "b"];
        // brute force over all 10 pairs
        let mut expect = Confusion::default();
        for i in 0..5 {
            for j in i + 1..5 {
                match (pred[i] == pred[j], truth[i] == truth[j]) {
                    (true, true) => expect.tp += 1,
                    (true, false) => expect.fp += 1,
                    (false, true) => expect.fn_ += 1,
                    _ => {}
                }
            }
        }
        assert_eq!(pairwise(&pred, &truth), expect);
    }

    #[test]
    fn empty_scores_are_perfect() {
        let c = Confusion::default();
        assert_eq!((c.precision(), c.recall(), c.f1()), (1.0, 1.0, 1.0));
    }
}
