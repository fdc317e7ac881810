//! Verdict-level evaluation: accuracy, precision, recall, F1, and AUC with
//! members as the positive class.

use alloc::vec::Vec;

use crate::attack::MembershipVerdict;
use crate::error::Error;
use crate::Result;

/// Standard binary-classification metrics for one attack run.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AttackMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
}

/// AUC of member scores vs non-member scores via average ranks; tied pairs
/// count one half.
pub fn auc_from_scores(member_scores: &[f64], non_member_scores: &[f64]) -> Result<f64> {
    if member_scores.is_empty() || non_member_scores.is_empty() {
        return Err(Error::Degenerate("AUC undefined without both classes"));
    }
    let mut all: Vec<(f64, bool)> = member_scores
        .iter()
        .map(|&s| (s, true))
        .chain(non_member_scores.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores"));
    // average ranks over tie groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for item in &all[i..=j] {
            if item.1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let np = member_scores.len() as f64;
    let nn = non_member_scores.len() as f64;
    let u = rank_sum_pos - np * (np + 1.0) / 2.0;
    Ok(u / (np * nn))
}

/// Compute all metrics from verdicts carrying truth and scores.
pub fn attack_metrics(verdicts: &[MembershipVerdict]) -> Result<AttackMetrics> {
    if verdicts.is_empty() {
        return Err(Error::invalid("no verdicts to evaluate"));
    }
    let mut tp = 0usize;
    let mut tn = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    let mut member_scores = Vec::new();
    let mut non_member_scores = Vec::new();
    for v in verdicts {
        let truth = v.truth.ok_or(Error::invalid("verdict is missing ground truth"))?;
        let score = v.score.ok_or(Error::invalid("verdict is missing a score for AUC"))?;
        match (v.decision.is_member(), truth.is_member()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
        if truth.is_member() {
            member_scores.push(score);
        } else {
            non_member_scores.push(score);
        }
    }
    let n = verdicts.len() as f64;
    let accuracy = (tp + tn) as f64 / n;
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let auc = auc_from_scores(&member_scores, &non_member_scores)?;
    Ok(AttackMetrics { accuracy, precision, recall, f1, auc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::Membership;

    fn verdict(decision: bool, score: f64, truth: bool) -> MembershipVerdict {
        MembershipVerdict {
            sample_id: 0,
            decision: Membership::from_bool(decision),
            score: Some(score),
            truth: Some(Membership::from_bool(truth)),
            flag: None,
        }
    }

    /// Brute-force pairwise AUC oracle: ties count one half.
    pub(crate) fn auc_pairwise(pos: &[f64], neg: &[f64]) -> f64 {
        let mut u = 0.0;
        for &p in pos {
            for &q in neg {
                if p > q {
                    u += 1.0;
                } else if p == q {
                    u += 0.5;
                }
            }
        }
        u / (pos.len() * neg.len()) as f64
    }

    #[test]
    fn perfect_attack_scores_one() {
        let vs = vec![
            verdict(true, 0.9, true),
            verdict(true, 0.8, true),
            verdict(false, 0.1, false),
            verdict(false, 0.2, false),
        ];
        let m = attack_metrics(&vs).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.f1, 1.0);
        assert_eq!(m.auc, 1.0);
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 1.0);
    }

    #[test]
    fn truth_independent_decisions_are_chance() {
        let mut vs = Vec::new();
        for i in 0..200 {
            let truth = i % 2 == 0;
            let decision = (i / 2) % 2 == 0;
            vs.push(verdict(decision, 0.5, truth));
        }
        let m = attack_metrics(&vs).unwrap();
        assert!((m.accuracy - 0.5).abs() < 0.05);
        assert!((m.auc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rank_auc_matches_pairwise_oracle() {
        let pos = [0.9, 0.5, 0.5, 0.3, 0.8, 0.1];
        let neg = [0.4, 0.5, 0.2, 0.05, 0.8];
        let fast = auc_from_scores(&pos, &neg).unwrap();
        let slow = auc_pairwise(&pos, &neg);
        assert!((fast - slow).abs() < 1e-12);
    }

    #[test]
    fn auc_needs_both_classes() {
        let vs = vec![verdict(true, 0.9, true)];
        assert!(matches!(attack_metrics(&vs), Err(Error::Degenerate(_))));
    }

    #[test]
    fn missing_truth_rejected() {
        let mut v = verdict(true, 0.9, true);
        v.truth = None;
        assert!(attack_metrics(&[v]).is_err());
    }
}
