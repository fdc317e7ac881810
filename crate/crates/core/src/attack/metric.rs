//! Metric-based attacks: prediction correctness, confidence, entropy, and
//! modified entropy, each thresholded per class on shadow statistics.

use alloc::vec::Vec;
use num_traits::Float;

use crate::error::Error;
use crate::posterior::{entropy, Posteriors, PROB_FLOOR};
use crate::Result;

/// Which scalar metric a threshold table applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MetricTag {
    Conf,
    Ent,
    Ment,
}

/// Decision direction: are members the high or the low side of the metric?
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Member iff value >= threshold (confidence, boundary distance).
    GreaterEq,
    /// Member iff value <= threshold (entropy, modified entropy).
    LessEq,
}

impl MetricTag {
    pub fn direction(&self) -> Direction {
        match self {
            MetricTag::Conf => Direction::GreaterEq,
            MetricTag::Ent | MetricTag::Ment => Direction::LessEq,
        }
    }
}

/// Which modified-entropy formula to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MentVariant {
    /// `-(1-p_y) ln p_y - sum_{i!=y} p_i ln p_i`.
    #[default]
    AsPrinted,
    /// The original formulation with `ln(1-p_i)` in the off-class term.
    Original,
}

/// Prediction correctness: 1 iff the argmax matches the true label.
/// Argmax ties break toward the lowest class index.
pub fn metric_corr(p: &Posteriors, y: usize) -> bool {
    p.argmax() == y
}

/// Modified entropy, exactly as the defining equation prints it.
pub fn ment(p: &Posteriors, y: usize) -> Result<f64> {
    ment_variant(p, y, MentVariant::AsPrinted)
}

pub fn ment_variant(p: &Posteriors, y: usize, variant: MentVariant) -> Result<f64> {
    let py = p.prob(y)?;
    let mut value = -(1.0 - py) * Float::ln(py.max(PROB_FLOOR));
    for (i, &pi) in p.as_slice().iter().enumerate() {
        if i == y {
            continue;
        }
        value -= match variant {
            MentVariant::AsPrinted => pi * Float::ln(pi.max(PROB_FLOOR)),
            MentVariant::Original => pi * Float::ln((1.0 - pi).max(PROB_FLOOR)),
        };
    }
    Ok(value)
}

/// Per-class thresholds with a global fallback.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThresholdTable {
    pub tag: MetricTag,
    /// `None` entries fall back to the global threshold.
    pub per_class: Vec<Option<f64>>,
    pub global: f64,
}

impl ThresholdTable {
    pub fn threshold_for(&self, class: usize) -> f64 {
        self.per_class.get(class).copied().flatten().unwrap_or(self.global)
    }
}

/// Member iff the correct-class confidence reaches the class threshold.
pub fn metric_conf(p: &Posteriors, y: usize, table: &ThresholdTable) -> Result<bool> {
    Ok(p.prob(y)? >= table.threshold_for(y))
}

/// Member iff the posterior entropy is at most the class threshold.
pub fn metric_ent(p: &Posteriors, y: usize, table: &ThresholdTable) -> bool {
    entropy(p) <= table.threshold_for(y)
}

/// Member iff the modified entropy is at most the class threshold.
pub fn metric_ment(
    p: &Posteriors,
    y: usize,
    table: &ThresholdTable,
    variant: MentVariant,
) -> Result<bool> {
    Ok(ment_variant(p, y, variant)? <= table.threshold_for(y))
}

/// Candidate thresholds: one sentinel below all values, the midpoints of
/// adjacent sorted distinct values, and one sentinel above all values.
pub fn threshold_candidates(values: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite metric values"));
    sorted.dedup();
    match sorted.as_slice() {
        [] => vec![0.0],
        [only] => vec![*only],
        _ => {
            let mut cands = Vec::with_capacity(sorted.len() + 1);
            cands.push(sorted[0] - 1.0);
            for w in sorted.windows(2) {
                cands.push(0.5 * (w[0] + w[1]));
            }
            cands.push(sorted[sorted.len() - 1] + 1.0);
            cands
        }
    }
}

fn balanced_accuracy_at(
    members: &[f64],
    non_members: &[f64],
    tau: f64,
    direction: Direction,
) -> f64 {
    // inputs pre-sorted ascending
    let m_lt = members.partition_point(|v| *v < tau);
    let n_lt = non_members.partition_point(|v| *v < tau);
    let (tpr, tnr) = match direction {
        Direction::GreaterEq => (
            (members.len() - m_lt) as f64 / members.len() as f64,
            n_lt as f64 / non_members.len() as f64,
        ),
        Direction::LessEq => {
            let m_le = members.partition_point(|v| *v <= tau);
            let n_le = non_members.partition_point(|v| *v <= tau);
            (
                m_le as f64 / members.len() as f64,
                (non_members.len() - n_le) as f64 / non_members.len() as f64,
            )
        }
    };
    0.5 * (tpr + tnr)
}

/// Pick the candidate threshold maximizing balanced accuracy; ties break
/// toward the smaller threshold. Returns `(threshold, balanced_accuracy)`.
pub fn select_threshold_1d(
    members: &[f64],
    non_members: &[f64],
    direction: Direction,
) -> Result<(f64, f64)> {
    if members.is_empty() || non_members.is_empty() {
        return Err(Error::invalid("threshold selection needs values on both sides"));
    }
    let mut ms = members.to_vec();
    let mut ns = non_members.to_vec();
    ms.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite metric values"));
    ns.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite metric values"));
    let pooled: Vec<f64> = ms.iter().chain(ns.iter()).copied().collect();
    let mut best_tau = f64::NAN;
    let mut best_acc = f64::NEG_INFINITY;
    for tau in threshold_candidates(&pooled) {
        let acc = balanced_accuracy_at(&ms, &ns, tau, direction);
        if acc > best_acc {
            best_acc = acc;
            best_tau = tau;
        }
    }
    Ok((best_tau, best_acc))
}

/// Build a per-class threshold table from shadow metric values.
///
/// `members` / `non_members` carry `(class, value)` pairs. Classes with an
/// empty side get no entry and fall back to the global threshold.
pub fn select_thresholds(
    tag: MetricTag,
    members: &[(usize, f64)],
    non_members: &[(usize, f64)],
    num_classes: usize,
) -> Result<ThresholdTable> {
    if members.is_empty() || non_members.is_empty() {
        return Err(Error::invalid("threshold selection needs both member and non-member values"));
    }
    let direction = tag.direction();
    let all_m: Vec<f64> = members.iter().map(|(_, v)| *v).collect();
    let all_n: Vec<f64> = non_members.iter().map(|(_, v)| *v).collect();
    let (global, _) = select_threshold_1d(&all_m, &all_n, direction)?;
    let mut per_class = Vec::with_capacity(num_classes);
    for class in 0..num_classes {
        let cm: Vec<f64> =
            members.iter().filter(|(c, _)| *c == class).map(|(_, v)| *v).collect();
        let cn: Vec<f64> =
            non_members.iter().filter(|(c, _)| *c == class).map(|(_, v)| *v).collect();
        if cm.is_empty() || cn.is_empty() {
            per_class.push(None);
        } else {
            per_class.push(Some(select_threshold_1d(&cm, &cn, direction)?.0));
        }
    }
    Ok(ThresholdTable { tag, per_class, global })
}
