//! Attack-free risk estimation: overfitting level, Jensen-Shannon distance of
//! entropy/cross-entropy score distributions, Pearson correlation, and linear
//! calibration.

use alloc::vec::Vec;
use num_traits::Float;

use crate::data::Dataset;
use crate::error::Error;
use crate::model::PosteriorOracle;
use crate::posterior::{cross_entropy, entropy};
use crate::Result;

/// Default histogram bin count over the pooled score range.
pub const DEFAULT_BINS: usize = 100;

/// Which per-sample score a distribution was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ScoreMetric {
    /// Posterior entropy; ignores the true label.
    Entropy,
    /// Cross-entropy against the true label.
    CrossEntropy,
}

/// A normalized histogram of scores over shared bin edges.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreDistribution {
    pub metric: ScoreMetric,
    /// `bins + 1` strictly increasing edges.
    pub edges: Vec<f64>,
    /// `bins` masses summing to 1.
    pub masses: Vec<f64>,
    pub n: usize,
}

/// Training-minus-testing accuracy. May be negative.
pub fn overfitting_level(train_acc: f64, test_acc: f64) -> f64 {
    train_acc - test_acc
}

/// Class-conditional overfitting levels; `None` where either side lacks samples.
pub fn per_class_overfitting(
    train: &[Option<f64>],
    test: &[Option<f64>],
) -> Vec<Option<f64>> {
    train
        .iter()
        .zip(test)
        .map(|(tr, te)| match (tr, te) {
            (Some(a), Some(b)) => Some(a - b),
            _ => None,
        })
        .collect()
}

/// Shared bin edges spanning the pooled range of both score sets.
pub fn shared_edges(a: &[f64], b: &[f64], bins: usize) -> Result<Vec<f64>> {
    if bins < 2 {
        return Err(Error::invalid("need at least 2 bins"));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("score sets must be nonempty"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in a.iter().chain(b) {
        if !v.is_finite() {
            return Err(Error::invalid("scores must be finite"));
        }
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if lo == hi {
        // all scores identical: widen artificially around the single value
        lo -= 0.5;
        hi += 0.5;
    }
    let step = (hi - lo) / bins as f64;
    Ok((0..=bins).map(|i| lo + step * i as f64).collect())
}

/// Histogram over precomputed edges; the last bin includes its upper edge.
pub fn histogram(scores: &[f64], edges: &[f64], metric: ScoreMetric) -> Result<ScoreDistribution> {
    if edges.len() < 3 {
        return Err(Error::invalid("need at least 2 bins"));
    }
    if edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("edges must be strictly increasing"));
    }
    if scores.is_empty() {
        return Err(Error::invalid("score set must be nonempty"));
    }
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &s in scores {
        if s < lo || s > hi {
            return Err(Error::invalid("score outside the shared edge range"));
        }
        let idx = (((s - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let n = scores.len();
    let masses = counts.into_iter().map(|c| c as f64 / n as f64).collect();
    Ok(ScoreDistribution { metric, edges: edges.to_vec(), masses, n })
}

/// Per-sample scores under the oracle: entropy or cross-entropy.
pub fn score_samples(
    oracle: &dyn PosteriorOracle,
    data: &Dataset,
    idx: &[usize],
    metric: ScoreMetric,
) -> Result<Vec<f64>> {
    idx.iter()
        .map(|&i| {
            let p = oracle.posteriors(data.sample(i))?;
            match metric {
                ScoreMetric::Entropy => Ok(entropy(&p)),
                ScoreMetric::CrossEntropy => cross_entropy(&p, data.label(i)),
            }
        })
        .collect()
}

/// Member and non-member score distributions over shared edges.
pub fn score_distributions(
    oracle: &dyn PosteriorOracle,
    data: &Dataset,
    members: &[usize],
    non_members: &[usize],
    metric: ScoreMetric,
    bins: usize,
) -> Result<(ScoreDistribution, ScoreDistribution)> {
    let ms = score_samples(oracle, data, members, metric)?;
    let ns = score_samples(oracle, data, non_members, metric)?;
    let edges = shared_edges(&ms, &ns, bins)?;
    Ok((histogram(&ms, &edges, metric)?, histogram(&ns, &edges, metric)?))
}

fn kl_base2(p: &[f64], m: &[f64]) -> f64 {
    // 0 log(0/x) = 0; p > 0 implies m >= p/2 > 0
    p.iter()
        .zip(m)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, mi)| pi * Float::log2(pi / mi))
        .sum()
}

/// Jensen-Shannon divergence (log base 2) between two histograms on identical
/// edges. Bounded by 1; zero iff the histograms are equal.
pub fn js_divergence(p: &ScoreDistribution, q: &ScoreDistribution) -> Result<f64> {
    if p.edges != q.edges {
        return Err(Error::invalid("JS divergence needs identical shared edges"));
    }
    let m: Vec<f64> =
        p.masses.iter().zip(&q.masses).map(|(a, b)| 0.5 * (a + b)).collect();
    let d = 0.5 * kl_base2(&p.masses, &m) + 0.5 * kl_base2(&q.masses, &m);
    Ok(d.clamp(0.0, 1.0))
}

/// JS distance: the square root of the divergence, a metric in `[0,1]`.
pub fn js_distance(p: &ScoreDistribution, q: &ScoreDistribution) -> Result<f64> {
    Ok(Float::sqrt(js_divergence(p, q)?))
}

/// Pearson correlation with the degenerate-y convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PearsonR {
    pub r: f64,
    /// True when the y side had zero variance and `r` was set to 0.
    pub degenerate: bool,
}

/// Pearson correlation coefficient. Zero variance in `xs` is an error; zero
/// variance in `ys` yields `r = 0` with the degenerate flag set.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<PearsonR> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("x and y lengths differ"));
    }
    if xs.len() < 3 {
        return Err(Error::invalid("Pearson needs at least 3 points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::Degenerate("zero variance in x"));
    }
    if syy == 0.0 {
        return Ok(PearsonR { r: 0.0, degenerate: true });
    }
    Ok(PearsonR { r: sxy / Float::sqrt(sxx * syy), degenerate: false })
}

/// Linear relation between a risk measure and attack accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Calibration {
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
}

/// Reference calibration for sorted-posterior attacks.
pub const SORTED_POSTERIOR_CALIBRATION: Calibration =
    Calibration { slope: 0.716, intercept: 0.416, r: 0.996 };

/// Reference calibration for posterior-plus-label attacks.
pub const POSTERIOR_LABEL_CALIBRATION: Calibration =
    Calibration { slope: 0.731, intercept: 0.415, r: 0.984 };

/// Least-squares line through the points, with the Pearson coefficient.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<Calibration> {
    let corr = pearson(xs, ys)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    Ok(Calibration { slope, intercept: my - slope * mx, r: corr.r })
}

/// Predicted attack accuracy from a JS distance, clamped to `[0.5, 1.0]`.
pub fn estimate_risk(js: f64, cal: &Calibration) -> f64 {
    (cal.slope * js + cal.intercept).clamp(0.5, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(masses: Vec<f64>) -> ScoreDistribution {
        let edges: Vec<f64> = (0..=masses.len()).map(|i| i as f64).collect();
        ScoreDistribution { metric: ScoreMetric::Entropy, edges, masses, n: 1 }
    }

    #[test]
    fn js_of_equal_distributions_is_zero() {
        let p = dist(vec![0.25, 0.75]);
        assert_eq!(js_distance(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn js_of_disjoint_supports_is_one() {
        let p = dist(vec![1.0, 0.0]);
        let q = dist(vec![0.0, 1.0]);
        assert!((js_distance(&p, &q).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn js_derived_example() {
        let p = dist(vec![1.0, 0.0]);
        let q = dist(vec![0.5, 0.5]);
        let d = js_divergence(&p, &q).unwrap();
        assert!((d - 0.31127812445913283).abs() < 1e-12);
        let dist_v = js_distance(&p, &q).unwrap();
        assert!((dist_v - 0.55792304528414383).abs() < 1e-12);
        assert!((dist_v - 0.55793).abs() < 1e-5);
    }

    #[test]
    fn js_requires_shared_edges() {
        let p = dist(vec![1.0, 0.0]);
        let mut q = dist(vec![0.5, 0.5]);
        q.edges[2] = 5.0;
        assert!(js_divergence(&p, &q).is_err());
    }

    #[test]
    fn histogram_single_value_has_one_occupied_bin() {
        let scores = vec![0.7; 20];
        let edges = shared_edges(&scores, &scores, 10).unwrap();
        let h = histogram(&scores, &edges, ScoreMetric::Entropy).unwrap();
        assert_eq!(h.masses.iter().filter(|&&m| m > 0.0).count(), 1);
        assert!((h.masses.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn histogram_uniform_scores_spread_evenly() {
        // counting oracle: 100 evenly spaced scores over [0,1), 10 bins -> 10 each
        let scores: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let edges = shared_edges(&scores, &scores, 10).unwrap();
        let h = histogram(&scores, &edges, ScoreMetric::Entropy).unwrap();
        for m in &h.masses {
            assert!((m - 0.1).abs() < 0.011, "mass {m}");
        }
    }

    #[test]
    fn overfitting_levels() {
        assert!((overfitting_level(1.0, 0.693) - 0.307).abs() < 1e-12);
        assert_eq!(overfitting_level(0.8, 0.8), 0.0);
        assert!(overfitting_level(0.4, 0.6) < 0.0);
    }

    #[test]
    fn pearson_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let cal = fit_line(&xs, &ys).unwrap();
        assert!((cal.slope - 2.0).abs() < 1e-12);
        assert!((cal.intercept - 1.0).abs() < 1e-12);
        assert!((cal.r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_degenerate_conventions() {
        let xs = [1.0, 2.0, 3.0];
        let flat = [0.5, 0.5, 0.5];
        let p = pearson(&xs, &flat).unwrap();
        assert_eq!(p.r, 0.0);
        assert!(p.degenerate);
        assert!(matches!(pearson(&flat, &xs), Err(Error::Degenerate(_))));
    }

    #[test]
    fn risk_estimate_paper_arithmetic() {
        let est = estimate_risk(0.492, &SORTED_POSTERIOR_CALIBRATION);
        assert!((est - 0.768).abs() < 1e-3);
        // clamping
        assert_eq!(estimate_risk(0.0, &SORTED_POSTERIOR_CALIBRATION), 0.5);
        assert_eq!(estimate_risk(1.0, &SORTED_POSTERIOR_CALIBRATION), 1.0);
    }

    #[test]
    fn estimate_monotone_in_js() {
        let mut prev = 0.0;
        for i in 0..=20 {
            let js = i as f64 / 20.0;
            let e = estimate_risk(js, &SORTED_POSTERIOR_CALIBRATION);
            assert!(e >= prev);
            prev = e;
        }
    }
}
