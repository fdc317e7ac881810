//! Label-only attack: estimate the L2 distance to the decision boundary by
//! random-direction probing with per-direction binary search.

use alloc::vec::Vec;
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Error;
use crate::tensor::Tensor;
use crate::Result;

/// Probing parameters. The query budget is split evenly across directions.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbeConfig {
    pub budget: usize,
    pub directions: usize,
    pub init_radius: f64,
    pub max_radius: f64,
    pub rel_tol: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { budget: 1024, directions: 32, init_radius: 1e-3, max_radius: 1e3, rel_tol: 1e-3 }
    }
}

/// Result of one probing run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceEstimate {
    pub distance: f64,
    /// False when no direction flipped the label within budget; the distance
    /// is then the configured max radius and the verdict carries a flag.
    pub boundary_found: bool,
}

/// Estimate the perturbation magnitude needed to change the predicted label.
///
/// Misclassified inputs return distance 0 immediately. Direction vectors are
/// drawn before any probing, so a larger budget only refines the per-direction
/// searches and the estimate is non-increasing in the budget.
pub fn label_only_distance<R: Rng>(
    label_fn: &mut dyn FnMut(&Tensor) -> Result<usize>,
    x: &Tensor,
    y: usize,
    cfg: &ProbeConfig,
    rng: &mut R,
) -> Result<DistanceEstimate> {
    if cfg.budget < 10 {
        return Err(Error::invalid("label-only probing needs a budget of at least 10"));
    }
    if cfg.directions == 0 || cfg.init_radius <= 0.0 || cfg.max_radius <= cfg.init_radius {
        return Err(Error::invalid("invalid probe configuration"));
    }
    if label_fn(x)? != y {
        return Ok(DistanceEstimate { distance: 0.0, boundary_found: true });
    }

    let dim = x.numel();
    let directions: Vec<Vec<f64>> = (0..cfg.directions)
        .map(|_| {
            let raw: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            let norm = Float::sqrt(raw.iter().map(|v| v * v).sum::<f64>()).max(1e-12);
            raw.into_iter().map(|v| v / norm).collect()
        })
        .collect();
    let per_direction = (cfg.budget / cfg.directions).max(1);

    let probe = |label_fn: &mut dyn FnMut(&Tensor) -> Result<usize>,
                 u: &[f64],
                 r: f64|
     -> Result<bool> {
        let data: Vec<f64> = x.data().iter().zip(u).map(|(xi, ui)| xi + r * ui).collect();
        let point = Tensor::new(x.shape().to_vec(), data)?;
        Ok(label_fn(&point)? != y)
    };

    let mut best = f64::INFINITY;
    for u in &directions {
        let mut queries = 0usize;
        let mut lo = 0.0;
        let mut hi = f64::INFINITY;
        let mut r = cfg.init_radius;
        // exponential bracket growth
        while queries < per_direction && r <= cfg.max_radius {
            queries += 1;
            if probe(label_fn, u, r)? {
                hi = r;
                break;
            }
            lo = r;
            r *= 2.0;
        }
        if !hi.is_finite() {
            continue;
        }
        // binary refinement of the bracket
        while queries < per_direction && (hi - lo) / hi > cfg.rel_tol {
            queries += 1;
            let mid = 0.5 * (lo + hi);
            if probe(label_fn, u, mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        best = best.min(hi);
    }

    if best.is_finite() {
        Ok(DistanceEstimate { distance: best, boundary_found: true })
    } else {
        Ok(DistanceEstimate { distance: cfg.max_radius, boundary_found: false })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngutil::stream_rng;

    /// Linear 2-class model: label = sign(w . x + b).
    fn linear_oracle(w: Vec<f64>, b: f64) -> impl FnMut(&Tensor) -> Result<usize> {
        move |x: &Tensor| {
            let dot: f64 = x.data().iter().zip(&w).map(|(a, c)| a * c).sum();
            Ok(usize::from(dot + b > 0.0))
        }
    }

    #[test]
    fn misclassified_input_returns_zero() {
        let mut oracle = linear_oracle(vec![1.0, 0.0], 0.0);
        let x = Tensor::from_vec(vec![1.0, 0.0]); // predicted 1
        let cfg = ProbeConfig::default();
        let est =
            label_only_distance(&mut oracle, &x, 0, &cfg, &mut stream_rng(1, 0)).unwrap();
        assert_eq!(est.distance, 0.0);
        assert!(est.boundary_found);
    }

    #[test]
    fn linear_model_distance_within_ten_percent() {
        // hyperplane x0 = 0, point at distance 0.8
        let mut oracle = linear_oracle(vec![1.0, 0.0], 0.0);
        let x = Tensor::from_vec(vec![0.8, 0.3]);
        let cfg = ProbeConfig { budget: 500, ..ProbeConfig::default() };
        let est =
            label_only_distance(&mut oracle, &x, 1, &cfg, &mut stream_rng(2, 0)).unwrap();
        assert!(est.boundary_found);
        assert!(
            (est.distance - 0.8).abs() / 0.8 < 0.10,
            "estimate {} not within 10% of 0.8",
            est.distance
        );
    }

    #[test]
    fn constant_oracle_returns_max_radius_flagged() {
        let mut oracle = |_: &Tensor| Ok(1usize);
        let x = Tensor::from_vec(vec![0.0, 0.0]);
        let cfg = ProbeConfig { budget: 64, max_radius: 50.0, ..ProbeConfig::default() };
        let est =
            label_only_distance(&mut oracle, &x, 1, &cfg, &mut stream_rng(3, 0)).unwrap();
        assert_eq!(est.distance, 50.0);
        assert!(!est.boundary_found);
    }

    #[test]
    fn estimate_non_increasing_in_budget() {
        let mut prev = f64::INFINITY;
        for budget in [64usize, 128, 256, 512, 1024, 2048] {
            let mut oracle = linear_oracle(vec![0.6, -0.8], 0.1);
            let x = Tensor::from_vec(vec![1.0, 0.2]);
            let cfg = ProbeConfig { budget, ..ProbeConfig::default() };
            let est =
                label_only_distance(&mut oracle, &x, 1, &cfg, &mut stream_rng(7, 0)).unwrap();
            assert!(
                est.distance <= prev + 1e-12,
                "budget {budget} estimate {} above previous {prev}",
                est.distance
            );
            prev = est.distance;
        }
    }

    #[test]
    fn tiny_budget_rejected() {
        let mut oracle = linear_oracle(vec![1.0], 0.0);
        let x = Tensor::from_vec(vec![1.0]);
        let cfg = ProbeConfig { budget: 9, ..ProbeConfig::default() };
        assert!(label_only_distance(&mut oracle, &x, 1, &cfg, &mut stream_rng(4, 0)).is_err());
    }
}
