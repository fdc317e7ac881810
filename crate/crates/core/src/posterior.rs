//! Posterior probability vectors and the scalar quantities derived from them.

use alloc::vec::Vec;
use num_traits::Float;

use crate::error::Error;
use crate::Result;

/// Probabilities below this floor are clamped inside every logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// A probability vector over `k` classes produced by a model on one sample.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Posteriors(Vec<f64>);

impl Posteriors {
    /// Wrap a vector after checking it is a valid distribution.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("posteriors must not be empty"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("posteriors must be finite and nonnegative"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::invalid("posteriors must sum to 1"));
        }
        Ok(Self(probs))
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn prob(&self, class: usize) -> Result<f64> {
        self.0.get(class).copied().ok_or(Error::Index { index: class, len: self.0.len() })
    }

    /// Index of the largest probability; ties break toward the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// Largest probability (the prediction confidence).
    pub fn max_confidence(&self) -> f64 {
        self.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Numerically stable softmax with max subtraction.
pub fn softmax(logits: &[f64]) -> Result<Posteriors> {
    if logits.is_empty() {
        return Err(Error::invalid("softmax input must not be empty"));
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::invalid("softmax input must be finite"));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| Float::exp(z - max)).collect();
    let sum: f64 = exps.iter().sum();
    Ok(Posteriors(exps.into_iter().map(|e| e / sum).collect()))
}

/// Cross-entropy `-ln p_y` with the probability floor.
pub fn cross_entropy(p: &Posteriors, y: usize) -> Result<f64> {
    let py = p.prob(y)?;
    Ok(-Float::ln(py.max(PROB_FLOOR)))
}

/// Shannon entropy `-sum p_i ln p_i` with floored logarithms.
pub fn entropy(p: &Posteriors) -> f64 {
    -p.as_slice().iter().map(|&pi| pi * Float::ln(pi.max(PROB_FLOOR))).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_logits_give_uniform() {
        let p = softmax(&[0.0, 0.0]).unwrap();
        assert_eq!(p.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let p = softmax(&[1e3, 0.0]).unwrap();
        assert!(p.as_slice()[0] > 1.0 - 1e-12);
        assert!(p.as_slice()[1] < 1e-12);
        assert!(p.as_slice().iter().all(|v| v.is_finite()));
        assert_eq!(p.argmax(), 0);
    }

    #[test]
    fn softmax_direct_evaluation() {
        let p = softmax(&[1.0, 2.0, 3.0]).unwrap();
        let expect = [0.090030573170380462, 0.24472847105479767, 0.6652409557748219];
        for (got, want) in p.as_slice().iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn softmax_rejects_non_finite() {
        assert!(softmax(&[f64::NAN, 0.0]).is_err());
        assert!(softmax(&[f64::INFINITY, 0.0]).is_err());
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn cross_entropy_one_hot_is_zero() {
        let p = Posteriors::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(cross_entropy(&p, 1).unwrap(), 0.0);
    }

    #[test]
    fn cross_entropy_uniform_ten_classes() {
        let p = Posteriors::new(vec![0.1; 10]).unwrap();
        for y in 0..10 {
            assert!((cross_entropy(&p, y).unwrap() - 2.3025850929940459).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_calculator_oracle() {
        let p = Posteriors::new(vec![0.7, 0.2, 0.1]).unwrap();
        assert!((cross_entropy(&p, 0).unwrap() - 0.35667494393873245).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_label_out_of_range() {
        let p = Posteriors::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(cross_entropy(&p, 2), Err(Error::Index { .. })));
    }

    #[test]
    fn entropy_values() {
        let one_hot = Posteriors::new(vec![1.0, 0.0]).unwrap();
        assert!(entropy(&one_hot).abs() < 1e-10);
        let uniform10 = Posteriors::new(vec![0.1; 10]).unwrap();
        assert!((entropy(&uniform10) - 2.3025850929940459).abs() < 1e-12);
        let half = Posteriors::new(vec![0.5, 0.5]).unwrap();
        assert!((entropy(&half) - 0.69314718055994529).abs() < 1e-12);
    }

    #[test]
    fn argmax_tie_breaks_low() {
        let p = Posteriors::new(vec![0.4, 0.4, 0.2]).unwrap();
        assert_eq!(p.argmax(), 0);
    }
}
