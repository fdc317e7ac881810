//! Augmented-view attack features: query K simple-augmented views, order the
//! posteriors by confidence, and concatenate the top-3 of each into a
//! 3K-dimensional vector.

use alloc::vec::Vec;
use rand::Rng;

use crate::attack::{extract_features, AttackFeature, FeatureMode};
use crate::augment::simple_augment;
use crate::error::Error;
use crate::model::PosteriorOracle;
use crate::tensor::Tensor;
use crate::Result;

/// Build the 3K-dimensional augmented feature for one sample.
pub fn augmented_features<R: Rng>(
    oracle: &dyn PosteriorOracle,
    x: &Tensor,
    k_views: usize,
    rng: &mut R,
) -> Result<AttackFeature> {
    if k_views == 0 {
        return Err(Error::invalid("augmented attack needs K >= 1 views"));
    }
    let mut posts = Vec::with_capacity(k_views);
    for _ in 0..k_views {
        let view = simple_augment(x, rng);
        posts.push(oracle.posteriors(&view)?);
    }
    // sort views by max confidence, descending; stable so equal-confidence
    // views keep their draw order
    posts.sort_by(|a, b| {
        b.max_confidence().partial_cmp(&a.max_confidence()).expect("finite posteriors")
    });
    let mut vector = Vec::with_capacity(3 * k_views);
    for p in &posts {
        vector.extend(extract_features(FeatureMode::Top3, p, None)?.vector);
    }
    Ok(AttackFeature { mode: FeatureMode::Augmented, vector })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::Posteriors;
    use crate::rngutil::stream_rng;

    struct FixedOracle {
        posts: alloc::vec::Vec<Posteriors>,
        cursor: core::cell::RefCell<usize>,
    }

    impl PosteriorOracle for FixedOracle {
        fn num_classes(&self) -> usize {
            self.posts[0].num_classes()
        }

        fn posteriors(&self, _x: &Tensor) -> Result<Posteriors> {
            let mut c = self.cursor.borrow_mut();
            let p = self.posts[*c % self.posts.len()].clone();
            *c += 1;
            Ok(p)
        }
    }

    #[test]
    fn k10_gives_length_30() {
        let oracle = FixedOracle {
            posts: vec![Posteriors::new(vec![0.5, 0.3, 0.2]).unwrap()],
            cursor: core::cell::RefCell::new(0),
        };
        let x = Tensor::from_vec(vec![0.0, 1.0, 2.0]);
        let f = augmented_features(&oracle, &x, 10, &mut stream_rng(1, 0)).unwrap();
        assert_eq!(f.vector.len(), 30);
    }

    #[test]
    fn views_ordered_by_confidence() {
        let oracle = FixedOracle {
            posts: vec![
                Posteriors::new(vec![0.6, 0.3, 0.1]).unwrap(),
                Posteriors::new(vec![0.9, 0.05, 0.05]).unwrap(),
            ],
            cursor: core::cell::RefCell::new(0),
        };
        let x = Tensor::from_vec(vec![0.0; 3]);
        let f = augmented_features(&oracle, &x, 2, &mut stream_rng(2, 0)).unwrap();
        // the 0.9-confidence view's triple must come first
        assert_eq!(&f.vector[0..3], &[0.9, 0.05, 0.05]);
        assert_eq!(&f.vector[3..6], &[0.6, 0.3, 0.1]);
    }

    #[test]
    fn k1_matches_top3_of_the_single_view() {
        let p = Posteriors::new(vec![0.2, 0.5, 0.3]).unwrap();
        let oracle =
            FixedOracle { posts: vec![p.clone()], cursor: core::cell::RefCell::new(0) };
        let x = Tensor::from_vec(vec![0.0; 3]);
        let f = augmented_features(&oracle, &x, 1, &mut stream_rng(3, 0)).unwrap();
        let top3 = extract_features(FeatureMode::Top3, &p, None).unwrap();
        assert_eq!(f.vector, top3.vector);
    }

    #[test]
    fn zero_views_rejected() {
        let oracle = FixedOracle {
            posts: vec![Posteriors::new(vec![1.0]).unwrap()],
            cursor: core::cell::RefCell::new(0),
        };
        let x = Tensor::from_vec(vec![0.0]);
        assert!(augmented_features(&oracle, &x, 0, &mut stream_rng(4, 0)).is_err());
    }
}
