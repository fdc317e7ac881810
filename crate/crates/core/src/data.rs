//! Datasets, the six-way split, and synthetic data sources.

use alloc::vec::Vec;
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Error;
use crate::rngutil::stream_rng;
use crate::tensor::Tensor;
use crate::Result;

/// Labeled samples: vectors (`[d]`) or rasters (`[c,h,w]`), plus a class count.
#[derive(Debug, Clone)]
pub struct Dataset {
    samples: Vec<Tensor>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Tensor>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(Error::invalid("sample and label counts differ"));
        }
        if num_classes < 2 {
            return Err(Error::invalid("a dataset needs at least 2 classes"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Index { index: bad, len: num_classes });
        }
        if let Some(first) = samples.first() {
            let shape = first.shape();
            if !matches!(shape.len(), 1 | 3) {
                return Err(Error::invalid("samples must be rank-1 vectors or rank-3 rasters"));
            }
            if samples.iter().any(|s| s.shape() != shape) {
                return Err(Error::invalid("all samples must share one shape"));
            }
        }
        Ok(Self { samples, labels, num_classes })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn sample(&self, i: usize) -> &Tensor {
        &self.samples[i]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn samples(&self) -> &[Tensor] {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample_shape(&self) -> &[usize] {
        self.samples.first().map(|s| s.shape()).unwrap_or(&[])
    }

    pub fn is_raster(&self) -> bool {
        self.sample_shape().len() == 3
    }
}

/// The six disjoint, equal-sized index sets of one evaluation run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitPlan {
    pub target_train: Vec<usize>,
    pub target_reference: Vec<usize>,
    pub target_test: Vec<usize>,
    pub shadow_train: Vec<usize>,
    pub shadow_reference: Vec<usize>,
    pub shadow_test: Vec<usize>,
    /// Indices left over when the dataset size is not a multiple of six.
    pub unassigned: Vec<usize>,
    pub seed: u64,
}

/// Borrowed view of one side's train/reference/test index sets.
#[derive(Debug, Clone, Copy)]
pub struct SplitView<'a> {
    pub train: &'a [usize],
    pub reference: &'a [usize],
    pub test: &'a [usize],
}

impl SplitPlan {
    pub fn part_len(&self) -> usize {
        self.target_train.len()
    }

    pub fn target(&self) -> SplitView<'_> {
        SplitView {
            train: &self.target_train,
            reference: &self.target_reference,
            test: &self.target_test,
        }
    }

    pub fn shadow(&self) -> SplitView<'_> {
        SplitView {
            train: &self.shadow_train,
            reference: &self.shadow_reference,
            test: &self.shadow_test,
        }
    }
}

/// Shuffle the index range and cut six equal parts, truncating the remainder.
pub fn six_way_split(dataset: &Dataset, seed: u64) -> Result<SplitPlan> {
    let n = dataset.len();
    if n < 6 {
        return Err(Error::invalid("need at least 6 samples for a six-way split"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream_rng(seed, 0);
    order.shuffle(&mut rng);
    let part = n / 6;
    let take = |i: usize| -> Vec<usize> {
        let mut v = order[i * part..(i + 1) * part].to_vec();
        v.sort_unstable();
        v
    };
    let mut unassigned = order[6 * part..].to_vec();
    unassigned.sort_unstable();
    Ok(SplitPlan {
        target_train: take(0),
        target_reference: take(1),
        target_test: take(2),
        shadow_train: take(3),
        shadow_reference: take(4),
        shadow_test: take(5),
        unassigned,
        seed,
    })
}

/// Draw class means on scaled random unit vectors, then isotropic unit-variance
/// samples around them.
pub fn synth_gaussian(
    num_classes: usize,
    dim: usize,
    n_per_class: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if num_classes < 2 || dim == 0 || n_per_class == 0 {
        return Err(Error::invalid("need k >= 2, dim >= 1, n_per_class >= 1"));
    }
    if !separation.is_finite() || separation < 0.0 {
        return Err(Error::invalid("separation must be a nonnegative finite number"));
    }
    let mut mean_rng = stream_rng(seed, 1);
    let means: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| {
            let raw: Vec<f64> =
                (0..dim).map(|_| StandardNormal.sample(&mut mean_rng)).collect();
            let norm = Float::sqrt(raw.iter().map(|v| v * v).sum::<f64>()).max(1e-12);
            raw.into_iter().map(|v| v / norm * separation).collect()
        })
        .collect();
    let mut rng = stream_rng(seed, 2);
    let mut samples = Vec::with_capacity(num_classes * n_per_class);
    let mut labels = Vec::with_capacity(num_classes * n_per_class);
    for (class, mean) in means.iter().enumerate() {
        for _ in 0..n_per_class {
            let point: Vec<f64> = mean
                .iter()
                .map(|m| m + rng.sample::<f64, _>(StandardNormal))
                .collect();
            samples.push(Tensor::from_vec(point));
            labels.push(class);
        }
    }
    // interleave classes so splits stay balanced in expectation
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut stream_rng(seed, 3));
    let samples = order.iter().map(|&i| samples[i].clone()).collect();
    let labels = order.iter().map(|&i| labels[i]).collect();
    Dataset::new(samples, labels, num_classes)
}

/// Raster variant of [`synth_gaussian`]: Gaussian features squashed through a
/// sigmoid so pixels land in `[0, 1]`.
pub fn synth_gaussian_raster(
    num_classes: usize,
    channels: usize,
    height: usize,
    width: usize,
    n_per_class: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    let dim = channels * height * width;
    if dim == 0 {
        return Err(Error::invalid("raster extents must be positive"));
    }
    let flat = synth_gaussian(num_classes, dim, n_per_class, separation, seed)?;
    let samples = flat
        .samples()
        .iter()
        .map(|s| {
            let pixels: Vec<f64> =
                s.data().iter().map(|&v| 1.0 / (1.0 + Float::exp(-v))).collect();
            Tensor::new(vec![channels, height, width], pixels)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(samples, flat.labels().to_vec(), num_classes)
}

/// Pick `count` indices uniformly without replacement.
pub fn sample_indices<R: Rng>(n: usize, count: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.truncate(count.min(n));
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;

    fn toy(n: usize) -> Dataset {
        let samples = (0..n).map(|i| Tensor::from_vec(vec![i as f64])).collect();
        let labels = (0..n).map(|i| i % 2).collect();
        Dataset::new(samples, labels, 2).unwrap()
    }

    #[test]
    fn sixty_samples_six_parts_of_ten() {
        let plan = six_way_split(&toy(60), 7).unwrap();
        assert_eq!(plan.part_len(), 10);
        assert!(plan.unassigned.is_empty());
        let all: BTreeSet<usize> = [
            &plan.target_train,
            &plan.target_reference,
            &plan.target_test,
            &plan.shadow_train,
            &plan.shadow_reference,
            &plan.shadow_test,
        ]
        .iter()
        .flat_map(|v| v.iter().copied())
        .collect();
        assert_eq!(all.len(), 60);
    }

    #[test]
    fn same_seed_same_plan() {
        let d = toy(66);
        assert_eq!(six_way_split(&d, 3).unwrap(), six_way_split(&d, 3).unwrap());
        assert_ne!(six_way_split(&d, 3).unwrap(), six_way_split(&d, 4).unwrap());
    }

    #[test]
    fn truncation_reports_leftovers() {
        let plan = six_way_split(&toy(64), 1).unwrap();
        assert_eq!(plan.part_len(), 10);
        assert_eq!(plan.unassigned.len(), 4);
        let mut seen = BTreeSet::new();
        for set in [
            &plan.target_train,
            &plan.target_reference,
            &plan.target_test,
            &plan.shadow_train,
            &plan.shadow_reference,
            &plan.shadow_test,
            &plan.unassigned,
        ] {
            for &i in set.iter() {
                assert!(seen.insert(i), "index {i} assigned twice");
            }
        }
        assert_eq!(seen.len(), 64);
    }

    #[test]
    fn too_small_dataset_rejected() {
        assert!(six_way_split(&toy(5), 0).is_err());
    }

    #[test]
    fn synth_sizes_and_determinism() {
        let d = synth_gaussian(3, 4, 5, 2.0, 9).unwrap();
        assert_eq!(d.len(), 15);
        let e = synth_gaussian(3, 4, 5, 2.0, 9).unwrap();
        for (a, b) in d.samples().iter().zip(e.samples()) {
            assert_eq!(a, b);
        }
        assert_eq!(d.labels(), e.labels());
    }

    #[test]
    fn raster_pixels_in_unit_range() {
        let d = synth_gaussian_raster(2, 1, 4, 4, 3, 1.0, 5).unwrap();
        assert!(d.is_raster());
        assert_eq!(d.sample_shape(), &[1, 4, 4]);
        for s in d.samples() {
            assert!(s.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}
