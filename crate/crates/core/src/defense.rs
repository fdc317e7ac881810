//! The six defenses: label smoothing, adversarial regularization, MemGuard,
//! mixup + MMD, DP-SGD, and data augmentation (which is an [`AugMode`] applied
//! at training time rather than a hook).

use alloc::vec::Vec;
use num_traits::Float;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::augment::AugMode;
use crate::error::Error;
use crate::graph::{mmd2_value, Tape};
use crate::model::{stack_batch, PosteriorOracle, TrainedModel};
use crate::optim::{ParamSet, Sgd};
use crate::posterior::{softmax, Posteriors, PROB_FLOOR};
use crate::rngutil::sample_rng;
use crate::tensor::Tensor;
use crate::train::{one_hot_rows, Learner};
use crate::Result;

/// Selects one defense and its hyperparameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DefenseConfig {
    None,
    LabelSmoothing { epsilon: f64 },
    AdvReg { lambda: f64 },
    MemGuard { p_apply: f64, max_steps: usize },
    MixupMmd { lambda: f64, alpha: f64, bandwidth: BandwidthPolicy },
    DpSgd { sigma: f64, clip: f64 },
    DataAug(AugMode),
}

/// How the Gaussian kernel bandwidth is chosen for the MMD term.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BandwidthPolicy {
    /// Median pairwise distance of the pooled posterior set, floored at 1e-6.
    Median,
    Fixed(f64),
}

impl DefenseConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            DefenseConfig::None => Ok(()),
            DefenseConfig::LabelSmoothing { epsilon } => {
                if !(0.0..1.0).contains(epsilon) || *epsilon == 0.0 {
                    return Err(Error::config("label smoothing epsilon must lie in (0,1)"));
                }
                Ok(())
            }
            DefenseConfig::AdvReg { lambda } => {
                if *lambda <= 0.0 {
                    return Err(Error::config("advreg lambda must be positive"));
                }
                Ok(())
            }
            DefenseConfig::MemGuard { p_apply, .. } => {
                if !(0.0..=1.0).contains(p_apply) {
                    return Err(Error::config("memguard p_apply must lie in [0,1]"));
                }
                Ok(())
            }
            DefenseConfig::MixupMmd { lambda, alpha, bandwidth } => {
                if *lambda <= 0.0 {
                    return Err(Error::config("mixup-mmd lambda must be positive"));
                }
                if *alpha <= 0.0 {
                    return Err(Error::config("mixup alpha must be positive"));
                }
                if let BandwidthPolicy::Fixed(h) = bandwidth {
                    if *h <= 0.0 {
                        return Err(Error::config("fixed bandwidth must be positive"));
                    }
                }
                Ok(())
            }
            DefenseConfig::DpSgd { sigma, clip } => {
                if *sigma < 0.0 {
                    return Err(Error::config("dp-sgd sigma must be nonnegative"));
                }
                if *clip <= 0.0 {
                    return Err(Error::config("dp-sgd clip norm must be positive"));
                }
                Ok(())
            }
            DefenseConfig::DataAug(mode) => mode.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DefenseConfig::None => "none",
            DefenseConfig::LabelSmoothing { .. } => "label-smoothing",
            DefenseConfig::AdvReg { .. } => "advreg",
            DefenseConfig::MemGuard { .. } => "memguard",
            DefenseConfig::MixupMmd { .. } => "mixup-mmd",
            DefenseConfig::DpSgd { .. } => "dp-sgd",
            DefenseConfig::DataAug(_) => "data-aug",
        }
    }

    /// Whether training needs a nonempty reference split.
    pub fn needs_reference(&self) -> bool {
        matches!(
            self,
            DefenseConfig::AdvReg { .. }
                | DefenseConfig::MixupMmd { .. }
                | DefenseConfig::MemGuard { .. }
        )
    }
}

/// Smoothed label distribution: `1 - eps` on the true class, `eps/(k-1)` elsewhere.
pub fn smooth_labels(y: usize, k: usize, epsilon: f64) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::invalid("label smoothing needs k >= 2"));
    }
    if y >= k {
        return Err(Error::Index { index: y, len: k });
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::invalid("epsilon must lie in [0,1)"));
    }
    let off = epsilon / (k - 1) as f64;
    let mut out = vec![off; k];
    out[y] = 1.0 - epsilon;
    Ok(out)
}

/// Convex combination of two samples and their label distributions with a
/// fixed mixing weight.
pub fn mixup_with(
    x1: &Tensor,
    t1: &[f64],
    x2: &Tensor,
    t2: &[f64],
    lambda_mix: f64,
) -> Result<(Tensor, Vec<f64>)> {
    if x1.shape() != x2.shape() {
        return Err(Error::ShapeMismatch {
            expected: x1.shape().to_vec(),
            got: x2.shape().to_vec(),
        });
    }
    if t1.len() != t2.len() {
        return Err(Error::invalid("label distributions must have the same length"));
    }
    let l = lambda_mix;
    let data = x1.data().iter().zip(x2.data()).map(|(a, b)| l * a + (1.0 - l) * b).collect();
    let labels = t1.iter().zip(t2).map(|(a, b)| l * a + (1.0 - l) * b).collect();
    Ok((Tensor::new(x1.shape().to_vec(), data)?, labels))
}

/// Mixup with `lambda ~ Beta(alpha, alpha)`.
pub fn mixup<R: Rng>(
    x1: &Tensor,
    t1: &[f64],
    x2: &Tensor,
    t2: &[f64],
    alpha: f64,
    rng: &mut R,
) -> Result<(Tensor, Vec<f64>)> {
    if alpha <= 0.0 {
        return Err(Error::invalid("mixup alpha must be positive"));
    }
    let beta = Beta::new(alpha, alpha).map_err(|_| Error::invalid("invalid Beta parameters"))?;
    mixup_with(x1, t1, x2, t2, beta.sample(rng))
}

/// Biased MMD^2 V-statistic with Gaussian kernel `exp(-|x-y|^2 / (2 h^2))`.
pub fn mmd2(a: &[Posteriors], b: &[Posteriors], bandwidth: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("MMD needs nonempty sets"));
    }
    if bandwidth <= 0.0 {
        return Err(Error::invalid("MMD bandwidth must be positive"));
    }
    let k = a[0].num_classes();
    if a.iter().chain(b).any(|p| p.num_classes() != k) {
        return Err(Error::invalid("MMD sets must share the class count"));
    }
    let pack = |set: &[Posteriors]| -> Tensor {
        let mut data = Vec::with_capacity(set.len() * k);
        for p in set {
            data.extend_from_slice(p.as_slice());
        }
        Tensor::new(vec![set.len(), k], data).expect("sized")
    };
    Ok(mmd2_value(&pack(a), &pack(b), bandwidth))
}

/// Median pairwise Euclidean distance of the pooled rows, floored at 1e-6.
pub fn median_bandwidth(a: &Tensor, b: &Tensor) -> f64 {
    let k = a.shape()[1];
    let rows: Vec<&[f64]> = a
        .data()
        .chunks(k)
        .chain(b.data().chunks(k))
        .collect();
    let mut dists = Vec::new();
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            let d2: f64 = rows[i].iter().zip(rows[j]).map(|(x, y)| (x - y) * (x - y)).sum();
            dists.push(Float::sqrt(d2));
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite"));
    dists[dists.len() / 2].max(1e-6)
}

// ---- adversarial regularization ---------------------------------------------

/// One alternating round: the adversary ascends its membership log-likelihood
/// on (train = member, reference = non-member) posteriors, then the target
/// descends `classification loss - lambda * adversary loss`.
pub fn advreg_round(
    target: &mut Learner,
    adversary: &mut Learner,
    train_x: &[&Tensor],
    train_labels: &[usize],
    ref_x: &[&Tensor],
    lambda: f64,
    lr_target: f64,
    lr_adv: f64,
) -> Result<()> {
    if lambda < 0.0 {
        return Err(Error::config("advreg lambda must be nonnegative"));
    }
    if ref_x.is_empty() {
        return Err(Error::config("advreg needs a nonempty reference batch"));
    }
    let k = target.spec.num_classes();
    let (n_train, n_ref) = (train_x.len(), ref_x.len());

    // adversary step: classify target posteriors as member vs non-member
    let post_train = target.posterior_matrix(train_x)?;
    let post_ref = target.posterior_matrix(ref_x)?;
    {
        let mut tape = Tape::new();
        let staged = adversary.params.stage(&mut tape);
        let xm = tape.constant(post_train.clone());
        let xr = tape.constant(post_ref.clone());
        let lm = adversary.spec.forward(&mut tape, &staged, xm)?;
        let lr_ = adversary.spec.forward(&mut tape, &staged, xr)?;
        let ce_m = tape.cross_entropy(lm, membership_targets(n_train, true))?;
        let ce_r = tape.cross_entropy(lr_, membership_targets(n_ref, false))?;
        let total = n_train + n_ref;
        let wm = tape.scale(ce_m, n_train as f64 / total as f64);
        let wr = tape.scale(ce_r, n_ref as f64 / total as f64);
        let loss = tape.add(wm, wr)?;
        tape.backward(loss)?;
        adversary.params.absorb_grads(&tape, &staged)?;
        adversary.opt.step(&mut adversary.params, lr_adv)?;
    }

    // target step: descend CE_cls - lambda * adversary loss
    {
        let mut tape = Tape::new();
        let staged = target.params.stage(&mut tape);
        let adv_staged = adversary.params.stage_frozen(&mut tape);
        let x = tape.constant(stack_batch(train_x)?);
        let xr = tape.constant(stack_batch(ref_x)?);
        let logits = target.spec.forward(&mut tape, &staged, x)?;
        let ce_cls = tape.cross_entropy(logits, one_hot_rows(train_labels, k)?)?;
        let pm = target.spec.forward(&mut tape, &staged, xr)?;
        let post_m = tape.softmax_rows(logits)?;
        let post_r = tape.softmax_rows(pm)?;
        let am = adversary.spec.forward(&mut tape, &adv_staged, post_m)?;
        let ar = adversary.spec.forward(&mut tape, &adv_staged, post_r)?;
        let ce_m = tape.cross_entropy(am, membership_targets(n_train, true))?;
        let ce_r = tape.cross_entropy(ar, membership_targets(n_ref, false))?;
        let total = n_train + n_ref;
        let wm = tape.scale(ce_m, n_train as f64 / total as f64);
        let wr = tape.scale(ce_r, n_ref as f64 / total as f64);
        let adv_loss = tape.add(wm, wr)?;
        let penalty = tape.scale(adv_loss, -lambda);
        let loss = tape.add(ce_cls, penalty)?;
        tape.backward(loss)?;
        target.params.absorb_grads(&tape, &staged)?;
        target.opt.step(&mut target.params, lr_target)?;
    }
    Ok(())
}

/// One-hot membership targets: member = class 1, non-member = class 0.
fn membership_targets(n: usize, member: bool) -> Tensor {
    let mut data = vec![0.0; n * 2];
    for r in 0..n {
        data[r * 2 + usize::from(member)] = 1.0;
    }
    Tensor::new(vec![n, 2], data).expect("sized")
}

// ---- MemGuard ----------------------------------------------------------------

/// Step size for the phase-1 logit-space descent.
const MEMGUARD_STEP: f64 = 0.5;

/// What the wrapper did for one query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardOutcome {
    /// The apply coin said no; original posteriors returned.
    Skipped,
    /// A label-preserving perturbation was found.
    Perturbed,
    /// No label-preserving improvement within budget; original returned, flagged.
    Fallback,
}

/// Perturb posteriors so the surrogate's membership score moves toward 0.5,
/// never changing the argmax.
pub fn memguard<R: Rng>(
    p: &Posteriors,
    surrogate: &TrainedModel,
    max_steps: usize,
    p_apply: f64,
    rng: &mut R,
) -> Result<(Posteriors, GuardOutcome)> {
    if !(0.0..=1.0).contains(&p_apply) {
        return Err(Error::config("memguard p_apply must lie in [0,1]"));
    }
    if !rng.random_bool(p_apply) {
        return Ok((p.clone(), GuardOutcome::Skipped));
    }
    let label = p.argmax();
    let score = |probs: &Posteriors| -> Result<f64> {
        let x = Tensor::from_vec(probs.as_slice().to_vec());
        Ok(surrogate.query(&x)?.prob(1)?)
    };
    let objective = |probs: &Posteriors| -> Result<f64> {
        let s = score(probs)?;
        Ok((s - 0.5) * (s - 0.5))
    };
    let mut z: Vec<f64> =
        p.as_slice().iter().map(|&pi| Float::ln(pi.max(PROB_FLOOR))).collect();
    let mut best = p.clone();
    let mut best_obj = objective(p)?;
    let start_obj = best_obj;
    for _ in 0..max_steps {
        let grad = memguard_grad(&z, surrogate)?;
        let candidate: Vec<f64> =
            z.iter().zip(&grad).map(|(zi, gi)| zi - MEMGUARD_STEP * gi).collect();
        let cand_post = softmax(&candidate)?;
        if cand_post.argmax() != label {
            // label-preservation check failed; keep the last valid point
            break;
        }
        z = candidate;
        let obj = objective(&cand_post)?;
        if obj < best_obj {
            best_obj = obj;
            best = cand_post;
        }
        if best_obj < 1e-6 {
            break;
        }
    }
    if best_obj < start_obj {
        debug_assert_eq!(best.argmax(), label);
        Ok((best, GuardOutcome::Perturbed))
    } else {
        Ok((p.clone(), GuardOutcome::Fallback))
    }
}

/// Gradient of `(surrogate member score - 0.5)^2` with respect to the logits.
fn memguard_grad(z: &[f64], surrogate: &TrainedModel) -> Result<Vec<f64>> {
    let k = z.len();
    let mut tape = Tape::new();
    let zv = tape.leaf(Tensor::new(vec![1, k], z.to_vec())?, true);
    let post = tape.softmax_rows(zv)?;
    let staged = surrogate.params.stage_frozen(&mut tape);
    let logits = surrogate.spec.forward(&mut tape, &staged, post)?;
    let probs = tape.softmax_rows(logits)?;
    let member = tape.index(probs, 1)?;
    let diff = tape.add_const(member, -0.5);
    let obj = tape.mul(diff, diff)?;
    tape.backward(obj)?;
    Ok(tape.grad(zv)?.data().to_vec())
}

/// A target model wrapped with the MemGuard inference-time defense.
pub struct MemGuarded<'a> {
    pub target: &'a TrainedModel,
    pub surrogate: &'a TrainedModel,
    pub p_apply: f64,
    pub max_steps: usize,
    pub seed: u64,
}

impl PosteriorOracle for MemGuarded<'_> {
    fn num_classes(&self) -> usize {
        self.target.spec.num_classes()
    }

    fn posteriors(&self, x: &Tensor) -> Result<Posteriors> {
        let p = self.target.query(x)?;
        let mut rng = sample_rng(self.seed, x);
        let (guarded, _) = memguard(&p, self.surrogate, self.max_steps, self.p_apply, &mut rng)?;
        Ok(guarded)
    }
}

// ---- DP-SGD -------------------------------------------------------------------

/// Global L2 norm across one sample's gradient tensors.
pub fn grad_l2_norm(grads: &[Tensor]) -> f64 {
    Float::sqrt(grads.iter().map(|g| g.data().iter().map(|v| v * v).sum::<f64>()).sum())
}

/// Rescale a per-sample gradient to norm at most `clip`: `g * min(1, C/|g|)`.
pub fn clip_to_norm(grads: &mut [Tensor], clip: f64) {
    let norm = grad_l2_norm(grads);
    if norm > clip {
        let factor = clip / norm;
        for g in grads {
            for v in g.data_mut() {
                *v *= factor;
            }
        }
    }
}

/// Clip per-sample gradients, average them, add Gaussian noise with standard
/// deviation `sigma * clip / batch`, and take one SGD step.
pub fn dpsgd_step<R: Rng>(
    params: &mut ParamSet,
    opt: &mut Sgd,
    per_sample: &[Vec<Tensor>],
    clip: f64,
    sigma: f64,
    lr: f64,
    rng: &mut R,
) -> Result<()> {
    if clip <= 0.0 {
        return Err(Error::config("dp-sgd clip norm must be positive"));
    }
    if per_sample.is_empty() {
        return Err(Error::invalid("dp-sgd needs a nonempty batch"));
    }
    let batch = per_sample.len() as f64;
    let mut mean: Vec<Tensor> =
        per_sample[0].iter().map(|g| Tensor::zeros(g.shape().to_vec())).collect();
    for sample in per_sample {
        let mut clipped = sample.clone();
        clip_to_norm(&mut clipped, clip);
        for (acc, g) in mean.iter_mut().zip(&clipped) {
            for (a, v) in acc.data_mut().iter_mut().zip(g.data()) {
                *a += v / batch;
            }
        }
    }
    let noise_std = sigma * clip / batch;
    if noise_std > 0.0 {
        for t in &mut mean {
            for v in t.data_mut() {
                *v += noise_std * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    params.set_grads(&mean)?;
    opt.step(params, lr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngutil::stream_rng;

    #[test]
    fn smooth_labels_paper_default() {
        let t = smooth_labels(3, 10, 0.8).unwrap();
        assert!((t[3] - 0.2).abs() < 1e-15);
        for (i, v) in t.iter().enumerate() {
            if i != 3 {
                assert!((v - 0.088888888888888892).abs() < 1e-15);
            }
        }
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smooth_labels_edges() {
        let t = smooth_labels(0, 2, 0.4).unwrap();
        assert!((t[0] - 0.6).abs() < 1e-15);
        assert!((t[1] - 0.4).abs() < 1e-15);
        let near_hot = smooth_labels(1, 4, 1e-9).unwrap();
        assert!((near_hot[1] - 1.0).abs() < 1e-8);
        assert!(smooth_labels(0, 1, 0.5).is_err());
    }

    #[test]
    fn mixup_with_endpoints() {
        let x1 = Tensor::from_vec(vec![1.0, 2.0]);
        let x2 = Tensor::from_vec(vec![3.0, 4.0]);
        let (mx, mt) = mixup_with(&x1, &[1.0, 0.0], &x2, &[0.0, 1.0], 1.0).unwrap();
        assert_eq!(mx, x1);
        assert_eq!(mt, vec![1.0, 0.0]);
        let (mx, mt) = mixup_with(&x1, &[1.0, 0.0], &x2, &[0.0, 1.0], 0.5).unwrap();
        assert_eq!(mx.data(), &[2.0, 3.0]);
        assert_eq!(mt, vec![0.5, 0.5]);
    }

    #[test]
    fn mixup_labels_sum_to_one_and_stay_convex() {
        let mut rng = stream_rng(5, 0);
        let x1 = Tensor::from_vec(vec![0.0, 1.0]);
        let x2 = Tensor::from_vec(vec![1.0, 0.0]);
        for _ in 0..50 {
            let (mx, mt) = mixup(&x1, &[1.0, 0.0], &x2, &[0.0, 1.0], 0.7, &mut rng).unwrap();
            assert!((mt.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for v in mx.data() {
                assert!((0.0..=1.0).contains(v));
            }
        }
    }

    #[test]
    fn mixup_shape_mismatch_rejected() {
        let x1 = Tensor::from_vec(vec![0.0, 1.0]);
        let x2 = Tensor::from_vec(vec![1.0]);
        assert!(mixup_with(&x1, &[1.0], &x2, &[1.0], 0.5).is_err());
    }

    fn point(v: Vec<f64>) -> Posteriors {
        Posteriors::new(v).unwrap()
    }

    #[test]
    fn mmd_identical_sets_vanish() {
        let a = vec![point(vec![0.3, 0.7]), point(vec![0.6, 0.4])];
        assert!(mmd2(&a, &a, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn mmd_two_point_closed_form() {
        let a = vec![point(vec![1.0, 0.0]); 3];
        let b = vec![point(vec![0.0, 1.0]); 3];
        let v = mmd2(&a, &b, 1.0).unwrap();
        assert!((v - 1.2642411176571153).abs() < 1e-12);
    }

    #[test]
    fn mmd_symmetric() {
        let a = vec![point(vec![0.2, 0.8]), point(vec![0.9, 0.1])];
        let b = vec![point(vec![0.5, 0.5])];
        let ab = mmd2(&a, &b, 0.7).unwrap();
        let ba = mmd2(&b, &a, 0.7).unwrap();
        assert!((ab - ba).abs() < 1e-15);
        assert!(ab >= -1e-12);
    }

    #[test]
    fn clipping_caps_the_norm() {
        let mut g = vec![Tensor::from_vec(vec![6.0, 8.0])];
        clip_to_norm(&mut g, 1.0);
        assert!((grad_l2_norm(&g) - 1.0).abs() < 1e-12);
        // already small gradients are untouched
        let mut g = vec![Tensor::from_vec(vec![0.3, 0.4])];
        clip_to_norm(&mut g, 1.0);
        assert_eq!(g[0].data(), &[0.3, 0.4]);
    }

    #[test]
    fn dpsgd_no_noise_no_clip_matches_plain_sgd() {
        let mut params = ParamSet::new();
        params.add("w", Tensor::from_vec(vec![1.0, 1.0]));
        let mut plain = params.clone();

        let per_sample = vec![
            vec![Tensor::from_vec(vec![0.1, 0.2])],
            vec![Tensor::from_vec(vec![0.3, 0.0])],
        ];
        let mut opt = Sgd::new(0.0);
        let mut rng = stream_rng(1, 0);
        dpsgd_step(&mut params, &mut opt, &per_sample, 10.0, 0.0, 0.5, &mut rng).unwrap();

        plain.set_grads(&[Tensor::from_vec(vec![0.2, 0.1])]).unwrap();
        Sgd::new(0.0).step(&mut plain, 0.5).unwrap();
        for (a, b) in params.get(0).value.data().iter().zip(plain.get(0).value.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn dpsgd_rejects_bad_config() {
        let mut params = ParamSet::new();
        params.add("w", Tensor::scalar(0.0));
        let mut opt = Sgd::new(0.0);
        let mut rng = stream_rng(2, 0);
        let gs = vec![vec![Tensor::scalar(1.0)]];
        assert!(dpsgd_step(&mut params, &mut opt, &gs, 0.0, 1.0, 0.1, &mut rng).is_err());
        assert!(dpsgd_step(&mut params, &mut opt, &[], 1.0, 1.0, 0.1, &mut rng).is_err());
    }

    #[test]
    fn dpsgd_noise_std_matches_monte_carlo() {
        // sigma=1, C=1, batch 4 -> per-coordinate std 0.25
        let per_sample: Vec<Vec<Tensor>> =
            (0..4).map(|_| vec![Tensor::from_vec(vec![0.0, 0.0])]).collect();
        let mut rng = stream_rng(3, 0);
        let mut draws = Vec::new();
        for _ in 0..1000 {
            let mut params = ParamSet::new();
            params.add("w", Tensor::from_vec(vec![0.0, 0.0]));
            let mut opt = Sgd::new(0.0);
            dpsgd_step(&mut params, &mut opt, &per_sample, 1.0, 1.0, 1.0, &mut rng).unwrap();
            // with zero gradients the update is pure noise times lr=1
            draws.extend(params.get(0).value.data().iter().map(|v| -v));
        }
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        assert!((std - 0.25).abs() / 0.25 < 0.1, "std {std} not within 10% of 0.25");
    }

    #[test]
    fn defense_config_validation() {
        assert!(DefenseConfig::LabelSmoothing { epsilon: 0.8 }.validate().is_ok());
        assert!(DefenseConfig::LabelSmoothing { epsilon: 1.0 }.validate().is_err());
        assert!(DefenseConfig::AdvReg { lambda: 0.0 }.validate().is_err());
        assert!(DefenseConfig::MemGuard { p_apply: 1.5, max_steps: 10 }.validate().is_err());
        assert!(DefenseConfig::DpSgd { sigma: -0.1, clip: 1.0 }.validate().is_err());
        assert!(DefenseConfig::DpSgd { sigma: 0.0, clip: 0.0 }.validate().is_err());
    }
}
