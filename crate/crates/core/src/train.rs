//! Training loops for target, shadow, and attack models, with defense hooks.

use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::augment::{augment, AugMode};
use crate::data::{Dataset, SplitView};
use crate::defense::{
    advreg_round, dpsgd_step, median_bandwidth, mixup_with, BandwidthPolicy, DefenseConfig,
};
use crate::error::Error;
use crate::graph::Tape;
use crate::model::{
    stack_batch, AttackModelSpec, EpochStats, ModelSpec, TrainedModel,
};
use crate::optim::{cosine_lr, ParamSet, Sgd, TrainRecipe};
use crate::rngutil::stream_rng;
use crate::tensor::Tensor;
use crate::Result;

use rand_distr::{Beta, Distribution};

// RNG stream ids derived from the recipe seed.
const STREAM_INIT: u64 = 10;
const STREAM_SHUFFLE: u64 = 11;
const STREAM_AUG: u64 = 12;
const STREAM_DEFENSE: u64 = 13;
const STREAM_ADVERSARY: u64 = 14;

/// A model mid-training: its architecture, parameters, and optimizer state.
pub struct Learner {
    pub spec: ModelSpec,
    pub params: ParamSet,
    pub opt: Sgd,
}

impl Learner {
    pub fn new(spec: ModelSpec, momentum: f64, rng: &mut ChaCha8Rng) -> Self {
        let params = spec.init_params(rng);
        Self { spec, params, opt: Sgd::new(momentum) }
    }

    /// Posterior matrix `[n,k]` for a set of samples, without gradients.
    pub fn posterior_matrix(&self, xs: &[&Tensor]) -> Result<Tensor> {
        let logits = crate::model::batch_logits(&self.spec, &self.params, xs)?;
        let mut tape = Tape::new();
        let l = tape.constant(logits);
        let soft = tape.softmax_rows(l)?;
        Ok(tape.value(soft).clone())
    }
}

/// One-hot target rows for a batch of class labels.
pub fn one_hot_rows(labels: &[usize], k: usize) -> Result<Tensor> {
    let mut data = vec![0.0; labels.len() * k];
    for (r, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(Error::Index { index: y, len: k });
        }
        data[r * k + y] = 1.0;
    }
    Tensor::new(vec![labels.len(), k], data)
}

/// Classification accuracy of the parameters on the given indices.
pub fn accuracy(
    spec: &ModelSpec,
    params: &ParamSet,
    data: &Dataset,
    idx: &[usize],
) -> Result<f64> {
    if idx.is_empty() {
        return Ok(0.0);
    }
    let xs: Vec<&Tensor> = idx.iter().map(|&i| data.sample(i)).collect();
    let logits = crate::model::batch_logits(spec, params, &xs)?;
    let k = spec.num_classes();
    let mut correct = 0usize;
    for (r, &i) in idx.iter().enumerate() {
        let row = &logits.data()[r * k..(r + 1) * k];
        let mut best = 0;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        if best == data.label(i) {
            correct += 1;
        }
    }
    Ok(correct as f64 / idx.len() as f64)
}

/// Class-conditional accuracies; `None` for classes absent from the index set.
pub fn per_class_accuracy(
    spec: &ModelSpec,
    params: &ParamSet,
    data: &Dataset,
    idx: &[usize],
) -> Result<Vec<Option<f64>>> {
    let k = spec.num_classes();
    let mut correct = vec![0usize; k];
    let mut total = vec![0usize; k];
    if !idx.is_empty() {
        let xs: Vec<&Tensor> = idx.iter().map(|&i| data.sample(i)).collect();
        let logits = crate::model::batch_logits(spec, params, &xs)?;
        for (r, &i) in idx.iter().enumerate() {
            let row = &logits.data()[r * k..(r + 1) * k];
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            let y = data.label(i);
            total[y] += 1;
            if best == y {
                correct[y] += 1;
            }
        }
    }
    Ok((0..k)
        .map(|c| if total[c] == 0 { None } else { Some(correct[c] as f64 / total[c] as f64) })
        .collect())
}

/// Per-sample gradients: one gradient set per sample, in parameter order.
///
/// The mean of the returned gradients equals the batch gradient, since the
/// batch loss is the mean of per-sample losses.
pub fn per_sample_grads(
    spec: &ModelSpec,
    params: &ParamSet,
    xs: &[&Tensor],
    targets: &[Vec<f64>],
) -> Result<Vec<Vec<Tensor>>> {
    if xs.is_empty() {
        return Err(Error::invalid("per-sample gradients need a nonempty batch"));
    }
    if xs.len() != targets.len() {
        return Err(Error::invalid("sample and target counts differ"));
    }
    let k = spec.num_classes();
    let mut out = Vec::with_capacity(xs.len());
    for (x, t) in xs.iter().zip(targets) {
        let mut tape = Tape::new();
        let staged = params.stage(&mut tape);
        let input = tape.constant(stack_batch(&[x])?);
        let logits = spec.forward(&mut tape, &staged, input)?;
        let loss = tape.cross_entropy(logits, Tensor::new(vec![1, k], t.clone())?)?;
        tape.backward(loss)?;
        let mut grads = Vec::with_capacity(params.len());
        for i in 0..params.len() {
            grads.push(tape.grad(staged.var(i))?.clone());
        }
        out.push(grads);
    }
    Ok(out)
}

/// Whole-batch gradient of the mean cross-entropy loss, in parameter order.
pub fn batch_grad(
    spec: &ModelSpec,
    params: &ParamSet,
    xs: &[&Tensor],
    targets: &[Vec<f64>],
) -> Result<(f64, Vec<Tensor>)> {
    let k = spec.num_classes();
    let mut rows = Vec::with_capacity(xs.len() * k);
    for t in targets {
        rows.extend_from_slice(t);
    }
    let mut tape = Tape::new();
    let staged = params.stage(&mut tape);
    let input = tape.constant(stack_batch(xs)?);
    let logits = spec.forward(&mut tape, &staged, input)?;
    let loss = tape.cross_entropy(logits, Tensor::new(vec![xs.len(), k], rows)?)?;
    tape.backward(loss)?;
    let loss_val = tape.value(loss).data()[0];
    let mut grads = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        grads.push(tape.grad(staged.var(i))?.clone());
    }
    Ok((loss_val, grads))
}

fn target_rows(labels: &[usize], k: usize, defense: &DefenseConfig) -> Result<Tensor> {
    match defense {
        DefenseConfig::LabelSmoothing { epsilon } => {
            let mut data = Vec::with_capacity(labels.len() * k);
            for &y in labels {
                data.extend(crate::defense::smooth_labels(y, k, *epsilon)?);
            }
            Tensor::new(vec![labels.len(), k], data)
        }
        _ => one_hot_rows(labels, k),
    }
}

struct EpochOutcome {
    loss_sum: f64,
    examples: usize,
}

/// Train a target (or shadow) model under a defense and augmentation mode.
pub fn train_target(
    data: &Dataset,
    view: SplitView<'_>,
    spec: &ModelSpec,
    recipe: &TrainRecipe,
    defense: &DefenseConfig,
    augmentation: &AugMode,
) -> Result<TrainedModel> {
    Ok(train_target_with_snapshots(data, view, spec, recipe, defense, augmentation, 0)?.0)
}

/// As [`train_target`], also snapshotting parameters every `snapshot_every`
/// epochs (0 disables snapshots). Snapshots record the epoch count completed.
pub fn train_target_with_snapshots(
    data: &Dataset,
    view: SplitView<'_>,
    spec: &ModelSpec,
    recipe: &TrainRecipe,
    defense: &DefenseConfig,
    augmentation: &AugMode,
    snapshot_every: usize,
) -> Result<(TrainedModel, Vec<(usize, ParamSet)>)> {
    spec.validate()?;
    recipe.validate()?;
    defense.validate()?;
    augmentation.validate()?;
    if view.train.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    if defense.needs_reference() && view.reference.is_empty() {
        return Err(Error::config(format!(
            "defense {} requires a nonempty reference split",
            defense.name()
        )));
    }
    // the data-augmentation "defense" is an AugMode applied at training time
    let effective_aug = match defense {
        DefenseConfig::DataAug(mode) => *mode,
        _ => *augmentation,
    };

    let k = spec.num_classes();
    let mut init_rng = stream_rng(recipe.seed, STREAM_INIT);
    let mut learner = Learner::new(spec.clone(), recipe.momentum, &mut init_rng);
    let mut shuffle_rng = stream_rng(recipe.seed, STREAM_SHUFFLE);
    let mut aug_rng = stream_rng(recipe.seed, STREAM_AUG);
    let mut defense_rng = stream_rng(recipe.seed, STREAM_DEFENSE);
    let mut adversary = match defense {
        DefenseConfig::AdvReg { .. } => {
            let mut rng = stream_rng(recipe.seed, STREAM_ADVERSARY);
            let adv_spec = AttackModelSpec::new(k, recipe.seed).model_spec();
            Some(Learner::new(adv_spec, recipe.momentum, &mut rng))
        }
        _ => None,
    };

    let mut order: Vec<usize> = view.train.to_vec();
    let mut ref_order: Vec<usize> = view.reference.to_vec();
    let mut history = Vec::with_capacity(recipe.epochs);
    let mut snapshots = Vec::new();

    for epoch in 0..recipe.epochs {
        let lr = cosine_lr(epoch, recipe.epochs, recipe.lr0)?.max(1e-12);
        order.shuffle(&mut shuffle_rng);
        if !ref_order.is_empty() {
            ref_order.shuffle(&mut shuffle_rng);
        }
        let mut outcome = EpochOutcome { loss_sum: 0.0, examples: 0 };
        let mut ref_cursor = 0usize;
        for chunk in order.chunks(recipe.batch_size) {
            let views: Vec<Tensor> = chunk
                .iter()
                .map(|&i| augment(data.sample(i), &effective_aug, &mut aug_rng))
                .collect::<Result<_>>()?;
            let xs: Vec<&Tensor> = views.iter().collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| data.label(i)).collect();
            let ref_batch: Vec<&Tensor> = (0..chunk.len().min(ref_order.len()))
                .map(|j| {
                    let i = ref_order[(ref_cursor + j) % ref_order.len()];
                    data.sample(i)
                })
                .collect();
            ref_cursor = (ref_cursor + chunk.len()) % ref_order.len().max(1);

            let loss = train_step(
                &mut learner,
                defense,
                &xs,
                &labels,
                &ref_batch,
                k,
                lr,
                epoch,
                recipe,
                &mut defense_rng,
                adversary.as_mut(),
            )?;
            if !loss.is_finite() {
                return Err(Error::invalid(format!(
                    "training loss became non-finite at epoch {epoch}"
                )));
            }
            outcome.loss_sum += loss * chunk.len() as f64;
            outcome.examples += chunk.len();
        }
        let train_acc = accuracy(spec, &learner.params, data, view.train)?;
        let test_acc = accuracy(spec, &learner.params, data, view.test)?;
        history.push(EpochStats {
            epoch,
            train_acc,
            test_acc,
            loss: outcome.loss_sum / outcome.examples.max(1) as f64,
        });
        if snapshot_every > 0 && (epoch + 1) % snapshot_every == 0 {
            snapshots.push((epoch + 1, learner.params.clone()));
        }
    }

    Ok((
        TrainedModel {
            spec: spec.clone(),
            params: learner.params,
            history,
            defense: defense.clone(),
            recipe: recipe.clone(),
            seed: recipe.seed,
        },
        snapshots,
    ))
}

#[allow(clippy::too_many_arguments)]
fn train_step(
    learner: &mut Learner,
    defense: &DefenseConfig,
    xs: &[&Tensor],
    labels: &[usize],
    ref_batch: &[&Tensor],
    k: usize,
    lr: f64,
    epoch: usize,
    recipe: &TrainRecipe,
    defense_rng: &mut ChaCha8Rng,
    adversary: Option<&mut Learner>,
) -> Result<f64> {
    match defense {
        DefenseConfig::None
        | DefenseConfig::LabelSmoothing { .. }
        | DefenseConfig::MemGuard { .. }
        | DefenseConfig::DataAug(_) => {
            let targets = target_rows(labels, k, defense)?;
            let mut tape = Tape::new();
            let staged = learner.params.stage(&mut tape);
            let input = tape.constant(stack_batch(xs)?);
            let logits = learner.spec.forward(&mut tape, &staged, input)?;
            let loss = tape.cross_entropy(logits, targets)?;
            tape.backward(loss)?;
            let loss_val = tape.value(loss).data()[0];
            learner.params.absorb_grads(&tape, &staged)?;
            learner.opt.step(&mut learner.params, lr)?;
            Ok(loss_val)
        }
        DefenseConfig::DpSgd { sigma, clip } => {
            let targets: Vec<Vec<f64>> = labels
                .iter()
                .map(|&y| {
                    let mut row = vec![0.0; k];
                    row[y] = 1.0;
                    row
                })
                .collect();
            let grads = per_sample_grads(&learner.spec, &learner.params, xs, &targets)?;
            let (loss_val, _) = batch_grad(&learner.spec, &learner.params, xs, &targets)?;
            dpsgd_step(
                &mut learner.params,
                &mut learner.opt,
                &grads,
                *clip,
                *sigma,
                lr,
                defense_rng,
            )?;
            Ok(loss_val)
        }
        DefenseConfig::MixupMmd { lambda, alpha, bandwidth } => {
            // mixed classification batch
            let beta = Beta::new(*alpha, *alpha)
                .map_err(|_| Error::invalid("invalid Beta parameters"))?;
            let mut perm: Vec<usize> = (0..xs.len()).collect();
            perm.shuffle(defense_rng);
            let mut mixed = Vec::with_capacity(xs.len());
            let mut mixed_targets = Vec::with_capacity(xs.len() * k);
            for (i, &j) in perm.iter().enumerate() {
                let lam = beta.sample(defense_rng);
                let mut t1 = vec![0.0; k];
                t1[labels[i]] = 1.0;
                let mut t2 = vec![0.0; k];
                t2[labels[j]] = 1.0;
                let (mx, mt) = mixup_with(xs[i], &t1, xs[j], &t2, lam)?;
                mixed.push(mx);
                mixed_targets.extend(mt);
            }
            let mixed_refs: Vec<&Tensor> = mixed.iter().collect();

            let mut tape = Tape::new();
            let staged = learner.params.stage(&mut tape);
            let input = tape.constant(stack_batch(&mixed_refs)?);
            let logits = learner.spec.forward(&mut tape, &staged, input)?;
            let ce = tape.cross_entropy(
                logits,
                Tensor::new(vec![xs.len(), k], mixed_targets)?,
            )?;
            // MMD between train and reference posteriors
            let raw = tape.constant(stack_batch(xs)?);
            let raw_logits = learner.spec.forward(&mut tape, &staged, raw)?;
            let post_t = tape.softmax_rows(raw_logits)?;
            let refs = tape.constant(stack_batch(ref_batch)?);
            let ref_logits = learner.spec.forward(&mut tape, &staged, refs)?;
            let post_r = tape.softmax_rows(ref_logits)?;
            let h = match bandwidth {
                BandwidthPolicy::Fixed(h) => *h,
                BandwidthPolicy::Median => {
                    median_bandwidth(tape.value(post_t), tape.value(post_r))
                }
            };
            let mmd = tape.mmd2(post_t, post_r, h)?;
            let penalty = tape.scale(mmd, *lambda);
            let loss = tape.add(ce, penalty)?;
            tape.backward(loss)?;
            let loss_val = tape.value(loss).data()[0];
            learner.params.absorb_grads(&tape, &staged)?;
            learner.opt.step(&mut learner.params, lr)?;
            Ok(loss_val)
        }
        DefenseConfig::AdvReg { lambda } => {
            let adversary =
                adversary.ok_or(Error::State("advreg training requires an adversary"))?;
            let lr_adv = cosine_lr(epoch, recipe.epochs, 0.01)?.max(1e-12);
            advreg_round(learner, adversary, xs, labels, ref_batch, *lambda, lr, lr_adv)?;
            // report the plain classification loss for the history
            let targets: Vec<Vec<f64>> = labels
                .iter()
                .map(|&y| {
                    let mut row = vec![0.0; k];
                    row[y] = 1.0;
                    row
                })
                .collect();
            let (loss_val, _) = batch_grad(&learner.spec, &learner.params, xs, &targets)?;
            Ok(loss_val)
        }
    }
}

/// Train the binary membership classifier on feature vectors.
pub fn train_attack_model(
    features: &[Vec<f64>],
    labels: &[bool],
    spec: &AttackModelSpec,
) -> Result<TrainedModel> {
    if features.is_empty() {
        return Err(Error::invalid("attack training set is empty"));
    }
    if features.len() != labels.len() {
        return Err(Error::invalid("feature and label counts differ"));
    }
    if features.iter().any(|f| f.len() != spec.input_dim) {
        return Err(Error::invalid(format!(
            "feature dimension mismatch: expected {}",
            spec.input_dim
        )));
    }
    let recipe = spec.recipe();
    recipe.validate()?;
    let model_spec = spec.model_spec();
    let mut init_rng = stream_rng(recipe.seed, STREAM_INIT);
    let mut learner = Learner::new(model_spec.clone(), recipe.momentum, &mut init_rng);
    let mut shuffle_rng = stream_rng(recipe.seed, STREAM_SHUFFLE);

    let samples: Vec<Tensor> = features.iter().map(|f| Tensor::from_vec(f.clone())).collect();
    let class_labels: Vec<usize> = labels.iter().map(|&m| usize::from(m)).collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(recipe.epochs);

    for epoch in 0..recipe.epochs {
        let lr = cosine_lr(epoch, recipe.epochs, recipe.lr0)?.max(1e-12);
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(recipe.batch_size) {
            let xs: Vec<&Tensor> = chunk.iter().map(|&i| &samples[i]).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| class_labels[i]).collect();
            let mut tape = Tape::new();
            let staged = learner.params.stage(&mut tape);
            let input = tape.constant(stack_batch(&xs)?);
            let logits = learner.spec.forward(&mut tape, &staged, input)?;
            let loss = tape.cross_entropy(logits, one_hot_rows(&ys, 2)?)?;
            tape.backward(loss)?;
            loss_sum += tape.value(loss).data()[0] * chunk.len() as f64;
            learner.params.absorb_grads(&tape, &staged)?;
            learner.opt.step(&mut learner.params, lr)?;
        }
        let train_acc = {
            let xs: Vec<&Tensor> = samples.iter().collect();
            let logits = crate::model::batch_logits(&model_spec, &learner.params, &xs)?;
            let mut correct = 0usize;
            for (r, &y) in class_labels.iter().enumerate() {
                let row = &logits.data()[r * 2..r * 2 + 2];
                let pred = usize::from(row[1] > row[0]);
                correct += usize::from(pred == y);
            }
            correct as f64 / samples.len() as f64
        };
        history.push(EpochStats {
            epoch,
            train_acc,
            test_acc: train_acc,
            loss: loss_sum / samples.len() as f64,
        });
    }

    Ok(TrainedModel {
        spec: model_spec,
        params: learner.params,
        history,
        defense: DefenseConfig::None,
        recipe,
        seed: spec.seed,
    })
}

/// Train the defender-side surrogate attack model MemGuard perturbs against:
/// raw posteriors of the defender's train split (members) versus its
/// reference split (non-members).
pub fn train_memguard_surrogate(
    target: &TrainedModel,
    data: &Dataset,
    view: SplitView<'_>,
    seed: u64,
) -> Result<TrainedModel> {
    if view.reference.is_empty() {
        return Err(Error::config("memguard surrogate needs a nonempty reference split"));
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (&idx_set, is_member) in [(&view.train, true), (&view.reference, false)] {
        for &i in idx_set.iter() {
            features.push(target.query(data.sample(i))?.into_vec());
            labels.push(is_member);
        }
    }
    let spec = AttackModelSpec::new(target.spec.num_classes(), seed);
    train_attack_model(&features, &labels, &spec)
}

/// True when a one-hot label distribution can be mixed: used by callers that
/// prepare mixup batches outside the training loop.
pub fn one_hot(y: usize, k: usize) -> Result<Vec<f64>> {
    if y >= k {
        return Err(Error::Index { index: y, len: k });
    }
    let mut row = vec![0.0; k];
    row[y] = 1.0;
    Ok(row)
}

/// Fraction of balanced binary predictions a membership classifier gets right
/// when scoring feature vectors; used by prepared neural-net attacks.
pub fn attack_model_member_prob(model: &TrainedModel, feature: &[f64]) -> Result<f64> {
    let x = Tensor::from_vec(feature.to_vec());
    model.query(&x)?.prob(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{six_way_split, synth_gaussian};
    use crate::rngutil::stream_rng;
    use rand::Rng;

    fn small_setup() -> (Dataset, crate::data::SplitPlan) {
        let data = synth_gaussian(2, 4, 60, 3.0, 11).unwrap();
        let plan = six_way_split(&data, 11).unwrap();
        (data, plan)
    }

    #[test]
    fn per_sample_mean_matches_batch_grad() {
        let data = synth_gaussian(2, 3, 10, 2.0, 5).unwrap();
        let spec = ModelSpec::Mlp { input_dim: 3, hidden: vec![6], num_classes: 2 };
        let params = spec.init_params(&mut stream_rng(1, 0));
        let xs: Vec<&Tensor> = (0..4).map(|i| data.sample(i)).collect();
        let targets: Vec<Vec<f64>> =
            (0..4).map(|i| one_hot(data.label(i), 2).unwrap()).collect();
        let per = per_sample_grads(&spec, &params, &xs, &targets).unwrap();
        let (_, batch) = batch_grad(&spec, &params, &xs, &targets).unwrap();
        for (pi, b) in batch.iter().enumerate() {
            for (j, bv) in b.data().iter().enumerate() {
                let mean: f64 =
                    per.iter().map(|g| g[pi].data()[j]).sum::<f64>() / per.len() as f64;
                assert!((mean - bv).abs() < 1e-6, "param {pi} elem {j}: {mean} vs {bv}");
            }
        }
    }

    #[test]
    fn single_sample_batch_grads_are_identical() {
        let data = synth_gaussian(2, 3, 5, 2.0, 6).unwrap();
        let spec = ModelSpec::Mlp { input_dim: 3, hidden: vec![4], num_classes: 2 };
        let params = spec.init_params(&mut stream_rng(2, 0));
        let xs = vec![data.sample(0)];
        let targets = vec![one_hot(data.label(0), 2).unwrap()];
        let per = per_sample_grads(&spec, &params, &xs, &targets).unwrap();
        let (_, batch) = batch_grad(&spec, &params, &xs, &targets).unwrap();
        for (a, b) in per[0].iter().zip(&batch) {
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn duplicated_sample_gives_identical_grads() {
        let data = synth_gaussian(2, 3, 5, 2.0, 7).unwrap();
        let spec = ModelSpec::Mlp { input_dim: 3, hidden: vec![4], num_classes: 2 };
        let params = spec.init_params(&mut stream_rng(3, 0));
        let xs = vec![data.sample(1), data.sample(1)];
        let targets = vec![
            one_hot(data.label(1), 2).unwrap(),
            one_hot(data.label(1), 2).unwrap(),
        ];
        let per = per_sample_grads(&spec, &params, &xs, &targets).unwrap();
        for (a, b) in per[0].iter().zip(&per[1]) {
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn empty_batch_rejected() {
        let spec = ModelSpec::Mlp { input_dim: 3, hidden: vec![4], num_classes: 2 };
        let params = spec.init_params(&mut stream_rng(4, 0));
        assert!(per_sample_grads(&spec, &params, &[], &[]).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let (data, plan) = small_setup();
        let spec = ModelSpec::Mlp { input_dim: 4, hidden: vec![8], num_classes: 2 };
        let recipe = TrainRecipe::new(5, 16, 0.1, 42);
        let a = train_target(&data, plan.target(), &spec, &recipe, &DefenseConfig::None, &AugMode::None)
            .unwrap();
        let b = train_target(&data, plan.target(), &spec, &recipe, &DefenseConfig::None, &AugMode::None)
            .unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn zero_epochs_gives_untrained_model_near_chance() {
        let (data, plan) = small_setup();
        let spec = ModelSpec::Mlp { input_dim: 4, hidden: vec![8], num_classes: 2 };
        let recipe = TrainRecipe::new(0, 16, 0.1, 1);
        let m = train_target(&data, plan.target(), &spec, &recipe, &DefenseConfig::None, &AugMode::None)
            .unwrap();
        assert!(m.history.is_empty());
        let acc = accuracy(&m.spec, &m.params, &data, plan.target().test).unwrap();
        assert!((acc - 0.5).abs() <= 0.4, "untrained accuracy {acc} wildly off chance");
    }

    #[test]
    fn reference_needed_defenses_reject_empty_reference() {
        let (data, plan) = small_setup();
        let spec = ModelSpec::Mlp { input_dim: 4, hidden: vec![8], num_classes: 2 };
        let recipe = TrainRecipe::new(1, 16, 0.1, 1);
        let view = SplitView { train: plan.target().train, reference: &[], test: plan.target().test };
        let err = train_target(
            &data,
            view,
            &spec,
            &recipe,
            &DefenseConfig::AdvReg { lambda: 1.0 },
            &AugMode::None,
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn history_has_one_entry_per_epoch_with_finite_loss() {
        let (data, plan) = small_setup();
        let spec = ModelSpec::Mlp { input_dim: 4, hidden: vec![8], num_classes: 2 };
        let recipe = TrainRecipe::new(7, 16, 0.1, 9);
        let m = train_target(&data, plan.target(), &spec, &recipe, &DefenseConfig::None, &AugMode::None)
            .unwrap();
        assert_eq!(m.history.len(), 7);
        for e in &m.history {
            assert!(e.loss.is_finite());
            assert!((0.0..=1.0).contains(&e.train_acc));
            assert!((0.0..=1.0).contains(&e.test_acc));
        }
    }

    #[test]
    fn train_accuracy_trend_is_monotone_with_slack() {
        let (data, plan) = small_setup();
        let spec = ModelSpec::Mlp { input_dim: 4, hidden: vec![8], num_classes: 2 };
        let recipe = TrainRecipe::new(60, 16, 0.1, 13);
        let m = train_target(&data, plan.target(), &spec, &recipe, &DefenseConfig::None, &AugMode::None)
            .unwrap();
        let accs: Vec<f64> = m.history.iter().map(|e| e.train_acc).collect();
        let violations = (0..accs.len().saturating_sub(20))
            .filter(|&i| accs[i + 20] < accs[i])
            .count();
        assert!(violations <= 1, "{violations} window violations");
    }

    #[test]
    fn attack_model_learns_separable_features() {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut rng = stream_rng(21, 0);
        for i in 0..120 {
            let member = i % 2 == 0;
            let base = if member { 0.9 } else { 0.1 };
            features.push(vec![
                base + 0.05 * rng.random_range(-1.0..1.0),
                1.0 - base + 0.05 * rng.random_range(-1.0..1.0),
            ]);
            labels.push(member);
        }
        let spec = AttackModelSpec::new(2, 3);
        let model = train_attack_model(&features, &labels, &spec).unwrap();
        assert!(model.final_train_acc() >= 0.95, "acc {}", model.final_train_acc());
    }

    #[test]
    fn attack_model_on_identical_features_is_chance() {
        let features = vec![vec![0.5, 0.5]; 80];
        let labels: Vec<bool> = (0..80).map(|i| i % 2 == 0).collect();
        let spec = AttackModelSpec::new(2, 4);
        let model = train_attack_model(&features, &labels, &spec).unwrap();
        assert!((model.final_train_acc() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn attack_model_accepts_sorted_posterior_shape() {
        let features = vec![vec![0.1; 10]; 8];
        let labels: Vec<bool> = (0..8).map(|i| i % 2 == 0).collect();
        let mut spec = AttackModelSpec::new(10, 5);
        spec.epochs = 1;
        assert!(train_attack_model(&features, &labels, &spec).is_ok());
        let bad = vec![vec![0.1; 9]; 8];
        assert!(train_attack_model(&bad, &labels, &spec).is_err());
    }
}
