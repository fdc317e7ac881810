//! The nine membership-inference attacks plus the augmented-view attack,
//! operating on a black-box posterior oracle.

use alloc::vec::Vec;

use crate::data::{Dataset, SplitView};
use crate::error::Error;
use crate::model::{PosteriorOracle, TrainedModel};
use crate::posterior::{entropy, Posteriors};
use crate::rngutil::sample_rng;
use crate::tensor::Tensor;
use crate::train::train_attack_model;
use crate::Result;

pub mod augmented;
pub mod label_only;
pub mod metric;

pub use augmented::augmented_features;
pub use label_only::{label_only_distance, DistanceEstimate, ProbeConfig};
pub use metric::{
    ment, ment_variant, metric_conf, metric_corr, metric_ent, metric_ment, select_threshold_1d,
    select_thresholds, Direction, MentVariant, MetricTag, ThresholdTable,
};

use crate::model::AttackModelSpec;

/// How posterior vectors are turned into attack-model inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FeatureMode {
    /// Three largest probabilities, descending, zero-padded when k < 3.
    Top3,
    /// All probabilities, descending.
    Sorted,
    /// Raw posteriors in class order.
    Normal,
    /// Raw posteriors plus a correctness bit.
    NormalPlusLabel,
    /// Concatenated top-3 triples of K confidence-ordered augmented views.
    Augmented,
}

/// A feature vector tagged with the mode that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackFeature {
    pub mode: FeatureMode,
    pub vector: Vec<f64>,
}

/// Turn one posterior vector into an attack feature.
///
/// `y` is consulted only for [`FeatureMode::NormalPlusLabel`], where the extra
/// bit is 1 iff the argmax equals the true label.
pub fn extract_features(
    mode: FeatureMode,
    p: &Posteriors,
    y: Option<usize>,
) -> Result<AttackFeature> {
    let vector = match mode {
        FeatureMode::Top3 => {
            let mut sorted = p.as_slice().to_vec();
            sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite posteriors"));
            sorted.resize(3.max(sorted.len()), 0.0);
            sorted.truncate(3);
            sorted
        }
        FeatureMode::Sorted => {
            let mut sorted = p.as_slice().to_vec();
            sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite posteriors"));
            sorted
        }
        FeatureMode::Normal => p.as_slice().to_vec(),
        FeatureMode::NormalPlusLabel => {
            let y = y.ok_or(Error::invalid("normal+label features need the true label"))?;
            if y >= p.num_classes() {
                return Err(Error::Index { index: y, len: p.num_classes() });
            }
            let mut v = p.as_slice().to_vec();
            v.push(f64::from(u8::from(p.argmax() == y)));
            v
        }
        FeatureMode::Augmented => {
            return Err(Error::invalid(
                "augmented features are built by augmented_features, not extract_features",
            ))
        }
    };
    Ok(AttackFeature { mode, vector })
}

/// The attack menu.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AttackKind {
    NnTop3,
    NnSorted,
    NnNormal,
    NnNormalLabel,
    MetricCorr,
    MetricConf,
    MetricEnt,
    MetricMent,
    LabelOnly,
    Augmented,
}

impl AttackKind {
    pub const ALL: [AttackKind; 10] = [
        AttackKind::NnTop3,
        AttackKind::NnSorted,
        AttackKind::NnNormal,
        AttackKind::NnNormalLabel,
        AttackKind::MetricCorr,
        AttackKind::MetricConf,
        AttackKind::MetricEnt,
        AttackKind::MetricMent,
        AttackKind::LabelOnly,
        AttackKind::Augmented,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::NnTop3 => "nn-top3",
            AttackKind::NnSorted => "nn-sorted",
            AttackKind::NnNormal => "nn-normal",
            AttackKind::NnNormalLabel => "nn-normal-label",
            AttackKind::MetricCorr => "metric-corr",
            AttackKind::MetricConf => "metric-conf",
            AttackKind::MetricEnt => "metric-ent",
            AttackKind::MetricMent => "metric-ment",
            AttackKind::LabelOnly => "label-only",
            AttackKind::Augmented => "augmented",
        }
    }

    pub fn parse(s: &str) -> Option<AttackKind> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    fn feature_mode(&self) -> Option<FeatureMode> {
        match self {
            AttackKind::NnTop3 => Some(FeatureMode::Top3),
            AttackKind::NnSorted => Some(FeatureMode::Sorted),
            AttackKind::NnNormal => Some(FeatureMode::Normal),
            AttackKind::NnNormalLabel => Some(FeatureMode::NormalPlusLabel),
            _ => None,
        }
    }
}

/// Membership decision / ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Membership {
    Member,
    NonMember,
}

impl Membership {
    pub fn from_bool(member: bool) -> Self {
        if member {
            Membership::Member
        } else {
            Membership::NonMember
        }
    }

    pub fn is_member(&self) -> bool {
        matches!(self, Membership::Member)
    }
}

/// One attack decision, with an optional score and the ground truth.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MembershipVerdict {
    pub sample_id: usize,
    pub decision: Membership,
    /// Higher means more member-like; present for every shipped attack.
    pub score: Option<f64>,
    pub truth: Option<Membership>,
    /// Set when the attack had to fall back (e.g. no boundary within budget).
    pub flag: Option<&'static str>,
}

/// Knobs shared by attack preparation.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackOptions {
    pub seed: u64,
    pub ment_variant: MentVariant,
    pub probe: ProbeConfig,
    /// K for the augmented attack.
    pub augmented_views: usize,
    pub attack_epochs: usize,
    pub attack_batch: usize,
}

impl Default for AttackOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            ment_variant: MentVariant::AsPrinted,
            probe: ProbeConfig::default(),
            augmented_views: 10,
            attack_epochs: 100,
            attack_batch: 128,
        }
    }
}

/// An attack with its shadow-derived state, ready to run against a target.
pub enum PreparedAttack {
    NeuralNet { kind: AttackKind, model: TrainedModel },
    Correctness,
    Metric { kind: AttackKind, table: ThresholdTable, variant: MentVariant },
    LabelOnly { tau: f64, probe: ProbeConfig, seed: u64 },
    Augmented { model: TrainedModel, views: usize, seed: u64 },
}

impl PreparedAttack {
    pub fn kind(&self) -> AttackKind {
        match self {
            PreparedAttack::NeuralNet { kind, .. } => *kind,
            PreparedAttack::Correctness => AttackKind::MetricCorr,
            PreparedAttack::Metric { kind, .. } => *kind,
            PreparedAttack::LabelOnly { .. } => AttackKind::LabelOnly,
            PreparedAttack::Augmented { .. } => AttackKind::Augmented,
        }
    }
}

fn attack_spec(input_dim: usize, opts: &AttackOptions) -> AttackModelSpec {
    let mut spec = AttackModelSpec::new(input_dim, opts.seed);
    spec.epochs = opts.attack_epochs;
    spec.batch_size = opts.attack_batch;
    spec
}

/// Metric value of one sample under a metric tag.
fn metric_value(tag: MetricTag, p: &Posteriors, y: usize, variant: MentVariant) -> Result<f64> {
    match tag {
        MetricTag::Conf => p.prob(y),
        MetricTag::Ent => Ok(entropy(p)),
        MetricTag::Ment => ment_variant(p, y, variant),
    }
}

/// Build an attack from shadow-model behavior on the shadow splits:
/// `shadow_view.train` are members, `shadow_view.test` non-members.
pub fn prepare_attack(
    kind: AttackKind,
    shadow: &dyn PosteriorOracle,
    data: &Dataset,
    shadow_view: SplitView<'_>,
    opts: &AttackOptions,
) -> Result<PreparedAttack> {
    if shadow_view.train.is_empty() || shadow_view.test.is_empty() {
        return Err(Error::config("attack preparation needs shadow train and test splits"));
    }
    let n = shadow_view.train.len().min(shadow_view.test.len());
    let members = &shadow_view.train[..n];
    let non_members = &shadow_view.test[..n];

    match kind {
        AttackKind::NnTop3
        | AttackKind::NnSorted
        | AttackKind::NnNormal
        | AttackKind::NnNormalLabel => {
            let mode = kind.feature_mode().expect("nn attack");
            let mut features = Vec::with_capacity(2 * n);
            let mut labels = Vec::with_capacity(2 * n);
            for (&set, is_member) in [(&members, true), (&non_members, false)] {
                for &i in set.iter() {
                    let p = shadow.posteriors(data.sample(i))?;
                    features
                        .push(extract_features(mode, &p, Some(data.label(i)))?.vector);
                    labels.push(is_member);
                }
            }
            let dim = features[0].len();
            let model = train_attack_model(&features, &labels, &attack_spec(dim, opts))?;
            Ok(PreparedAttack::NeuralNet { kind, model })
        }
        AttackKind::MetricCorr => Ok(PreparedAttack::Correctness),
        AttackKind::MetricConf | AttackKind::MetricEnt | AttackKind::MetricMent => {
            let tag = match kind {
                AttackKind::MetricConf => MetricTag::Conf,
                AttackKind::MetricEnt => MetricTag::Ent,
                _ => MetricTag::Ment,
            };
            let mut member_vals = Vec::with_capacity(n);
            let mut non_member_vals = Vec::with_capacity(n);
            for (&set, out) in
                [(&members, &mut member_vals), (&non_members, &mut non_member_vals)]
            {
                for &i in set.iter() {
                    let p = shadow.posteriors(data.sample(i))?;
                    let y = data.label(i);
                    out.push((y, metric_value(tag, &p, y, opts.ment_variant)?));
                }
            }
            let table =
                select_thresholds(tag, &member_vals, &non_member_vals, data.num_classes())?;
            Ok(PreparedAttack::Metric { kind, table, variant: opts.ment_variant })
        }
        AttackKind::LabelOnly => {
            let mut member_vals = Vec::with_capacity(n);
            let mut non_member_vals = Vec::with_capacity(n);
            for (&set, out) in
                [(&members, &mut member_vals), (&non_members, &mut non_member_vals)]
            {
                for &i in set.iter() {
                    let x = data.sample(i);
                    let mut rng = sample_rng(opts.seed, x);
                    let mut label_fn = |q: &Tensor| shadow.predicted_label(q);
                    let est = label_only_distance(
                        &mut label_fn,
                        x,
                        data.label(i),
                        &opts.probe,
                        &mut rng,
                    )?;
                    out.push(est.distance);
                }
            }
            let (tau, _) =
                select_threshold_1d(&member_vals, &non_member_vals, Direction::GreaterEq)?;
            Ok(PreparedAttack::LabelOnly { tau, probe: opts.probe, seed: opts.seed })
        }
        AttackKind::Augmented => {
            let mut features = Vec::with_capacity(2 * n);
            let mut labels = Vec::with_capacity(2 * n);
            for (&set, is_member) in [(&members, true), (&non_members, false)] {
                for &i in set.iter() {
                    let x = data.sample(i);
                    let mut rng = sample_rng(opts.seed, x);
                    let f = augmented_features(shadow, x, opts.augmented_views, &mut rng)?;
                    features.push(f.vector);
                    labels.push(is_member);
                }
            }
            let dim = 3 * opts.augmented_views;
            let model = train_attack_model(&features, &labels, &attack_spec(dim, opts))?;
            Ok(PreparedAttack::Augmented { model, views: opts.augmented_views, seed: opts.seed })
        }
    }
}

fn verdict_for(
    att: &PreparedAttack,
    oracle: &dyn PosteriorOracle,
    data: &Dataset,
    sample_id: usize,
) -> Result<(Membership, Option<f64>, Option<&'static str>)> {
    let x = data.sample(sample_id);
    let y = data.label(sample_id);
    match att {
        PreparedAttack::NeuralNet { kind, model } => {
            let p = oracle.posteriors(x)?;
            let mode = kind.feature_mode().expect("nn attack");
            let feature = extract_features(mode, &p, Some(y))?;
            let prob = crate::train::attack_model_member_prob(model, &feature.vector)?;
            Ok((Membership::from_bool(prob >= 0.5), Some(prob), None))
        }
        PreparedAttack::Correctness => {
            let p = oracle.posteriors(x)?;
            let correct = metric_corr(&p, y);
            Ok((Membership::from_bool(correct), Some(f64::from(u8::from(correct))), None))
        }
        PreparedAttack::Metric { kind, table, variant } => {
            let p = oracle.posteriors(x)?;
            let (member, score) = match kind {
                AttackKind::MetricConf => {
                    let v = p.prob(y)?;
                    (metric_conf(&p, y, table)?, v)
                }
                AttackKind::MetricEnt => (metric_ent(&p, y, table), -entropy(&p)),
                _ => {
                    let v = ment_variant(&p, y, *variant)?;
                    (metric_ment(&p, y, table, *variant)?, -v)
                }
            };
            Ok((Membership::from_bool(member), Some(score), None))
        }
        PreparedAttack::LabelOnly { tau, probe, seed } => {
            let mut rng = sample_rng(*seed, x);
            let mut label_fn = |q: &Tensor| oracle.predicted_label(q);
            let est = label_only_distance(&mut label_fn, x, y, probe, &mut rng)?;
            let flag = if est.boundary_found { None } else { Some("no-boundary-within-budget") };
            Ok((Membership::from_bool(est.distance >= *tau), Some(est.distance), flag))
        }
        PreparedAttack::Augmented { model, views, seed } => {
            let mut rng = sample_rng(*seed, x);
            let feature = augmented_features(oracle, x, *views, &mut rng)?;
            let prob = crate::train::attack_model_member_prob(model, &feature.vector)?;
            Ok((Membership::from_bool(prob >= 0.5), Some(prob), None))
        }
    }
}

/// Run a prepared attack over a balanced evaluation set. The larger side is
/// truncated so member and non-member counts match.
pub fn run_attack(
    att: &PreparedAttack,
    oracle: &dyn PosteriorOracle,
    data: &Dataset,
    members: &[usize],
    non_members: &[usize],
) -> Result<Vec<MembershipVerdict>> {
    if members.is_empty() || non_members.is_empty() {
        return Err(Error::invalid("evaluation needs both members and non-members"));
    }
    let n = members.len().min(non_members.len());
    let mut verdicts = Vec::with_capacity(2 * n);
    for (set, truth) in
        [(&members[..n], Membership::Member), (&non_members[..n], Membership::NonMember)]
    {
        for &i in set.iter() {
            let (decision, score, flag) = verdict_for(att, oracle, data, i)?;
            verdicts.push(MembershipVerdict {
                sample_id: i,
                decision,
                score,
                truth: Some(truth),
                flag,
            });
        }
    }
    Ok(verdicts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: Vec<f64>) -> Posteriors {
        Posteriors::new(v).unwrap()
    }

    #[test]
    fn sorted_features_descend() {
        let f = extract_features(FeatureMode::Sorted, &p(vec![0.1, 0.7, 0.2]), None).unwrap();
        assert_eq!(f.vector, vec![0.7, 0.2, 0.1]);
    }

    #[test]
    fn normal_plus_label_appends_correctness_bit() {
        let f =
            extract_features(FeatureMode::NormalPlusLabel, &p(vec![0.7, 0.2, 0.1]), Some(0))
                .unwrap();
        assert_eq!(f.vector, vec![0.7, 0.2, 0.1, 1.0]);
        let f =
            extract_features(FeatureMode::NormalPlusLabel, &p(vec![0.7, 0.2, 0.1]), Some(2))
                .unwrap();
        assert_eq!(f.vector, vec![0.7, 0.2, 0.1, 0.0]);
        assert!(extract_features(FeatureMode::NormalPlusLabel, &p(vec![0.5, 0.5]), None)
            .is_err());
    }

    #[test]
    fn top3_zero_pads_small_k() {
        let f = extract_features(FeatureMode::Top3, &p(vec![0.6, 0.4]), None).unwrap();
        assert_eq!(f.vector, vec![0.6, 0.4, 0.0]);
    }

    #[test]
    fn attack_names_round_trip() {
        for kind in AttackKind::ALL {
            assert_eq!(AttackKind::parse(kind.name()), Some(kind));
        }
        assert_eq!(AttackKind::parse("bogus"), None);
    }

    #[test]
    fn normal_features_sum_to_one() {
        let f = extract_features(FeatureMode::Normal, &p(vec![0.25, 0.25, 0.5]), None).unwrap();
        assert!((f.vector.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
