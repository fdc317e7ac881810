//! The experiment pipeline: split, train target and shadow, prepare attacks on
//! shadow behavior, evaluate on the target, and compute risk quantities.

use std::path::Path;
use std::time::Instant;

use mia_core::attack::{
    prepare_attack, run_attack, AttackOptions, MembershipVerdict,
};
use mia_core::data::{six_way_split, Dataset, SplitPlan};
use mia_core::defense::{DefenseConfig, MemGuarded};
use mia_core::eval::attack_metrics;
use mia_core::model::{PosteriorOracle, TrainedModel};
use mia_core::posterior::Posteriors;
use mia_core::risk::{
    estimate_risk, js_distance, overfitting_level, per_class_overfitting, score_distributions,
    ScoreMetric, DEFAULT_BINS, SORTED_POSTERIOR_CALIBRATION,
};
use mia_core::train::{accuracy, per_class_accuracy, train_memguard_surrogate, train_target};
use mia_core::Tensor;

use crate::config::ScenarioConfig;
use crate::report::{AttackOutcome, ExperimentReport, SeedLedger};
use crate::Result;

// Seed offsets; every stage seed derives from the scenario seed.
const SHADOW_RECIPE_OFFSET: u64 = 1;
const ATTACK_PREP_OFFSET: u64 = 2;
const MEMGUARD_WRAPPER_OFFSET: u64 = 3;
const SURROGATE_OFFSET: u64 = 4;
const SHADOW_DATASET_OFFSET: u64 = 17;

/// A possibly MemGuard-wrapped query surface.
pub enum Oracle<'a> {
    Plain(&'a TrainedModel),
    Guarded(MemGuarded<'a>),
}

impl PosteriorOracle for Oracle<'_> {
    fn num_classes(&self) -> usize {
        match self {
            Oracle::Plain(m) => m.num_classes(),
            Oracle::Guarded(g) => g.num_classes(),
        }
    }

    fn posteriors(&self, x: &Tensor) -> mia_core::Result<Posteriors> {
        match self {
            Oracle::Plain(m) => m.posteriors(x),
            Oracle::Guarded(g) => g.posteriors(x),
        }
    }
}

/// Report plus the raw per-attack verdicts (for optional CSV export).
pub struct ScenarioRun {
    pub report: ExperimentReport,
    pub verdicts: Vec<(String, Vec<MembershipVerdict>)>,
}

fn seed_ledger(cfg: &ScenarioConfig, shadow_dataset: bool) -> SeedLedger {
    let seed = cfg.scenario.seed;
    SeedLedger {
        scenario: seed,
        split: seed,
        target_recipe: seed,
        shadow_recipe: seed + SHADOW_RECIPE_OFFSET,
        attack_prep: seed + ATTACK_PREP_OFFSET,
        memguard_wrapper: seed + MEMGUARD_WRAPPER_OFFSET,
        surrogate: seed + SURROGATE_OFFSET,
        shadow_dataset: shadow_dataset.then_some(seed + SHADOW_DATASET_OFFSET),
    }
}

fn empty_report(cfg: &ScenarioConfig, seeds: SeedLedger) -> ExperimentReport {
    ExperimentReport {
        scenario: cfg.clone(),
        target_train_acc: 0.0,
        target_test_acc: 0.0,
        shadow_defense: String::new(),
        attacks: Vec::new(),
        best_attack: None,
        best_attack_accuracy: None,
        overfitting: 0.0,
        per_class_overfitting: Vec::new(),
        js_entropy: 0.0,
        js_cross_entropy: 0.0,
        estimated_risk: 0.0,
        stage_errors: Vec::new(),
        seeds,
        wall_clock_secs: 0.0,
    }
}

/// Run one scenario end to end.
///
/// Configuration problems (bad dataset, incompatible model) surface as `Err`;
/// runtime stage failures are recorded in the report's `stage_errors` and, for
/// attacks, per-attack error records, so independent attacks still run.
pub fn run_scenario(cfg: &ScenarioConfig, base_dir: &Path) -> Result<ScenarioRun> {
    cfg.validate()?;
    let started = Instant::now();
    let seed = cfg.scenario.seed;

    // datasets and split plans
    let target_data = cfg.dataset.build(seed, base_dir)?;
    let target_plan = six_way_split(&target_data, seed)?;
    let (shadow_data, shadow_plan, own_shadow_data);
    match &cfg.shadow_dataset {
        None => {
            shadow_data = &target_data;
            shadow_plan = target_plan.clone();
        }
        Some(ds) => {
            own_shadow_data = ds.build(seed + SHADOW_DATASET_OFFSET, base_dir)?;
            shadow_plan = six_way_split(&own_shadow_data, seed + SHADOW_DATASET_OFFSET)?;
            shadow_data = &own_shadow_data;
        }
    }

    let defense = cfg.defense.to_config(&cfg.augmentation)?;
    let target_spec = cfg.target.model.to_spec(&target_data)?;
    let shadow_side = cfg.shadow.as_ref().unwrap_or(&cfg.target);
    let shadow_spec = shadow_side.model.to_spec(shadow_data)?;
    let target_recipe = cfg.target.recipe.to_recipe(seed);
    let shadow_recipe = shadow_side.recipe.to_recipe(seed + SHADOW_RECIPE_OFFSET);
    let target_aug = cfg.augmentation.target_mode()?;
    let shadow_aug = cfg.augmentation.shadow_mode()?;
    // adaptive: the shadow is trained exactly like the target
    let shadow_defense =
        if cfg.scenario.adaptive { defense.clone() } else { DefenseConfig::None };

    let mut report = empty_report(cfg, seed_ledger(cfg, cfg.shadow_dataset.is_some()));
    let mut verdicts_out = Vec::new();

    // train the target
    let target_model = match train_target(
        &target_data,
        target_plan.target(),
        &target_spec,
        &target_recipe,
        &defense,
        &target_aug,
    ) {
        Ok(m) => m,
        Err(e) => {
            report.stage_errors.push(format!("train-target: {e}"));
            for kind in cfg.attack_kinds() {
                report.attacks.push(AttackOutcome {
                    attack: kind.name().into(),
                    metrics: None,
                    error: Some("skipped: target training failed".into()),
                });
            }
            report.wall_clock_secs = started.elapsed().as_secs_f64();
            return Ok(ScenarioRun { report, verdicts: verdicts_out });
        }
    };

    // train the shadow
    let shadow_model = match train_target(
        shadow_data,
        shadow_plan.shadow(),
        &shadow_spec,
        &shadow_recipe,
        &shadow_defense,
        &shadow_aug,
    ) {
        Ok(m) => m,
        Err(e) => {
            report.stage_errors.push(format!("train-shadow: {e}"));
            for kind in cfg.attack_kinds() {
                report.attacks.push(AttackOutcome {
                    attack: kind.name().into(),
                    metrics: None,
                    error: Some("skipped: shadow training failed".into()),
                });
            }
            fill_target_stats(&mut report, &target_model, &target_data, &target_plan)?;
            report.wall_clock_secs = started.elapsed().as_secs_f64();
            return Ok(ScenarioRun { report, verdicts: verdicts_out });
        }
    };
    report.shadow_defense = shadow_model.defense.name().to_string();
    if cfg.scenario.adaptive {
        assert_eq!(
            shadow_model.defense.name(),
            target_model.defense.name(),
            "adaptive run must train the shadow with the target's defense"
        );
    }

    // MemGuard wrapping (inference-time defense)
    let target_surrogate;
    let target_oracle = match &defense {
        DefenseConfig::MemGuard { p_apply, max_steps } => {
            target_surrogate = train_memguard_surrogate(
                &target_model,
                &target_data,
                target_plan.target(),
                seed + SURROGATE_OFFSET,
            )?;
            Oracle::Guarded(MemGuarded {
                target: &target_model,
                surrogate: &target_surrogate,
                p_apply: *p_apply,
                max_steps: *max_steps,
                seed: seed + MEMGUARD_WRAPPER_OFFSET,
            })
        }
        _ => Oracle::Plain(&target_model),
    };
    let shadow_surrogate;
    let shadow_oracle = match &shadow_defense {
        DefenseConfig::MemGuard { p_apply, max_steps } => {
            shadow_surrogate = train_memguard_surrogate(
                &shadow_model,
                shadow_data,
                shadow_plan.shadow(),
                seed + SURROGATE_OFFSET + 1,
            )?;
            Oracle::Guarded(MemGuarded {
                target: &shadow_model,
                surrogate: &shadow_surrogate,
                p_apply: *p_apply,
                max_steps: *max_steps,
                seed: seed + MEMGUARD_WRAPPER_OFFSET + 1,
            })
        }
        _ => Oracle::Plain(&shadow_model),
    };

    // attacks: prepare on shadow behavior, evaluate on the target
    let opts = AttackOptions {
        seed: seed + ATTACK_PREP_OFFSET,
        ment_variant: cfg.ment_variant()?,
        probe: cfg.probe_config(),
        augmented_views: cfg.scenario.augmented_views,
        attack_epochs: cfg.scenario.attack_epochs,
        ..AttackOptions::default()
    };
    for kind in cfg.attack_kinds() {
        let outcome = prepare_attack(kind, &shadow_oracle, shadow_data, shadow_plan.shadow(), &opts)
            .and_then(|att| {
                run_attack(
                    &att,
                    &target_oracle,
                    &target_data,
                    &target_plan.target_train,
                    &target_plan.target_test,
                )
            })
            .and_then(|vs| {
                let metrics = attack_metrics(&vs)?;
                Ok((vs, metrics))
            });
        match outcome {
            Ok((vs, metrics)) => {
                report.attacks.push(AttackOutcome {
                    attack: kind.name().into(),
                    metrics: Some(metrics),
                    error: None,
                });
                verdicts_out.push((kind.name().to_string(), vs));
            }
            Err(e) => report.attacks.push(AttackOutcome {
                attack: kind.name().into(),
                metrics: None,
                error: Some(e.to_string()),
            }),
        }
    }
    report.select_best_attack();

    // risk quantities on the (defended) target oracle
    fill_target_stats(&mut report, &target_model, &target_data, &target_plan)?;
    match risk_quantities(&target_oracle, &target_data, &target_plan) {
        Ok((je, jc)) => {
            report.js_entropy = je;
            report.js_cross_entropy = jc;
            report.estimated_risk = estimate_risk(je, &SORTED_POSTERIOR_CALIBRATION);
        }
        Err(e) => report.stage_errors.push(format!("risk: {e}")),
    }

    report.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok(ScenarioRun { report, verdicts: verdicts_out })
}

fn fill_target_stats(
    report: &mut ExperimentReport,
    model: &TrainedModel,
    data: &Dataset,
    plan: &SplitPlan,
) -> Result<()> {
    let train_acc = accuracy(&model.spec, &model.params, data, &plan.target_train)?;
    let test_acc = accuracy(&model.spec, &model.params, data, &plan.target_test)?;
    report.target_train_acc = train_acc;
    report.target_test_acc = test_acc;
    report.overfitting = overfitting_level(train_acc, test_acc);
    let per_train = per_class_accuracy(&model.spec, &model.params, data, &plan.target_train)?;
    let per_test = per_class_accuracy(&model.spec, &model.params, data, &plan.target_test)?;
    report.per_class_overfitting = per_class_overfitting(&per_train, &per_test);
    Ok(())
}

/// JS distances of the entropy and cross-entropy member/non-member
/// distributions under the given oracle.
pub fn risk_quantities(
    oracle: &dyn PosteriorOracle,
    data: &Dataset,
    plan: &SplitPlan,
) -> Result<(f64, f64)> {
    let mut out = [0.0; 2];
    for (slot, metric) in
        out.iter_mut().zip([ScoreMetric::Entropy, ScoreMetric::CrossEntropy])
    {
        let (m, n) = score_distributions(
            oracle,
            data,
            &plan.target_train,
            &plan.target_test,
            metric,
            DEFAULT_BINS,
        )?;
        *slot = js_distance(&m, &n)?;
    }
    Ok((out[0], out[1]))
}

/// Run many scenarios across worker threads, preserving input order.
pub fn run_scenarios(
    cfgs: &[ScenarioConfig],
    base_dir: &Path,
    workers: usize,
) -> Vec<Result<ScenarioRun>> {
    let workers = workers.max(1);
    if workers == 1 || cfgs.len() <= 1 {
        return cfgs.iter().map(|c| run_scenario(c, base_dir)).collect();
    }
    let mut results: Vec<Option<Result<ScenarioRun>>> = Vec::new();
    results.resize_with(cfgs.len(), || None);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results = std::sync::Mutex::new(results);
    std::thread::scope(|scope| {
        for _ in 0..workers.min(cfgs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= cfgs.len() {
                    break;
                }
                let run = run_scenario(&cfgs[i], base_dir);
                results.lock().expect("worker panicked").as_mut_slice()[i] = Some(run);
            });
        }
    });
    results
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every index filled"))
        .collect()
}
