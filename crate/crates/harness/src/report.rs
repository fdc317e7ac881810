//! Experiment reports and their serialized forms: JSON-lines, CSV, and
//! plot-data (series,x,y) for privacy-utility scatters.
//!
//! Wall-clock time is carried in memory and printed in summaries but excluded
//! from the serialized forms, so identical scenario runs produce byte-identical
//! report files.

use std::io::Write;
use std::path::Path;

use mia_core::attack::MembershipVerdict;
use mia_core::eval::AttackMetrics;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::{HarnessError, Result};

/// Per-attack result: metrics on success, an error record otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub attack: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<AttackMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Every seed a run consumed, for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedLedger {
    pub scenario: u64,
    pub split: u64,
    pub target_recipe: u64,
    pub shadow_recipe: u64,
    pub attack_prep: u64,
    pub memguard_wrapper: u64,
    pub surrogate: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shadow_dataset: Option<u64>,
}

/// Everything one scenario run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: ScenarioConfig,
    pub target_train_acc: f64,
    pub target_test_acc: f64,
    /// Defense tag recorded in the shadow model's metadata; equals the
    /// target's tag iff the adaptive flag is set.
    pub shadow_defense: String,
    pub attacks: Vec<AttackOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_attack: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_attack_accuracy: Option<f64>,
    pub overfitting: f64,
    pub per_class_overfitting: Vec<Option<f64>>,
    pub js_entropy: f64,
    pub js_cross_entropy: f64,
    pub estimated_risk: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stage_errors: Vec<String>,
    pub seeds: SeedLedger,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl ExperimentReport {
    /// Best attack = highest accuracy among attacks that ran.
    pub fn select_best_attack(&mut self) {
        let best = self
            .attacks
            .iter()
            .filter_map(|a| a.metrics.as_ref().map(|m| (a.attack.clone(), m.accuracy)))
            .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite accuracy"));
        if let Some((name, acc)) = best {
            self.best_attack = Some(name);
            self.best_attack_accuracy = Some(acc);
        }
    }

    pub fn attack_accuracy(&self, name: &str) -> Option<f64> {
        self.attacks
            .iter()
            .find(|a| a.attack == name)
            .and_then(|a| a.metrics.as_ref())
            .map(|m| m.accuracy)
    }
}

/// Output formats for `emit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    JsonLines,
    Csv,
    PlotData,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "json-lines" | "jsonl" => Some(ReportFormat::JsonLines),
            "csv" => Some(ReportFormat::Csv),
            "plot-data" => Some(ReportFormat::PlotData),
            _ => None,
        }
    }
}

/// Stable CSV header; a golden-file test pins it.
pub const CSV_HEADER: &str = "scenario,defense,attack,accuracy,precision,recall,f1,auc,\
target_train_acc,target_test_acc,overfitting,js_entropy,js_cross_entropy,estimated_risk,error";

/// One scenario per line, compact JSON.
pub fn emit_jsonl(reports: &[ExperimentReport], w: &mut dyn Write) -> Result<()> {
    for r in reports {
        let line = serde_json::to_string(r)
            .map_err(|e| HarnessError::Format(format!("report serialization failed: {e}")))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn parse_jsonl(text: &str) -> Result<Vec<ExperimentReport>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l)
                .map_err(|e| HarnessError::Format(format!("bad report line: {e}")))
        })
        .collect()
}

/// One row per (scenario, attack).
pub fn emit_csv(reports: &[ExperimentReport], w: &mut dyn Write) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in reports {
        for a in &r.attacks {
            let (acc, prec, rec, f1, auc) = match &a.metrics {
                Some(m) => (
                    m.accuracy.to_string(),
                    m.precision.to_string(),
                    m.recall.to_string(),
                    m.f1.to_string(),
                    m.auc.to_string(),
                ),
                None => Default::default(),
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.scenario.scenario.name,
                r.scenario.defense.kind,
                a.attack,
                acc,
                prec,
                rec,
                f1,
                auc,
                r.target_train_acc,
                r.target_test_acc,
                r.overfitting,
                r.js_entropy,
                r.js_cross_entropy,
                r.estimated_risk,
                a.error.clone().unwrap_or_default().replace(',', ";"),
            )?;
        }
    }
    Ok(())
}

/// Privacy-utility scatter: series = defense kind, x = test accuracy,
/// y = best attack accuracy.
pub fn emit_plot_data(reports: &[ExperimentReport], w: &mut dyn Write) -> Result<()> {
    writeln!(w, "series,x,y")?;
    for r in reports {
        if let Some(best) = r.best_attack_accuracy {
            writeln!(w, "{},{},{}", r.scenario.defense.kind, r.target_test_acc, best)?;
        }
    }
    Ok(())
}

pub fn emit(reports: &[ExperimentReport], format: ReportFormat, w: &mut dyn Write) -> Result<()> {
    match format {
        ReportFormat::JsonLines => emit_jsonl(reports, w),
        ReportFormat::Csv => emit_csv(reports, w),
        ReportFormat::PlotData => emit_plot_data(reports, w),
    }
}

pub fn write_reports(path: &Path, reports: &[ExperimentReport], format: ReportFormat) -> Result<()> {
    let mut buf = Vec::new();
    emit(reports, format, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Verdict CSV: `sample_id,decision,score,truth`.
pub fn emit_verdicts(verdicts: &[MembershipVerdict], w: &mut dyn Write) -> Result<()> {
    writeln!(w, "sample_id,decision,score,truth")?;
    for v in verdicts {
        let decision = if v.decision.is_member() { "member" } else { "non-member" };
        let truth = match v.truth {
            Some(t) if t.is_member() => "member",
            Some(_) => "non-member",
            None => "",
        };
        let score = v.score.map(|s| s.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{}", v.sample_id, decision, score, truth)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> ExperimentReport {
        let cfg = ScenarioConfig::from_toml(
            r#"
[scenario]
name = "unit"
seed = 1

[dataset]
kind = "synthetic"
classes = 2
dim = 4
per_class = 30
separation = 2.0

[target.model]
kind = "mlp"
hidden = [8]

[target.recipe]
epochs = 1
batch_size = 8
lr0 = 0.1
"#,
        )
        .unwrap();
        ExperimentReport {
            scenario: cfg,
            target_train_acc: 0.9,
            target_test_acc: 0.7,
            shadow_defense: "none".into(),
            attacks: vec![AttackOutcome {
                attack: "metric-corr".into(),
                metrics: Some(AttackMetrics {
                    accuracy: 0.6,
                    precision: 0.6,
                    recall: 0.6,
                    f1: 0.6,
                    auc: 0.6,
                }),
                error: None,
            }],
            best_attack: Some("metric-corr".into()),
            best_attack_accuracy: Some(0.6),
            overfitting: 0.2,
            per_class_overfitting: vec![Some(0.1), Some(0.3)],
            js_entropy: 0.4,
            js_cross_entropy: 0.45,
            estimated_risk: 0.702,
            stage_errors: Vec::new(),
            seeds: SeedLedger {
                scenario: 1,
                split: 1,
                target_recipe: 1,
                shadow_recipe: 2,
                attack_prep: 3,
                memguard_wrapper: 4,
                surrogate: 5,
                shadow_dataset: None,
            },
            wall_clock_secs: 12.5,
        }
    }

    #[test]
    fn jsonl_round_trip_is_canonical() {
        let r = sample_report();
        let mut buf = Vec::new();
        emit_jsonl(&[r.clone()], &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let parsed = parse_jsonl(&text).unwrap();
        assert_eq!(parsed.len(), 1);
        // wall clock is not serialized ...
        assert_eq!(parsed[0].wall_clock_secs, 0.0);
        // ... and re-emission is byte-identical
        let mut buf2 = Vec::new();
        emit_jsonl(&parsed, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn csv_header_is_stable() {
        let mut buf = Vec::new();
        emit_csv(&[sample_report()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "scenario,defense,attack,accuracy,precision,recall,f1,auc,target_train_acc,"
        ));
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn plot_data_has_one_row_per_report() {
        let reports = vec![sample_report(); 5];
        let mut buf = Vec::new();
        emit_plot_data(&reports, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6); // header + 5 points
        assert!(text.starts_with("series,x,y"));
    }

    #[test]
    fn best_attack_selection_takes_max_accuracy() {
        let mut r = sample_report();
        r.attacks.push(AttackOutcome {
            attack: "nn-sorted".into(),
            metrics: Some(AttackMetrics {
                accuracy: 0.8,
                precision: 0.8,
                recall: 0.8,
                f1: 0.8,
                auc: 0.8,
            }),
            error: None,
        });
        r.attacks.push(AttackOutcome {
            attack: "label-only".into(),
            metrics: None,
            error: Some("boom".into()),
        });
        r.select_best_attack();
        assert_eq!(r.best_attack.as_deref(), Some("nn-sorted"));
        assert_eq!(r.best_attack_accuracy, Some(0.8));
    }
}
