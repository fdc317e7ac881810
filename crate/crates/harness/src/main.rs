//! Command-line front end: train models, run attack scenarios, sweep defense
//! hyperparameters, estimate risk from a JS distance, and convert reports.
//!
//! Exit codes: 0 success, 2 config error, 3 stage failure (partial report
//! written).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mia_harness::report::{
    emit_verdicts, parse_jsonl, write_reports, ExperimentReport, ReportFormat,
};
use mia_harness::scenario::{run_scenario, run_scenarios};
use mia_harness::{checkpoint, HarnessError, ScenarioConfig};

#[derive(Parser)]
#[command(name = "mia", about = "Membership-inference attack, defense, and risk toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the target (and optionally shadow) model and save checkpoints.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also train and save the shadow model.
        #[arg(long)]
        shadow: bool,
    },
    /// Run the full scenario: train, attack, and report.
    Attack {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write per-attack verdict CSVs.
        #[arg(long)]
        verdicts: bool,
    },
    /// Expand the config's sweep values and run one scenario per value.
    DefendSweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Estimate attack accuracy from a JS distance and a calibration.
    Estimate {
        #[arg(long)]
        js: f64,
        /// Named preset: "sorted" or "normal-label".
        #[arg(long, conflicts_with_all = ["slope", "intercept"])]
        preset: Option<String>,
        #[arg(long, requires = "intercept")]
        slope: Option<f64>,
        #[arg(long, requires = "slope")]
        intercept: Option<f64>,
    },
    /// Convert a JSON-lines report file to CSV or plot-data.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long)]
        out: PathBuf,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_STAGE: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e @ HarnessError::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn base_dir(config_path: &Path) -> PathBuf {
    config_path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}

fn print_summary(report: &ExperimentReport) {
    println!(
        "scenario {}: target train/test {:.3}/{:.3}, overfitting {:.3}",
        report.scenario.scenario.name,
        report.target_train_acc,
        report.target_test_acc,
        report.overfitting
    );
    for a in &report.attacks {
        match (&a.metrics, &a.error) {
            (Some(m), _) => println!(
                "  {:<16} acc {:.3}  prec {:.3}  rec {:.3}  f1 {:.3}  auc {:.3}",
                a.attack, m.accuracy, m.precision, m.recall, m.f1, m.auc
            ),
            (None, Some(e)) => println!("  {:<16} error: {e}", a.attack),
            (None, None) => {}
        }
    }
    if let (Some(name), Some(acc)) = (&report.best_attack, report.best_attack_accuracy) {
        println!("  best attack: {name} ({acc:.3})");
    }
    println!(
        "  js_entropy {:.4}  js_cross_entropy {:.4}  estimated risk {:.3}",
        report.js_entropy, report.js_cross_entropy, report.estimated_risk
    );
    for e in &report.stage_errors {
        println!("  stage error: {e}");
    }
    println!("  wall clock: {:.2}s", report.wall_clock_secs);
}

fn dispatch(cmd: Command) -> mia_harness::Result<ExitCode> {
    match cmd {
        Command::Train { config, out, shadow } => {
            let cfg = ScenarioConfig::load(&config)?;
            let dir = base_dir(&config);
            std::fs::create_dir_all(&out)?;
            let seed = cfg.scenario.seed;
            let data = cfg.dataset.build(seed, &dir)?;
            let plan = mia_core::data::six_way_split(&data, seed)?;
            let defense = cfg.defense.to_config(&cfg.augmentation)?;
            let spec = cfg.target.model.to_spec(&data)?;
            let model = mia_core::train::train_target(
                &data,
                plan.target(),
                &spec,
                &cfg.target.recipe.to_recipe(seed),
                &defense,
                &cfg.augmentation.target_mode()?,
            )?;
            checkpoint::save_model(&out.join("target"), &model)?;
            println!(
                "target: train acc {:.3}, test acc {:.3}",
                model.final_train_acc(),
                model.final_test_acc()
            );
            if shadow {
                let side = cfg.shadow.as_ref().unwrap_or(&cfg.target);
                let sdef = if cfg.scenario.adaptive {
                    defense.clone()
                } else {
                    mia_core::defense::DefenseConfig::None
                };
                let smodel = mia_core::train::train_target(
                    &data,
                    plan.shadow(),
                    &side.model.to_spec(&data)?,
                    &side.recipe.to_recipe(seed + 1),
                    &sdef,
                    &cfg.augmentation.shadow_mode()?,
                )?;
                checkpoint::save_model(&out.join("shadow"), &smodel)?;
                println!(
                    "shadow: train acc {:.3}, test acc {:.3}",
                    smodel.final_train_acc(),
                    smodel.final_test_acc()
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Attack { config, out, verdicts } => {
            let cfg = ScenarioConfig::load(&config)?;
            let dir = base_dir(&config);
            std::fs::create_dir_all(&out)?;
            let run = run_scenario(&cfg, &dir)?;
            write_reports(&out.join("report.jsonl"), &[run.report.clone()], ReportFormat::JsonLines)?;
            write_reports(&out.join("report.csv"), &[run.report.clone()], ReportFormat::Csv)?;
            if verdicts {
                for (name, vs) in &run.verdicts {
                    let mut buf = Vec::new();
                    emit_verdicts(vs, &mut buf)?;
                    std::fs::write(out.join(format!("verdicts-{name}.csv")), buf)?;
                }
            }
            print_summary(&run.report);
            if run.report.stage_errors.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(EXIT_STAGE))
            }
        }
        Command::DefendSweep { config, out, workers } => {
            let cfg = ScenarioConfig::load(&config)?;
            let dir = base_dir(&config);
            std::fs::create_dir_all(&out)?;
            let expanded = cfg.expand_sweep()?;
            let runs = run_scenarios(&expanded, &dir, workers);
            let mut reports = Vec::with_capacity(runs.len());
            let mut failed = false;
            for run in runs {
                match run {
                    Ok(r) => {
                        failed |= !r.report.stage_errors.is_empty();
                        print_summary(&r.report);
                        reports.push(r.report);
                    }
                    Err(e) => return Err(e),
                }
            }
            write_reports(&out.join("reports.jsonl"), &reports, ReportFormat::JsonLines)?;
            write_reports(&out.join("reports.csv"), &reports, ReportFormat::Csv)?;
            write_reports(&out.join("plot_data.csv"), &reports, ReportFormat::PlotData)?;
            if failed {
                Ok(ExitCode::from(EXIT_STAGE))
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
        Command::Estimate { js, preset, slope, intercept } => {
            let cal = match (preset.as_deref(), slope, intercept) {
                (Some("sorted"), _, _) | (None, None, None) => {
                    mia_core::risk::SORTED_POSTERIOR_CALIBRATION
                }
                (Some("normal-label"), _, _) => mia_core::risk::POSTERIOR_LABEL_CALIBRATION,
                (Some(other), _, _) => {
                    return Err(HarnessError::Config(format!("unknown preset {other:?}")))
                }
                (None, Some(s), Some(i)) => mia_core::risk::Calibration { slope: s, intercept: i, r: f64::NAN },
                _ => unreachable!("clap enforces slope+intercept together"),
            };
            let est = mia_core::risk::estimate_risk(js, &cal);
            println!(
                "estimated attack accuracy: {est:.3} (js {js}, slope {}, intercept {})",
                cal.slope, cal.intercept
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { input, format, out } => {
            let format = ReportFormat::parse(&format).ok_or_else(|| {
                HarnessError::Config(format!("unknown report format {format:?}"))
            })?;
            let reports = parse_jsonl(&std::fs::read_to_string(&input)?)?;
            write_reports(&out, &reports, format)?;
            println!("wrote {} report(s) to {}", reports.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
