//! Scenario configuration: a human-editable TOML document describing one
//! experiment (or a defense-hyperparameter sweep).

use std::path::{Path, PathBuf};

use mia_core::attack::{AttackKind, MentVariant, ProbeConfig};
use mia_core::augment::AugMode;
use mia_core::data::Dataset;
use mia_core::defense::{BandwidthPolicy, DefenseConfig};
use mia_core::model::ModelSpec;
use mia_core::optim::TrainRecipe;
use serde::{Deserialize, Serialize};

use crate::{dataio, HarnessError, Result};

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

/// Top-level scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub dataset: DatasetConfig,
    /// Absent means the shadow side shares the target dataset and split plan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shadow_dataset: Option<DatasetConfig>,
    pub target: SideConfig,
    /// Absent means the shadow copies the target model and recipe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shadow: Option<SideConfig>,
    #[serde(default)]
    pub defense: DefenseSection,
    #[serde(default)]
    pub augmentation: AugSection,
    /// Present only in defend-sweep configs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: String,
    pub seed: u64,
    /// Adaptive attacks: the shadow is trained with the target's defense.
    #[serde(default)]
    pub adaptive: bool,
    /// Attack names; empty means all ten.
    #[serde(default)]
    pub attacks: Vec<String>,
    #[serde(default = "default_views")]
    pub augmented_views: usize,
    #[serde(default = "default_ment_variant")]
    pub ment_variant: String,
    #[serde(default = "default_budget")]
    pub label_only_budget: usize,
    /// Epochs for NN attack-model training (lr0 is fixed at 0.01).
    #[serde(default = "default_attack_epochs")]
    pub attack_epochs: usize,
}

fn default_attack_epochs() -> usize {
    100
}

fn default_views() -> usize {
    10
}

fn default_ment_variant() -> String {
    "as-printed".into()
}

fn default_budget() -> usize {
    1024
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "kind")]
pub enum DatasetConfig {
    /// Gaussian class clusters over vectors.
    Synthetic { classes: usize, dim: usize, per_class: usize, separation: f64 },
    /// Gaussian clusters rendered as `[c,h,w]` rasters in `[0,1]`.
    SyntheticRaster {
        classes: usize,
        channels: usize,
        height: usize,
        width: usize,
        per_class: usize,
        separation: f64,
    },
    Csv { path: PathBuf },
    Raster { path: PathBuf },
}

impl DatasetConfig {
    /// Materialize the dataset. `seed` drives synthetic generation only.
    pub fn build(&self, seed: u64, base_dir: &Path) -> Result<Dataset> {
        match self {
            DatasetConfig::Synthetic { classes, dim, per_class, separation } => Ok(
                mia_core::data::synth_gaussian(*classes, *dim, *per_class, *separation, seed)?,
            ),
            DatasetConfig::SyntheticRaster {
                classes,
                channels,
                height,
                width,
                per_class,
                separation,
            } => Ok(mia_core::data::synth_gaussian_raster(
                *classes, *channels, *height, *width, *per_class, *separation, seed,
            )?),
            DatasetConfig::Csv { path } => dataio::load_csv(&base_dir.join(path)),
            DatasetConfig::Raster { path } => dataio::load_raster(&base_dir.join(path)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideConfig {
    pub model: ModelConfig,
    pub recipe: RecipeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "kind")]
pub enum ModelConfig {
    Mlp {
        hidden: Vec<usize>,
    },
    SmallCnn {
        channels: (usize, usize),
    },
}

impl ModelConfig {
    /// Resolve against a dataset's sample shape and class count.
    pub fn to_spec(&self, data: &Dataset) -> Result<ModelSpec> {
        match self {
            ModelConfig::Mlp { hidden } => {
                let shape = data.sample_shape();
                if shape.len() != 1 {
                    return Err(config_err("mlp model needs a vector dataset"));
                }
                Ok(ModelSpec::Mlp {
                    input_dim: shape[0],
                    hidden: hidden.clone(),
                    num_classes: data.num_classes(),
                })
            }
            ModelConfig::SmallCnn { channels } => {
                let shape = data.sample_shape();
                if shape.len() != 3 {
                    return Err(config_err("small-cnn model needs a raster dataset"));
                }
                Ok(ModelSpec::SmallCnn {
                    in_channels: shape[0],
                    height: shape[1],
                    width: shape[2],
                    channels: *channels,
                    num_classes: data.num_classes(),
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
}

fn default_momentum() -> f64 {
    0.9
}

impl RecipeConfig {
    pub fn to_recipe(&self, seed: u64) -> TrainRecipe {
        TrainRecipe {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr0: self.lr0,
            momentum: self.momentum,
            seed,
        }
    }
}

/// Defense selection; omitted hyperparameters take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefenseSection {
    #[serde(default = "default_defense_kind")]
    pub kind: String,
    /// Label smoothing strength; default 0.8.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// AdvReg (default 1) / MixupMMD (default 3) balance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Mixup Beta parameter; default 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// DP-SGD noise scale; default 0.001.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// DP-SGD max gradient norm; default 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<f64>,
    /// MemGuard apply probability; default 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_apply: Option<f64>,
    /// MemGuard step budget; default 100.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Augmentation mode for the data-aug defense: "simple" or "randaug".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aug: Option<String>,
}

fn default_defense_kind() -> String {
    "none".into()
}

impl Default for DefenseSection {
    fn default() -> Self {
        Self {
            kind: default_defense_kind(),
            epsilon: None,
            lambda: None,
            alpha: None,
            sigma: None,
            clip: None,
            p_apply: None,
            steps: None,
            aug: None,
        }
    }
}

impl DefenseSection {
    pub fn to_config(&self, aug: &AugSection) -> Result<DefenseConfig> {
        let cfg = match self.kind.as_str() {
            "none" => DefenseConfig::None,
            "label-smoothing" => {
                DefenseConfig::LabelSmoothing { epsilon: self.epsilon.unwrap_or(0.8) }
            }
            "advreg" => DefenseConfig::AdvReg { lambda: self.lambda.unwrap_or(1.0) },
            "memguard" => DefenseConfig::MemGuard {
                p_apply: self.p_apply.unwrap_or(1.0),
                max_steps: self.steps.unwrap_or(100),
            },
            "mixup-mmd" => DefenseConfig::MixupMmd {
                lambda: self.lambda.unwrap_or(3.0),
                alpha: self.alpha.unwrap_or(1.0),
                bandwidth: BandwidthPolicy::Median,
            },
            "dp-sgd" => DefenseConfig::DpSgd {
                sigma: self.sigma.unwrap_or(0.001),
                clip: self.clip.unwrap_or(1.0),
            },
            "data-aug" => {
                let mode = aug.parse_mode(self.aug.as_deref().unwrap_or("simple"))?;
                DefenseConfig::DataAug(mode)
            }
            other => return Err(config_err(format!("unknown defense kind {other:?}"))),
        };
        cfg.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(cfg)
    }
}

/// Augmentation per side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugSection {
    #[serde(default = "default_aug")]
    pub target: String,
    #[serde(default = "default_aug")]
    pub shadow: String,
    #[serde(default = "default_randaug_n")]
    pub randaug_n: usize,
    #[serde(default = "default_randaug_m")]
    pub randaug_m: u8,
}

fn default_aug() -> String {
    "none".into()
}

fn default_randaug_n() -> usize {
    2
}

fn default_randaug_m() -> u8 {
    10
}

impl Default for AugSection {
    fn default() -> Self {
        Self {
            target: default_aug(),
            shadow: default_aug(),
            randaug_n: default_randaug_n(),
            randaug_m: default_randaug_m(),
        }
    }
}

impl AugSection {
    pub fn parse_mode(&self, name: &str) -> Result<AugMode> {
        let mode = match name {
            "none" => AugMode::None,
            "simple" => AugMode::Simple,
            "randaug" => AugMode::RandAug { n: self.randaug_n, m: self.randaug_m },
            other => return Err(config_err(format!("unknown augmentation {other:?}"))),
        };
        mode.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(mode)
    }

    pub fn target_mode(&self) -> Result<AugMode> {
        self.parse_mode(&self.target)
    }

    pub fn shadow_mode(&self) -> Result<AugMode> {
        self.parse_mode(&self.shadow)
    }
}

/// Sweep over the selected defense's primary hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Values substituted for epsilon (label-smoothing), lambda
    /// (advreg/mixup-mmd), or sigma (dp-sgd).
    pub values: Vec<f64>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| config_err(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        for name in &self.scenario.attacks {
            if AttackKind::parse(name).is_none() {
                return Err(config_err(format!("unknown attack {name:?}")));
            }
        }
        if self.scenario.augmented_views == 0 {
            return Err(config_err("augmented_views must be at least 1"));
        }
        self.ment_variant()?;
        self.defense.to_config(&self.augmentation)?;
        self.augmentation.target_mode()?;
        self.augmentation.shadow_mode()?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(config_err("sweep.values must not be empty"));
            }
            if self.defense.kind == "none"
                || self.defense.kind == "memguard"
                || self.defense.kind == "data-aug"
            {
                return Err(config_err(format!(
                    "defense {:?} has no sweepable hyperparameter",
                    self.defense.kind
                )));
            }
        }
        Ok(())
    }

    pub fn attack_kinds(&self) -> Vec<AttackKind> {
        if self.scenario.attacks.is_empty() {
            AttackKind::ALL.to_vec()
        } else {
            self.scenario
                .attacks
                .iter()
                .filter_map(|n| AttackKind::parse(n))
                .collect()
        }
    }

    pub fn ment_variant(&self) -> Result<MentVariant> {
        match self.scenario.ment_variant.as_str() {
            "as-printed" => Ok(MentVariant::AsPrinted),
            "original" => Ok(MentVariant::Original),
            other => Err(config_err(format!("unknown ment_variant {other:?}"))),
        }
    }

    pub fn probe_config(&self) -> ProbeConfig {
        ProbeConfig { budget: self.scenario.label_only_budget, ..ProbeConfig::default() }
    }

    /// Expand a sweep config into one concrete scenario per value.
    pub fn expand_sweep(&self) -> Result<Vec<ScenarioConfig>> {
        let sweep = match &self.sweep {
            Some(s) => s,
            None => return Ok(vec![self.clone()]),
        };
        let mut out = Vec::with_capacity(sweep.values.len());
        for &v in &sweep.values {
            let mut cfg = self.clone();
            cfg.sweep = None;
            match self.defense.kind.as_str() {
                "label-smoothing" => cfg.defense.epsilon = Some(v),
                "advreg" | "mixup-mmd" => cfg.defense.lambda = Some(v),
                "dp-sgd" => cfg.defense.sigma = Some(v),
                other => {
                    return Err(config_err(format!(
                        "defense {other:?} has no sweepable hyperparameter"
                    )))
                }
            }
            cfg.scenario.name = format!("{}-{v}", self.scenario.name);
            cfg.validate()?;
            out.push(cfg);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[scenario]
name = "t"
seed = 7

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
epochs = 2
batch_size = 16
lr0 = 0.1
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.scenario.augmented_views, 10);
        assert_eq!(cfg.attack_kinds().len(), 10);
        assert!(matches!(
            cfg.defense.to_config(&cfg.augmentation).unwrap(),
            DefenseConfig::None
        ));
        assert_eq!(cfg.target.recipe.momentum, 0.9);
    }

    #[test]
    fn unknown_attack_rejected() {
        let text = MINIMAL.replace("seed = 7", "seed = 7\nattacks = [\"nn-top4\"]");
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }

    #[test]
    fn sweep_expansion_substitutes_values() {
        let text = format!(
            "{MINIMAL}\n[defense]\nkind = \"dp-sgd\"\n\n[sweep]\nvalues = [0.0001, 0.1]\n"
        );
        let cfg = ScenarioConfig::from_toml(&text).unwrap();
        let expanded = cfg.expand_sweep().unwrap();
        assert_eq!(expanded.len(), 2);
        assert_eq!(expanded[0].defense.sigma, Some(0.0001));
        assert_eq!(expanded[1].defense.sigma, Some(0.1));
        assert!(expanded.iter().all(|c| c.sweep.is_none()));
    }

    #[test]
    fn defaults_match_reference_settings() {
        let mk = |kind: &str| {
            let text = format!("{MINIMAL}\n[defense]\nkind = \"{kind}\"\n");
            let cfg = ScenarioConfig::from_toml(&text).unwrap();
            cfg.defense.to_config(&cfg.augmentation).unwrap()
        };
        assert_eq!(mk("label-smoothing"), DefenseConfig::LabelSmoothing { epsilon: 0.8 });
        assert_eq!(mk("advreg"), DefenseConfig::AdvReg { lambda: 1.0 });
        assert_eq!(
            mk("mixup-mmd"),
            DefenseConfig::MixupMmd {
                lambda: 3.0,
                alpha: 1.0,
                bandwidth: BandwidthPolicy::Median
            }
        );
        assert_eq!(mk("dp-sgd"), DefenseConfig::DpSgd { sigma: 0.001, clip: 1.0 });
        assert_eq!(mk("memguard"), DefenseConfig::MemGuard { p_apply: 1.0, max_steps: 100 });
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let back = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
