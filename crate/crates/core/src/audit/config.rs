//! Audit run configuration: a single TOML file describing dataset, model,
//! explainers, and the robustness protocol. Unknown keys are rejected so a
//! typo cannot silently fall back to a default.

use crate::explain::{CoalitionSpec, ExplainerConfig, Method, Patch};
use crate::model::Activation;
use crate::robustness::MembershipNorm;
use crate::optim::Strategy;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use super::AuditError;

fn err(msg: impl Into<String>) -> AuditError {
    AuditError::Config(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    /// Master seed: training, sampling, and per-anchor search all derive
    /// from it.
    #[serde(default)]
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub explainers: ExplainersConfig,
    #[serde(default)]
    pub robustness: RobustnessConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Csv,
    Idx,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthName {
    Blobs,
    Moons,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: SourceKind,
    /// CSV file with a header row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// CSV target column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// CSV columns to one-hot encode.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categorical: Vec<String>,
    #[serde(default = "default_true")]
    pub classification: bool,
    /// IDX image and label files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    /// Synthetic generator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<SynthName>,
    #[serde(default = "default_synth_n")]
    pub n: usize,
    #[serde(default = "default_synth_noise")]
    pub noise: f64,
    /// `None` keeps raw feature scales; epsilon is then not commensurable
    /// across features, so normalization is on by default.
    #[serde(default = "default_normalization", skip_serializing_if = "Option::is_none")]
    pub normalization: Option<crate::data::NormMode>,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mlp,
    Forest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationName {
    Relu,
    Sigmoid,
    Identity,
}

impl ActivationName {
    pub fn to_activation(self) -> Activation {
        match self {
            ActivationName::Relu => Activation::Relu,
            ActivationName::Sigmoid => Activation::Sigmoid,
            ActivationName::Identity => Activation::Identity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Pretrained model file; when set, training settings are ignored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load: Option<PathBuf>,
    /// Hidden layer widths; empty trains a plain linear (logistic) model.
    #[serde(default)]
    pub hidden: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: ActivationName,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
    #[serde(default = "default_n_trees")]
    pub n_trees: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
    #[serde(default = "default_min_leaf")]
    pub min_leaf: usize,
    #[serde(default = "default_true")]
    pub bootstrap: bool,
}

/// Kernel SHAP coalition coverage as written in the config file: "auto",
/// "full", or a sampling budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoalitionSetting {
    Budget(usize),
    Named(CoalitionName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoalitionName {
    Auto,
    Full,
}

impl Default for CoalitionSetting {
    fn default() -> Self {
        CoalitionSetting::Named(CoalitionName::Auto)
    }
}

impl CoalitionSetting {
    fn to_spec(self) -> CoalitionSpec {
        match self {
            CoalitionSetting::Budget(n) => CoalitionSpec::Budget(n),
            CoalitionSetting::Named(CoalitionName::Auto) => CoalitionSpec::Auto,
            CoalitionSetting::Named(CoalitionName::Full) => CoalitionSpec::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchConfig {
    pub height: usize,
    pub width: usize,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainersConfig {
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_ig_steps")]
    pub ig_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Vec<f64>>,
    #[serde(default = "default_lrp_epsilon")]
    pub lrp_epsilon: f64,
    #[serde(default = "default_lime_samples")]
    pub lime_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lime_kernel_width: Option<f64>,
    #[serde(default = "default_lime_ridge")]
    pub lime_ridge: f64,
    #[serde(default = "default_lime_sigma")]
    pub lime_sigma: f64,
    #[serde(default)]
    pub shap_coalitions: CoalitionSetting,
    #[serde(default)]
    pub absolute: bool,
    /// Occlusion window; absent means one feature at a time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch: Option<PatchConfig>,
}

impl Default for ExplainersConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty explainer table parses")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditMode {
    Continuous,
    Discrete,
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessConfig {
    #[serde(default = "default_mode")]
    pub mode: AuditMode,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub membership_norm: MembershipNorm,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    /// Probe budget for the cheap (gradient and perturbation) explainers.
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Reduced budget for the sampling-based explainers (lime, kernel_shap),
    /// whose single evaluation is itself expensive.
    #[serde(default = "default_blackbox_budget")]
    pub blackbox_budget: usize,
    #[serde(default = "default_sample_size")]
    pub sample_size: usize,
    /// Noise-mode settings.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_perturbations")]
    pub perturbations: usize,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty robustness table parses")
    }
}

fn default_true() -> bool {
    true
}
fn default_synth_n() -> usize {
    400
}
fn default_synth_noise() -> f64 {
    0.1
}
fn default_normalization() -> Option<crate::data::NormMode> {
    Some(crate::data::NormMode::MinMax)
}
fn default_test_fraction() -> f64 {
    0.25
}
fn default_activation() -> ActivationName {
    ActivationName::Relu
}
fn default_learning_rate() -> f64 {
    0.1
}
fn default_epochs() -> usize {
    200
}
fn default_batch_size() -> usize {
    32
}
fn default_init_scale() -> f64 {
    1.0
}
fn default_n_trees() -> usize {
    100
}
fn default_min_leaf() -> usize {
    1
}
fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_ig_steps() -> usize {
    100
}
fn default_lrp_epsilon() -> f64 {
    1e-3
}
fn default_lime_samples() -> usize {
    1000
}
fn default_lime_ridge() -> f64 {
    1e-3
}
fn default_lime_sigma() -> f64 {
    0.25
}
fn default_mode() -> AuditMode {
    AuditMode::Continuous
}
fn default_epsilon() -> f64 {
    crate::defaults::EPSILON
}
fn default_strategy() -> Strategy {
    Strategy::SurrogateBo
}
fn default_budget() -> usize {
    crate::defaults::BUDGET
}
fn default_blackbox_budget() -> usize {
    crate::defaults::BLACKBOX_BUDGET
}
fn default_sample_size() -> usize {
    crate::defaults::SAMPLE_SIZE
}
fn default_sigma() -> f64 {
    0.05
}
fn default_perturbations() -> usize {
    20
}

impl AuditConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, AuditError> {
        let config: AuditConfig = toml::from_str(s).map_err(|e| err(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String, AuditError> {
        toml::to_string_pretty(self).map_err(|e| err(e.to_string()))
    }

    /// Rejects impossible runs before any work happens. The check names the
    /// offending key so the message is actionable from the config file.
    pub fn validate(&self) -> Result<(), AuditError> {
        self.dataset.validate()?;
        self.model.validate()?;
        self.explainers.validate()?;
        self.robustness.validate()?;
        // Gradient methods need backprop; only the MLP provides it.
        if self.model.kind == ModelKind::Forest && self.model.load.is_none() {
            for m in &self.explainers.methods {
                if m.requires_gradients() {
                    return Err(err(format!(
                        "explainers.methods: {} requires gradients, but model.kind = forest \
                         has none",
                        m.name()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Explainer settings shared by every method in this run. The explainer
    /// seed is the master seed so reruns are exact.
    pub fn explainer_config(&self) -> ExplainerConfig {
        let e = &self.explainers;
        ExplainerConfig {
            ig_steps: e.ig_steps,
            baseline: e.baseline.clone(),
            lrp_epsilon: e.lrp_epsilon,
            patch: match e.patch {
                Some(p) => Patch::Window {
                    height: p.height,
                    width: p.width,
                    rows: p.rows,
                    cols: p.cols,
                },
                None => Patch::SingleFeature,
            },
            lime_samples: e.lime_samples,
            lime_kernel_width: e.lime_kernel_width,
            lime_ridge: e.lime_ridge,
            lime_sigma: e.lime_sigma,
            lime_image_patches: None,
            shap_background: None,
            shap_coalitions: e.shap_coalitions.to_spec(),
            seed: self.seed,
            absolute: e.absolute,
        }
    }
}

impl DatasetConfig {
    fn validate(&self) -> Result<(), AuditError> {
        match self.source {
            SourceKind::Csv => {
                if self.path.is_none() {
                    return Err(err("dataset.path is required for source = \"csv\""));
                }
                if self.target.is_none() {
                    return Err(err("dataset.target is required for source = \"csv\""));
                }
            }
            SourceKind::Idx => {
                if self.images.is_none() || self.labels.is_none() {
                    return Err(err(
                        "dataset.images and dataset.labels are required for source = \"idx\"",
                    ));
                }
            }
            SourceKind::Synthetic => {
                if self.kind.is_none() {
                    return Err(err("dataset.kind is required for source = \"synthetic\""));
                }
                if self.n < 4 {
                    return Err(err("dataset.n: need at least 4 synthetic rows"));
                }
                if !(self.noise.is_finite() && self.noise >= 0.0) {
                    return Err(err(format!("dataset.noise: {} is not a valid std", self.noise)));
                }
            }
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(err(format!(
                "dataset.test_fraction: {} is outside (0, 1)",
                self.test_fraction
            )));
        }
        Ok(())
    }
}

impl ModelConfig {
    fn validate(&self) -> Result<(), AuditError> {
        if self.load.is_some() {
            return Ok(());
        }
        match self.kind {
            ModelKind::Mlp => {
                if self.hidden.iter().any(|&w| w == 0) {
                    return Err(err("model.hidden: layer widths must be positive"));
                }
                if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
                    return Err(err(format!(
                        "model.learning_rate: {} must be positive",
                        self.learning_rate
                    )));
                }
                if self.batch_size == 0 {
                    return Err(err("model.batch_size must be at least 1"));
                }
                if !(self.init_scale.is_finite() && self.init_scale > 0.0) {
                    return Err(err(format!(
                        "model.init_scale: {} must be positive",
                        self.init_scale
                    )));
                }
            }
            ModelKind::Forest => {
                if self.n_trees == 0 {
                    return Err(err("model.n_trees must be at least 1"));
                }
                if self.min_leaf == 0 {
                    return Err(err("model.min_leaf must be at least 1"));
                }
            }
        }
        Ok(())
    }
}

impl ExplainersConfig {
    fn validate(&self) -> Result<(), AuditError> {
        if self.methods.is_empty() {
            return Err(err("explainers.methods: at least one method is required"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(err(format!("explainers.methods: {} listed twice", m.name())));
            }
        }
        if self.ig_steps == 0 {
            return Err(err("explainers.ig_steps must be at least 1"));
        }
        if !(self.lrp_epsilon.is_finite() && self.lrp_epsilon > 0.0) {
            return Err(err("explainers.lrp_epsilon must be positive"));
        }
        if self.lime_samples < 2 {
            return Err(err("explainers.lime_samples must be at least 2"));
        }
        if !(self.lime_ridge.is_finite() && self.lime_ridge >= 0.0) {
            return Err(err("explainers.lime_ridge must be nonnegative"));
        }
        if !(self.lime_sigma.is_finite() && self.lime_sigma > 0.0) {
            return Err(err("explainers.lime_sigma must be positive"));
        }
        if let CoalitionSetting::Budget(n) = self.shap_coalitions {
            if n < 2 {
                return Err(err("explainers.shap_coalitions budget must be at least 2"));
            }
        }
        if let Some(p) = self.patch {
            if p.height == 0 || p.width == 0 || p.rows == 0 || p.cols == 0 {
                return Err(err("explainers.patch: all dimensions must be positive"));
            }
            if p.height > p.rows || p.width > p.cols {
                return Err(err(format!(
                    "explainers.patch: window {}x{} does not fit grid {}x{}",
                    p.height, p.width, p.rows, p.cols
                )));
            }
        }
        Ok(())
    }
}

impl RobustnessConfig {
    fn validate(&self) -> Result<(), AuditError> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(err(format!(
                "robustness.epsilon: {} must be positive",
                self.epsilon
            )));
        }
        if self.budget < 2 || self.blackbox_budget < 2 {
            return Err(err("robustness budgets must be at least 2"));
        }
        if self.sample_size == 0 {
            return Err(err("robustness.sample_size must be at least 1"));
        }
        if self.mode == AuditMode::Noise {
            if !(self.sigma.is_finite() && self.sigma > 0.0) {
                return Err(err(format!(
                    "robustness.sigma: {} must be positive",
                    self.sigma
                )));
            }
            if self.perturbations == 0 {
                return Err(err("robustness.perturbations must be at least 1"));
            }
        }
        Ok(())
    }

    /// Probe budget for one method: the sampling-based explainers get the
    /// reduced call count.
    pub fn budget_for(&self, method: Method, seed: u64) -> crate::optim::ProbeBudget {
        let max_calls = match method {
            Method::Lime | Method::KernelShap => self.blackbox_budget,
            _ => self.budget,
        };
        crate::optim::ProbeBudget::new(max_calls, self.strategy, seed)
    }
}
