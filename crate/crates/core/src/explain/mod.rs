//! Attribution methods behind one interface.
//!
//! Every explainer maps (model, input, target) to one signed relevance value
//! per input feature. Gradient-based methods need an MLP; occlusion, LIME,
//! and Kernel SHAP only query predictions and work on any model. The
//! explained score is the raw logit for MLP classifiers (softmax saturates
//! gradients) and the predicted probability for forests.

mod gradient;
mod lime;
mod lrp;
mod occlusion;
mod shap;

pub use gradient::{explain_grad_input, explain_integrated_gradients, explain_saliency};
pub use lime::explain_lime;
pub use lrp::explain_epsilon_lrp;
pub use occlusion::{explain_occlusion, Patch};
pub use shap::{exact_shapley_oracle, explain_kernel_shap, CoalitionSpec};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{logit_score, Model, ModelError};

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("method {method} needs gradients; {model} models do not provide them")]
    UnsupportedMethod { method: &'static str, model: &'static str },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("baseline has {got} features, input has {expected}")]
    BaselineMismatch { expected: usize, got: usize },
    #[error("invalid explainer config: {0}")]
    InvalidConfig(String),
    #[error("{method} produced a non-finite attribution value")]
    NonFinite { method: &'static str },
    #[error("occlusion patch {patch}x{patch} exceeds the {rows}x{cols} input grid")]
    PatchTooLarge { patch: usize, rows: usize, cols: usize },
    #[error("kernel shap needs a nonempty background set")]
    EmptyBackground,
}

/// The seven attribution methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Saliency,
    GradInput,
    IntegratedGradients,
    EpsilonLrp,
    Occlusion,
    Lime,
    KernelShap,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Saliency,
        Method::GradInput,
        Method::IntegratedGradients,
        Method::EpsilonLrp,
        Method::Occlusion,
        Method::Lime,
        Method::KernelShap,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Saliency => "saliency",
            Method::GradInput => "grad_input",
            Method::IntegratedGradients => "integrated_gradients",
            Method::EpsilonLrp => "epsilon_lrp",
            Method::Occlusion => "occlusion",
            Method::Lime => "lime",
            Method::KernelShap => "kernel_shap",
        }
    }

    pub fn from_name(name: &str) -> Option<Method> {
        Method::ALL.iter().copied().find(|m| m.name() == name)
    }

    /// Gradient-based methods cannot run on gradient-free models.
    pub fn requires_gradients(&self) -> bool {
        matches!(
            self,
            Method::Saliency | Method::GradInput | Method::IntegratedGradients | Method::EpsilonLrp
        )
    }

    /// Sampling-based methods whose per-call cost dominates; the robustness
    /// search uses a smaller probe budget for these.
    pub fn is_sampling_based(&self) -> bool {
        matches!(self, Method::Lime | Method::KernelShap)
    }
}

/// Method-specific quality numbers carried next to the attribution values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Integrated gradients: |sum(values) - (F(x) - F(baseline))|.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completeness_gap: Option<f64>,
    /// epsilon-LRP: |sum(values) - F(x)|.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conservation_leak: Option<f64>,
    /// LIME: weighted R^2 of the linear surrogate on its own samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surrogate_r2: Option<f64>,
    /// LIME: set when the ridge system was degenerate and the solve fell back
    /// to a pseudo-inverse.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pseudo_inverse: Option<bool>,
}

/// One explanation: a relevance value per input feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub method: Method,
    pub target_class: usize,
    pub anchor: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default)]
    pub diagnostics: Diagnostics,
}

impl Attribution {
    pub(crate) fn checked(
        method: Method,
        target_class: usize,
        anchor: &[f64],
        values: Vec<f64>,
        diagnostics: Diagnostics,
    ) -> Result<Self, ExplainError> {
        debug_assert_eq!(values.len(), anchor.len());
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ExplainError::NonFinite {
                method: method.name(),
            });
        }
        Ok(Attribution {
            method,
            target_class,
            anchor: anchor.to_vec(),
            values,
            diagnostics,
        })
    }
}

/// Tuning knobs for the methods that have any. Defaults are documented in
/// the README and recorded in every report.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplainerConfig {
    /// Integrated gradients step count.
    pub ig_steps: usize,
    /// Baseline for integrated gradients and occlusion; all-zeros when unset.
    pub baseline: Option<Vec<f64>>,
    /// epsilon-LRP stabilizer, strictly positive.
    pub lrp_epsilon: f64,
    /// Occlusion patch: one feature at a time, or a square window over a
    /// grid-shaped input.
    pub patch: Patch,
    /// LIME perturbation count.
    pub lime_samples: usize,
    /// LIME proximity kernel width; 0.75 * sqrt(d) when unset.
    pub lime_kernel_width: Option<f64>,
    /// LIME ridge penalty.
    pub lime_ridge: f64,
    /// LIME Gaussian sampling standard deviation (normalized units).
    pub lime_sigma: f64,
    /// LIME image mode: square patch size plus grid shape; patches are masked
    /// to the baseline instead of Gaussian jitter.
    pub lime_image_patches: Option<(usize, (usize, usize))>,
    /// Kernel SHAP background rows; a single all-zeros row when unset.
    pub shap_background: Option<Vec<Vec<f64>>>,
    /// Kernel SHAP coalition coverage.
    pub shap_coalitions: CoalitionSpec,
    /// Seed for the sampling-based methods (LIME, sampled SHAP).
    pub seed: u64,
    /// Post-hoc absolute value, for image-style visualization.
    pub absolute: bool,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        ExplainerConfig {
            ig_steps: 100,
            baseline: None,
            lrp_epsilon: 1e-3,
            patch: Patch::SingleFeature,
            lime_samples: 1000,
            lime_kernel_width: None,
            lime_ridge: 1e-3,
            lime_sigma: 0.25,
            lime_image_patches: None,
            shap_background: None,
            shap_coalitions: CoalitionSpec::Auto,
            seed: 0,
            absolute: false,
        }
    }
}

/// Scalar score the explainers attribute: the target logit for MLPs, the
/// target output (class probability or regression value) for forests.
pub(crate) fn score(model: &Model, x: &[f64], target: usize) -> Result<f64, ExplainError> {
    match model {
        Model::Mlp(mlp) => Ok(logit_score(mlp, x, target)?),
        Model::Forest(_) => {
            let out = model.predict(x)?;
            out.get(target)
                .copied()
                .ok_or(ExplainError::Model(ModelError::TargetOutOfRange {
                    target,
                    outputs: out.len(),
                }))
        }
    }
}

/// Runs one attribution method. The output always has the input's dimension
/// and finite entries.
pub fn explain(
    model: &Model,
    x: &[f64],
    target: usize,
    method: Method,
    cfg: &ExplainerConfig,
) -> Result<Attribution, ExplainError> {
    if method.requires_gradients() && !model.supports_gradients() {
        return Err(ExplainError::UnsupportedMethod {
            method: method.name(),
            model: model.kind_name(),
        });
    }
    let mut attribution = match method {
        Method::Saliency => explain_saliency(model, x, target)?,
        Method::GradInput => explain_grad_input(model, x, target)?,
        Method::IntegratedGradients => {
            let baseline = resolve_baseline(&cfg.baseline, x.len())?;
            explain_integrated_gradients(model, x, target, &baseline, cfg.ig_steps)?
        }
        Method::EpsilonLrp => explain_epsilon_lrp(model, x, target, cfg.lrp_epsilon)?,
        Method::Occlusion => {
            let baseline = resolve_baseline(&cfg.baseline, x.len())?;
            explain_occlusion(model, x, target, &baseline, &cfg.patch)?
        }
        Method::Lime => explain_lime(model, x, target, cfg)?,
        Method::KernelShap => explain_kernel_shap(model, x, target, cfg)?,
    };
    if cfg.absolute {
        for v in attribution.values.iter_mut() {
            *v = v.abs();
        }
    }
    Ok(attribution)
}

fn resolve_baseline(baseline: &Option<Vec<f64>>, d: usize) -> Result<Vec<f64>, ExplainError> {
    match baseline {
        Some(b) if b.len() == d => Ok(b.clone()),
        Some(b) => Err(ExplainError::BaselineMismatch {
            expected: d,
            got: b.len(),
        }),
        None => Ok(vec![0.0; d]),
    }
}
