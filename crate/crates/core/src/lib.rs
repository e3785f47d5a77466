//! Robustness auditing for model-explanation methods.
//!
//! The explanation map of an attribution method takes an input `x` and returns
//! one relevance value per feature. This crate measures how stable that map is
//! around individual inputs, using local Lipschitz estimates:
//!
//! - a continuous estimate obtained by budgeted black-box maximization of the
//!   ratio `||f(x_i) - f(x)||_2 / ||x_i - x||_2` over an l-infinity box around
//!   the anchor `x_i`, and
//! - a discrete estimate that takes the exact maximum of the same ratio over
//!   the finite sample neighborhood `{ x_j : ||x_i - x_j|| <= eps }`.
//!
//! Seven attribution methods share one interface (saliency, gradient*input,
//! integrated gradients, epsilon-LRP, occlusion, LIME, Kernel SHAP), and small
//! trainable predictors (MLP, logistic regression, random forest) provide the
//! models being explained. The `audit` module orchestrates the full pipeline
//! (train, sample, explain, estimate) and emits JSON/CSV reports.
//!
//! Everything is deterministic given a seed: training, sampling-based
//! explainers, the black-box optimizer, and the audit pipeline.

pub mod audit;
pub mod data;
pub mod explain;
pub mod model;
pub mod optim;
pub mod robustness;

pub(crate) mod vecmath;

pub use data::{Dataset, NormalizationSpec};
pub use explain::{explain, Attribution, ExplainError, ExplainerConfig, Method};
pub use model::{Model, ModelError};
pub use audit::{emit_report, run_audit, AuditConfig, AuditError, AuditReport};
pub use optim::{maximize_in_box, BoxRegion, OptResult, OptimError, ProbeBudget, Strategy};
pub use robustness::{
    build_neighborhood, dataset_robustness_summary, lipschitz_continuous, lipschitz_discrete,
    noise_probe, worst_pair, EstimateMode, ExplanationMap, LipschitzEstimate, MembershipNorm,
    NeighborhoodSpec, NoiseProbeResult, RobustnessError, RobustnessSummary, WorstPair,
};

/// Protocol defaults shared by the library and the CLI.
pub mod defaults {
    /// Neighborhood radius in normalized feature units.
    pub const EPSILON: f64 = 0.1;
    /// Probe budget for gradient-based and occlusion explainers.
    pub const BUDGET: usize = 200;
    /// Probe budget for the sampling-based explainers (LIME, Kernel SHAP).
    pub const BLACKBOX_BUDGET: usize = 40;
    /// Number of test points sampled for dataset-level summaries.
    pub const SAMPLE_SIZE: usize = 100;
}
