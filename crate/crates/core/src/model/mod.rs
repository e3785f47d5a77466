//! Small trainable predictors: dense MLPs (including logistic regression as
//! the zero-hidden-layer case) and CART random forests.
//!
//! MLPs expose exact input gradients and a full layer trace, which the
//! gradient-based explainers need. Forests are prediction-only black boxes.

mod forest;
mod io;
mod mlp;

pub use forest::{fit_random_forest, predict_forest, ForestConfig, RandomForest, TreeNode};
pub use io::{load_model, save_model};
pub use mlp::{
    forward, forward_trace, gradient_wrt_input, logit_score, train_mlp, Activation, ForwardTrace,
    LayerSpec, MlpModel, TrainConfig,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Prediction task of a model or dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("input has {got} features but the model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("target index {target} out of range for {outputs} outputs")]
    TargetOutOfRange { target: usize, outputs: usize },
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("training produced a non-finite loss at epoch {epoch}; run aborted")]
    TrainDiverged { epoch: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("model io: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file format: {0}")]
    Format(String),
}

/// A trained predictor. MLPs support gradients and layer traces; forests are
/// prediction-only.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mlp(MlpModel),
    Forest(RandomForest),
}

impl Model {
    pub fn task(&self) -> Task {
        match self {
            Model::Mlp(m) => m.task,
            Model::Forest(f) => f.task,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Model::Mlp(m) => m.input_dim,
            Model::Forest(f) => f.input_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Model::Mlp(m) => m.output_dim(),
            Model::Forest(f) => match f.task {
                Task::Classification => f.n_classes,
                Task::Regression => 1,
            },
        }
    }

    /// Whether the gradient-based explainers can run on this model.
    pub fn supports_gradients(&self) -> bool {
        matches!(self, Model::Mlp(_))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Model::Mlp(_) => "mlp",
            Model::Forest(_) => "forest",
        }
    }

    pub fn as_mlp(&self) -> Option<&MlpModel> {
        match self {
            Model::Mlp(m) => Some(m),
            Model::Forest(_) => None,
        }
    }

    /// Model output for one input. Classification models return a probability
    /// vector; regression models return a single value.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        match self {
            Model::Mlp(m) => forward(m, x),
            Model::Forest(f) => predict_forest(f, x),
        }
    }

    /// Predicted class for classification (argmax, ties to the lowest index),
    /// or 0 for regression, where the single output is the only target.
    pub fn predicted_class(&self, x: &[f64]) -> Result<usize, ModelError> {
        let out = self.predict(x)?;
        Ok(crate::vecmath::argmax(&out))
    }
}
